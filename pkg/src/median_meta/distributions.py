"""Candidate outcome distributions and the simulation mixture.

Parameterizations
-----------------
Normal, LogNormal : (mu, sigma), LogNormal being exp of Normal(mu, sigma)
Gamma             : (alpha, beta), shape and *rate*, so mean = alpha / beta
Weibull           : (lam, k), scale and shape, cdf 1 - exp(-(x / lam) ** k)
NormalMixture     : :class:`MixtureParams` (weights, means, sds)

All evaluation functions accept scalar or array ``x`` / ``p`` and return a
float for scalar input, an ndarray otherwise.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DomainError, InvalidParams

__all__ = [
    "Family", "MixtureParams", "FIGURE1_MIXTURE", "CANDIDATE_FAMILIES",
    "pdf", "cdf", "quantile", "median_of", "sample", "mean_of", "variance_of",
    "normal_quantile", "normal_cdf", "validate_params",
]


class Family(str, enum.Enum):
    NORMAL = "Normal"
    LOGNORMAL = "LogNormal"
    GAMMA = "Gamma"
    WEIBULL = "Weibull"
    MIXTURE = "NormalMixture"


# Order doubles as the tie-break preference in model selection.
CANDIDATE_FAMILIES = (Family.NORMAL, Family.LOGNORMAL, Family.GAMMA, Family.WEIBULL)


@dataclass(frozen=True)
class MixtureParams:
    weights: tuple
    means: tuple
    sds: tuple

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if not (len(w) == len(self.means) == len(self.sds)) or len(w) == 0:
            raise InvalidParams("mixture weights, means and sds must have equal nonzero length")
        if np.any(w <= 0) or not np.all(np.isfinite(w)):
            raise InvalidParams("mixture weights must be positive")
        if any(s <= 0 or not math.isfinite(s) for s in self.sds):
            raise InvalidParams("mixture sds must be positive")
        if not all(math.isfinite(m) for m in self.means):
            raise InvalidParams("mixture means must be finite")
        object.__setattr__(self, "weights", tuple(float(v) for v in w / w.sum()))
        object.__setattr__(self, "means", tuple(float(v) for v in self.means))
        object.__setattr__(self, "sds", tuple(float(v) for v in self.sds))


# Skewed group-1 outcome used in the simulation study; weights normalize to 1.
FIGURE1_MIXTURE = MixtureParams(
    weights=(2 / 5, 1 / 6, 1 / 6, 1 / 6),
    means=(36.5, 40.5, 44.5, 49.5),
    sds=(2.8, 3.6, 6.0, 11.0),
)


def normal_cdf(x):
    return special.ndtr(x)


def normal_quantile(p):
    return special.ndtri(p)


def validate_params(family, params):
    family = Family(family)
    if family is Family.MIXTURE:
        if not isinstance(params, MixtureParams):
            raise InvalidParams("NormalMixture needs MixtureParams")
        return params
    try:
        t1, t2 = (float(v) for v in params)
    except (TypeError, ValueError):
        raise InvalidParams(f"{family.value} needs two numeric parameters, got {params!r}") from None
    if not (math.isfinite(t1) and math.isfinite(t2)):
        raise InvalidParams(f"non-finite parameters {params!r}")
    if t2 <= 0:
        raise InvalidParams(f"{family.value}: second parameter must be positive, got {t2}")
    if family in (Family.GAMMA, Family.WEIBULL) and t1 <= 0:
        raise InvalidParams(f"{family.value}: first parameter must be positive, got {t1}")
    return t1, t2


def _out(value, like):
    return float(value) if np.ndim(like) == 0 else value


def pdf(family, params, x):
    family = Family(family)
    params = validate_params(family, params)
    xa = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        if family is Family.NORMAL:
            mu, s = params
            out = np.exp(-0.5 * ((xa - mu) / s) ** 2) / (s * math.sqrt(2 * math.pi))
        elif family is Family.LOGNORMAL:
            mu, s = params
            pos = xa > 0
            safe = np.where(pos, xa, 1.0)
            out = np.where(
                pos,
                np.exp(-0.5 * ((np.log(safe) - mu) / s) ** 2) / (safe * s * math.sqrt(2 * math.pi)),
                0.0,
            )
        elif family is Family.GAMMA:
            a, b = params
            pos = xa > 0
            safe = np.where(pos, xa, 1.0)
            logf = a * math.log(b) + (a - 1) * np.log(safe) - b * safe - special.gammaln(a)
            out = np.where(pos, np.exp(logf), 0.0)
            if a == 1:
                out = np.where(xa == 0, b, out)
            elif a < 1:
                out = np.where(xa == 0, np.inf, out)
        elif family is Family.WEIBULL:
            lam, k = params
            pos = xa > 0
            z = np.where(pos, xa, 1.0) / lam
            out = np.where(pos, (k / lam) * z ** (k - 1) * np.exp(-(z ** k)), 0.0)
            if k == 1:
                out = np.where(xa == 0, 1 / lam, out)
            elif k < 1:
                out = np.where(xa == 0, np.inf, out)
        else:
            w, m, s = (np.asarray(v)[:, None] for v in (params.weights, params.means, params.sds))
            dens = np.exp(-0.5 * ((xa.reshape(1, -1) - m) / s) ** 2) / (s * math.sqrt(2 * math.pi))
            out = (w * dens).sum(axis=0).reshape(xa.shape)
    return _out(out, x)


def cdf(family, params, x):
    family = Family(family)
    params = validate_params(family, params)
    xa = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        if family is Family.NORMAL:
            mu, s = params
            out = special.ndtr((xa - mu) / s)
        elif family is Family.LOGNORMAL:
            mu, s = params
            pos = xa > 0
            out = np.where(pos, special.ndtr((np.log(np.where(pos, xa, 1.0)) - mu) / s), 0.0)
        elif family is Family.GAMMA:
            a, b = params
            out = special.gammainc(a, b * np.maximum(xa, 0.0))
        elif family is Family.WEIBULL:
            lam, k = params
            out = -np.expm1(-(np.maximum(xa, 0.0) / lam) ** k)
        else:
            w, m, s = (np.asarray(v)[:, None] for v in (params.weights, params.means, params.sds))
            out = (w * special.ndtr((xa.reshape(1, -1) - m) / s)).sum(axis=0).reshape(xa.shape)
            out = np.clip(out, 0.0, 1.0)
    return _out(out, x)


def _bisect_quantile(family, params, p, lo, hi, width=1e-12):
    # widen until the bracket holds p
    while cdf(family, params, lo) > p:
        lo -= 2 * (hi - lo)
    while cdf(family, params, hi) < p:
        hi += 2 * (hi - lo)
    while hi - lo > width * max(1.0, abs(lo), abs(hi)):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if cdf(family, params, mid) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def quantile(family, params, p):
    """Inverse cdf at probability ``p`` in the open interval (0, 1)."""
    family = Family(family)
    params = validate_params(family, params)
    pa = np.asarray(p, dtype=float)
    if np.any(~((pa > 0) & (pa < 1))):
        raise DomainError(f"probabilities must lie in (0, 1), got {p!r}")
    with np.errstate(over="ignore"):
        if family is Family.NORMAL:
            mu, s = params
            out = mu + s * special.ndtri(pa)
        elif family is Family.LOGNORMAL:
            mu, s = params
            out = np.exp(mu + s * special.ndtri(pa))
        elif family is Family.GAMMA:
            a, b = params
            out = special.gammaincinv(a, pa) / b
        elif family is Family.WEIBULL:
            lam, k = params
            out = lam * (-np.log1p(-pa)) ** (1.0 / k)
        else:
            lo = min(m - 10 * s for m, s in zip(params.means, params.sds))
            hi = max(m + 10 * s for m, s in zip(params.means, params.sds))
            out = np.vectorize(lambda q: _bisect_quantile(family, params, q, lo, hi))(pa)
    return _out(out, p)


def median_of(family, params) -> float:
    return quantile(family, params, 0.5)


def mean_of(family, params) -> float:
    family = Family(family)
    params = validate_params(family, params)
    if family is Family.NORMAL:
        return params[0]
    if family is Family.LOGNORMAL:
        return math.exp(params[0] + params[1] ** 2 / 2)
    if family is Family.GAMMA:
        return params[0] / params[1]
    if family is Family.WEIBULL:
        return params[0] * math.gamma(1 + 1 / params[1])
    return float(np.dot(params.weights, params.means))


def variance_of(family, params) -> float:
    family = Family(family)
    params = validate_params(family, params)
    if family is Family.NORMAL:
        return params[1] ** 2
    if family is Family.LOGNORMAL:
        mu, s = params
        return math.expm1(s ** 2) * math.exp(2 * mu + s ** 2)
    if family is Family.GAMMA:
        return params[0] / params[1] ** 2
    if family is Family.WEIBULL:
        lam, k = params
        return lam ** 2 * (math.gamma(1 + 2 / k) - math.gamma(1 + 1 / k) ** 2)
    w, m, s = (np.asarray(v) for v in (params.weights, params.means, params.sds))
    mean = float(np.dot(w, m))
    return float(np.dot(w, s ** 2 + m ** 2) - mean ** 2)


def sample(family, params, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` values using (and advancing) the caller's generator."""
    family = Family(family)
    params = validate_params(family, params)
    if family is Family.NORMAL:
        return rng.normal(params[0], params[1], n)
    if family is Family.LOGNORMAL:
        return np.exp(rng.normal(params[0], params[1], n))
    if family is Family.GAMMA:
        return rng.gamma(params[0], 1.0 / params[1], n)
    if family is Family.WEIBULL:
        return params[0] * rng.weibull(params[1], n)
    comp = rng.choice(len(params.weights), size=n, p=params.weights)
    means = np.asarray(params.means)[comp]
    sds = np.asarray(params.sds)[comp]
    return rng.normal(means, sds)


# ---------------------------------------------------------------- batch helpers

def batch_quantile(family, t1, t2, p):
    """Quantiles for many parameter pairs at once, no validation.

    ``t1`` and ``t2`` broadcast against ``p``; invalid combinations yield
    nan or inf rather than raising. Used inside optimizer loops.
    """
    family = Family(family)
    with np.errstate(all="ignore"):
        if family is Family.NORMAL:
            return t1 + t2 * special.ndtri(p)
        if family is Family.LOGNORMAL:
            return np.exp(t1 + t2 * special.ndtri(p))
        if family is Family.GAMMA:
            return special.gammaincinv(t1, p) / t2
        if family is Family.WEIBULL:
            return t1 * (-np.log1p(-p)) ** (1.0 / t2)
    raise InvalidParams(f"no batch quantile for {family.value}")
