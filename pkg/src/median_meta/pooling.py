"""Inverse-variance pooling: fixed effect and DerSimonian-Laird random effects."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .errors import EmptyInput, NonPositiveVariance

Z975 = 1.959963984540054
FIXED = "FixedEffect"
RANDOM = "RandomEffects"


@dataclass(frozen=True)
class PoolResult:
    pooled: float
    variance: float
    ci_low: float
    ci_high: float
    tau2: float
    q_stat: float
    i2: float
    het_p: float
    weights: tuple = field(default=())
    model: str = FIXED

    @property
    def se(self) -> float:
        return self.variance ** 0.5


def _arrays(effects):
    effects = list(effects)
    if not effects:
        raise EmptyInput("no effects to pool")
    y = np.array([e.effect for e in effects], dtype=float)
    v = np.array([e.variance for e in effects], dtype=float)
    if np.any(~np.isfinite(v)) or np.any(v <= 0):
        raise NonPositiveVariance("every study variance must be positive and finite")
    if np.any(~np.isfinite(y)):
        raise ValueError("effects must be finite")
    return y, v


def _heterogeneity(y, w):
    k = len(y)
    theta = np.sum(w * y) / np.sum(w)
    q = float(np.sum(w * (y - theta) ** 2))
    df = k - 1
    i2 = max(0.0, (q - df) / q) * 100 if q > 0 else 0.0
    het_p = float(special.gammaincc(df / 2, q / 2)) if df > 0 else 1.0
    return q, i2, het_p


def chi2_sf(x, df):
    """Upper tail of the chi-square distribution with ``df`` degrees of freedom."""
    return special.gammaincc(df / 2, np.asarray(x) / 2)


def _result(y, w, q, i2, het_p, tau2, model):
    sw = np.sum(w)
    theta = float(np.sum(w * y) / sw)
    var = float(1 / sw)
    half = Z975 * var ** 0.5
    return PoolResult(theta, var, theta - half, theta + half, float(tau2), q, i2, het_p,
                      tuple(float(x) for x in w), model)


def pool_fixed(effects) -> PoolResult:
    y, v = _arrays(effects)
    w = 1 / v
    q, i2, het_p = _heterogeneity(y, w)
    return _result(y, w, q, i2, het_p, 0.0, FIXED)


def dersimonian_laird_tau2(effects) -> float:
    y, v = _arrays(effects)
    return _dl_tau2(y, 1 / v)


def _dl_tau2(y, w):
    k = len(y)
    if k == 1:
        return 0.0
    q, _, _ = _heterogeneity(y, w)
    denom = np.sum(w) - np.sum(w ** 2) / np.sum(w)
    if denom <= 0:
        return 0.0
    return max(0.0, float((q - (k - 1)) / denom))


def pool_random(effects, tau2=None) -> PoolResult:
    """DerSimonian-Laird random-effects pooling.

    ``tau2`` overrides the moment estimate (useful for sensitivity checks).
    Q, I^2 and the heterogeneity p-value always use the fixed-effect weights.
    """
    y, v = _arrays(effects)
    w = 1 / v
    q, i2, het_p = _heterogeneity(y, w)
    if tau2 is None:
        tau2 = _dl_tau2(y, w)
    elif tau2 < 0:
        raise ValueError("tau2 must be nonnegative")
    return _result(y, 1 / (v + tau2), q, i2, het_p, tau2, RANDOM)


def pool(effects, model: str = RANDOM) -> PoolResult:
    if model in (RANDOM, "random"):
        return pool_random(effects)
    if model in (FIXED, "fixed"):
        return pool_fixed(effects)
    raise ValueError(f"unknown pooling model {model!r}")
