"""Median-based pooling: MDM and quantile estimation (QE) of f(m).

QE fits each candidate family to a group's reported quantiles by least
squares on the quantile scale, keeps the family with the smallest residual
sum of squares, and uses the fitted density at the fitted median in the
asymptotic variance of a sample median, 1 / (4 n f(m)^2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
from scipy.stats import qmc

from . import distributions as dist
from .distributions import CANDIDATE_FAMILIES, Family
from .errors import (
    InvalidParams,
    NoConvergence,
    NonPositiveSupport,
    WrongScenario,
    ZeroDensity,
)
from .optimize import FTOL, minimize_box
from .summary_model import GroupSummary, Scenario, StudyRecord, classify_scenario
from .transform import DIFF_MEDIANS, EffectEstimate

Z975 = 1.959963984540054


# ------------------------------------------------------------------------- MDM

@dataclass(frozen=True)
class MdmResult:
    pooled: float
    ci_low: float
    ci_high: float
    attained_coverage: float
    lower_index: Optional[float]
    upper_index: Optional[float]
    degenerate: bool = False


@lru_cache(maxsize=None)
def binom_half_cdf(k: int, j: int) -> float:
    """P(Bin(k, 1/2) <= j), summed exactly in integers."""
    if j < 0:
        return 0.0
    return sum(math.comb(k, i) for i in range(min(j, k) + 1)) / 2 ** k


@lru_cache(maxsize=None)
def sign_test_rank(k: int, alpha: float = 0.05) -> int:
    """Largest r with 2 P(Bin(k, 1/2) <= r - 1) <= alpha, or 0 if none exists."""
    r = 0
    while r + 1 <= (k + 1) // 2 and 2 * binom_half_cdf(k, r) <= alpha:
        r += 1
    return r


def mdm_coverage(k: int, alpha: float = 0.05) -> float:
    r = sign_test_rank(k, alpha)
    return 1 - 2 * binom_half_cdf(k, max(r, 1) - 1)


def _as_values(effects) -> np.ndarray:
    y = np.array([getattr(e, "effect", e) for e in effects], dtype=float)
    if y.size == 0:
        raise ValueError("need at least one effect")
    return y


def mdm(effects, alpha: float = 0.05) -> MdmResult:
    """Median of study effects with a sign-test order-statistic interval.

    With fewer than six studies no order-statistic pair reaches 95% coverage;
    the interval then falls back to (min, max), flagged ``degenerate``.
    """
    y = np.sort(_as_values(effects))
    k = y.size
    r = sign_test_rank(k, alpha)
    degenerate = r == 0
    r = max(r, 1)
    cover = 1 - 2 * binom_half_cdf(k, r - 1)
    return MdmResult(float(np.median(y)), float(y[r - 1]), float(y[k - r]),
                     float(cover), r, k + 1 - r, degenerate)


def mdm_normal_approx(effects, z: float = Z975) -> MdmResult:
    y = np.sort(_as_values(effects))
    k = y.size
    half = min(0.5, z / (2 * math.sqrt(k)))
    lo_p, hi_p = 0.5 - half, 0.5 + half
    lo, hi = np.quantile(y, [lo_p, hi_p])
    clamped = half == 0.5
    cover = 1 - 2 * 0.5 ** k if clamped else 2 * dist.normal_cdf(z) - 1
    return MdmResult(float(np.median(y)), float(lo), float(hi), float(cover),
                     lo_p * (k - 1) + 1, hi_p * (k - 1) + 1, clamped)


# ------------------------------------------------------------- QE: objective

def quantile_targets(g: GroupSummary):
    """Probabilities and observed values entering the least-squares fit."""
    sc = classify_scenario(g)
    n = g.n
    if sc is Scenario.S1:
        return np.array([1 / n, 0.5, 1 - 1 / n]), np.array([g.min, g.median, g.max])
    if sc is Scenario.S2:
        return np.array([0.25, 0.5, 0.75]), np.array([g.q1, g.median, g.q3])
    if sc is Scenario.S3:
        return (np.array([1 / n, 0.25, 0.5, 0.75, 1 - 1 / n]),
                np.array([g.min, g.q1, g.median, g.q3, g.max]))
    raise WrongScenario("quantile matching needs S1, S2 or S3 summaries")


def sp_objective(g: GroupSummary, family, params) -> float:
    """Sum of squared gaps between theoretical and reported quantiles."""
    p, obs = quantile_targets(g)
    theo = dist.quantile(family, params, p)
    return float(np.sum((theo - obs) ** 2))


# ------------------------------------------------------------- QE: fitting

def table1_bounds(family, g: GroupSummary):
    """Box constraints per family, as functions of the reported quantiles."""
    family = Family(family)
    sc = classify_scenario(g)
    lo_q, hi_q = (g.min, g.max) if sc is Scenario.S1 else (g.q1, g.q3)
    if family is Family.NORMAL:
        return (lo_q, hi_q), (1e-3, 50.0)
    if family is Family.LOGNORMAL:
        return (math.log(lo_q), math.log(hi_q)), (1e-3, 10.0)
    if family is Family.GAMMA:
        return (1e-3, 40.0), (1e-3, 40.0)
    if family is Family.WEIBULL:
        return (1e-3, 50.0), (1e-3, 50.0)
    raise InvalidParams(f"{family.value} is not a QE candidate")


@dataclass(frozen=True)
class QEConfig:
    candidate_families: tuple = CANDIDATE_FAMILIES
    convergence_tol: float = FTOL
    max_iterations: int = 500
    n_starts: int = 5
    seed: int = 20180101
    density_cap: float = 1e6
    tie_tol: float = 1e-10
    bounds: object = table1_bounds

    def __post_init__(self):
        fams = tuple(Family(f) for f in self.candidate_families)
        if not fams:
            raise ValueError("need at least one candidate family")
        if Family.MIXTURE in fams:
            raise ValueError("the normal mixture is not a QE candidate")
        object.__setattr__(self, "candidate_families", fams)
        if self.n_starts < 1 or self.max_iterations < 1 or self.convergence_tol <= 0:
            raise ValueError("n_starts, max_iterations and convergence_tol must be positive")


@dataclass(frozen=True)
class FittedDensity:
    family: Family
    params: tuple
    objective: float
    density_at_median: float
    median: float
    converged: bool
    alternatives: tuple = field(default=(), compare=False, repr=False)


@lru_cache(maxsize=None)
def _unit_starts(n_starts: int, seed: int, family_index: int) -> np.ndarray:
    return qmc.LatinHypercube(d=2, seed=seed + 7919 * family_index).random(n_starts)


def _needs_positive(family) -> bool:
    return family is not Family.NORMAL


def _fit_family(groups, family, cfg: QEConfig):
    """Fit one family to every eligible group; returns {group index: FittedDensity}."""
    fam_index = CANDIDATE_FAMILIES.index(family)
    starts = _unit_starts(cfg.n_starts, cfg.seed, fam_index)
    eligible, probs, obs, lower, upper = [], [], [], [], []
    for gi, g in enumerate(groups):
        p, o = quantile_targets(g)
        if _needs_positive(family) and np.any(o <= 0):
            continue
        (a1, b1), (a2, b2) = cfg.bounds(family, g)
        eligible.append(gi)
        probs.append(p)
        obs.append(o)
        lower.append((a1, a2))
        upper.append((b1, b2))
    if not eligible:
        return {}
    width = max(len(p) for p in probs)
    P = np.full((len(eligible), width), 0.5)
    O = np.zeros((len(eligible), width))
    W = np.zeros((len(eligible), width))
    for i, (p, o) in enumerate(zip(probs, obs)):
        P[i, :len(p)] = p
        O[i, :len(o)] = o
        W[i, :len(p)] = 1.0
    lower = np.repeat(np.array(lower, dtype=float), cfg.n_starts, axis=0)
    upper = np.repeat(np.array(upper, dtype=float), cfg.n_starts, axis=0)
    prob_idx = np.repeat(np.arange(len(eligible)), cfg.n_starts)
    x0 = lower + np.tile(starts, (len(eligible), 1)) * (upper - lower)

    def objective(X, idx):
        rows = prob_idx[idx]
        q = dist.batch_quantile(family, X[:, :1], X[:, 1:], P[rows])
        with np.errstate(all="ignore"):
            val = np.sum(W[rows] * (q - O[rows]) ** 2, axis=1)
        return np.where(np.isnan(val), np.inf, val)

    res = minimize_box(objective, x0, lower, upper, ftol=cfg.convergence_tol,
                       max_iter=cfg.max_iterations)
    fun = np.where(res.converged & np.isfinite(res.fun), res.fun, np.inf).reshape(-1, cfg.n_starts)
    best = np.argmin(fun, axis=1)
    out = {}
    for i, gi in enumerate(eligible):
        j = i * cfg.n_starts + best[i]
        if not np.isfinite(fun[i, best[i]]):
            continue
        params = (float(res.x[j, 0]), float(res.x[j, 1]))
        try:
            med = dist.median_of(family, params)
            dens = dist.pdf(family, params, med)
        except InvalidParams:
            continue
        if not (np.isfinite(dens) and 0 < dens <= cfg.density_cap and np.isfinite(med)):
            continue
        out[gi] = FittedDensity(family, params, float(res.fun[j]), float(dens),
                                float(med), True)
    return out


def _select(cands, cfg: QEConfig) -> Optional[FittedDensity]:
    if not cands:
        return None
    best_obj = min(c.objective for c in cands)
    for fam in cfg.candidate_families:
        for c in cands:
            if c.family is fam and c.objective <= best_obj + cfg.tie_tol:
                return FittedDensity(c.family, c.params, c.objective, c.density_at_median,
                                     c.median, c.converged, tuple(cands))
    return None


def qe_fit_many(groups: Sequence[GroupSummary], cfg: QEConfig = QEConfig()):
    """QE fits for many groups in one vectorized pass.

    Returns a list aligned with ``groups`` holding a :class:`FittedDensity`,
    or ``None`` where no family produced a usable fit.
    """
    groups = list(groups)
    for g in groups:
        quantile_targets(g)
    per_family = [_fit_family(groups, fam, cfg) for fam in cfg.candidate_families]
    return [_select([pf[gi] for pf in per_family if gi in pf], cfg)
            for gi in range(len(groups))]


def qe_fit(g: GroupSummary, cfg: QEConfig = QEConfig()) -> FittedDensity:
    fams = cfg.candidate_families
    if all(_needs_positive(f) for f in fams) and np.any(quantile_targets(g)[1] <= 0):
        raise NonPositiveSupport("all candidate families need positive data")
    fit = qe_fit_many([g], cfg)[0]
    if fit is None:
        raise NoConvergence("no candidate family converged")
    return fit


# ------------------------------------------------------------ QE: variances

def _density(f) -> float:
    val = getattr(f, "density_at_median", f)
    val = float(val)
    if not (val > 0) or not math.isfinite(val):
        raise ZeroDensity(f"density at the median must be positive and finite, got {val}")
    return val


def _check_n(*ns):
    for n in ns:
        if n < 1:
            raise ValueError(f"sample sizes must be positive, got {n}")


def var_diff_medians(fit1, fit2, n1, n2) -> float:
    """Asymptotic variance of y1 - y2 for independent sample medians."""
    f1, f2 = _density(fit1), _density(fit2)
    _check_n(n1, n2)
    return 0.25 * (1 / (n1 * f1 ** 2) + 1 / (n2 * f2 ** 2))


def var_diff_medians_shift(fit1, fit2, n1, n2) -> float:
    """Variance under a pure location shift: one sample-size weighted density."""
    f1, f2 = _density(fit1), _density(fit2)
    _check_n(n1, n2)
    f = (n1 * f1 + n2 * f2) / (n1 + n2)
    return (1 / (4 * f ** 2)) * (1 / n1 + 1 / n2)


def mean_sd_density(g: GroupSummary) -> float:
    """Normal density at the mean, from the ML estimate of sigma."""
    sigma = math.sqrt((g.n - 1) / g.n) * g.sd
    if sigma <= 0:
        raise ZeroDensity("a zero SD gives an unbounded density")
    return 1 / (sigma * math.sqrt(2 * math.pi))


def group_center(g: GroupSummary) -> float:
    return g.mean if classify_scenario(g) is Scenario.MEAN_SD else g.median


def qe_effects(studies: Sequence[StudyRecord], cfg: QEConfig = QEConfig(), shift=False):
    """QE difference of medians for many studies with shared batched fitting.

    Entries are :class:`EffectEstimate` or the exception that prevented one.
    """
    studies = list(studies)
    to_fit = []
    for s in studies:
        for g in (s.group1, s.group2):
            if classify_scenario(g) is not Scenario.MEAN_SD:
                to_fit.append(g)
    fits = iter(qe_fit_many(to_fit, cfg))
    var_fn = var_diff_medians_shift if shift else var_diff_medians
    out = []
    for s in studies:
        dens = []
        err = None
        for g in (s.group1, s.group2):
            if classify_scenario(g) is Scenario.MEAN_SD:
                try:
                    dens.append(mean_sd_density(g))
                except ZeroDensity as exc:
                    err = exc
            else:
                fit = next(fits)
                if fit is None:
                    err = err or NoConvergence(f"study {s.id!r}: no family converged")
                dens.append(fit)
        if err is not None:
            out.append(err)
            continue
        eff = group_center(s.group1) - group_center(s.group2)
        var = var_fn(dens[0], dens[1], s.group1.n, s.group2.n)
        out.append(EffectEstimate(s.id, float(eff), float(var), DIFF_MEDIANS, "qe"))
    return out


def qe_effect(s: StudyRecord, cfg: QEConfig = QEConfig(), shift=False) -> EffectEstimate:
    res = qe_effects([s], cfg, shift=shift)[0]
    if isinstance(res, Exception):
        raise res
    return res


def qe_bc_effect(s: StudyRecord, true_densities, shift=False) -> EffectEstimate:
    """Difference of medians with the variance built from known densities."""
    f1, f2 = true_densities
    var_fn = var_diff_medians_shift if shift else var_diff_medians
    var = var_fn(f1, f2, s.group1.n, s.group2.n)
    eff = group_center(s.group1) - group_center(s.group2)
    return EffectEstimate(s.id, float(eff), float(var), DIFF_MEDIANS, "qe-bc")
