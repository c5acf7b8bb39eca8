"""Rejection ABC estimate of f(m) with model selection and model averaging.

Parameters are drawn from uniform priors, pseudo-samples of the study's size
are summarized in the study's reporting form, and draws are ranked by the
Euclidean distance between simulated and reported summaries. The candidate
family of each draw comes from a multinomial whose probabilities are reset,
every ``update_interval`` draws, to the family shares of the provisional
accepted set. Final posterior model probabilities are the family shares of
the accepted set; family parameters are posterior means over each family's
own best draws.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import distributions as dist
from .distributions import CANDIDATE_FAMILIES, Family
from .errors import NoAcceptedDraws, WrongScenario
from .median_methods import group_center, mean_sd_density, var_diff_medians
from .summary_model import GroupSummary, Scenario, StudyRecord, classify_scenario
from .transform import DIFF_MEDIANS, EffectEstimate

SDS = "SDS"
BMA = "BMA"
_TINY = 1e-12


def table_a1_priors(family, g: GroupSummary):
    """Uniform prior bounds ((lo1, hi1), (lo2, hi2)) for a family."""
    family = Family(family)
    sc = classify_scenario(g)
    lo_q, hi_q = (g.min, g.max) if sc is Scenario.S1 else (g.q1, g.q3)
    if family is Family.NORMAL:
        return (lo_q, hi_q), (0.0, 50.0)
    if family is Family.LOGNORMAL:
        return (math.log(lo_q), math.log(hi_q)), (0.0, 10.0)
    if family is Family.GAMMA:
        return (0.0, 40.0), (0.0, 40.0)
    if family is Family.WEIBULL:
        return (0.0, 50.0), (0.0, 50.0)
    raise ValueError(f"{family.value} is not an ABC candidate")


@dataclass(frozen=True)
class AbcConfig:
    iterations_per_family: int = 20000
    acceptance_rate: float = 0.001
    update_interval: int = 1000
    seed: int = 1
    families: tuple = CANDIDATE_FAMILIES
    priors: object = table_a1_priors

    def __post_init__(self):
        if not 0 < self.acceptance_rate <= 1:
            raise ValueError("acceptance_rate must lie in (0, 1]")
        if self.iterations_per_family * self.acceptance_rate < 1:
            raise ValueError("iterations_per_family * acceptance_rate must be >= 1")
        if self.update_interval < 1:
            raise ValueError("update_interval must be positive")
        object.__setattr__(self, "families", tuple(Family(f) for f in self.families))

    @property
    def retained_per_family(self) -> int:
        return max(1, int(round(self.iterations_per_family * self.acceptance_rate)))


@dataclass(frozen=True)
class AbcResult:
    families: tuple
    posterior_means: tuple
    model_probs: tuple
    densities: tuple
    selected_family: Family
    f_m_sds: float
    f_m_bma: float
    accepted: tuple = field(default=(), repr=False, compare=False)

    def prob(self, family) -> float:
        return self.model_probs[self.families.index(Family(family))]


def summarize_rows(x: np.ndarray, scenario: Scenario) -> np.ndarray:
    """Row-wise reported summaries (same convention as the simulation)."""
    if scenario is Scenario.S1:
        probs = [0.0, 0.5, 1.0]
    elif scenario is Scenario.S2:
        probs = [0.25, 0.5, 0.75]
    else:
        probs = [0.0, 0.25, 0.5, 0.75, 1.0]
    return np.quantile(x, probs, axis=1).T


def _observed(g: GroupSummary, scenario: Scenario) -> np.ndarray:
    if scenario is Scenario.S1:
        return np.array([g.min, g.median, g.max])
    if scenario is Scenario.S2:
        return np.array([g.q1, g.median, g.q3])
    return np.array([g.min, g.q1, g.median, g.q3, g.max])


def _simulate(family, theta, n, rng):
    c = len(theta)
    t1, t2 = theta[:, :1], theta[:, 1:]
    with np.errstate(all="ignore"):
        if family is Family.NORMAL:
            return t1 + t2 * rng.standard_normal((c, n))
        if family is Family.LOGNORMAL:
            return np.exp(t1 + t2 * rng.standard_normal((c, n)))
        if family is Family.GAMMA:
            return rng.gamma(np.broadcast_to(t1, (c, n))) / t2
        return t1 * rng.exponential(size=(c, n)) ** (1.0 / t2)


def _canonical(families):
    order = list(Family)
    return sorted(set(families), key=order.index)


def _density_at_median(family, params) -> float:
    try:
        med = dist.median_of(family, params)
        val = dist.pdf(family, params, med)
    except (ValueError, OverflowError):
        return math.nan
    return float(val) if np.isfinite(val) else math.nan


def abc_fit(g: GroupSummary, cfg: AbcConfig = AbcConfig(), rng=None) -> AbcResult:
    """Estimate f(m) for one group by rejection ABC.

    ``rng`` defaults to a generator seeded with ``cfg.seed``.
    """
    sc = classify_scenario(g)
    if sc is Scenario.MEAN_SD:
        raise WrongScenario("ABC needs S1, S2 or S3 summaries")
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    obs = _observed(g, sc)
    # canonical order, so results do not depend on how families were listed
    fams = [f for f in _canonical(cfg.families) if f is Family.NORMAL or np.all(obs > 0)]
    k = len(fams)
    bounds = [np.array(cfg.priors(f, g), dtype=float) for f in fams]
    total = cfg.iterations_per_family * k
    keep_total = max(1, int(round(cfg.acceptance_rate * total)))

    probs = np.full(k, 1.0 / k)
    thetas = [[] for _ in fams]
    dists = [[] for _ in fams]
    top_d = np.empty(0)
    top_lab = np.empty(0, dtype=int)
    done = 0
    while done < total:
        block = min(cfg.update_interval, total - done)
        labels = rng.choice(k, size=block, p=probs)
        counts = np.bincount(labels, minlength=k)
        new_d, new_lab = [top_d], [top_lab]
        for i, fam in enumerate(fams):
            c = int(counts[i])
            if c == 0:
                continue
            lo, hi = bounds[i][:, 0], bounds[i][:, 1]
            theta = rng.uniform(lo, hi, size=(c, 2))
            theta = np.maximum(theta, np.where(lo >= 0, _TINY, -np.inf))
            sims = _simulate(fam, theta, g.n, rng)
            with np.errstate(all="ignore"):
                d = np.sqrt(np.sum((summarize_rows(sims, sc) - obs) ** 2, axis=1))
            d[~np.isfinite(d)] = np.inf
            thetas[i].append(theta)
            dists[i].append(d)
            new_d.append(d)
            new_lab.append(np.full(c, i))
        done += block
        # top-K of all draws so far = top-K of (previous top-K + this block)
        cand_d = np.concatenate(new_d)
        cand_lab = np.concatenate(new_lab)
        order = np.argsort(cand_d, kind="stable")[:keep_total]
        order = order[np.isfinite(cand_d[order])]
        top_d, top_lab = cand_d[order], cand_lab[order]
        if top_d.size:
            probs = np.bincount(top_lab, minlength=k) / top_d.size

    if not np.any(probs > 0):
        raise NoAcceptedDraws("no finite-distance draws")
    means, dens, accepted = [], [], []
    per_family = cfg.retained_per_family
    for i, fam in enumerate(fams):
        if not thetas[i]:
            means.append((math.nan, math.nan))
            dens.append(math.nan)
            accepted.append(np.empty((0, 2)))
            continue
        th = np.concatenate(thetas[i])
        d = np.concatenate(dists[i])
        order = np.argsort(d, kind="stable")[:per_family]
        order = order[np.isfinite(d[order])]
        acc = th[order]
        accepted.append(acc)
        if acc.size == 0:
            means.append((math.nan, math.nan))
            dens.append(math.nan)
            continue
        m = acc.mean(axis=0)
        means.append((float(m[0]), float(m[1])))
        dens.append(_density_at_median(fam, m))

    probs = np.where(np.isfinite(dens), probs, 0.0)
    if probs.sum() == 0:
        raise NoAcceptedDraws("no family produced a usable density")
    probs = probs / probs.sum()
    sel = int(np.argmax(probs))
    f_bma = float(sum(p * f for p, f in zip(probs, dens) if p > 0))
    return AbcResult(tuple(fams), tuple(means), tuple(float(p) for p in probs),
                     tuple(dens), fams[sel], float(dens[sel]), f_bma, tuple(accepted))


def _group_density(g, cfg, rng, mode):
    if classify_scenario(g) is Scenario.MEAN_SD:
        return mean_sd_density(g)
    res = abc_fit(g, cfg, rng)
    return res.f_m_sds if mode == SDS else res.f_m_bma


def abc_effect(s: StudyRecord, cfg: AbcConfig = AbcConfig(), mode: str = SDS,
               seed_key=()) -> EffectEstimate:
    """Difference of medians with an ABC-based variance.

    Each arm gets its own child stream of ``cfg.seed``; ``seed_key`` further
    separates studies that share a config.
    """
    mode = mode.upper()
    if mode not in (SDS, BMA):
        raise ValueError(f"mode must be SDS or BMA, got {mode!r}")
    ss = np.random.SeedSequence(cfg.seed, spawn_key=tuple(seed_key))
    r1, r2 = (np.random.default_rng(c) for c in ss.spawn(2))
    f1 = _group_density(s.group1, cfg, r1, mode)
    f2 = _group_density(s.group2, cfg, r2, mode)
    var = var_diff_medians(f1, f2, s.group1.n, s.group2.n)
    eff = group_center(s.group1) - group_center(s.group2)
    return EffectEstimate(s.id, float(eff), float(var), DIFF_MEDIANS, f"abc-{mode.lower()}")


def abc_effects_both(s: StudyRecord, cfg: AbcConfig = AbcConfig(), seed_key=()):
    """SDS and BMA effects from a single ABC run per arm."""
    ss = np.random.SeedSequence(cfg.seed, spawn_key=tuple(seed_key))
    r1, r2 = (np.random.default_rng(c) for c in ss.spawn(2))
    out = {}
    fits = []
    for g, r in ((s.group1, r1), (s.group2, r2)):
        if classify_scenario(g) is Scenario.MEAN_SD:
            f = mean_sd_density(g)
            fits.append((f, f))
        else:
            res = abc_fit(g, cfg, r)
            fits.append((res.f_m_sds, res.f_m_bma))
    eff = group_center(s.group1) - group_center(s.group2)
    for j, mode in enumerate((SDS, BMA)):
        var = var_diff_medians(fits[0][j], fits[1][j], s.group1.n, s.group2.n)
        out[mode] = EffectEstimate(s.id, float(eff), float(var), DIFF_MEDIANS,
                                   f"abc-{mode.lower()}")
    return out
