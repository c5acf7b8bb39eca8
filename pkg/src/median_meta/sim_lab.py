"""Monte-Carlo comparison of transformation- and median-based pooling.

One replication draws ``n_studies`` two-arm studies, reduces each arm to the
configured reported summaries, applies every requested method and pools the
per-study effects. Metrics are collected over replications against each
method's own target: the population difference of means for ``wan``/``luo``,
the population difference of medians for the median-based methods.

Design conventions:

* per-arm sample size ``n ~ LogNormal(log(median_n), 1)``, redrawn until it
  lies in [10, 500] (median 50) or [50, 2500] (median 250);
* moderate effect ``c = (z_0.975 + z_0.6) * 7 * sqrt(2 / median_n)``, the
  shift giving power 0.6 for a two-sample z-test at ``median_n`` per arm;
* heterogeneity ``d ~ N(0, tau2)`` with ``tau2 = s2 * I2 / (1 - I2)`` and
  ``s2 = 2 * 49 / median_n``; ``d`` is added to every group-1 value;
* reported quantiles use linear interpolation (numpy's default).
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import distributions as dist
from .abc_density import AbcConfig, abc_effects_both
from .distributions import FIGURE1_MIXTURE, Family
from .median_methods import (
    QEConfig,
    mdm,
    mdm_normal_approx,
    qe_bc_effect,
    qe_effects,
)
from .pooling import pool_fixed, pool_random
from .shapiro import shapiro_wilk
from .summary_model import GroupSummary, StudyRecord
from .transform import LUO, WAN, diff_of_means

ALL_METHODS = ("wan", "luo", "mdm", "mdm-n", "qe", "qe-bc", "abc-sds", "abc-bma")
MEAN_METHODS = ("wan", "luo")
POOLED_METHODS = ("wan", "luo", "qe", "qe-bc", "abc-sds", "abc-bma")

GROUP2_MEAN = 35.0
GROUP2_SD = 7.0
Z975 = 1.959963984540054


def _squash(text) -> str:
    return str(text).lower().replace("-", "").replace("_", "")


class _Choice(str, enum.Enum):
    """Accepts any spelling that differs only in case, '-' or '_'."""

    @classmethod
    def _missing_(cls, value):
        for member in cls:
            if _squash(value) in (_squash(member.value), _squash(member.name)):
                return member
        return None


class Outcome(_Choice):
    NORMAL_NULL = "normal-null"
    NORMAL_MODERATE = "normal-moderate"
    MIXTURE = "mixture"


class Heterogeneity(_Choice):
    NONE = "none"
    I25 = "i25"
    I75 = "i75"


class Reporting(_Choice):
    S1 = "s1"
    S2 = "s2"
    S3 = "s3"
    MIX_SHAPIRO_WILK = "mix-shapiro-wilk"
    MIX_RANDOM25 = "mix-random25"
    ALL_MEANS = "all-means"


@dataclass(frozen=True)
class SimConfig:
    n_studies: int = 10
    median_n: int = 50
    outcome: Outcome = Outcome.NORMAL_MODERATE
    heterogeneity: Heterogeneity = Heterogeneity.I25
    reporting: Reporting = Reporting.S2
    replications: int = 100
    seed: int = 1
    model: str = "random"

    def __post_init__(self):
        object.__setattr__(self, "outcome", Outcome(self.outcome))
        object.__setattr__(self, "heterogeneity", Heterogeneity(self.heterogeneity))
        object.__setattr__(self, "reporting", Reporting(self.reporting))
        if self.n_studies not in (10, 30):
            raise ValueError(f"n_studies must be 10 or 30, got {self.n_studies}")
        if self.median_n not in (50, 250):
            raise ValueError(f"median_n must be 50 or 250, got {self.median_n}")
        if int(self.replications) != self.replications or self.replications < 1:
            raise ValueError(f"replications must be a positive integer, got {self.replications}")
        if self.model not in ("random", "fixed"):
            raise ValueError(f"model must be 'random' or 'fixed', got {self.model!r}")

    # -- derived design quantities
    @property
    def n_range(self):
        return (10, 500) if self.median_n == 50 else (50, 2500)

    @property
    def effect_c(self) -> float:
        if self.outcome is not Outcome.NORMAL_MODERATE:
            return 0.0
        return moderate_effect(self.median_n)

    @property
    def tau2(self) -> float:
        return injected_tau2(self.heterogeneity, self.median_n)

    def to_dict(self):
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, enum.Enum):
                d[k] = v.value
        return d


def moderate_effect(median_n: int, power: float = 0.6) -> float:
    return (Z975 + float(dist.normal_quantile(power))) * GROUP2_SD * math.sqrt(2 / median_n)


def injected_tau2(het, median_n: int) -> float:
    het = Heterogeneity(het)
    if het is Heterogeneity.NONE:
        return 0.0
    i2 = 0.25 if het is Heterogeneity.I25 else 0.75
    within = 2 * GROUP2_SD ** 2 / median_n
    return within * i2 / (1 - i2)


def true_targets(cfg: SimConfig):
    """(difference of means, difference of medians) in the population."""
    if cfg.outcome is Outcome.MIXTURE:
        return (dist.mean_of(Family.MIXTURE, FIGURE1_MIXTURE) - GROUP2_MEAN,
                dist.median_of(Family.MIXTURE, FIGURE1_MIXTURE) - GROUP2_MEAN)
    c = cfg.effect_c
    return c, c


def true_densities(cfg: SimConfig):
    """Density of each arm at its own population median."""
    f2 = dist.pdf(Family.NORMAL, (GROUP2_MEAN, GROUP2_SD), GROUP2_MEAN)
    if cfg.outcome is Outcome.MIXTURE:
        m = dist.median_of(Family.MIXTURE, FIGURE1_MIXTURE)
        return dist.pdf(Family.MIXTURE, FIGURE1_MIXTURE, m), f2
    return f2, f2


# ---------------------------------------------------------------- generation

@dataclass
class StudySamples:
    n: int
    x1: np.ndarray
    x2: np.ndarray
    d: float


def replication_rng(cfg: SimConfig, replication_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(replication_index,)))


def draw_sample_size(median_n, bounds, rng) -> int:
    lo, hi = bounds
    while True:
        n = int(round(float(rng.lognormal(math.log(median_n), 1.0))))
        if lo <= n <= hi:
            return n


def generate_meta(cfg: SimConfig, replication_index: int, rng=None):
    """Raw two-arm samples for every study of one replication."""
    if rng is None:
        rng = replication_rng(cfg, replication_index)
    sd_tau = math.sqrt(cfg.tau2)
    studies = []
    for _ in range(cfg.n_studies):
        n = draw_sample_size(cfg.median_n, cfg.n_range, rng)
        d = float(rng.normal(0.0, sd_tau)) if sd_tau > 0 else 0.0
        if cfg.outcome is Outcome.MIXTURE:
            x1 = dist.sample(Family.MIXTURE, FIGURE1_MIXTURE, n, rng) + d
        else:
            x1 = rng.normal(GROUP2_MEAN, GROUP2_SD, n) + cfg.effect_c + d
        x2 = rng.normal(GROUP2_MEAN, GROUP2_SD, n)
        studies.append(StudySamples(n, x1, x2, d))
    return studies


def summarize_group(x, form: str) -> GroupSummary:
    """Reduce a raw sample to ``form`` in {'s1', 's2', 's3', 'mean_sd'}."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if form == "mean_sd":
        return GroupSummary(n, mean=float(x.mean()), sd=float(x.std(ddof=1)))
    mn, q1, med, q3, mx = (float(v) for v in np.quantile(x, [0, 0.25, 0.5, 0.75, 1]))
    if form == "s1":
        return GroupSummary(n, min=mn, median=med, max=mx)
    if form == "s2":
        return GroupSummary(n, q1=q1, median=med, q3=q3)
    if form == "s3":
        return GroupSummary(n, min=mn, q1=q1, median=med, q3=q3, max=mx)
    raise ValueError(f"unknown summary form {form!r}")


def summarize_samples(x1, x2, reporting, rng=None, study_id="study") -> StudyRecord:
    """Turn one study's raw samples into the summaries it reports."""
    reporting = Reporting(reporting)
    if reporting in (Reporting.S1, Reporting.S2, Reporting.S3):
        form = reporting.value
    elif reporting is Reporting.ALL_MEANS:
        form = "mean_sd"
    elif reporting is Reporting.MIX_SHAPIRO_WILK:
        skewed = any(shapiro_wilk(x)[1] < 0.05 for x in (x1, x2))
        form = "s2" if skewed else "mean_sd"
    else:
        if rng is None:
            raise ValueError("random reporting needs a generator")
        form = "s2" if rng.random() < 0.25 else "mean_sd"
    return StudyRecord(study_id, summarize_group(x1, form), summarize_group(x2, form))


def simulate_records(cfg: SimConfig, replication_index: int):
    rng = replication_rng(cfg, replication_index)
    raw = generate_meta(cfg, replication_index, rng)
    return [summarize_samples(s.x1, s.x2, cfg.reporting, rng, f"study{i + 1}")
            for i, s in enumerate(raw)]


# ------------------------------------------------------------------ methods

@dataclass(frozen=True)
class PooledOutcome:
    estimate: float
    ci_low: float
    ci_high: float
    tau2: float = math.nan


def _pool(effects, model):
    res = pool_random(effects) if model == "random" else pool_fixed(effects)
    return PooledOutcome(res.pooled, res.ci_low, res.ci_high,
                         res.tau2 if model == "random" else math.nan)


def _median_effects(records):
    from .median_methods import group_center
    return [group_center(s.group1) - group_center(s.group2) for s in records]


def apply_methods(batch, cfg: SimConfig, methods, qe_cfg: QEConfig, abc_cfg: AbcConfig,
                  replication_ids=None):
    """Run ``methods`` on a list of replications (each a list of StudyRecords).

    ``replication_ids`` (default ``0..len(batch)-1``) keys the ABC streams.

    Returns one dict per replication, mapping method to a PooledOutcome or to
    the error message of the failure that prevented it.
    """
    out = [dict() for _ in batch]
    for r, records in enumerate(batch):
        for m in methods:
            try:
                if m in MEAN_METHODS:
                    eff = [diff_of_means(s, WAN if m == "wan" else LUO) for s in records]
                    out[r][m] = _pool(eff, cfg.model)
                elif m in ("mdm", "mdm-n"):
                    fn = mdm if m == "mdm" else mdm_normal_approx
                    res = fn(_median_effects(records))
                    out[r][m] = PooledOutcome(res.pooled, res.ci_low, res.ci_high)
                elif m == "qe-bc":
                    dens = true_densities(cfg)
                    out[r][m] = _pool([qe_bc_effect(s, dens) for s in records], cfg.model)
            except Exception as exc:  # a method failure never aborts the run
                out[r][m] = f"{type(exc).__name__}: {exc}"

    if "qe" in methods:
        flat = [s for records in batch for s in records]
        effects = qe_effects(flat, qe_cfg)
        pos = 0
        for r, records in enumerate(batch):
            eff = effects[pos:pos + len(records)]
            pos += len(records)
            errs = [e for e in eff if isinstance(e, Exception)]
            try:
                if errs:
                    raise errs[0]
                out[r]["qe"] = _pool(eff, cfg.model)
            except Exception as exc:
                out[r]["qe"] = f"{type(exc).__name__}: {exc}"

    abc_modes = [m for m in ("abc-sds", "abc-bma") if m in methods]
    if abc_modes:
        ids = list(range(len(batch))) if replication_ids is None else list(replication_ids)
        for r, records in enumerate(batch):
            try:
                both = [abc_effects_both(s, abc_cfg, seed_key=(cfg.seed, ids[r], i))
                        for i, s in enumerate(records)]
                for m in abc_modes:
                    key = "SDS" if m == "abc-sds" else "BMA"
                    out[r][m] = _pool([b[key] for b in both], cfg.model)
            except Exception as exc:
                for m in abc_modes:
                    out[r][m] = f"{type(exc).__name__}: {exc}"
    return out


# ------------------------------------------------------------------ metrics

@dataclass
class MethodMetrics:
    method: str
    target: float
    n_ok: int
    n_failed: int
    re_quartiles: tuple = (math.nan, math.nan, math.nan)
    bias: float = math.nan
    bias_quartiles: tuple = (math.nan, math.nan, math.nan)
    variance: float = math.nan
    coverage: float = math.nan
    ci_mean_length: float = math.nan
    tau2_bias_quartiles: tuple = (math.nan, math.nan, math.nan)
    errors: list = field(default_factory=list)


@dataclass
class SimMetrics:
    config: dict
    methods: dict
    tau2: float
    target_mean_diff: float
    target_median_diff: float

    def to_json(self) -> str:
        return dumps_stable(self.to_dict())

    def to_dict(self):
        return {
            "config": self.config,
            "tau2": self.tau2,
            "target_mean_diff": self.target_mean_diff,
            "target_median_diff": self.target_median_diff,
            "methods": {k: _metrics_dict(v) for k, v in self.methods.items()},
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        cols = ["outcome", "reporting", "heterogeneity", "n_studies", "median_n", "model",
                "method", "target", "n_ok", "n_failed", "re_median", "re_q1", "re_q3",
                "bias", "variance", "coverage", "ci_mean_length",
                "tau2_bias_median", "tau2_bias_q1", "tau2_bias_q3"]
        w.writerow(cols)
        c = self.config
        for name, m in self.methods.items():
            row = [c["outcome"], c["reporting"], c["heterogeneity"], c["n_studies"],
                   c["median_n"], c["model"], name, m.target, m.n_ok, m.n_failed,
                   *m.re_quartiles, m.bias, m.variance, m.coverage, m.ci_mean_length,
                   *m.tau2_bias_quartiles]
            w.writerow([_fmt_num(v) for v in row])
        return buf.getvalue()


def _fmt_num(v):
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return v


def _clean(v):
    if isinstance(v, float):
        return None if math.isnan(v) else float(format(v, ".17g"))
    if isinstance(v, (tuple, list)):
        return [_clean(x) for x in v]
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    if isinstance(v, (np.floating, np.integer)):
        return _clean(v.item())
    return v


def dumps_stable(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True, allow_nan=False)


def _metrics_dict(m: MethodMetrics):
    d = asdict(m)
    d["re_quartiles"] = dict(zip(("median", "q1", "q3"), m.re_quartiles))
    d["bias_quartiles"] = dict(zip(("median", "q1", "q3"), m.bias_quartiles))
    d["tau2_bias_quartiles"] = dict(zip(("median", "q1", "q3"), m.tau2_bias_quartiles))
    d["errors"] = m.errors[:5]
    return d


def _quartiles(a):
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        return (math.nan,) * 3
    med, q1, q3 = np.percentile(a, [50, 25, 75])
    return float(med), float(q1), float(q3)


def summarize_outcomes(cfg: SimConfig, methods, outcomes) -> SimMetrics:
    mean_t, med_t = true_targets(cfg)
    tau2 = cfg.tau2
    result = {}
    for m in methods:
        theta = mean_t if m in MEAN_METHODS else med_t
        ok = [o[m] for o in outcomes if isinstance(o.get(m), PooledOutcome)]
        errors = [o[m] for o in outcomes if isinstance(o.get(m), str)]
        mm = MethodMetrics(m, float(theta), len(ok), len(errors), errors=errors)
        if ok:
            est = np.array([o.estimate for o in ok])
            lo = np.array([o.ci_low for o in ok])
            hi = np.array([o.ci_high for o in ok])
            err = est - theta
            mm.bias = float(err.mean())
            mm.bias_quartiles = _quartiles(err)
            if theta != 0:
                mm.re_quartiles = _quartiles(100 * err / theta)
            mm.variance = float(est.var(ddof=1)) if len(est) > 1 else 0.0
            mm.coverage = float(np.mean((lo <= theta) & (theta <= hi)))
            mm.ci_mean_length = float(np.mean(hi - lo))
            t2 = np.array([o.tau2 for o in ok])
            if np.all(np.isfinite(t2)) and m in POOLED_METHODS:
                mm.tau2_bias_quartiles = _quartiles(t2 - tau2)
        result[m] = mm
    return SimMetrics(cfg.to_dict(), result, float(tau2), float(mean_t), float(med_t))


# ------------------------------------------------------------------ driver

def _chunk_worker(args):
    cfg, methods, qe_cfg, abc_cfg, reps = args
    batch = [simulate_records(cfg, r) for r in reps]
    return apply_methods(batch, cfg, methods, qe_cfg, abc_cfg, reps)


def thread_cap() -> int:
    try:
        return max(1, int(os.environ.get("MEDIAN_META_THREADS", "1")))
    except ValueError:
        return 1


def run_simulation(cfg: SimConfig, methods=("wan", "luo", "mdm", "qe", "qe-bc"),
                   qe_config: QEConfig = None, abc_config: AbcConfig = None,
                   chunk_size: int = 50, threads: int = None, progress=None) -> SimMetrics:
    """Run all replications of ``cfg`` and collect per-method metrics.

    Replication ``r`` always uses the random stream derived from
    ``(cfg.seed, r)``, so the metrics do not depend on ``chunk_size`` or
    ``threads``. ``progress`` is called with (done, total) after each chunk.
    """
    methods = tuple(dict.fromkeys(methods))
    unknown = [m for m in methods if m not in ALL_METHODS]
    if unknown:
        raise ValueError(f"unknown methods {unknown}; choose from {ALL_METHODS}")
    qe_config = qe_config or QEConfig()
    abc_config = abc_config or AbcConfig()
    threads = threads or thread_cap()
    reps = list(range(int(cfg.replications)))
    # at least ten chunks so progress can be reported per 10%
    chunk_size = max(1, min(chunk_size, math.ceil(len(reps) / 10)))
    chunks = [reps[i:i + chunk_size] for i in range(0, len(reps), chunk_size)]
    jobs = [(cfg, methods, qe_config, abc_config, c) for c in chunks]
    outcomes = []
    if threads > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            for res, c in zip(ex.map(_chunk_worker, jobs), chunks):
                outcomes.extend(res)
                if progress:
                    progress(len(outcomes), len(reps))
    else:
        for job in jobs:
            outcomes.extend(_chunk_worker(job))
            if progress:
                progress(len(outcomes), len(reps))
    return summarize_outcomes(cfg, methods, outcomes)


class DecileProgress:
    """Progress callback printing one line each time another 10% completes."""

    def __init__(self, stream=None, label="simulate"):
        self.stream = stream or sys.stderr
        self.label = label
        self._last = 0

    def __call__(self, done, total):
        decile = (10 * done) // total
        if decile > self._last:
            self._last = decile
            print(f"{self.label}: {done}/{total} replications ({10 * decile}%)",
                  file=self.stream, flush=True)


# ------------------------------------------------------------- config files

def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines; '#' starts a comment."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected key=value")
        key, value = (p.strip() for p in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def config_from_mapping(values: dict) -> SimConfig:
    names = {f.name: f for f in fields(SimConfig)}
    kw = {}
    for key, value in values.items():
        if key not in names:
            raise ValueError(f"unknown config key {key!r}")
        if key in ("n_studies", "median_n", "replications", "seed"):
            try:
                kw[key] = int(value)
            except ValueError:
                raise ValueError(f"{key} must be an integer, got {value!r}") from None
        else:
            kw[key] = value
    return SimConfig(**kw)
