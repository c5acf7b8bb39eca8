"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line (shown in the terminal summary and on
stdout with ``-s``) before asserting, so a failing criterion still reports
the numbers it produced.
"""

import itertools
import math
import time

import numpy as np

from conftest import ACCEPTANCE_LINES, exact_group
from oracles import close, pool_exact

from median_meta import distributions as dist
from median_meta.abc_density import AbcConfig
from median_meta.distributions import FIGURE1_MIXTURE, Family
from median_meta.median_methods import QEConfig, mdm, mdm_coverage, qe_effects, qe_fit
from median_meta.pooling import pool_fixed, pool_random
from median_meta.shapiro import shapiro_wilk
from median_meta.sim_lab import SimConfig, apply_methods, run_simulation, simulate_records
from median_meta.transform import EffectEstimate


def record(n, ok, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


TB_EFFECTS = [1.00, 1.00, 6.00, 0.04, 4.00, 0.59, 0.20, -3.00, 1.00]


def test_criterion_1_tb_exact_values(tb):
    t0 = time.perf_counter()
    effects = [s.group1.median - s.group2.median for s in tb.studies]
    pooled = mdm(effects).pooled
    elapsed = time.perf_counter() - t0
    # the table prints 0.59 for the sixth study, hence the 0.01 allowance there
    tol = [1e-9] * 9
    tol[5] = 0.01 + 1e-9
    ok_eff = all(abs(a - b) <= t for a, b, t in zip(effects, TB_EFFECTS, tol))
    ok = record(1, ok_eff and pooled == 1.0 and elapsed < 1,
                f"effects={[round(e, 2) for e in effects]} mdm={pooled} t={elapsed:.3f}s")
    assert ok


def test_criterion_2_tb_qe_random_effects(tb):
    t0 = time.perf_counter()
    effects = qe_effects(tb.studies, QEConfig())
    res = pool_random(effects)
    elapsed = time.perf_counter() - t0
    ok = record(2, 0.8 <= res.pooled <= 1.3 and res.i2 >= 95 and elapsed < 5,
                f"pooled={res.pooled:.4f} [{res.ci_low:.3f}, {res.ci_high:.3f}] "
                f"I2={res.i2:.2f} t={elapsed:.1f}s")
    assert ok


def _cell(**kw):
    base = dict(n_studies=10, median_n=50, heterogeneity="i25", outcome="normal-moderate",
                replications=500, seed=2024)
    base.update(kw)
    return SimConfig(**base)


def test_criterion_3_qe_s1_normal_simulation():
    t0 = time.perf_counter()
    m = run_simulation(_cell(reporting="s1"), methods=("qe",)).methods["qe"]
    elapsed = time.perf_counter() - t0
    re_med = m.re_quartiles[0]
    ok = record(3, abs(re_med) < 4 and 0.90 <= m.coverage <= 0.97
                and abs(m.variance - 0.32) <= 0.07 and elapsed < 180,
                f"QE RE={re_med:.2f} coverage={m.coverage:.3f} variance={m.variance:.3f} "
                f"failed={m.n_failed} t={elapsed:.0f}s")
    assert ok


def test_criterion_4_wan_vs_qe_s2_mixture_fixed():
    t0 = time.perf_counter()
    res = run_simulation(_cell(reporting="s2", outcome="mixture", model="fixed"),
                         methods=("wan", "qe")).methods
    elapsed = time.perf_counter() - t0
    wan, qe = res["wan"], res["qe"]
    ok = record(4, -27 < wan.re_quartiles[0] < -16 and wan.coverage <= 0.20
                and abs(qe.re_quartiles[0]) < 4 and qe.coverage >= 0.85 and elapsed < 180,
                f"Wan RE={wan.re_quartiles[0]:.2f} cov={wan.coverage:.3f}; "
                f"QE RE={qe.re_quartiles[0]:.2f} cov={qe.coverage:.3f} t={elapsed:.0f}s")
    assert ok


def _coverage_exhaustive(k):
    # independent of the library: search all symmetric order-statistic intervals
    best = None
    for j in range(1, k // 2 + 1):
        tail = sum(math.comb(k, i) for i in range(j)) / 2 ** k
        cov = 1 - 2 * tail
        if cov >= 0.95:
            best = cov
    return best


def test_criterion_5_mdm_exact_coverage():
    bad = []
    for k in range(6, 101):
        ref = _coverage_exhaustive(k)
        got = mdm_coverage(k)
        if ref is None or got < 0.95 or abs(got - ref) > 1e-12:
            bad.append(k)
    c10 = mdm_coverage(10)
    ok = record(5, not bad and abs(c10 - 0.9785) <= 1e-4,
                f"k=6..100 all >= 0.95: {not bad}; k=10 coverage={c10:.6f}")
    assert ok


def test_criterion_6_pooling_oracle_equivalence():
    cases = 0
    failures = []
    values = [(y, v) for y in range(-3, 4) for v in (1, 2)]
    for k in range(1, 5):
        for combo in itertools.product(values, repeat=k):
            y = [c[0] for c in combo]
            v = [c[1] for c in combo]
            eff = [EffectEstimate(f"s{i}", float(a), float(b), "DiffMeans")
                   for i, (a, b) in enumerate(zip(y, v))]
            fe, re_ = pool_fixed(eff), pool_random(eff)
            th, vf, q, tau2, thr, vr = pool_exact(y, v)
            pairs = ((fe.pooled, th), (fe.variance, vf), (fe.q_stat, q),
                     (re_.tau2, tau2), (re_.pooled, thr), (re_.variance, vr))
            cases += 1
            if not all(close(a, b) for a, b in pairs):
                failures.append(combo)
    ok = record(6, not failures and cases > 0,
                f"{cases} inputs, {len(failures)} mismatches at 1e-12 relative")
    assert ok, failures[:5]


RECOVERY = {
    Family.NORMAL: (35.0, 7.0),
    Family.LOGNORMAL: (1.0, 0.5),
    Family.GAMMA: (4.0, 2.0),
    Family.WEIBULL: (3.0, 2.0),
}


def test_criterion_7_qe_recovery():
    t0 = time.perf_counter()
    good, worst, notes = 0, 0.0, []
    for family, params in RECOVERY.items():
        for sc in ("s1", "s2", "s3"):
            fit = qe_fit(exact_group(family, params, sc))
            worst = max(worst, fit.objective)
            if fit.objective < 1e-8 and fit.family is family:
                good += 1
            else:
                notes.append(f"{family.value}/{sc}->{fit.family.value}")
    elapsed = time.perf_counter() - t0
    ok = record(7, good == 12 and elapsed < 30,
                f"{good}/12 recovered, max S_P={worst:.2e} {notes} t={elapsed:.1f}s")
    assert ok


def test_criterion_8_distribution_correctness():
    rng = np.random.default_rng(8)
    probe = [0.001, 0.01, 0.25, 0.5, 0.75, 0.99, 0.999]
    draws = {
        Family.NORMAL: lambda: (rng.uniform(-50, 50), rng.uniform(0.1, 20)),
        Family.LOGNORMAL: lambda: (rng.uniform(-2, 4), rng.uniform(0.1, 2)),
        Family.GAMMA: lambda: (rng.uniform(0.2, 40), rng.uniform(0.05, 10)),
        Family.WEIBULL: lambda: (rng.uniform(0.5, 30), rng.uniform(0.3, 10)),
    }
    worst = 0.0
    for family, draw in draws.items():
        for _ in range(50):
            params = draw()
            for p in probe:
                worst = max(worst, abs(dist.cdf(family, params, dist.quantile(family, params, p)) - p))
    for p in probe:
        x = dist.quantile(Family.MIXTURE, FIGURE1_MIXTURE, p)
        worst = max(worst, abs(dist.cdf(Family.MIXTURE, FIGURE1_MIXTURE, x) - p))

    x = dist.sample(Family.MIXTURE, FIGURE1_MIXTURE, 10**6, np.random.default_rng(1))
    mean, var = float(x.mean()), float(x.var(ddof=1))
    sd = float(dist.sample(Family.NORMAL, (35, 7), 10**6, np.random.default_rng(2)).std(ddof=1))
    ok = record(8, worst < 1e-9 and abs(mean - 41.13) <= 0.1 and abs(var - 59.6) <= 1.5
                and abs(sd - 7) <= 0.02,
                f"round-trip max err={worst:.1e}; mixture mean={mean:.3f} var={var:.2f}; "
                f"normal sd={sd:.4f}")
    assert ok


def test_criterion_9_abc_sds_tracks_qe():
    t0 = time.perf_counter()
    cfg = _cell(reporting="s2", replications=50, seed=99)
    batch = [simulate_records(cfg, r) for r in range(cfg.replications)]
    abc = AbcConfig(iterations_per_family=5000, acceptance_rate=0.004, seed=cfg.seed)
    out = apply_methods(batch, cfg, ("qe", "abc-sds"), QEConfig(), abc)
    gaps = [abs(o["abc-sds"].estimate - o["qe"].estimate) for o in out
            if not isinstance(o["abc-sds"], str) and not isinstance(o["qe"], str)]
    elapsed = time.perf_counter() - t0
    med = float(np.median(gaps)) if gaps else math.inf
    ok = record(9, len(gaps) == 50 and med < 0.1 and elapsed < 600,
                f"{len(gaps)}/50 metas, median |SDS-QE|={med:.4f} t={elapsed:.0f}s")
    assert ok


def test_criterion_10_shapiro_wilk_size():
    rng = np.random.default_rng(10)
    reps = 10_000
    x = rng.standard_normal((reps, 100))
    rate = sum(shapiro_wilk(row)[1] < 0.05 for row in x) / reps
    ok = record(10, abs(rate - 0.05) <= 0.01, f"rejection rate={rate:.4f} over {reps} samples")
    assert ok
