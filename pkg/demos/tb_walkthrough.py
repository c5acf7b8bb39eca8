"""Walk through the tuberculosis example: per-study effects, then pooling.

Run with ``python3 demos/tb_walkthrough.py``.
"""

from median_meta import load_tb_fixture, mdm, pool_random, qe_effects, wan_mean_sd
from median_meta.median_methods import qe_fit
from median_meta.transform import diff_of_means

data = load_tb_fixture()
print(f"{len(data.studies)} studies, outcome: days to treatment start\n")

print("Study-level differences of medians (Xpert minus smear):")
for s in data.studies:
    print(f"  {s.id:<15} {s.group1.median - s.group2.median:6.2f}")

# MDM needs nothing beyond the medians themselves.
res = mdm([s.group1.median - s.group2.median for s in data.studies])
print(f"\nMDM pooled {res.pooled:.2f}, 95% CI ({res.ci_low:.2f}, {res.ci_high:.2f})")

# QE fits a parametric density to each arm's quartiles.
first = data.studies[0]
fit = qe_fit(first.group1)
print(f"\nQE fit for {first.id}, Xpert arm: {fit.family.value} {tuple(round(p, 3) for p in fit.params)}")

qe = pool_random(qe_effects(data.studies))
print(f"QE random effects {qe.pooled:.3f} [{qe.ci_low:.3f}, {qe.ci_high:.3f}], "
      f"tau2 {qe.tau2:.3f}, I2 {qe.i2:.1f}%")

# Transformation methods estimate means and SDs, so they target a different quantity.
ms = wan_mean_sd(first.group1)
print(f"\nWan estimate for {first.id} Xpert arm: mean {ms.mean:.3f}, sd {ms.sd:.3f}")
wan = pool_random([diff_of_means(s) for s in data.studies])
print(f"Wan random effects (difference of means) {wan.pooled:.3f}")
