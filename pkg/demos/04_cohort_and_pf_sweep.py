# %% [markdown]
# # Synthetic cohort and power-factor sweep
#
# 161 seeded feeders spanning R/X 2.87 to 14.68 with 80% single-phase loads.
# First the correlation spread against R/X, then the same cohort at lower
# load power factors.

# %%
import numpy as np

from lvunbalance import GenSpec, RunConfig, generate_cohort, run_cohort_study, run_pf_sweep

feeders = generate_cohort(GenSpec(seed=0), 161)
rep = run_cohort_study(feeders, RunConfig(workers=1))
c = rep.cohort
print(f"{c.n_defined} feeders, rho mean {c.rho_mean:.4f} median {c.rho_median:.4f}, "
      f"rho^2 mean {c.rho_sq_mean:.4f}")
print("categories", c.categories)

# %%
rx = np.array([s.stats.rx_ratio for s in rep.sections])
rho = np.array([s.stats.rho for s in rep.sections])
for lo, hi in ((2.87, 5), (5, 10), (10, 14.68)):
    m = (rx >= lo) & (rx < hi) if hi < 14.68 else (rx >= lo)
    print(f"R/X {lo:5.2f}-{hi:5.2f}: n={m.sum():3d} mean rho {rho[m].mean():.5f}")

# %%
sweep = run_pf_sweep(feeders, [1.0, 0.9, 0.8, 0.7], RunConfig(workers=1))
for row in sweep.rows():
    print(f"pf {row['pf']:.1f}: mean u_true {row['mean_u_true_pct']:.4f} %  rho {row['rho_mean']:.5f}")

# %% [markdown]
# Lower power factor raises unbalance steadily.  The correlation barely
# moves: a uniform reactive share rotates and scales every voltage drop
# alike, so the locational pattern that the correlation sees hardly changes.
