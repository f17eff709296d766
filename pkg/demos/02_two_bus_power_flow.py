# %% [markdown]
# # Two-bus power flow against the closed form
#
# One line, one balanced constant-power load.  Per phase the load-bus voltage
# has a closed form, so the sweep solver can be checked directly while the
# load approaches the solvability limit.

# %%
import math

import numpy as np

from lvunbalance import Bus, Feeder, Line, Load, SolverConfig
from lvunbalance.pfsolver import solve_timestep

z = 0.05 + 0.01j  # ohm per phase


def feeder(kw_per_phase, pf=1.0):
    return Feeder("demo", [Bus("head", True), Bus("load")], [Line("head", "load", np.diag([z] * 3))],
                  [Load("load", "abc", np.array([3 * kw_per_phase]), pf)])


zp = z / feeder(1).z_base
pf = 0.9
tanphi = math.tan(math.acos(pf))
p_max = 1 / (2 * (zp.real + zp.imag * tanphi + abs(zp) / pf))
print(f"solvability limit {p_max:.1f} pu per phase (1 kVA base)")

# %%
for frac in (0.1, 0.4, 0.7, 0.9):
    p = frac * p_max
    s = complex(p, p * tanphi)
    b = 2 * (zp * s.conjugate()).real - 1
    exact = math.sqrt((-b + math.sqrt(b * b - 4 * abs(zp) ** 2 * abs(s) ** 2)) / 2)
    v, conv, it, _ = solve_timestep(feeder(p, pf), 0, SolverConfig(tol=1e-12, max_iter=500))
    print(f"{frac:4.0%} of limit: |V| {abs(v[1, 0]):.9f} closed form {exact:.9f} ({it} iterations)")
