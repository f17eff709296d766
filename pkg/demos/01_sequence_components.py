# %% [markdown]
# # Symmetrical components and unbalance metrics
#
# A slightly unbalanced phasor set, its sequence decomposition, and the two
# unbalance measures: the sequence-based one (percent) and the magnitude-only
# one (fraction).

# %%
import math

from lvunbalance import Phasor
from lvunbalance.seqmetrics import to_sequence, vuf_approx, vuf_true

deg = math.radians
va, vb, vc = Phasor.polar(1.02, 0.0), Phasor.polar(0.97, deg(-122)), Phasor.polar(1.01, deg(119))

sc = to_sequence(va, vb, vc)
for name, p in (("zero", sc.v0), ("positive", sc.v1), ("negative", sc.v2)):
    print(f"{name:>8}: |V| = {abs(complex(p)):.5f} pu")

# %%
u_true = vuf_true(va, vb, vc)
mags = [p.magnitude() for p in (va, vb, vc)]
u_dev = vuf_approx(*mags)
u_lit = vuf_approx(*mags, literal=True)
print(f"true VUF {u_true:.4f} %")
print(f"magnitude-only: deviation form {u_dev:.5f}, literal form {u_lit:.5f}")
print(f"ratio true/approx {u_true / u_dev:.1f}")

# %% [markdown]
# A phase-angle error with equal magnitudes is invisible to the magnitude-only
# metric but not to the sequence one.

# %%
skewed = (Phasor.polar(1, 0), Phasor.polar(1, deg(-125)), Phasor.polar(1, deg(120)))
print(vuf_true(*skewed), vuf_approx(*(p.magnitude() for p in skewed)))
