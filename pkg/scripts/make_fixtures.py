"""Regenerate the feeder fixtures bundled in src/lvunbalance/data/."""
from dataclasses import replace

import numpy as np

from lvunbalance.netmodel import Bus, Feeder, Line, Load, bundled_path, save_feeder
from lvunbalance.synthgen import GenSpec, daily_shape, generate_feeder

hours = np.arange(24) + 0.5
shape = daily_shape(hours)

# two buses, uncoupled phases, one balanced three-phase load
two_bus = Feeder(
    "feeder_2bus",
    [Bus("head", True), Bus("load")],
    [Line("head", "load", np.diag([0.05 + 0.01j] * 3))],
    [Load("load", "abc", np.round(6.0 * shape, 6), 1.0, "L0")],
)
save_feeder(two_bus, bundled_path("feeder_2bus.json"))

# 41 buses, 16 single-phase and 2 three-phase customers, cumulative R/X 6.8
spec = GenSpec(seed=41, n_buses=(41, 41), n_loads=(18, 18), rx_ratio=(6.8, 6.8),
               single_phase_fraction=1.0, id_prefix="feeder_41bus_")
f41 = generate_feeder(spec, 0)
rng = np.random.Generator(np.random.PCG64(41))
conns = ["abc", "abc"] + ["abc"[k % 3] for k in range(16)]
conns = [str(c) for c in rng.permutation(conns)]
f41 = replace(f41, id="feeder_41bus",
              loads=[replace(ld, connection=c) for ld, c in zip(f41.loads, conns)])
save_feeder(f41, bundled_path("feeder_41bus.json"))

# same network, every customer three-phase: perfectly balanced
bal = replace(f41, id="feeder_balanced",
              loads=[replace(ld, connection="abc") for ld in f41.loads])
save_feeder(bal, bundled_path("feeder_balanced.json"))
