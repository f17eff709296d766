"""Seeded generation of synthetic radial LV feeders and daily load profiles.

Every feeder is a pure function of ``(spec.seed, index)``: random draws come
from numpy's PCG64 bit generator seeded through ``SeedSequence([seed, index,
stream])``, never from global state.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .netmodel import Bus, Feeder, Line, Load, save_feeder, save_profiles_csv

_TOPOLOGY, _PROFILES = 0, 1


class InfeasibleSpecError(ValueError):
    pass


@dataclass(frozen=True)
class GenSpec:
    seed: int = 0
    n_buses: tuple[int, int] = (20, 60)
    rx_ratio: tuple[float, float] = (2.87, 14.68)
    n_loads: tuple[int, int] = (8, 30)
    single_phase_fraction: float = 0.8
    profile_shape: str = "residential-daily"
    peak_kw: tuple[float, float] = (2.0, 6.0)
    T: int = 24
    mutual_fraction: float = 0.3
    phase_assignment: str = "uniform"
    segment_m: tuple[float, float] = (15.0, 60.0)
    x_ohm_per_km: float = 0.08
    power_factor: float = 1.0
    v_base: float = 230.0
    s_base: float = 1000.0
    id_prefix: str = "syn"

    def __post_init__(self):
        for f in ("n_buses", "rx_ratio", "n_loads", "peak_kw", "segment_m"):
            lo, hi = getattr(self, f)
            object.__setattr__(self, f, (lo, hi))
            if lo > hi:
                raise InfeasibleSpecError(f"{f}: empty range ({lo}, {hi})")
        if self.T < 1:
            raise InfeasibleSpecError("T must be >= 1")
        if self.n_buses[0] < 2:
            raise InfeasibleSpecError("feeders need at least 2 buses")
        if self.rx_ratio[0] <= 0 or self.peak_kw[0] < 0 or self.segment_m[0] <= 0:
            raise InfeasibleSpecError("R/X, peak and segment length ranges must be positive")
        if not 0 <= self.single_phase_fraction <= 1:
            raise InfeasibleSpecError("single_phase_fraction outside [0, 1]")
        if self.profile_shape not in ("flat", "residential-daily"):
            raise InfeasibleSpecError(f"unknown profile shape {self.profile_shape!r}")
        if self.phase_assignment not in ("uniform", "balanced-rotation"):
            raise InfeasibleSpecError(f"unknown phase assignment {self.phase_assignment!r}")
        if self.n_loads[1] > self.n_buses[1] - 1 and self.n_loads[0] > self.n_buses[0] - 1:
            raise InfeasibleSpecError("n_loads cannot exceed n_buses - 1")

    @classmethod
    def from_dict(cls, d: dict) -> "GenSpec":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise InfeasibleSpecError(f"unknown GenSpec keys: {sorted(extra)}")
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in d.items()})

    @classmethod
    def load(cls, path) -> "GenSpec":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}


def _rng(spec: GenSpec, index: int, stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([spec.seed, index, stream])))


def _line_impedance(length_km: float, rx: float, x_per_km: float, mutual: float) -> np.ndarray:
    zd = length_km * x_per_km * complex(rx, 1.0)
    return zd * (np.eye(3) + mutual * (np.ones((3, 3)) - np.eye(3)))


def generate_feeder(spec: GenSpec, index: int) -> Feeder:
    """Random radial feeder with profiles attached.

    Each new bus attaches to a uniformly chosen existing bus.  Per-line R/X
    varies by up to +-25% around the feeder's sampled ratio and the
    resistances are then rescaled so the cumulative ratio hits it exactly.
    """
    rng = _rng(spec, index, _TOPOLOGY)
    n_bus = int(rng.integers(spec.n_buses[0], spec.n_buses[1] + 1))
    lo, hi = spec.n_loads
    hi = min(hi, n_bus - 1)
    if lo > hi:
        raise InfeasibleSpecError(f"n_loads {spec.n_loads} infeasible for {n_bus} buses")
    n_load = int(rng.integers(lo, hi + 1))
    rx = float(rng.uniform(*spec.rx_ratio))

    names = [f"n{k:03d}" for k in range(n_bus)]
    parents = [int(rng.integers(0, k)) for k in range(1, n_bus)]
    lengths = rng.uniform(*spec.segment_m, size=n_bus - 1) / 1e3
    line_rx = rx * rng.uniform(0.75, 1.25, size=n_bus - 1)
    # exact cumulative ratio: sum(r) / sum(x) == rx
    line_rx *= rx * lengths.sum() / (line_rx * lengths).sum()
    lines = [Line(names[p], names[k + 1], _line_impedance(lengths[k], line_rx[k], spec.x_ohm_per_km,
                                                         spec.mutual_fraction))
             for k, p in enumerate(parents)]

    load_buses = sorted(rng.choice(np.arange(1, n_bus), size=n_load, replace=False).tolist())
    single = rng.random(n_load) < spec.single_phase_fraction
    loads = []
    n_single = 0
    for j, (b, one) in enumerate(zip(load_buses, single)):
        if one:
            if spec.phase_assignment == "balanced-rotation":
                conn = "abc"[n_single % 3]
            else:
                conn = "abc"[int(rng.integers(0, 3))]
            n_single += 1
        else:
            conn = "abc"
        loads.append(Load(names[b], conn, np.zeros(spec.T), spec.power_factor, f"L{j:03d}"))

    buses = [Bus(n, k == 0) for k, n in enumerate(names)]
    skeleton = Feeder(f"{spec.id_prefix}{index:04d}", buses, lines, loads, spec.v_base, spec.s_base,
                      24.0 / spec.T)
    return skeleton.with_profiles(generate_profiles(spec, skeleton, index))


def daily_shape(hours: np.ndarray, morning: float = 8.0, evening: float = 19.5) -> np.ndarray:
    """Residential demand shape in [0.25, ~1]: base plus morning and evening peaks."""
    return (0.25 + 0.45 * np.exp(-0.5 * ((hours - morning) / 1.5) ** 2)
            + 0.75 * np.exp(-0.5 * ((hours - evening) / 2.0) ** 2))


def generate_profiles(spec: GenSpec, feeder: Feeder, index: int = 0) -> dict[str, np.ndarray]:
    """Per-load kWh series of length ``spec.T``, one interval = 24/T hours."""
    rng = _rng(spec, index, _PROFILES)
    dt = 24.0 / spec.T
    hours = (np.arange(spec.T) + 0.5) * dt
    out = {}
    for ld in feeder.loads:
        peak = float(rng.uniform(*spec.peak_kw))
        if spec.profile_shape == "flat":
            out[ld.id] = np.full(spec.T, peak * dt)
            continue
        shift = rng.uniform(-1.0, 1.0, size=2)
        noise = rng.uniform(0.8, 1.2, size=spec.T)
        shape = np.minimum(daily_shape(hours, 8.0 + shift[0], 19.5 + shift[1]) * noise, 1.0)
        out[ld.id] = peak * shape * dt
    return out


def generate_cohort(spec: GenSpec, count: int) -> list[Feeder]:
    return [generate_feeder(spec, k) for k in range(count)]


def write_cohort(spec: GenSpec, count: int, out_dir) -> list[Path]:
    """Write ``<id>.json`` feeders plus ``<id>_profiles.csv`` for each."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for fd in generate_cohort(spec, count):
        p = out / f"{fd.id}.json"
        save_feeder(fd, p)
        save_profiles_csv(fd.loads, out / f"{fd.id}_profiles.csv")
        paths.append(p)
    return paths
