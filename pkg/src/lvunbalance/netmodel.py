"""Feeder data model, file ingestion and 4-wire to 3-wire impedance reduction.

All impedances are stored in ohms, phase order ``a, b, c``.  Conversion to
per-unit happens through :attr:`Feeder.z_base`; ``s_base`` is the per-phase
power base, so ``z_base = v_base**2 / s_base`` with ``v_base`` line-to-neutral.
"""
from __future__ import annotations

import cmath
import csv
import json
import math
from collections import deque
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

PHASES = ("a", "b", "c")
CONNECTIONS = ("a", "b", "c", "abc")
SINGULAR_NEUTRAL_TOL = 1e-12


class FeederError(ValueError):
    """Base class for feeder ingestion problems."""


class FeederFormatError(FeederError):
    """The feeder file could not be parsed."""


class FeederValidationError(FeederError):
    """The feeder parsed but violates a model invariant."""


class SingularNeutralError(ValueError):
    pass


@dataclass(frozen=True)
class Phasor:
    re: float
    im: float

    @classmethod
    def from_complex(cls, z: complex) -> "Phasor":
        z = complex(z)
        return cls(z.real, z.imag)

    @classmethod
    def polar(cls, magnitude: float, angle: float) -> "Phasor":
        return cls.from_complex(cmath.rect(magnitude, angle))

    def magnitude(self) -> float:
        return math.hypot(self.re, self.im)

    def angle(self) -> float:
        # atan2 returns [-pi, pi]; fold -pi onto pi
        ang = math.atan2(self.im, self.re)
        return math.pi if ang == -math.pi else ang

    def __complex__(self) -> complex:
        return complex(self.re, self.im)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a)
    a.setflags(write=False)
    return a


def kron_reduce(z4) -> np.ndarray:
    """Eliminate the neutral conductor from a 4x4 primitive impedance matrix.

    Returns ``Z_pp - Z_pn Z_nn^-1 Z_np`` where the neutral is the last
    row/column.  The neutral is assumed perfectly grounded at both ends.
    """
    z4 = np.asarray(z4, dtype=complex)
    if z4.shape != (4, 4):
        raise ValueError(f"expected a 4x4 matrix, got shape {z4.shape}")
    znn = z4[3, 3]
    if abs(znn) < SINGULAR_NEUTRAL_TOL:
        raise SingularNeutralError(f"neutral self-impedance {znn} is singular")
    return z4[:3, :3] - np.outer(z4[:3, 3], z4[3, :3]) / znn


def check_impedance3(z, name: str = "line") -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    if z.shape != (3, 3):
        raise FeederValidationError(f"{name}: impedance must be 3x3, got {z.shape}")
    scale = max(np.abs(z).max(), 1e-300)
    if np.abs(z - z.T).max() > 1e-12 * scale:
        raise FeederValidationError(f"{name}: impedance matrix is not symmetric")
    if np.any(z.diagonal().real <= 0):
        raise FeederValidationError(f"{name}: diagonal resistances must be positive")
    return z


@dataclass(frozen=True)
class Bus:
    id: str
    is_slack: bool = False


@dataclass(frozen=True)
class Line:
    from_bus: str
    to_bus: str
    z: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "z", _frozen(np.asarray(self.z, dtype=complex)))


@dataclass(frozen=True)
class Load:
    bus: str
    connection: str
    profile: np.ndarray
    power_factor: float = 1.0
    id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "profile", _frozen(np.asarray(self.profile, dtype=float)))

    @property
    def phases(self) -> tuple[int, ...]:
        if self.connection == "abc":
            return (0, 1, 2)
        return (PHASES.index(self.connection),)


@dataclass(frozen=True)
class Topology:
    """Buses in breadth-first order from the slack, with the branch feeding each.

    ``order[0]`` is the slack bus.  ``parent[k]`` is the position of the
    upstream bus (-1 for the slack) and ``z[k]`` the ohmic impedance of the
    line feeding bus ``k`` (zeros for the slack).  ``subtree[k, j]`` is True
    when bus ``j`` lies in the subtree rooted at ``k`` (``k`` included).
    """
    order: tuple[str, ...]
    parent: np.ndarray
    z: np.ndarray
    subtree: np.ndarray

    @cached_property
    def index(self) -> dict[str, int]:
        return {b: k for k, b in enumerate(self.order)}


@dataclass(frozen=True)
class Feeder:
    id: str
    buses: tuple[Bus, ...]
    lines: tuple[Line, ...]
    loads: tuple[Load, ...]
    v_base: float = 230.0
    s_base: float = 1000.0
    interval_h: float = 1.0
    _topology: Topology | None = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "buses", tuple(self.buses))
        object.__setattr__(self, "lines", tuple(self.lines))
        loads = tuple(ld if ld.id else replace(ld, id=str(k)) for k, ld in enumerate(self.loads))
        object.__setattr__(self, "loads", loads)
        object.__setattr__(self, "_topology", validate(self))

    @property
    def n_buses(self) -> int:
        return len(self.buses)

    @property
    def T(self) -> int:
        return len(self.loads[0].profile) if self.loads else 1

    @property
    def z_base(self) -> float:
        return self.v_base ** 2 / self.s_base

    @property
    def slack(self) -> Bus:
        return next(b for b in self.buses if b.is_slack)

    @property
    def topology(self) -> Topology:
        return self._topology

    def load_power_pu(self, power_factor: float | None = None) -> np.ndarray:
        """Per-phase complex load power at every bus and interval.

        Returns an array of shape ``(T, n_buses, 3)`` in topology order.
        Energy per interval is converted to average power; three-phase loads
        are split equally over the phases.  ``power_factor`` overrides every
        load's own value.
        """
        topo = self.topology
        s = np.zeros((self.T, self.n_buses, 3), dtype=complex)
        for ld in self.loads:
            pf = ld.power_factor if power_factor is None else power_factor
            p = ld.profile / self.interval_h * 1e3 / self.s_base / len(ld.phases)
            q = p * math.tan(math.acos(pf))
            k = topo.index[ld.bus]
            for ph in ld.phases:
                s[:, k, ph] += p + 1j * q
        return s

    def with_profiles(self, profiles: Mapping[str, Sequence[float]]) -> "Feeder":
        unknown = set(profiles) - {ld.id for ld in self.loads}
        if unknown:
            raise FeederValidationError(f"profile override for unknown loads: {sorted(unknown)}")
        loads = [replace(ld, profile=profiles[ld.id]) if ld.id in profiles else ld for ld in self.loads]
        return replace(self, loads=loads)

    def with_power_factor(self, pf: float) -> "Feeder":
        return replace(self, loads=[replace(ld, power_factor=pf) for ld in self.loads])


def validate(feeder: Feeder) -> Topology:
    """Check every feeder invariant and return the oriented radial topology."""
    ids = [b.id for b in feeder.buses]
    dup = sorted({b for b in ids if ids.count(b) > 1})
    if dup:
        raise FeederValidationError(f"duplicate bus ids: {dup}")
    slacks = [b.id for b in feeder.buses if b.is_slack]
    if len(slacks) != 1:
        raise FeederValidationError(
            f"feeder {feeder.id}: expected exactly one slack bus, found {len(slacks)}: {slacks}")
    if not feeder.v_base > 0 or not feeder.s_base > 0 or not feeder.interval_h > 0:
        raise FeederValidationError(f"feeder {feeder.id}: bases and interval must be positive")

    known = set(ids)
    adj: dict[str, list[tuple[str, int]]] = {b: [] for b in ids}
    for n, ln in enumerate(feeder.lines):
        name = f"line {n} ({ln.from_bus}->{ln.to_bus})"
        if ln.from_bus == ln.to_bus:
            raise FeederValidationError(f"{name}: from and to bus are identical")
        for b in (ln.from_bus, ln.to_bus):
            if b not in known:
                raise FeederValidationError(f"{name}: unknown bus {b!r}")
        check_impedance3(ln.z, name)
        adj[ln.from_bus].append((ln.to_bus, n))
        adj[ln.to_bus].append((ln.from_bus, n))

    root = slacks[0]
    order = [root]
    parent = {root: None}
    via = {root: None}
    queue = deque([root])
    while queue:
        b = queue.popleft()
        for nb, n in sorted(adj[b]):
            if n == via[b]:
                continue
            if nb in parent:
                raise FeederValidationError(
                    f"feeder {feeder.id}: non-radial topology, line {n} "
                    f"({feeder.lines[n].from_bus}->{feeder.lines[n].to_bus}) closes a loop")
            parent[nb] = b
            via[nb] = n
            order.append(nb)
            queue.append(nb)
    if len(order) != len(ids):
        missing = sorted(known - set(order))
        raise FeederValidationError(f"feeder {feeder.id}: buses not connected to the slack: {missing}")

    T = None
    for ld in feeder.loads:
        name = f"load {ld.id or '?'} at bus {ld.bus!r}"
        if ld.bus not in known:
            raise FeederValidationError(f"{name}: unknown bus")
        if ld.connection not in CONNECTIONS:
            raise FeederValidationError(
                f"{name}: unsupported connection {ld.connection!r} (wye a/b/c/abc only)")
        if not 0 < ld.power_factor <= 1:
            raise FeederValidationError(f"{name}: power factor {ld.power_factor} outside (0, 1]")
        if ld.profile.ndim != 1 or len(ld.profile) == 0:
            raise FeederValidationError(f"{name}: profile must be a non-empty sequence")
        if not np.all(np.isfinite(ld.profile)) or np.any(ld.profile < 0):
            raise FeederValidationError(f"{name}: profile values must be finite and >= 0")
        if T is None:
            T = len(ld.profile)
        elif len(ld.profile) != T:
            raise FeederValidationError(f"{name}: profile length {len(ld.profile)} != {T}")

    index = {b: k for k, b in enumerate(order)}
    N = len(order)
    par = np.full(N, -1, dtype=int)
    z = np.zeros((N, 3, 3), dtype=complex)
    for b, k in index.items():
        if parent[b] is not None:
            par[k] = index[parent[b]]
            z[k] = feeder.lines[via[b]].z
    subtree = np.eye(N, dtype=bool)
    # BFS order: every ancestor precedes its descendants
    for k in range(N - 1, 0, -1):
        subtree[par[k]] |= subtree[k]
    return Topology(tuple(order), _frozen(par), _frozen(z), _frozen(subtree))


def cumulative_rx(feeder: Feeder) -> tuple[float, float, float]:
    """Cumulative feeder resistance, reactance (ohms) and their ratio.

    Each line contributes the mean of its three diagonal entries.
    """
    if not feeder.lines:
        raise ValueError(f"feeder {feeder.id} has no lines")
    diag = np.array([np.diagonal(ln.z).mean() for ln in feeder.lines])
    R, X = float(diag.real.sum()), float(diag.imag.sum())
    if X == 0:
        raise ZeroDivisionError(f"feeder {feeder.id}: cumulative reactance is zero")
    return R, X, R / X


# ---------------------------------------------------------------------------
# file formats

def _cmatrix(rows, n: int, name: str) -> np.ndarray:
    try:
        a = np.array([[complex(float(re), float(im)) for re, im in row] for row in rows])
    except (TypeError, ValueError) as exc:
        raise FeederFormatError(f"{name}: expected a {n}x{n} array of [re, im] pairs") from exc
    if a.shape != (n, n):
        raise FeederFormatError(f"{name}: expected a {n}x{n} array, got {a.shape}")
    return a


def feeder_from_dict(d: Mapping) -> Feeder:
    try:
        fid = str(d["id"])
        buses = [Bus(str(b["id"]), bool(b.get("slack", False))) for b in d["buses"]]
        lines = []
        for n, ln in enumerate(d["lines"]):
            name = f"line {n}"
            if "z3" in ln:
                z = _cmatrix(ln["z3"], 3, name)
            elif "z4" in ln:
                z4 = _cmatrix(ln["z4"], 4, name)
                if not ln.get("reduce", True):
                    raise FeederFormatError(f"{name}: 4-wire lines must set reduce: true")
                if np.abs(z4 - z4.T).max() > 1e-12 * np.abs(z4).max():
                    raise FeederValidationError(f"{name}: 4x4 impedance is not symmetric")
                try:
                    z = kron_reduce(z4)
                except SingularNeutralError as exc:
                    raise FeederValidationError(f"{name}: {exc}") from exc
            else:
                raise FeederFormatError(f"{name}: needs a z3 or z4 impedance")
            lines.append(Line(str(ln["from"]), str(ln["to"]), z))
        loads = []
        for n, ld in enumerate(d.get("loads", [])):
            conn = str(ld["connection"])
            if conn.lower() in ("delta", "d", "ab", "bc", "ca"):
                raise FeederValidationError(f"load {n}: delta connection {conn!r} is not supported")
            loads.append(Load(str(ld["bus"]), conn, [float(v) for v in ld["profile_kwh"]],
                              float(ld.get("pf", 1.0)), str(ld.get("id", n))))
        return Feeder(fid, buses, lines, loads, float(d.get("v_base_V", 230.0)),
                      float(d.get("s_base_VA", 1000.0)), float(d.get("interval_h", 1.0)))
    except KeyError as exc:
        raise FeederFormatError(f"missing key {exc.args[0]!r}") from exc
    except (TypeError, AttributeError) as exc:
        raise FeederFormatError(f"malformed feeder document: {exc}") from exc


def feeder_to_dict(feeder: Feeder) -> dict:
    def pairs(z):
        return [[[float(v.real), float(v.imag)] for v in row] for row in z]

    return {
        "id": feeder.id,
        "v_base_V": feeder.v_base,
        "s_base_VA": feeder.s_base,
        "interval_h": feeder.interval_h,
        "buses": [{"id": b.id, "slack": b.is_slack} for b in feeder.buses],
        "lines": [{"from": ln.from_bus, "to": ln.to_bus, "z3": pairs(ln.z)} for ln in feeder.lines],
        "loads": [{"id": ld.id, "bus": ld.bus, "connection": ld.connection,
                   "pf": ld.power_factor, "profile_kwh": [float(v) for v in ld.profile]}
                  for ld in feeder.loads],
    }


def load_feeder(path) -> Feeder:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise FeederFormatError(f"{path}: {exc}") from exc
    try:
        return feeder_from_dict(doc)
    except FeederError as exc:
        raise type(exc)(f"{path}: {exc}") from exc


def save_feeder(feeder: Feeder, path) -> None:
    Path(path).write_text(json.dumps(feeder_to_dict(feeder), indent=1) + "\n")


def load_profiles_csv(path) -> dict[str, np.ndarray]:
    """Read a ``load_id,t,kwh`` override file into per-load profiles."""
    rows: dict[str, dict[int, float]] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"load_id", "t", "kwh"} <= set(reader.fieldnames):
            raise FeederFormatError(f"{path}: header must be load_id,t,kwh")
        for n, row in enumerate(reader, start=2):
            try:
                rows.setdefault(row["load_id"], {})[int(row["t"])] = float(row["kwh"])
            except (TypeError, ValueError) as exc:
                raise FeederFormatError(f"{path}:{n}: {exc}") from exc
    out = {}
    for lid, series in rows.items():
        T = max(series) + 1
        if sorted(series) != list(range(T)):
            raise FeederFormatError(f"{path}: load {lid} has gaps in t")
        out[lid] = np.array([series[t] for t in range(T)])
    return out


def save_profiles_csv(loads: Iterable[Load], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["load_id", "t", "kwh"])
        for ld in loads:
            for t, v in enumerate(ld.profile):
                w.writerow([ld.id, t, repr(float(v))])


def bundled_path(name: str) -> Path:
    """Path of a feeder fixture shipped with the package."""
    return Path(__file__).parent / "data" / name
