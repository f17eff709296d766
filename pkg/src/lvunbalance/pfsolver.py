"""Backward-forward sweep power flow for radial three-phase feeders.

Loads are constant-power and wye-connected; the neutral is taken as solidly
grounded once lines are in their reduced 3x3 form.  Voltages are per-unit on
the feeder's line-to-neutral base.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .netmodel import Feeder, Phasor

log = logging.getLogger(__name__)

A_OP = np.exp(2j * np.pi / 3)
COLLAPSE_PU = 0.3
MAX_UNCONVERGED_FRACTION = 0.1


class VoltageCollapseError(RuntimeError):
    """Some bus voltage fell below the collapse threshold during iteration."""


class FeederSolveError(RuntimeError):
    """Too many timesteps failed to converge."""


def _default_slack():
    return (Phasor(1.0, 0.0), Phasor.from_complex(A_OP ** 2), Phasor.from_complex(A_OP))


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-8
    max_iter: int = 100
    slack_voltage: tuple[Phasor, Phasor, Phasor] = field(default_factory=_default_slack)
    warm_start: bool = True

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")

    @property
    def v_slack(self) -> np.ndarray:
        return np.array([complex(p) for p in self.slack_voltage])


@dataclass
class VoltageSolution:
    """Per-unit voltages ``v[t, node, phase]`` in topology order."""
    nodes: tuple[str, ...]
    v: np.ndarray
    converged: np.ndarray
    iterations: np.ndarray
    residual: np.ndarray

    @property
    def T(self) -> int:
        return self.v.shape[0]

    def phasor(self, node: str, t: int, phase: int) -> Phasor:
        return Phasor.from_complex(self.v[t, self.nodes.index(node), phase])

    def node_voltages(self, node: str) -> np.ndarray:
        return self.v[:, self.nodes.index(node), :]


def sweep(z, subtree, s_load, v_slack, v0=None, tol=1e-8, max_iter=100):
    """Iterate the sweep for one timestep.

    ``z`` is ``(N, 3, 3)`` per-unit branch impedance feeding each node,
    ``subtree`` the boolean descendant matrix, ``s_load`` the ``(N, 3)``
    per-unit load power.  Returns ``(v, converged, iterations, residual)``.
    """
    N = len(z)
    D = subtree.astype(float)
    v = np.tile(v_slack, (N, 1)) if v0 is None else np.array(v0, dtype=complex)
    v[0] = v_slack
    step = np.inf
    for it in range(1, max_iter + 1):
        i_load = np.conj(s_load / v)
        i_branch = D @ i_load
        drop = np.einsum("kpq,kq->kp", z, i_branch)
        v_new = v_slack - D.T @ drop
        step = np.abs(v_new - v).max()
        v = v_new
        if np.abs(v).min() < COLLAPSE_PU:
            raise VoltageCollapseError(
                f"voltage collapse: min |V| = {np.abs(v).min():.3f} pu at iteration {it}")
        if step < tol:
            return v, True, it, step
    return v, False, max_iter, step


def _pu_impedance(feeder: Feeder) -> np.ndarray:
    return feeder.topology.z / feeder.z_base


def solve_timestep(feeder: Feeder, t: int, cfg: SolverConfig | None = None,
                   power_factor: float | None = None, v0=None):
    """Solve one interval; returns ``(v, converged, iterations, residual)``."""
    cfg = cfg or SolverConfig()
    s = feeder.load_power_pu(power_factor)[t]
    if not np.all(np.isfinite(s)):
        raise ValueError(f"non-finite load power at t={t}")
    return sweep(_pu_impedance(feeder), feeder.topology.subtree, s, cfg.v_slack,
                 v0, cfg.tol, cfg.max_iter)


def solve_feeder(feeder: Feeder, cfg: SolverConfig | None = None,
                 power_factor: float | None = None) -> VoltageSolution:
    """Solve every interval of the feeder's load profiles.

    Unconverged intervals are flagged rather than raised; the feeder as a
    whole fails when more than 10% of its intervals are unconverged.
    """
    cfg = cfg or SolverConfig()
    topo = feeder.topology
    z = _pu_impedance(feeder)
    s_all = feeder.load_power_pu(power_factor)
    T, N = s_all.shape[:2]
    v = np.empty((T, N, 3), dtype=complex)
    conv = np.zeros(T, dtype=bool)
    iters = np.zeros(T, dtype=int)
    resid = np.zeros(T)
    prev = None
    for t in range(T):
        v[t], conv[t], iters[t], resid[t] = sweep(z, topo.subtree, s_all[t], cfg.v_slack,
                                                  prev, cfg.tol, cfg.max_iter)
        if cfg.warm_start and conv[t]:
            prev = v[t]
    n_bad = int((~conv).sum())
    if n_bad:
        log.warning("feeder %s: %d of %d intervals unconverged", feeder.id, n_bad, T)
    if n_bad > MAX_UNCONVERGED_FRACTION * T:
        raise FeederSolveError(f"feeder {feeder.id}: {n_bad} of {T} intervals did not converge")
    return VoltageSolution(topo.order, v, conv, iters, resid)


def branch_currents(feeder: Feeder, v: np.ndarray) -> np.ndarray:
    """Currents in the line feeding each node, from voltage differences alone."""
    topo = feeder.topology
    z = _pu_impedance(feeder)
    i = np.zeros_like(v)
    for k in range(1, len(topo.order)):
        i[k] = np.linalg.solve(z[k], v[topo.parent[k]] - v[k])
    return i


def balance_residuals(feeder: Feeder, v: np.ndarray, t: int,
                      power_factor: float | None = None) -> tuple[float, float]:
    """Kirchhoff current and nodal power mismatch of a solved interval.

    Line currents are recomputed from ``Z^-1 (V_parent - V_child)`` and
    compared with the constant-power load demand.  Returns
    ``(max |current mismatch|, max |power mismatch|)`` in per-unit over all
    non-slack buses.
    """
    topo = feeder.topology
    s_load = feeder.load_power_pu(power_factor)[t]
    i_line = branch_currents(feeder, v)
    net = i_line.copy()
    for k in range(1, len(topo.order)):
        net[topo.parent[k]] -= i_line[k]
    i_load = np.conj(s_load / v)
    kcl = np.abs(net[1:] - i_load[1:]).max(initial=0.0)
    pb = np.abs(v[1:] * np.conj(net[1:]) - s_load[1:]).max(initial=0.0)
    return float(kcl), float(pb)
