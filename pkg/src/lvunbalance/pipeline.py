"""Single-feeder study, cohort study and power-factor sweep."""
from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .netmodel import Feeder, cumulative_rx
from .pfsolver import FeederSolveError, SolverConfig, VoltageCollapseError, solve_feeder
from .seqmetrics import (EPS_BALANCED, DegenerateVoltageError, RatioStats, vuf_approx_array,
                         vuf_ratio_series, vuf_true_array)
from .stats import CohortStats, FeederStats, classify, cohort_summary, feeder_stats

log = logging.getLogger(__name__)

# rounding noise on an exactly balanced network sits around 1e-15
NOISE_FLOOR = 1e-12
STUDY_ERRORS = (FeederSolveError, VoltageCollapseError, DegenerateVoltageError)


@dataclass(frozen=True)
class RunConfig:
    solver: SolverConfig = field(default_factory=SolverConfig)
    power_factor: float | None = None
    pvur_literal: bool = False
    pooled_mean: bool = False
    workers: int | None = None
    eps_balanced: float = EPS_BALANCED
    noise_floor: float = NOISE_FLOOR
    thresholds: tuple[float, float] = (0.0, 0.5)

    def __post_init__(self):
        pf = self.power_factor
        if pf is not None and not 0 < pf <= 1:
            raise ValueError(f"power factor override {pf} outside (0, 1]")

    def n_workers(self) -> int:
        if self.workers:
            return self.workers
        env = os.environ.get("UNBALANCE_THREADS")
        return int(env) if env else (os.cpu_count() or 1)

    def echo(self) -> dict:
        s = self.solver
        return {
            "solver": {"tol": s.tol, "max_iter": s.max_iter, "warm_start": s.warm_start,
                       "slack_voltage": [[p.re, p.im] for p in s.slack_voltage]},
            "power_factor": self.power_factor, "pvur_literal": self.pvur_literal,
            "pooled_mean": self.pooled_mean, "eps_balanced": self.eps_balanced,
            "noise_floor": self.noise_floor, "thresholds": list(self.thresholds),
        }


@dataclass
class FeederSection:
    """Everything computed for one feeder; tables are indexed ``[node, t]``."""
    feeder_id: str
    nodes: tuple[str, ...]
    u_true: np.ndarray
    u_approx: np.ndarray
    u_approx_alt: np.ndarray
    converged: np.ndarray
    iterations: np.ndarray
    residual: np.ndarray
    head_energy_kwh: np.ndarray
    stats: FeederStats
    category: str
    ratio: RatioStats | None
    ratio_reason: str | None = None

    @property
    def n_records(self) -> int:
        return self.u_true.size


@dataclass
class RunReport:
    config: dict
    sections: list[FeederSection]
    quarantined: dict[str, str]
    cohort: CohortStats | None
    provenance: dict = field(default_factory=dict)

    @property
    def status(self) -> str:
        if not self.sections and self.quarantined:
            return "failed"
        return "partial" if self.quarantined else "ok"

    def section(self, feeder_id: str) -> FeederSection:
        return next(s for s in self.sections if s.feeder_id == feeder_id)


@dataclass
class SweepReport:
    config: dict
    entries: list[tuple[float, RunReport]]
    provenance: dict = field(default_factory=dict)

    def rows(self) -> list[dict]:
        out = []
        for pf, rep in self.entries:
            c = rep.cohort
            out.append({
                "pf": pf,
                "mean_u_true_pct": c.mean_u_true if c else float("nan"),
                "max_u_true_pct": c.max_u_true if c else float("nan"),
                "rho_mean": c.rho_mean if c else float("nan"),
                "rho_sq_mean": c.rho_sq_mean if c else float("nan"),
                "rho_median": c.rho_median if c else float("nan"),
                "n_defined": c.n_defined if c else 0,
                "n_quarantined": len(rep.quarantined),
            })
        return out

    @property
    def status(self) -> str:
        states = {rep.status for _, rep in self.entries}
        if states == {"failed"}:
            return "failed"
        return "ok" if states == {"ok"} else "partial"


def run_feeder_study(feeder: Feeder, profiles: Mapping[str, Sequence[float]] | None = None,
                     cfg: RunConfig | None = None) -> FeederSection:
    """Solve one feeder over its horizon and compute both metrics everywhere.

    Metrics are evaluated at every node and interval, unconverged intervals
    included; correlation and ratio statistics only use converged ones.
    """
    cfg = cfg or RunConfig()
    if profiles:
        feeder = feeder.with_profiles(profiles)
    sol = solve_feeder(feeder, cfg.solver, cfg.power_factor)
    # solution is [t, node, phase]; records are [node, t]
    u_true = vuf_true_array(sol.v, cfg.noise_floor).T
    mag = np.abs(sol.v)
    u_approx = vuf_approx_array(mag, cfg.pvur_literal, cfg.noise_floor).T
    u_alt = vuf_approx_array(mag, not cfg.pvur_literal, cfg.noise_floor).T

    valid = sol.converged
    fs = feeder_stats(feeder.id, u_true, u_approx, cumulative_rx(feeder), cfg.pooled_mean, valid)
    try:
        ratio, ratio_reason = vuf_ratio_series(u_true[:, valid], u_approx[:, valid], cfg.eps_balanced), None
    except ValueError as exc:
        ratio, ratio_reason = None, str(exc)

    s_load = feeder.load_power_pu(cfg.power_factor)
    i_total = np.conj(s_load / sol.v).sum(axis=1)
    s_head = sol.v[:, 0, :] * np.conj(i_total)
    head_kwh = s_head.real * feeder.s_base * feeder.interval_h / 1e3

    return FeederSection(feeder.id, sol.nodes, u_true, u_approx, u_alt, sol.converged,
                         sol.iterations, sol.residual, head_kwh, fs,
                         classify(fs.rho, *cfg.thresholds), ratio, ratio_reason)


def _study_task(args):
    feeder, cfg = args
    try:
        return run_feeder_study(feeder, None, cfg)
    except STUDY_ERRORS as exc:
        return f"{type(exc).__name__}: {exc}"


def run_cohort_study(feeders: Sequence[Feeder], cfg: RunConfig | None = None) -> RunReport:
    """Per-feeder studies (in worker processes when allowed) plus cohort statistics.

    Failing feeders are quarantined and listed; they never enter cohort
    statistics.  ``report.status`` is ``"failed"`` when nothing succeeded.
    """
    cfg = cfg or RunConfig()
    if not feeders:
        raise ValueError("cohort study needs at least one feeder")
    ids = [f.id for f in feeders]
    if len(set(ids)) != len(ids):
        raise ValueError("feeder ids must be unique within a cohort")
    tasks = [(f, cfg) for f in sorted(feeders, key=lambda f: f.id)]
    n = min(cfg.n_workers(), len(tasks))
    if n > 1:
        with ProcessPoolExecutor(max_workers=n) as pool:
            results = list(pool.map(_study_task, tasks))
    else:
        results = [_study_task(t) for t in tasks]

    sections, quarantined = [], {}
    for (f, _), res in zip(tasks, results):
        if isinstance(res, str):
            log.warning("feeder %s quarantined: %s", f.id, res)
            quarantined[f.id] = res
        else:
            sections.append(res)
    cohort = cohort_summary([s.stats for s in sections], cfg.thresholds) if sections else None
    return RunReport(cfg.echo(), sections, quarantined, cohort)


def run_pf_sweep(feeders: Sequence[Feeder], pf_list: Sequence[float],
                 cfg: RunConfig | None = None) -> SweepReport:
    """Full cohort study for each uniform power factor in ``pf_list``."""
    cfg = cfg or RunConfig()
    pf_list = [float(p) for p in pf_list]
    bad = [p for p in pf_list if not 0 < p <= 1]
    if bad:
        raise ValueError(f"power factors outside (0, 1]: {bad}")
    entries = [(pf, run_cohort_study(feeders, replace(cfg, power_factor=pf))) for pf in pf_list]
    echo = cfg.echo()
    echo["power_factors"] = pf_list
    return SweepReport(echo, entries)
