"""Voltage unbalance metrics on radial three-phase LV feeders.

Simulates multi-period unbalanced power flow and compares the
sequence-component voltage unbalance factor with a metric built only from
phase-voltage magnitudes.
"""
__version__ = "0.1.0"

from .netmodel import (Bus, Feeder, FeederFormatError, FeederValidationError, Line, Load, Phasor,
                       bundled_path, cumulative_rx, kron_reduce, load_feeder, save_feeder)
from .pfsolver import SolverConfig, VoltageSolution, solve_feeder, solve_timestep
from .seqmetrics import to_sequence, vuf_approx, vuf_ratio_series, vuf_true
from .stats import (UndefinedCorrelation, classify_feeders, cohort_summary, pearson_feeder)
from .synthgen import GenSpec, generate_cohort, generate_feeder, generate_profiles, write_cohort
from .pipeline import RunConfig, run_cohort_study, run_feeder_study, run_pf_sweep
from .report import emit_report

__all__ = [
    "Bus", "Feeder", "FeederFormatError", "FeederValidationError", "Line", "Load", "Phasor",
    "bundled_path", "cumulative_rx", "kron_reduce", "load_feeder", "save_feeder",
    "SolverConfig", "VoltageSolution", "solve_feeder", "solve_timestep",
    "to_sequence", "vuf_approx", "vuf_ratio_series", "vuf_true",
    "UndefinedCorrelation", "classify_feeders", "cohort_summary", "pearson_feeder",
    "GenSpec", "generate_cohort", "generate_feeder", "generate_profiles", "write_cohort",
    "RunConfig", "run_cohort_study", "run_feeder_study", "run_pf_sweep", "emit_report",
]
