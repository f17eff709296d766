"""Correlation statistics between true and approximate unbalance.

Record tables are arrays indexed ``[node, t]``.  The per-feeder correlation
demeans every record by the cross-node mean of its own interval, so only the
locational pattern within each interval contributes; ``pooled=True`` demeans
by one global mean (ordinary Pearson over all records).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

HIST_BINS = 20
# demeaned RMS below this fraction of the raw RMS counts as zero variance
ZERO_VARIANCE_REL = 1e-12


class UndefinedCorrelation(ArithmeticError):
    """Correlation cannot be computed; ``reason`` says why."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


def _demean(u: np.ndarray, pooled: bool) -> np.ndarray:
    if pooled:
        return u - u.mean()
    return u - u.mean(axis=0, keepdims=True)


def pearson_feeder(u_true, u_approx, pooled: bool = False, valid=None) -> float:
    """Correlation of the two unbalance tables of one feeder.

    ``valid`` optionally masks intervals (columns) to use, e.g. the converged
    ones.  Raises :class:`UndefinedCorrelation` when either demeaned series has
    no variance, which is what a perfectly balanced feeder produces.
    """
    x = np.atleast_2d(np.asarray(u_true, dtype=float))
    y = np.atleast_2d(np.asarray(u_approx, dtype=float))
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch {x.shape} vs {y.shape}")
    if valid is not None:
        x, y = x[:, valid], y[:, valid]
    if x.size < 2:
        raise UndefinedCorrelation(f"need at least 2 records, got {x.size}")
    dx, dy = _demean(x, pooled), _demean(y, pooled)
    sxx, syy = float((dx * dx).sum()), float((dy * dy).sum())
    for name, ss, raw in (("u_true", sxx, x), ("u_approx", syy, y)):
        if math.sqrt(ss) <= ZERO_VARIANCE_REL * math.sqrt(float((raw * raw).sum())):
            raise UndefinedCorrelation(f"{name} has zero variance after demeaning (balanced feeder)")
    return float((dx * dy).sum() / math.sqrt(sxx * syy))


@dataclass(frozen=True)
class FeederStats:
    feeder_id: str
    rho: float
    rho_sq: float
    mean_u_true: float
    max_u_true: float
    mean_u_approx: float
    r_ohm: float
    x_ohm: float
    rx_ratio: float
    n_records: int = 0
    reason: str | None = None

    @property
    def defined(self) -> bool:
        return not math.isnan(self.rho)


def feeder_stats(feeder_id: str, u_true, u_approx, rx: tuple[float, float, float],
                 pooled: bool = False, valid=None) -> FeederStats:
    x = np.atleast_2d(np.asarray(u_true, dtype=float))
    y = np.atleast_2d(np.asarray(u_approx, dtype=float))
    if valid is not None:
        x, y = x[:, valid], y[:, valid]
    try:
        rho, reason = pearson_feeder(x, y, pooled), None
    except UndefinedCorrelation as exc:
        rho, reason = math.nan, exc.reason
    return FeederStats(feeder_id, rho, rho * rho, float(x.mean()), float(x.max()),
                       float(y.mean()), *rx, n_records=int(x.size), reason=reason)


@dataclass(frozen=True)
class Histogram:
    edges: np.ndarray
    counts: np.ndarray


def histogram(values, bins: int = HIST_BINS) -> Histogram:
    counts, edges = np.histogram(np.asarray(values, dtype=float), bins=bins)
    return Histogram(edges, counts)


@dataclass(frozen=True)
class CohortStats:
    n_feeders: int
    n_defined: int
    n_undefined: int
    rho_mean: float
    rho_sq_mean: float
    rho_median: float
    rho_hist: Histogram
    rx_hist: Histogram
    rx_mean: float
    rx_variance: float
    mean_u_true: float
    max_u_true: float
    categories: dict[str, int] = field(default_factory=dict)


def cohort_summary(all_stats: list[FeederStats], thresholds: tuple[float, float] = (0.0, 0.5)) -> CohortStats:
    """Cohort means of the feeder correlations and of its squares.

    Feeders with undefined correlation are counted and left out of the
    correlation statistics; they still enter the R/X and unbalance summaries.
    """
    if not all_stats:
        raise ValueError("empty cohort")
    rho = np.array([s.rho for s in all_stats if s.defined])
    rx = np.array([s.rx_ratio for s in all_stats])
    n_rec = np.array([s.n_records for s in all_stats], dtype=float)
    means = np.array([s.mean_u_true for s in all_stats])
    if rho.size:
        rho_mean, rho_sq_mean, rho_med = float(rho.mean()), float((rho * rho).mean()), float(np.median(rho))
    else:
        rho_mean = rho_sq_mean = rho_med = math.nan
    mean_u = float((means * n_rec).sum() / n_rec.sum()) if n_rec.sum() else float(means.mean())
    cats: dict[str, int] = {c: 0 for c in CATEGORIES}
    for c in classify_feeders(all_stats, *thresholds).values():
        cats[c] += 1
    return CohortStats(
        n_feeders=len(all_stats), n_defined=int(rho.size), n_undefined=len(all_stats) - int(rho.size),
        rho_mean=rho_mean, rho_sq_mean=rho_sq_mean, rho_median=rho_med,
        rho_hist=histogram(rho) if rho.size else Histogram(np.array([]), np.array([], dtype=int)),
        rx_hist=histogram(rx), rx_mean=float(rx.mean()),
        rx_variance=float(rx.var(ddof=1)) if rx.size > 1 else 0.0,
        mean_u_true=mean_u, max_u_true=float(max(s.max_u_true for s in all_stats)),
        categories=cats)


CATEGORIES = ("undefined", "negative", "weak", "strong")


def classify(rho: float, negative: float = 0.0, weak: float = 0.5) -> str:
    if math.isnan(rho):
        return "undefined"
    if rho < negative:
        return "negative"
    if rho < weak:
        return "weak"
    return "strong"


def classify_feeders(all_stats: list[FeederStats], negative: float = 0.0,
                     weak: float = 0.5) -> dict[str, str]:
    return {s.feeder_id: classify(s.rho, negative, weak) for s in all_stats}
