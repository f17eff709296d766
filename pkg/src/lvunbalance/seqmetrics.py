"""Symmetrical components and the two voltage unbalance metrics.

``vuf_true`` is the negative/positive sequence magnitude ratio in percent.
``vuf_approx`` only sees the three phase-voltage magnitudes and is returned as
a plain fraction.  By default it is the largest relative deviation from the
mean magnitude; ``literal=True`` gives ``1 - max(|V_phi| / mean)`` instead,
which is the same number with the sign flipped whenever the extreme phase is
above the mean.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .netmodel import Phasor

# exact operator from cos/sin rather than a rounded literal
A = complex(math.cos(2 * math.pi / 3), math.sin(2 * math.pi / 3))
FORTESCUE = np.array([[1, 1, 1], [1, A, A * A], [1, A * A, A]]) / 3
FORTESCUE_INV = np.array([[1, 1, 1], [1, A * A, A], [1, A, A * A]])
DEGENERATE_PU = 1e-9
EPS_BALANCED = 1e-6


class DegenerateVoltageError(ValueError):
    pass


@dataclass(frozen=True)
class SequenceComponents:
    v0: Phasor
    v1: Phasor
    v2: Phasor

    def to_phases(self) -> tuple[Phasor, Phasor, Phasor]:
        abc = FORTESCUE_INV @ np.array([complex(self.v0), complex(self.v1), complex(self.v2)])
        return tuple(Phasor.from_complex(x) for x in abc)


def sequence_array(v) -> np.ndarray:
    """Zero, positive and negative sequence of ``v[..., 3]`` (last axis a, b, c)."""
    v = np.asarray(v, dtype=complex)
    return v @ FORTESCUE.T


def to_sequence(va, vb, vc) -> SequenceComponents:
    s = sequence_array([complex(va), complex(vb), complex(vc)])
    return SequenceComponents(*(Phasor.from_complex(x) for x in s))


def vuf_true_array(v, floor: float = 0.0) -> np.ndarray:
    """True VUF in percent for ``v[..., 3]``.

    Ratios (as fractions) below ``floor`` are set to exactly zero; this is how
    rounding noise on a perfectly balanced network is kept out of statistics.
    """
    seq = sequence_array(v)
    v1 = np.abs(seq[..., 1])
    if np.any(v1 < DEGENERATE_PU):
        raise DegenerateVoltageError("positive-sequence voltage below 1e-9 pu")
    frac = np.abs(seq[..., 2]) / v1
    if floor:
        frac = np.where(frac < floor, 0.0, frac)
    return 100.0 * frac


def vuf_true(va, vb, vc) -> float:
    return float(vuf_true_array([complex(va), complex(vb), complex(vc)]))


def vuf_approx_array(mag, literal: bool = False, floor: float = 0.0) -> np.ndarray:
    """Magnitude-based unbalance fraction for ``mag[..., 3]``."""
    mag = np.asarray(mag, dtype=float)
    # anchored on phase a so that equal magnitudes give exactly zero
    m0 = mag[..., 0]
    mean = m0 + ((mag[..., 1] - m0) + (mag[..., 2] - m0)) / 3
    if np.any(mean == 0):
        raise ZeroDivisionError("mean phase voltage magnitude is zero")
    if literal:
        u = 1.0 - np.abs(mag / mean[..., None]).max(axis=-1)
    else:
        u = np.abs(mag - mean[..., None]).max(axis=-1) / mean
    if floor:
        u = np.where(np.abs(u) < floor, 0.0, u)
    return u


def vuf_approx(va_mag: float, vb_mag: float, vc_mag: float, literal: bool = False) -> float:
    return float(vuf_approx_array([va_mag, vb_mag, vc_mag], literal))


@dataclass(frozen=True)
class RatioStats:
    mean: float
    median: float
    cv: float
    n_used: int
    n_excluded: int
    by_time: np.ndarray
    by_node: np.ndarray


def vuf_ratio_series(u_true, u_approx, eps: float = EPS_BALANCED) -> RatioStats:
    """Statistics of ``u_true / u_approx`` over a ``(node, t)`` record table.

    Records whose approximate unbalance magnitude does not exceed ``eps`` are
    near-balanced; their ratio blows up, so they are counted and left out.
    ``by_time``/``by_node`` hold the mean ratio per column/row (NaN where
    everything was excluded).
    """
    u_true = np.atleast_2d(np.asarray(u_true, dtype=float))
    u_approx = np.abs(np.atleast_2d(np.asarray(u_approx, dtype=float)))
    if u_true.size == 0:
        raise ValueError("no records")
    ok = u_approx > eps
    if not ok.any():
        raise ValueError(f"all {u_true.size} records are below the balance threshold {eps}")
    ratio = np.full(u_true.shape, np.nan)
    ratio[ok] = u_true[ok] / u_approx[ok]
    used = ratio[ok]
    mean = float(used.mean())
    cv = float(used.std() / mean) if mean else math.inf
    return RatioStats(mean, float(np.median(used)), cv, int(ok.sum()), int((~ok).sum()),
                      _nanmean_axis(ratio, 0), _nanmean_axis(ratio, 1))


def _nanmean_axis(a: np.ndarray, axis: int) -> np.ndarray:
    n = np.sum(~np.isnan(a), axis=axis)
    s = np.nansum(a, axis=axis)
    out = np.full(s.shape, np.nan)
    out[n > 0] = s[n > 0] / n[n > 0]
    return out
