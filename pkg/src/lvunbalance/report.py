"""Serialization of study reports to JSON and CSV tables.

Floats are written with 12 significant digits.  NaN becomes ``null`` in JSON
and an empty cell in CSV.  The only run-dependent field is
``provenance.timestamp``.
"""
from __future__ import annotations

import csv
import datetime as _dt
import json
import math
import platform
from pathlib import Path

import numpy as np

from . import __version__
from .pipeline import FeederSection, RunReport, SweepReport
from .stats import CohortStats, Histogram

SIG = 12


def _num(x):
    if x is None:
        return None
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    x = float(x)
    if math.isnan(x) or math.isinf(x):
        return None
    return float(f"{x:.{SIG}g}")


def _tree(x):
    if isinstance(x, dict):
        return {k: _tree(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_tree(v) for v in x]
    if isinstance(x, np.ndarray):
        return _tree(x.tolist())
    if isinstance(x, (str, type(None))):
        return x
    return _num(x)


def _cell(x) -> str:
    if isinstance(x, str):
        return x
    v = _num(x)
    return "" if v is None else (str(v) if isinstance(v, (bool, int)) else f"{v:.{SIG}g}")


def _hist(h: Histogram) -> dict:
    return {"edges": h.edges, "counts": h.counts}


def _cohort(c: CohortStats | None) -> dict | None:
    if c is None:
        return None
    return {
        "n_feeders": c.n_feeders, "n_defined": c.n_defined, "n_undefined": c.n_undefined,
        "rho_mean": c.rho_mean, "rho_sq_mean": c.rho_sq_mean, "rho_median": c.rho_median,
        "rho_hist": _hist(c.rho_hist), "rx_hist": _hist(c.rx_hist),
        "rx_mean": c.rx_mean, "rx_variance": c.rx_variance,
        "mean_u_true_pct": c.mean_u_true, "max_u_true_pct": c.max_u_true,
        "categories": dict(c.categories),
    }


def _section(s: FeederSection) -> dict:
    st = s.stats
    r = s.ratio
    return {
        "feeder_id": s.feeder_id,
        "stats": {
            "rho": st.rho, "rho_sq": st.rho_sq, "undefined_reason": st.reason,
            "category": s.category, "mean_u_true_pct": st.mean_u_true,
            "max_u_true_pct": st.max_u_true, "mean_u_approx_frac": st.mean_u_approx,
            "r_ohm": st.r_ohm, "x_ohm": st.x_ohm, "rx_ratio": st.rx_ratio,
            "n_records": st.n_records,
        },
        "ratio": None if r is None else {
            "mean": r.mean, "median": r.median, "cv": r.cv,
            "n_used": r.n_used, "n_excluded": r.n_excluded,
            "by_time": r.by_time, "by_node": r.by_node,
        },
        "ratio_reason": s.ratio_reason,
        "solver": {"converged": s.converged, "iterations": s.iterations, "residual": s.residual},
        "head_energy_kwh": s.head_energy_kwh,
        "records": {"nodes": list(s.nodes), "u_true_pct": s.u_true,
                    "u_approx_frac": s.u_approx, "u_approx_alt_frac": s.u_approx_alt},
    }


def provenance() -> dict:
    return {
        "package": "lvunbalance", "version": __version__, "numpy": np.__version__,
        "python": platform.python_version(),
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }


def report_to_dict(report: RunReport | SweepReport) -> dict:
    prov = report.provenance or provenance()
    if isinstance(report, SweepReport):
        return _tree({
            "kind": "sweep", "status": report.status, "config": report.config,
            "summary": report.rows(),
            "runs": [{"pf": pf, "report": report_to_dict(rep)} for pf, rep in report.entries],
            "provenance": prov,
        })
    return _tree({
        "kind": "cohort", "status": report.status, "config": report.config,
        "feeders": [_section(s) for s in sorted(report.sections, key=lambda s: s.feeder_id)],
        "quarantined": dict(sorted(report.quarantined.items())),
        "cohort": _cohort(report.cohort),
        "provenance": prov,
    })


def strip_timestamps(doc):
    """Copy of a report document with every ``provenance.timestamp`` removed."""
    if isinstance(doc, dict):
        return {k: (strip_timestamps(v) if k != "provenance" else
                    {pk: pv for pk, pv in v.items() if pk != "timestamp"})
                for k, v in doc.items()}
    if isinstance(doc, list):
        return [strip_timestamps(v) for v in doc]
    return doc


def _write_csv(path: Path, header, rows) -> None:
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_cell(v) for v in row])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


RECORD_COLS = ["feeder", "node", "t", "u_true_pct", "u_approx_frac", "ratio", "converged"]
FEEDER_COLS = ["feeder_id", "rho", "rho_sq", "category", "undefined_reason", "mean_u_true_pct",
               "max_u_true_pct", "mean_u_approx_frac", "r_ohm", "x_ohm", "rx_ratio", "n_records",
               "ratio_mean", "ratio_median", "ratio_cv", "ratio_excluded", "n_unconverged",
               "max_iterations"]
COHORT_COLS = ["n_feeders", "n_defined", "n_undefined", "n_quarantined", "rho_mean", "rho_sq_mean",
               "rho_median", "rx_mean", "rx_variance", "mean_u_true_pct", "max_u_true_pct",
               "n_undefined_cat", "n_negative", "n_weak", "n_strong"]
SWEEP_COLS = ["pf", "mean_u_true_pct", "max_u_true_pct", "rho_mean", "rho_sq_mean", "rho_median",
              "n_defined", "n_quarantined"]


def _record_rows(sections, eps):
    for s in sections:
        ua = np.abs(s.u_approx)
        for i, node in enumerate(s.nodes):
            for t in range(s.u_true.shape[1]):
                ratio = s.u_true[i, t] / ua[i, t] if ua[i, t] > eps else None
                yield [s.feeder_id, node, t, s.u_true[i, t], s.u_approx[i, t], ratio,
                       int(s.converged[t])]


def _emit_run(report: RunReport, out: Path, sweep_rows=()) -> None:
    out.mkdir(parents=True, exist_ok=True)
    doc = report_to_dict(report)
    (out / "report.json").write_text(json.dumps(doc, indent=1, sort_keys=False) + "\n")
    secs = sorted(report.sections, key=lambda s: s.feeder_id)
    eps = report.config.get("eps_balanced", 1e-6)
    literal = report.config.get("pvur_literal", False)

    _write_csv(out / "records.csv", RECORD_COLS, _record_rows(secs, eps))

    def frow(s):
        st, r = s.stats, s.ratio
        return [s.feeder_id, st.rho, st.rho_sq, s.category, st.reason or "", st.mean_u_true,
                st.max_u_true, st.mean_u_approx, st.r_ohm, st.x_ohm, st.rx_ratio, st.n_records,
                r.mean if r else None, r.median if r else None, r.cv if r else None,
                r.n_excluded if r else None, int((~s.converged).sum()), int(s.iterations.max())]
    _write_csv(out / "feeders.csv", FEEDER_COLS, (frow(s) for s in secs))

    c = report.cohort
    crow = [] if c is None else [[
        c.n_feeders, c.n_defined, c.n_undefined, len(report.quarantined), c.rho_mean,
        c.rho_sq_mean, c.rho_median, c.rx_mean, c.rx_variance, c.mean_u_true, c.max_u_true,
        c.categories.get("undefined", 0), c.categories.get("negative", 0),
        c.categories.get("weak", 0), c.categories.get("strong", 0)]]
    _write_csv(out / "cohort.csv", COHORT_COLS, crow)
    _write_csv(out / "sweep.csv", SWEEP_COLS, ([r[k] for k in SWEEP_COLS] for r in sweep_rows))

    # plot data
    _write_csv(out / "plot_head_energy.csv", ["feeder", "t", "phase_a_kwh", "phase_b_kwh", "phase_c_kwh"],
               ([s.feeder_id, t, *s.head_energy_kwh[t]] for s in secs
                for t in range(len(s.head_energy_kwh))))
    _write_csv(out / "plot_ratio_by_time.csv", ["feeder", "t", "ratio_mean"],
               ([s.feeder_id, t, v] for s in secs if s.ratio for t, v in enumerate(s.ratio.by_time)))
    _write_csv(out / "plot_ratio_by_node.csv", ["feeder", "node", "ratio_mean"],
               ([s.feeder_id, n, v] for s in secs if s.ratio for n, v in zip(s.nodes, s.ratio.by_node)))

    def scatter():
        for s in secs:
            dev, lit = (s.u_approx_alt, s.u_approx) if literal else (s.u_approx, s.u_approx_alt)
            for i, node in enumerate(s.nodes):
                for t in range(s.u_true.shape[1]):
                    yield [s.feeder_id, node, t, s.u_true[i, t], dev[i, t], lit[i, t]]
    _write_csv(out / "plot_vuf_scatter.csv",
               ["feeder", "node", "t", "u_true_pct", "u_approx_deviation_frac", "u_approx_literal_frac"],
               scatter())
    _write_csv(out / "plot_rho_vs_rx.csv", ["feeder", "rx_ratio", "rho", "category"],
               ([s.feeder_id, s.stats.rx_ratio, s.stats.rho, s.category] for s in secs))
    for name, h in (("plot_rho_hist.csv", c.rho_hist if c else None),
                    ("plot_rx_hist.csv", c.rx_hist if c else None)):
        rows = [] if h is None else ([h.edges[k], h.edges[k + 1], h.counts[k]]
                                     for k in range(len(h.counts)))
        _write_csv(out / name, ["bin_lo", "bin_hi", "count"], rows)


def emit_report(report: RunReport | SweepReport, out_dir, fmt: str = "all") -> Path:
    """Write ``report.json`` and the CSV tables under ``out_dir``.

    A sweep writes ``sweep.json``/``sweep.csv`` at the top level and one full
    run directory ``pf_<k>_<value>/`` per power factor.  ``fmt="json"`` skips
    the CSV tables.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    if isinstance(report, SweepReport):
        if not report.provenance:
            report.provenance = provenance()
        doc = report_to_dict(report)
        (out / "sweep.json").write_text(json.dumps(doc, indent=1) + "\n")
        _write_csv(out / "sweep.csv", SWEEP_COLS, ([r[k] for k in SWEEP_COLS] for r in report.rows()))
        if fmt != "json":
            for k, (pf, rep) in enumerate(report.entries):
                rep.provenance = rep.provenance or report.provenance
                _emit_run(rep, out / f"pf_{k}_{pf:g}")
        return out / "sweep.json"
    if not report.provenance:
        report.provenance = provenance()
    if fmt == "json":
        (out / "report.json").write_text(json.dumps(report_to_dict(report), indent=1) + "\n")
    else:
        _emit_run(report, out)
    return out / "report.json"


def load_report(path) -> dict:
    return json.loads(Path(path).read_text())
