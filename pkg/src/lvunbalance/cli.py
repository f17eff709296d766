"""Command line entry point.

Exit codes: 0 success, 1 usage or validation error, 2 partial failure
(some feeders quarantined), 3 total failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .netmodel import FeederError, load_feeder, load_profiles_csv
from .pfsolver import SolverConfig
from .pipeline import STUDY_ERRORS, RunConfig, RunReport, run_cohort_study, run_feeder_study, run_pf_sweep
from .report import emit_report
from .stats import cohort_summary
from .synthgen import GenSpec, InfeasibleSpecError, write_cohort

EXIT_OK, EXIT_USAGE, EXIT_PARTIAL, EXIT_FAILED = 0, 1, 2, 3


def _pf(text: str) -> float:
    v = float(text)
    if not 0 < v <= 1:
        raise argparse.ArgumentTypeError(f"power factor {v} outside (0, 1]")
    return v


def _pf_list(text: str) -> list[float]:
    return [_pf(p) for p in text.split(",") if p.strip()]


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--pvur-literal", action="store_true",
                   help="use 1 - max(|V|/mean) instead of the deviation magnitude")
    p.add_argument("--pooled-mean", action="store_true",
                   help="demean correlation inputs by the global mean instead of per interval")
    p.add_argument("--tol", type=float, default=1e-8, help="sweep convergence tolerance (pu)")
    p.add_argument("--max-iter", type=int, default=100)
    p.add_argument("--workers", type=int, default=None,
                   help="parallel feeder studies (default: UNBALANCE_THREADS or CPU count)")
    p.add_argument("--out", required=True, type=Path, help="output directory")


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad usage, which would read as "partial failure"
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="lvunbalance", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="generate synthetic feeders")
    g.add_argument("--spec", type=Path, help="GenSpec JSON (defaults used when omitted)")
    g.add_argument("--count", type=int, required=True)
    g.add_argument("--out", type=Path, required=True)

    s = sub.add_parser("study", help="single-feeder study")
    s.add_argument("--feeder", type=Path, required=True)
    s.add_argument("--profiles", type=Path, help="load_id,t,kwh override CSV")
    s.add_argument("--pf", type=_pf, help="uniform power factor override")
    _common(s)

    c = sub.add_parser("cohort", help="study every feeder JSON in a directory")
    c.add_argument("--feeders", type=Path, required=True)
    c.add_argument("--pf", type=_pf)
    _common(c)

    w = sub.add_parser("sweep", help="cohort study for several uniform power factors")
    w.add_argument("--feeders", type=Path, required=True)
    w.add_argument("--pf", type=_pf_list, required=True, help="comma-separated, e.g. 1,0.9,0.8,0.7")
    _common(w)

    v = sub.add_parser("validate", help="check a feeder file")
    v.add_argument("--feeder", type=Path, required=True)
    return ap


def _config(args, pf=None) -> RunConfig:
    return RunConfig(SolverConfig(tol=args.tol, max_iter=args.max_iter), power_factor=pf,
                     pvur_literal=args.pvur_literal, pooled_mean=args.pooled_mean,
                     workers=args.workers)


def _load_dir(path: Path):
    files = sorted(p for p in path.glob("*.json"))
    if not files:
        raise FeederError(f"no feeder JSON files in {path}")
    return [load_feeder(p) for p in files]


def _status_code(status: str) -> int:
    return {"ok": EXIT_OK, "partial": EXIT_PARTIAL, "failed": EXIT_FAILED}[status]


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.cmd == "validate":
            f = load_feeder(args.feeder)
            print(f"{args.feeder}: ok ({f.n_buses} buses, {len(f.lines)} lines, "
                  f"{len(f.loads)} loads, T={f.T})")
            return EXIT_OK

        if args.cmd == "gen":
            spec = GenSpec.load(args.spec) if args.spec else GenSpec()
            paths = write_cohort(spec, args.count, args.out)
            print(f"wrote {len(paths)} feeders to {args.out}")
            return EXIT_OK

        if args.cmd == "study":
            feeder = load_feeder(args.feeder)
            profiles = load_profiles_csv(args.profiles) if args.profiles else None
            cfg = _config(args, args.pf)
            try:
                sec = run_feeder_study(feeder, profiles, cfg)
            except STUDY_ERRORS as exc:
                report = RunReport(cfg.echo(), [], {feeder.id: f"{type(exc).__name__}: {exc}"}, None)
            else:
                report = RunReport(cfg.echo(), [sec], {}, cohort_summary([sec.stats], cfg.thresholds))
            emit_report(report, args.out)
            _summary(report)
            return _status_code(report.status)

        feeders = _load_dir(args.feeders)
        if args.cmd == "cohort":
            report = run_cohort_study(feeders, _config(args, args.pf))
            emit_report(report, args.out)
            _summary(report)
            return _status_code(report.status)

        if args.cmd == "sweep":
            sweep = run_pf_sweep(feeders, args.pf, _config(args))
            emit_report(sweep, args.out)
            for row in sweep.rows():
                print("pf={pf:g} mean_u_true={mean_u_true_pct:.4g}% max={max_u_true_pct:.4g}% "
                      "rho={rho_mean:.4g} rho^2={rho_sq_mean:.4g}".format(**row))
            return _status_code(sweep.status)
    except (FeederError, InfeasibleSpecError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILED
    return EXIT_USAGE


def _summary(report: RunReport) -> None:
    for s in report.sections:
        st = s.stats
        rho = f"{st.rho:.4f}" if st.defined else f"undefined ({st.reason})"
        print(f"{s.feeder_id}: rho={rho} category={s.category} R/X={st.rx_ratio:.2f} "
              f"mean u_true={st.mean_u_true:.4g}%")
    for fid, why in report.quarantined.items():
        print(f"{fid}: quarantined: {why}")
    c = report.cohort
    if c is not None and c.n_feeders > 1:
        print(f"cohort: {c.n_feeders} feeders, rho mean={c.rho_mean:.4f} median={c.rho_median:.4f} "
              f"rho^2 mean={c.rho_sq_mean:.4f}, {c.n_undefined} undefined")
