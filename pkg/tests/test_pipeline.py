import json
import os
import subprocess
import sys

import numpy as np
import pytest

from lvunbalance import cli
from lvunbalance.netmodel import Load, bundled_path, save_feeder
from lvunbalance.pfsolver import SolverConfig
from lvunbalance.pipeline import RunConfig, run_cohort_study, run_feeder_study, run_pf_sweep
from lvunbalance.report import emit_report, load_report, strip_timestamps
from lvunbalance.synthgen import GenSpec, generate_cohort

from conftest import chain

SERIAL = RunConfig(workers=1)


@pytest.fixture(scope="module")
def small_cohort():
    return generate_cohort(GenSpec(seed=3, n_buses=(10, 20), n_loads=(4, 9)), 6)


@pytest.fixture(scope="module")
def cohort_report(small_cohort):
    return run_cohort_study(small_cohort, SERIAL)


def test_balanced_feeder_all_zero(feeder_bal):
    sec = run_feeder_study(feeder_bal, cfg=SERIAL)
    assert np.all(sec.u_true == 0) and np.all(sec.u_approx == 0)
    assert not sec.stats.defined and sec.stats.reason
    assert sec.category == "undefined"
    assert sec.ratio is None and sec.ratio_reason


def test_single_phase_load_worst_downstream():
    z = np.diag([0.05 + 0.01j] * 3)
    prof = np.array([0.5, 4.0, 1.0])
    f = chain(5, z, [Load("b2", "a", prof)], T=3)
    sec = run_feeder_study(f, cfg=SERIAL)
    peak = int(np.argmax(prof))
    worst = sec.nodes[int(np.argmax(sec.u_true[:, peak]))]
    assert worst in ("b2", "b3", "b4")
    assert sec.u_true[0, peak] == 0  # slack stays balanced
    assert sec.stats.defined


def test_profile_override(feeder41):
    ids = [ld.id for ld in feeder41.loads]
    doubled = {i: 2 * np.asarray(ld.profile) for i, ld in zip(ids, feeder41.loads)}
    base = run_feeder_study(feeder41, cfg=SERIAL)
    heavy = run_feeder_study(feeder41, doubled, SERIAL)
    assert heavy.stats.mean_u_true > base.stats.mean_u_true


def test_cohort_counts(cohort_report, small_cohort):
    rep = cohort_report
    assert rep.status == "ok"
    assert [s.feeder_id for s in rep.sections] == sorted(f.id for f in small_cohort)
    c = rep.cohort
    assert c.n_feeders == len(small_cohort) == c.n_defined + c.n_undefined
    assert sum(c.categories.values()) == c.n_feeders


def test_identical_feeders_mean_equals_median(feeder41):
    from dataclasses import replace
    copies = [replace(feeder41, id=f"copy{k}") for k in range(3)]
    rep = run_cohort_study(copies, SERIAL)
    assert rep.cohort.rho_mean == pytest.approx(rep.cohort.rho_median, abs=1e-15)
    assert rep.cohort.rx_variance == pytest.approx(0, abs=1e-20)


def test_quarantine_and_status(feeder41, small_cohort):
    from dataclasses import replace
    heavy = feeder41.with_profiles({ld.id: 500 * np.asarray(ld.profile) for ld in feeder41.loads})
    heavy = replace(heavy, id="zz_heavy")
    rep = run_cohort_study([*small_cohort[:2], heavy], SERIAL)
    assert rep.status == "partial"
    assert list(rep.quarantined) == ["zz_heavy"]
    assert rep.cohort.n_feeders == 2
    only = run_cohort_study([heavy], SERIAL)
    assert only.status == "failed" and only.cohort is None


def test_cohort_rejects_duplicates(feeder41):
    with pytest.raises(ValueError):
        run_cohort_study([feeder41, feeder41], SERIAL)
    with pytest.raises(ValueError):
        run_cohort_study([], SERIAL)


def test_parallel_matches_serial(small_cohort, cohort_report):
    par = run_cohort_study(small_cohort, RunConfig(workers=2))
    for a, b in zip(par.sections, cohort_report.sections):
        np.testing.assert_array_equal(a.u_true, b.u_true)
        assert a.stats.rho == b.stats.rho or (np.isnan(a.stats.rho) and np.isnan(b.stats.rho))


def test_env_workers(monkeypatch):
    monkeypatch.setenv("UNBALANCE_THREADS", "3")
    assert RunConfig().n_workers() == 3
    assert RunConfig(workers=1).n_workers() == 1


def test_sweep_repeated_pf_identical(small_cohort):
    sw = run_pf_sweep(small_cohort[:3], [1.0, 1.0], SERIAL)
    (_, a), (_, b) = sw.entries
    assert a.cohort.rho_mean == b.cohort.rho_mean
    assert len(sw.rows()) == 2 and sw.status == "ok"
    with pytest.raises(ValueError):
        run_pf_sweep(small_cohort, [1.2], SERIAL)


def test_sweep_pf_lowers_voltage(small_cohort):
    sw = run_pf_sweep(small_cohort[:3], [1.0, 0.8], SERIAL)
    r1, r8 = sw.rows()
    assert r8["mean_u_true_pct"] > r1["mean_u_true_pct"]


def test_literal_mode_sign(feeder41):
    sec = run_feeder_study(feeder41, cfg=RunConfig(pvur_literal=True, workers=1))
    assert np.all(sec.u_approx <= 0)
    assert np.all(sec.u_approx_alt >= 0)


def test_emit_files(tmp_path, cohort_report):
    emit_report(cohort_report, tmp_path)
    doc = load_report(tmp_path / "report.json")
    assert doc["status"] == "ok" and doc["provenance"]["timestamp"]
    rows = (tmp_path / "records.csv").read_text().strip().splitlines()
    expected = sum(s.u_true.size for s in cohort_report.sections)
    assert len(rows) - 1 == expected
    for name in ("feeders.csv", "cohort.csv", "plot_head_energy.csv", "plot_ratio_by_time.csv",
                 "plot_vuf_scatter.csv", "plot_rho_vs_rx.csv", "plot_rho_hist.csv", "plot_rx_hist.csv"):
        assert (tmp_path / name).exists(), name
    hist = (tmp_path / "plot_rho_hist.csv").read_text().strip().splitlines()
    assert len(hist) == 21


def test_emit_empty_cohort_header_only(tmp_path, feeder41):
    from dataclasses import replace
    heavy = replace(feeder41.with_profiles({ld.id: 500 * np.asarray(ld.profile)
                                             for ld in feeder41.loads}), id="h")
    rep = run_cohort_study([heavy], SERIAL)
    emit_report(rep, tmp_path)
    assert (tmp_path / "cohort.csv").read_text().count("\n") == 1
    doc = load_report(tmp_path / "report.json")
    assert doc["status"] == "failed" and doc["cohort"] is None and "h" in doc["quarantined"]


def test_emit_nan_is_null(tmp_path, feeder_bal):
    rep = run_cohort_study([feeder_bal], SERIAL)
    emit_report(rep, tmp_path)
    doc = load_report(tmp_path / "report.json")
    st = doc["feeders"][0]["stats"]
    assert st["rho"] is None and st["undefined_reason"]


def test_emit_deterministic(tmp_path, small_cohort):
    a = run_cohort_study(small_cohort, SERIAL)
    b = run_cohort_study(small_cohort, SERIAL)
    emit_report(a, tmp_path / "a")
    emit_report(b, tmp_path / "b")
    for name in ("records.csv", "feeders.csv", "cohort.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    da, db = (strip_timestamps(load_report(tmp_path / d / "report.json")) for d in "ab")
    assert da == db


def test_emit_sweep_layout(tmp_path, small_cohort):
    sw = run_pf_sweep(small_cohort[:2], [1.0, 0.9], SERIAL)
    emit_report(sw, tmp_path)
    assert (tmp_path / "sweep.json").exists()
    assert (tmp_path / "pf_0_1" / "report.json").exists()
    assert (tmp_path / "pf_1_0.9" / "records.csv").exists()
    assert len((tmp_path / "sweep.csv").read_text().strip().splitlines()) == 3


@pytest.fixture
def feeder_dir(tmp_path, small_cohort):
    d = tmp_path / "feeders"
    d.mkdir()
    for f in small_cohort[:3]:
        save_feeder(f, d / f"{f.id}.json")
    return d


def test_cli_validate(capsys):
    assert cli.main(["validate", "--feeder", str(bundled_path("feeder_41bus.json"))]) == 0
    assert "41 buses" in capsys.readouterr().out


def test_cli_validate_bad(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"id": "x", "buses": [], "lines": [], "loads": []}))
    assert cli.main(["validate", "--feeder", str(bad)]) == 1
    assert "error" in capsys.readouterr().err


def test_cli_gen(tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps(GenSpec(seed=5, n_buses=(6, 8), n_loads=(2, 4)).to_dict()))
    assert cli.main(["gen", "--spec", str(spec), "--count", "2", "--out", str(tmp_path / "g")]) == 0
    assert len(list((tmp_path / "g").glob("*.json"))) == 2
    assert len(list((tmp_path / "g").glob("*_profiles.csv"))) == 2


def test_cli_gen_infeasible(tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"n_buses": [3, 4], "n_loads": [10, 12]}))
    assert cli.main(["gen", "--spec", str(spec), "--count", "1", "--out", str(tmp_path / "g")]) == 1


def test_cli_study_balanced(tmp_path):
    code = cli.main(["study", "--feeder", str(bundled_path("feeder_balanced.json")),
                     "--out", str(tmp_path), "--workers", "1"])
    assert code == 0
    assert "undefined" in (tmp_path / "feeders.csv").read_text()


def test_cli_study_collapse_exit3(tmp_path, feeder41):
    heavy = feeder41.with_profiles({ld.id: 500 * np.asarray(ld.profile) for ld in feeder41.loads})
    p = tmp_path / "heavy.json"
    save_feeder(heavy, p)
    assert cli.main(["study", "--feeder", str(p), "--out", str(tmp_path / "o")]) == 3


def test_cli_cohort_and_sweep(tmp_path, feeder_dir, capsys):
    assert cli.main(["cohort", "--feeders", str(feeder_dir), "--out", str(tmp_path / "c"),
                     "--workers", "1"]) == 0
    assert "cohort:" in capsys.readouterr().out
    assert cli.main(["sweep", "--feeders", str(feeder_dir), "--pf", "1,0.8",
                     "--out", str(tmp_path / "s"), "--workers", "1"]) == 0
    assert "pf=0.8" in capsys.readouterr().out


def test_cli_partial_exit2(tmp_path, feeder_dir, feeder41):
    from dataclasses import replace
    heavy = replace(feeder41.with_profiles({ld.id: 500 * np.asarray(ld.profile)
                                             for ld in feeder41.loads}), id="zz")
    save_feeder(heavy, feeder_dir / "zz.json")
    assert cli.main(["cohort", "--feeders", str(feeder_dir), "--out", str(tmp_path / "c"),
                     "--workers", "1"]) == 2


def test_cli_usage_errors(tmp_path):
    with pytest.raises(SystemExit) as exc:
        cli.main(["sweep", "--feeders", str(tmp_path), "--pf", "1.5", "--out", str(tmp_path)])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        cli.main([])
    assert exc.value.code == 1
    assert cli.main(["cohort", "--feeders", str(tmp_path), "--out", str(tmp_path / "o")]) == 1


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "lvunbalance", "validate", "--feeder",
                          str(bundled_path("feeder_2bus.json"))],
                         capture_output=True, text=True, env={**os.environ})
    assert out.returncode == 0, out.stderr


def test_feeder_columns_rederivable_from_records(tmp_path, cohort_report):
    import csv
    from collections import defaultdict
    from lvunbalance.stats import pearson_feeder
    emit_report(cohort_report, tmp_path)
    recs = defaultdict(list)
    with open(tmp_path / "records.csv") as fh:
        for r in csv.DictReader(fh):
            recs[r["feeder"]].append(r)
    with open(tmp_path / "feeders.csv") as fh:
        rows = {r["feeder_id"]: r for r in csv.DictReader(fh)}
    for fid, rr in recs.items():
        nodes = sorted({r["node"] for r in rr}, key=[r["node"] for r in rr].index)
        T = max(int(r["t"]) for r in rr) + 1
        ut, ua = np.zeros((len(nodes), T)), np.zeros((len(nodes), T))
        for r in rr:
            i = nodes.index(r["node"])
            ut[i, int(r["t"])] = float(r["u_true_pct"])
            ua[i, int(r["t"])] = float(r["u_approx_frac"])
        assert pearson_feeder(ut, ua) == pytest.approx(float(rows[fid]["rho"]), rel=1e-9)
        assert ut.mean() == pytest.approx(float(rows[fid]["mean_u_true_pct"]), rel=1e-9)
        assert ut.max() == pytest.approx(float(rows[fid]["max_u_true_pct"]), rel=1e-11)
