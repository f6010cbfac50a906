import csv
import json

import numpy as np
import pytest

from bangbang_ipeps import cli
from bangbang_ipeps.cli import build_parser, main
from bangbang_ipeps.container import write_json
from bangbang_ipeps.optimize import BBReport, ScanResult
from bangbang_ipeps.sequences import bb_sequence, save_sequence


@pytest.fixture(autouse=True)
def isolated(clean_env):
    return clean_env


def test_parser_knows_every_command():
    parser = build_parser()
    for argv in (["evolve", "--sequence", "s.json"], ["scan-dt", "--N", "2", "3"],
                 ["optimize-bb", "--N", "2"], ["correlate", "--state", "st"],
                 ["validate"], ["summary", "a.json"]):
        assert parser.parse_args(argv).command == argv[0]


def test_evolve_zero_angle_sequence(isolated):
    save_sequence(bb_sequence([0.0], [0.0]), isolated / "zero.json")
    code = main(["evolve", "--sequence", str(isolated / "zero.json"), "--out", str(isolated / "run"),
                 "--chi", "4"])
    assert code == 0
    observables = json.loads((isolated / "run" / "observables.json").read_text())
    assert observables["energy"] == pytest.approx(-1.55, abs=1e-10)
    evolution = json.loads((isolated / "run" / "evolution.json").read_text())
    assert evolution["epsilon_total"] == 0.0
    for record in (observables, evolution):
        assert record["provenance"]["seed"] == 0
        assert record["provenance"]["config"]["chi"] == 4
        assert record["provenance"]["sequence"].endswith("zero.json")
    assert (isolated / "run" / "state" / "manifest.json").exists()


def test_correlate_product_state(isolated):
    save_sequence(bb_sequence([0.0], [0.0]), isolated / "zero.json")
    assert main(["evolve", "--sequence", str(isolated / "zero.json"), "--out",
                 str(isolated / "run"), "--chi", "4"]) == 0
    code = main(["correlate", "--state", str(isolated / "run" / "state"), "--rmax", "4",
                 "--chi", "4", "--out", str(isolated / "corr")])
    assert code == 0
    with (isolated / "corr" / "correlator_ZZ.csv").open() as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["r", "C_conn"]
    assert all(abs(float(c)) < 1e-12 for _, c in rows[1:])


def test_invalid_sequence_exits_2(isolated):
    (isolated / "bad.json").write_text('{"kind": "BB", "N": 2}')
    assert main(["evolve", "--sequence", str(isolated / "bad.json")]) == 2


def test_invalid_config_exits_2(isolated):
    (isolated / "cfg.json").write_text('{"J": 0.5}')
    save_sequence(bb_sequence([0.0], [0.0]), isolated / "zero.json")
    assert main(["evolve", "--config", str(isolated / "cfg.json"),
                 "--sequence", str(isolated / "zero.json")]) == 2


def test_bad_grid_exits_2():
    assert main(["scan-dt", "--N", "2", "--grid", "a:b:c"]) == 2


def test_warm_start_without_previous_exits_2():
    assert main(["optimize-bb", "--N", "2", "--strategy", "warm_start"]) == 2


def test_summary_merges_results(isolated):
    write_json(isolated / "ap.json", ScanResult(N=2, variant="para_target", curve=[(0.4, -1.5)],
                                                dt_star=0.1, energy_star=-1.575))
    write_json(isolated / "bb.json", BBReport(N=2, strategies=["ap_seed"], energy=-1.637,
                                              epsilon_ntu=0.0, tainted=False,
                                              budget_exhausted=False, n_evals=10))
    assert main(["summary", str(isolated / "ap.json"), str(isolated / "bb.json"),
                 "--out", str(isolated / "out")]) == 0
    with (isolated / "out" / "summary.csv").open() as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["N", "protocol", "energy", "epsilon_ntu"]
    assert [r[1] for r in rows[1:]] == ["AP", "BB"]
    sidecar = json.loads((isolated / "out" / "summary.meta.json").read_text())
    assert sidecar["columns"] == rows[0]
    assert len(sidecar["provenance"]["results"]) == 2


def test_summary_rejects_unknown_records(isolated):
    (isolated / "x.json").write_text('{"N": 2}')
    assert main(["summary", str(isolated / "x.json")]) == 2


@pytest.mark.slow
def test_validate_depth_one(isolated):
    code = main(["validate", "--depth", "1", "--n-random", "3", "--chi", "16",
                 "--out", str(isolated / "val")])
    assert code == 0
    summary = json.loads((isolated / "val" / "validate.json").read_text())
    assert summary["passed"] and summary["max_diff"] <= 1e-8


def _fake_bb(energy=-1.637, **flags):
    seq = bb_sequence([0.1, 0.2], [0.3, 0.4])
    report = BBReport(N=2, strategies=["ap_seed"], energy=energy, epsilon_ntu=0.0,
                      tainted=False, budget_exhausted=False, n_evals=10, **flags)

    def optimize_bb(*args, **kwargs):
        return seq, energy, report

    return optimize_bb


def test_optimize_bb_records_provenance(isolated, monkeypatch):
    monkeypatch.setattr(cli, "optimize_bb", _fake_bb())
    assert main(["optimize-bb", "--N", "2", "--seed", "5", "--out", str(isolated / "bb")]) == 0
    stored = json.loads((isolated / "bb" / "bb_N2.json").read_text())
    assert stored["metadata"]["provenance"]["seed"] == 5
    assert stored["metadata"]["provenance"]["strategies"] == ["ap_seed"]
    report = json.loads((isolated / "bb" / "bb_N2_report.json").read_text())
    assert report["energy"] == -1.637
    assert report["provenance"]["config"]["N"] == 2


def test_optimize_bb_below_floor_exits_4(isolated, monkeypatch):
    monkeypatch.setattr(cli, "optimize_bb", _fake_bb(energy=-1.7, below_floor=True))
    assert main(["optimize-bb", "--N", "2", "--out", str(isolated / "bb")]) == 4


def test_optimize_bb_interrupt_exits_130(isolated, monkeypatch):
    def interrupted(*args, **kwargs):
        raise KeyboardInterrupt

    monkeypatch.setattr(cli, "optimize_bb", interrupted)
    assert main(["optimize-bb", "--N", "2", "--out", str(isolated / "bb")]) == 130


def test_linalg_failure_exits_3(isolated, monkeypatch):
    def singular(*args, **kwargs):
        raise np.linalg.LinAlgError("SVD did not converge")

    monkeypatch.setattr(cli, "optimize_bb", singular)
    assert main(["optimize-bb", "--N", "2", "--out", str(isolated / "bb")]) == 3


def test_scan_dt_writes_sidecars(isolated, monkeypatch):
    def scan_dt(N, grid, *args, **kwargs):
        return ScanResult(N=N, variant="para_target", curve=[(0.2 * N, -1.5), (0.4 * N, -1.55)],
                          dt_star=0.2, energy_star=-1.55)

    monkeypatch.setattr(cli, "scan_dt", scan_dt)
    assert main(["scan-dt", "--N", "2", "3", "--grid", "0.1:0.3:2", "--seed", "9",
                 "--out", str(isolated / "ap")]) == 0
    scan = json.loads((isolated / "ap" / "scan_N2.json").read_text())
    assert scan["dt_star"] == 0.2
    assert scan["provenance"]["seed"] == 9
    for name in ("scan_N2.meta.json", "scan_N3.meta.json", "energy_vs_N.meta.json"):
        sidecar = json.loads((isolated / "ap" / name).read_text())
        assert sidecar["provenance"]["seed"] == 9
    assert json.loads((isolated / "ap" / "scan_N3.meta.json").read_text())["provenance"]["N"] == 3
