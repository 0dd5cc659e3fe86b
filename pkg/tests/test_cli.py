import json
import subprocess
import sys

import pytest

from hybridmesh import scenario
from hybridmesh.cli import main

PAIR = scenario.dumps(scenario.loads('[[nodes]]\nid = 1\nrole = "hub"\n[[nodes]]\nid = 2\nx = 100.0\n'))
SPLIT = '[[nodes]]\nid = 1\nrole = "hub"\n[[nodes]]\nid = 2\nx = 1e6\n'


@pytest.fixture
def out(tmp_path, monkeypatch):
    monkeypatch.setenv("HYBRIDMESH_OUT", str(tmp_path / "out"))
    return tmp_path / "out"


def test_schedule_figure(out, capsys):
    assert main(["schedule", "fig-routing.scenario"]) == 0
    text = capsys.readouterr().out
    assert "Node / Timeslot" in text and "Tx->GW" in text
    data = json.loads((out / "schedule.json").read_text())
    assert len(data["slots"]) == 7


def test_schedule_pair_is_one_slot(tmp_path, out, capsys):
    path = tmp_path / "pair.toml"
    path.write_text(PAIR)
    assert main(["schedule", str(path), "--format", "json"]) == 0
    assert len(json.loads(capsys.readouterr().out)["slots"]) == 1


def test_campus_path_beats_sf12_frame(out, capsys):
    assert main(["schedule", "campus-13"]) == 0
    data = json.loads((out / "schedule.json").read_text())
    slots = len(data["slots"])
    assert slots * 125.0 < 2793.472
    node6_last = max(i for i, s in enumerate(data["slots"]) if s["6"]["action"] != "SLEEP")
    assert (node6_last + 1) * 125.0 < 2793.472


def test_disconnected_topology_exit_2(tmp_path, out, capsys):
    path = tmp_path / "split.toml"
    path.write_text(SPLIT)
    assert main(["schedule", str(path)]) == 2
    assert "unreachable nodes: 2" in capsys.readouterr().err


def test_bad_scenario_reports_line(tmp_path, out, capsys):
    path = tmp_path / "bad.toml"
    path.write_text('[[nodes]]\nid = 1\nrole = "hub"\nwheels = 4\n')
    assert main(["simulate", str(path)]) == 2
    assert "line 4" in capsys.readouterr().err


def test_unknown_scenario_exit_2(out):
    assert main(["simulate", "no-such-thing"]) == 2


def test_usage_errors_exit_1(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 1
    assert main(["energy", "--sf-min", "9", "--sf-max", "7"]) == 1
    assert main(["energy", "--sf-min", "4"]) == 1


def test_energy_table(capsys):
    assert main(["energy", "--sf-min", "7", "--sf-max", "8", "--format", "json"]) == 0
    rows = json.loads(capsys.readouterr().out)
    sf7 = next(r for r in rows if r["sf"] == 7)
    assert [r["sf"] for r in rows] == [7, 8]
    assert sf7["toa_ms"] == pytest.approx(36.096)
    assert sf7["e_rx_uj_per_bit"] == pytest.approx(8.57, rel=0.01)
    assert sf7["e_tx_mj_per_bit"] == pytest.approx(0.2176, rel=0.01)
    assert sf7["hops_3_mj_per_bit"] == pytest.approx(0.67, rel=0.02)


def test_simulate_then_report(tmp_path, out, capsys):
    path = tmp_path / "pair.toml"
    path.write_text(PAIR)
    assert main(["simulate", str(path)]) == 0
    for name in ("trace.csv", "report.json", "per_day.csv", "summary.txt"):
        assert (out / name).exists()
    capsys.readouterr()
    assert main(["report", str(out / "trace.csv"), "--format", "json"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["per_node"]["2"]["pdr"] == 1.0
    assert rep == json.loads((out / "report.json").read_text())


def test_report_on_garbage_exit_2(tmp_path, capsys):
    bad = tmp_path / "t.csv"
    bad.write_text("nope\n")
    assert main(["report", str(bad)]) == 2


def test_seed_sweep(tmp_path, out, capsys):
    path = tmp_path / "pair.toml"
    path.write_text(PAIR)
    assert main(["simulate", str(path), "--seeds", "3", "--format", "json"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert data["seeds"] == [1, 2, 3] and data["mean_pdr"]["2"] == 1.0
    assert (out / "seed-2" / "trace.csv").exists() and (out / "sweep.json").exists()


def test_sync_check(out, capsys):
    assert main(["sync-check", "campus-13", "--cycles", "20", "--format", "json"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert data["missed_windows"] == 0 and data["within_depth_bound"]


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "hybridmesh", "energy", "--sf-min", "7", "--sf-max", "7"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "36.096" in proc.stdout
