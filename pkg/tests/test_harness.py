import json
import subprocess
import sys

import pytest

from geonarrow import harness
from geonarrow.cli import main


def write_cfg(tmp_path, **over):
    cfg = {
        "instance": {"name": "power", "d": 1, "x_star": [0.3], "q": 2, "scale": 1.0},
        "algorithm": "gn",
        "declared": {"lam": 1.0, "big_l": 1.0, "q": 2},
        "T": [4096],
        "seeds": [0, 1, 2],
        "noise": {"kind": "gaussian", "std": 1.0},
    }
    cfg.update(over)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    return str(path)


def test_run_writes_one_line_per_cell(tmp_path):
    cfg = write_cfg(tmp_path)
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "a"), "--workers", "1"]) == 0
    lines = (tmp_path / "a" / "runs.jsonl").read_text().splitlines()
    assert len(lines) == 3
    recs = [json.loads(l) for l in lines]
    assert [r["seed"] for r in recs] == [0, 1, 2]
    assert all(r["pulls"] == 4096 and r["schema_version"] == 1 for r in recs)


def test_run_is_byte_identical_and_worker_independent(tmp_path):
    cfg = write_cfg(tmp_path, T=[4096, 8192])
    main(["run", "--config", cfg, "--out", str(tmp_path / "a"), "--workers", "1"])
    main(["run", "--config", cfg, "--out", str(tmp_path / "b"), "--workers", "1"])
    main(["run", "--config", cfg, "--out", str(tmp_path / "c"), "--workers", "2"])
    a = (tmp_path / "a" / "runs.jsonl").read_bytes()
    assert a == (tmp_path / "b" / "runs.jsonl").read_bytes()
    assert a == (tmp_path / "c" / "runs.jsonl").read_bytes()


def test_seed_offset_flag_and_env(tmp_path, monkeypatch):
    cfg = write_cfg(tmp_path, seeds=[0])
    main(["run", "--config", cfg, "--out", str(tmp_path / "a"), "--workers", "1", "--seed-offset", "5"])
    monkeypatch.setenv(harness.SEED_ENV, "5")
    main(["run", "--config", cfg, "--out", str(tmp_path / "b"), "--workers", "1"])
    a = json.loads((tmp_path / "a" / "runs.jsonl").read_text())
    b = json.loads((tmp_path / "b" / "runs.jsonl").read_text())
    assert a["seed"] == b["seed"] == 5


@pytest.mark.parametrize("over", [
    {"T": [4]},
    {"instance": {"name": "nope"}},
    {"algorithm": "thompson"},
    {"seeds": [1, 1]},
    {"noise": {"kind": "gaussian", "std": 3.0}},
])
def test_usage_errors(tmp_path, over, capsys):
    cfg = write_cfg(tmp_path, **over)
    assert main(["run", "--config", cfg, "--workers", "1"]) == 2
    assert "error" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert main(["run", "--config", str(tmp_path / "absent.json")]) == 2


def test_sweep_needs_three_T(tmp_path):
    cfg = write_cfg(tmp_path, T=[4096, 8192])
    assert main(["sweep", "--config", cfg, "--workers", "1"]) == 2


def test_sweep_outputs_and_csv_round_trip(tmp_path):
    cfg = write_cfg(tmp_path, T=[2048, 4096, 8192], seeds={"start": 0, "count": 4})
    out = tmp_path / "s"
    assert main(["sweep", "--config", cfg, "--out", str(out), "--workers", "1"]) == 0
    summary = json.loads((out / "summary.json").read_text())
    parsed = harness.csv_to_rows((out / "summary.csv").read_text())
    assert len(parsed) == 3
    for row, mem in zip(parsed, summary["rows"]):
        for col in harness.CSV_COLUMNS:
            assert row[col] == mem[col]
    recs = [json.loads(l) for l in (out / "runs.jsonl").read_text().splitlines()]
    again = harness.aggregate(recs)
    assert again == summary["rows"]
    assert {r["mean_batches"] for r in summary["rows"]} and "slope_se" in summary


def test_slope_fit_oracle():
    Ts = [10, 100, 1000]
    slope, se = harness.loglog_slope(Ts, [3 * t**0.5 for t in Ts])
    assert slope == pytest.approx(0.5) and se < 1e-6


def test_compare_static(tmp_path):
    cfg = write_cfg(tmp_path, T=[2**14, 2**16], seeds=[0, 1])
    out = tmp_path / "c"
    assert main(["compare-static", "--config", cfg, "--out", str(out), "--workers", "1"]) == 0
    res = json.loads((out / "compare.json").read_text())
    feas = {r["T"]: r["feasible"] for r in res["per_T"]}
    assert feas == {2**14: False, 2**16: True}
    comm = [r["static_comm"] for r in res["rows"] if r["feasible"]]
    assert comm[0] == comm[1]  # static deadlines do not depend on the seed
    assert (out / "compare.csv").exists()


def test_other_algorithms_run(tmp_path):
    for algo, extra in [("uniform", {}), ("gn-simple", {"options": {"depth": 4}}), ("gn-static", {"T": [2**16]}),
                        ("gn-prime", {"instance": {"name": "ls-abs"}, "declared": {"lam": 1, "ell": 1}})]:
        cfg = write_cfg(tmp_path, algorithm=algo, seeds=[0], **extra)
        assert main(["run", "--config", cfg, "--out", str(tmp_path / algo), "--workers", "1"]) == 0


def test_lower_bound_instance_config(tmp_path):
    inst = {"name": "f_jkl", "T_ref": 10000, "M": 2, "d": 1, "q": 2, "j": 1, "k": 1, "l": 2}
    cfg = write_cfg(tmp_path, instance=inst, algorithm="uniform", seeds=[0], declared={})
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "lb"), "--workers", "1"]) == 0


def test_verify_scopes_exit_codes(tmp_path, monkeypatch):
    assert main(["verify", "--scope", "ls", "--out", str(tmp_path / "v")]) == 0
    doc = json.loads((tmp_path / "v" / "verify.json").read_text())
    assert doc["failed"] == 0 and doc["checked"] == 2
    assert main(["verify", "--scope", "instances", "--out", str(tmp_path / "v")]) == 0
    monkeypatch.setitem(harness.SCOPES, "ls", lambda: [{"property": "x", "pass": False}])
    assert main(["verify", "--scope", "ls", "--out", str(tmp_path / "v")]) == 1


def test_verify_lowerbound_small_grid():
    reps = harness.verify_lowerbound({"d": (1,), "q": (1.0,), "M": (2,), "T": (10_000,)})
    assert reps and all(r["pass"] for r in reps)


def test_console_script_usage_error():
    res = subprocess.run([sys.executable, "-m", "geonarrow.cli", "bogus"], capture_output=True)
    assert res.returncode != 0
