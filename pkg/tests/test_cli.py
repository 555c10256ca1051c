import json
import os

import pytest

from stlctrl.cli import (
    Scenario, ScenarioError, bundled_names, load_scenario, main,
    resolve_scenario,
)
from stlctrl.plants import write_trace_csv


def scenario_doc(**over):
    doc = {
        "name": "tiny",
        "plant": "integrator2d",
        "formula": "F[3,5](x0 > 0.2) && G[0,5](x0 > -2)",
        "K": 5,
        "seed": 7,
        "policy": {"widths": [3, 4, 2], "include_time": True,
                   "time_scale": 0.2, "init": "xavier"},
        "initial": {"low": [-1.0, 0.0], "high": [-1.0, 0.0],
                    "samples": [[-1.0, 0.0]]},
        "train": {"algorithm": "vanilla", "alpha": 0.1, "max_iters": 100,
                  "b": 10.0, "time_sampling": False},
        "verify": {"m": 50, "coverage": 0.9},
        "noise": {"c1": 0.0, "c2": 0.0},
    }
    doc.update(over)
    return doc


def write_scenario(tmp_path, doc, name="sc.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def test_bundled_scenarios_present_and_valid():
    names = bundled_names()
    for want in ["dubins_k10", "dubins_k50", "dubins_k100", "dubins_k500",
                 "dubins_k1000", "multi_dubins_10", "quad6_platform",
                 "quad12", "integrator2d", "scalar_power"]:
        assert want in names
    for name in names:
        sc = load_scenario(resolve_scenario(name))
        assert sc.seed is not None
        assert len(sc.sha256) == 64


def test_validation_errors_name_the_field(tmp_path):
    doc = scenario_doc()
    doc["policy"]["widths"] = [5, 4, 2]
    with pytest.raises(ScenarioError) as e:
        Scenario(doc)
    assert e.value.field == "policy.widths"

    doc = scenario_doc(K=2)  # formula horizon is 5
    with pytest.raises(ScenarioError) as e:
        Scenario(doc)
    assert e.value.field == "formula"

    doc = scenario_doc()
    del doc["seed"]
    with pytest.raises(ScenarioError) as e:
        Scenario(doc)
    assert e.value.field == "seed"

    doc = scenario_doc()
    doc["train"]["algorithm"] = "sgd"
    with pytest.raises(ScenarioError) as e:
        Scenario(doc)
    assert e.value.field == "train.algorithm"

    path = write_scenario(tmp_path, scenario_doc(K="five"))
    assert main(["train", "--scenario", path, "--out", str(tmp_path)]) == 2


def test_unseeded_scenario_is_rejected(tmp_path, capsys):
    doc = scenario_doc()
    del doc["seed"]
    path = write_scenario(tmp_path, doc)
    rc = main(["train", "--scenario", path, "--out", str(tmp_path / "o")])
    assert rc == 2
    assert "seed" in capsys.readouterr().err


def test_train_writes_artifacts_and_solves(tmp_path, capsys):
    path = write_scenario(tmp_path, scenario_doc())
    out = tmp_path / "run"
    rc = main(["train", "--scenario", path, "--out", str(out)])
    assert rc == 0
    text = capsys.readouterr().out
    assert "status      solved" in text
    for f in ["checkpoint.json", "log.csv", "summary.txt", "manifest.json"]:
        assert (out / f).exists()
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seed"] == 7
    assert manifest["scenario"] == "tiny"
    assert len(manifest["scenario_sha256"]) == 64


def test_train_same_seed_gives_identical_logs(tmp_path):
    path = write_scenario(tmp_path, scenario_doc())
    logs = []
    for run in ("a", "b"):
        out = tmp_path / run
        assert main(["train", "--scenario", path, "--out", str(out)]) == 0
        rows = (out / "log.csv").read_text().splitlines()
        # the wall-clock column varies between runs; compare the rest
        logs.append([",".join(r.split(",")[:4]) for r in rows])
    assert logs[0] == logs[1]


def test_train_dnf_exit_code(tmp_path):
    doc = scenario_doc()
    doc["formula"] = "F[3,5](x0 > 1e9)"
    doc["train"]["max_iters"] = 3
    path = write_scenario(tmp_path, doc)
    rc = main(["train", "--scenario", path, "--out", str(tmp_path / "o")])
    assert rc == 3


def test_monitor_reports_value_and_witness(tmp_path, capsys):
    trace = tmp_path / "trace.csv"
    write_trace_csv(str(trace), [(1.0,), (2.0,), (3.0,), (1.0,)],
                    [(0.0,)] * 3)
    rc = main(["monitor", "F[0,3](x0 > 0)", str(trace)])
    assert rc == 0
    out = capsys.readouterr().out
    assert "rho        3" in out
    assert "satisfied  yes" in out
    assert "k_star     2" in out


def test_monitor_smooth_flag_prints_lower_bound(tmp_path, capsys):
    trace = tmp_path / "trace.csv"
    write_trace_csv(str(trace), [(1.0,), (2.0,), (3.0,), (1.0,)],
                    [(0.0,)] * 3)
    rc = main(["monitor", "F[0,3](x0 > 0)", str(trace), "--smooth", "5"])
    assert rc == 0
    out = capsys.readouterr().out
    line = [ln for ln in out.splitlines() if ln.startswith("rho_smooth")][0]
    assert float(line.split()[1]) <= 3.0


def test_monitor_short_trace_is_horizon_error(tmp_path, capsys):
    trace = tmp_path / "trace.csv"
    write_trace_csv(str(trace), [(1.0,), (2.0,)], [(0.0,)])
    assert main(["monitor", "F[0,5](x0 > 0)", str(trace)]) == 2
    assert main(["monitor", "F[0,(x0", str(trace)]) == 2


def test_verify_and_simulate_round_trip(tmp_path, capsys):
    path = write_scenario(tmp_path, scenario_doc())
    run = tmp_path / "run"
    assert main(["train", "--scenario", path, "--out", str(run)]) == 0
    capsys.readouterr()
    ckpt = str(run / "checkpoint.json")

    vout = tmp_path / "verify"
    rc = main(["verify", "--scenario", path, "--checkpoint", ckpt,
               "--out", str(vout), "--m", "99", "--coverage", "0.9"])
    assert rc == 0
    text = capsys.readouterr().out
    assert "ell         90" in text
    assert "verdict     pass" in text
    assert (vout / "report.txt").exists()

    sout = tmp_path / "sim"
    rc = main(["simulate", "--scenario", path, "--checkpoint", ckpt,
               "--out", str(sout), "--trials", "3"])
    assert rc == 0
    assert "success_rate  1.0000" in capsys.readouterr().out
    assert sorted(os.listdir(sout)) == [
        "manifest.json", "rate.txt", "trial_0000.csv", "trial_0001.csv",
        "trial_0002.csv"]


def test_verify_untrained_policy_fails_verdict(tmp_path, capsys):
    doc = scenario_doc()
    doc["formula"] = "G[0,5](x0 > 0)"  # start is at x0 = -1
    path = write_scenario(tmp_path, doc)
    ckpt = tmp_path / "zero.json"
    from stlctrl.policy import init
    init([3, 4, 2], scheme="zero", time_scale=0.2).save(str(ckpt))
    rc = main(["verify", "--scenario", path, "--checkpoint", str(ckpt),
               "--out", str(tmp_path / "v"), "--m", "50"])
    assert rc == 0
    assert "verdict     fail" in capsys.readouterr().out


def test_simulate_zero_trials_is_error(tmp_path, capsys):
    path = write_scenario(tmp_path, scenario_doc())
    ckpt = tmp_path / "zero.json"
    from stlctrl.policy import init
    init([3, 4, 2], scheme="zero", time_scale=0.2).save(str(ckpt))
    rc = main(["simulate", "--scenario", path, "--checkpoint", str(ckpt),
               "--out", str(tmp_path / "s"), "--trials", "0"])
    assert rc == 2
    assert "trials" in capsys.readouterr().err


def test_scenarios_list_and_bad_args(capsys):
    assert main(["scenarios", "list"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert "dubins_k100" in out
    assert main(["nonsense"]) == 2
    assert main(["train", "--scenario", "does_not_exist",
                 "--out", "/tmp/x"]) == 2
