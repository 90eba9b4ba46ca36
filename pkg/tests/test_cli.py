import csv
import json
import warnings

import numpy as np
import pytest

from rampflow import cli
from rampflow.config import ConfigError, RunConfig, from_dict, load_config
from rampflow.dqn import QNetwork, save_model
from rampflow.mdp_env import ActionSet
from rampflow.runner import SweepPoint, run_sweep, sweep_points

QUICK = {"run": {"episodes": 1, "horizon": 30.0, "warmup": 5.0, "eval_runs": 2, "seeds_per_point": 2},
         "traffic": {"penetration": 0.5}}


def write_cfg(path, data=QUICK):
    path.write_text(json.dumps(data))
    return str(path)


def rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


# -- config -----------------------------------------------------------------------

def test_defaults_resolve():
    cfg = load_config(None)
    assert cfg.traffic.main_rate == 2057.0 and cfg.run.seed == 0
    assert json.loads(cfg.to_json())["dqn"]["gamma"] == 0.95


def test_unknown_key_is_error():
    with pytest.raises(ConfigError):
        from_dict({"traffic": {"main_rte": 1000}})


def test_out_of_studied_range_warns():
    with pytest.warns(UserWarning):
        cfg = from_dict({"traffic": {"main_rate": 5000.0}})
    assert cfg.traffic.main_rate == 5000.0


def test_unit_interval_values_enforced():
    with pytest.raises(ConfigError):
        from_dict({"traffic": {"penetration": 1.5}})
    with pytest.raises(ConfigError):
        from_dict({"traffic": {"assertiveness": -0.1}})


def test_headway_below_minimum_is_error():
    with pytest.raises(ConfigError):
        from_dict({"controller": {"kind": "fixed", "headway": 2.4}})


def test_in_range_config_is_silent():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        from_dict({"traffic": {"main_rate": 900.0, "ramp_rate": 200.0}, "geometry": {"accel_lane_length": 50.0}})


def test_nested_blocks_build():
    cfg = from_dict({"geometry": {"accel_lane_length": 140.0}, "controller": {"threshold": {"h_low": 4.0}}})
    assert cfg.geometry.accel_lane_length == 140.0
    assert cfg.controller.threshold.h_low == 4.0


# -- train --------------------------------------------------------------------------

def test_smoke_train_writes_loadable_model(tmp_path):
    out = tmp_path / "out"
    assert cli.main(["train", "--config", write_cfg(tmp_path / "c.json"), "--out", str(out)]) == 0
    assert (out / "model.json").exists() and (out / "config.json").exists()
    curve = rows(out / "reward_curve.csv")
    assert list(curve[0]) == ["episode", "mean_reward", "epsilon"] and len(curve) == 1
    echoed = json.loads((out / "config.json").read_text())
    assert echoed["run"]["episodes"] == 1 and echoed["run"]["seed"] == 0
    assert cli.main(["eval", "--config", write_cfg(tmp_path / "c.json"), "--out", str(tmp_path / "ev"),
                     "--model", str(out / "model.json")]) == 0


def test_training_is_deterministic(tmp_path):
    cfg = write_cfg(tmp_path / "c.json", {**QUICK, "run": {**QUICK["run"], "episodes": 2}})
    for name in ("a", "b"):
        assert cli.main(["train", "--config", cfg, "--seed", "11", "--out", str(tmp_path / name)]) == 0
    assert (tmp_path / "a/reward_curve.csv").read_bytes() == (tmp_path / "b/reward_curve.csv").read_bytes()
    assert (tmp_path / "a/model.json").read_bytes() == (tmp_path / "b/model.json").read_bytes()


def test_unwritable_output_aborts_before_training(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(SystemExit):
        cli.main(["train", "--config", write_cfg(tmp_path / "c.json"), "--out", str(blocker / "sub")])


# -- eval ---------------------------------------------------------------------------

def test_eval_rows_and_summary(tmp_path):
    data = {**QUICK, "controller": {"kind": "threshold"}}
    assert cli.main(["eval", "--config", write_cfg(tmp_path / "c.json", data), "--out", str(tmp_path)]) == 0
    rs = rows(tmp_path / "report.csv")
    assert [r["run"] for r in rs] == ["0", "1", "mean", "stdev"]
    speeds = [float(r["avg_speed"]) for r in rs[:2]]
    assert float(rs[2]["avg_speed"]) == pytest.approx(np.mean(speeds))
    assert (tmp_path / "grid.csv").exists()


def test_eval_refuses_action_count_mismatch(tmp_path, capsys):
    model = tmp_path / "m.json"
    save_model(QNetwork.default(8), model, ActionSet(tuple(np.linspace(2.5, 40, 8))))
    code = cli.main(["eval", "--config", write_cfg(tmp_path / "c.json"), "--out", str(tmp_path / "o"),
                     "--model", str(model)])
    assert code == 2
    assert "actions" in capsys.readouterr().err


def test_bad_config_file_reports_error(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli.main(["eval", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert "rampflow: error" in capsys.readouterr().err


# -- sweep --------------------------------------------------------------------------

def test_sweep_long_format(tmp_path):
    data = {**QUICK, "run": {**QUICK["run"], "sweep_controllers": ["threshold", "fixed"]}}
    code = cli.main(["sweep", "--config", write_cfg(tmp_path / "c.json", data), "--out", str(tmp_path),
                     "--axis", "penetration", "--values", "0.1,0.5"])
    assert code == 0
    rs = rows(tmp_path / "sweep.csv")
    assert len(rs) == 2 * 2 * 2
    assert list(rs[0])[:6] == ["axis", "value", "seed", "controller", "status", "error"]
    assert all(r["status"] == "ok" for r in rs)


def test_empty_value_list_is_config_error(tmp_path):
    assert cli.main(["sweep", "--out", str(tmp_path), "--axis", "headway", "--values", " "]) == 2
    with pytest.raises(ValueError):
        sweep_points(RunConfig(), "headway", [], ["fixed"])


def test_failed_point_is_recorded_and_sweep_continues():
    cfg = from_dict(QUICK)
    points = [SweepPoint("headway", 1.0, 0, "fixed"), SweepPoint("headway", 5.0, 0, "fixed")]
    out = run_sweep(cfg, points)
    assert out[0]["status"] == "failed" and "headway" in out[0]["error"]
    assert out[1]["status"] == "ok"


def test_sweep_identical_across_parallelism(tmp_path):
    data = {**QUICK, "run": {**QUICK["run"], "sweep_controllers": ["threshold"]}}
    cfg = write_cfg(tmp_path / "c.json", data)
    for jobs in ("1", "2"):
        assert cli.main(["sweep", "--config", cfg, "--out", str(tmp_path / jobs), "--axis", "ramp_rate",
                         "--values", "400,800", "--jobs", jobs]) == 0
    assert (tmp_path / "1/sweep.csv").read_bytes() == (tmp_path / "2/sweep.csv").read_bytes()


# -- latency ------------------------------------------------------------------------

def test_latency_needs_model(tmp_path):
    with pytest.raises(SystemExit):
        cli.main(["latency", "--out", str(tmp_path)])
    with pytest.raises(SystemExit):
        cli.main(["latency", "--out", str(tmp_path), "--model", str(tmp_path / "missing.json")])


def test_latency_csv(tmp_path):
    model = tmp_path / "m.json"
    save_model(QNetwork.default(16), model)
    assert cli.main(["latency", "--out", str(tmp_path), "--model", str(model), "--n", "100"]) == 0
    with open(tmp_path / "latency.csv") as fh:
        lines = list(csv.reader(fh))
    assert lines[0] == ["trial", "ms"] and len(lines) == 1 + 100 + 4
    summary = {k: float(v) for k, v in lines[-4:]}
    assert summary["p50_ms"] <= summary["p95_ms"] <= summary["max_ms"]
