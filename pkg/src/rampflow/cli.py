"""Command line entry point: ``rampflow {train,eval,sweep,latency}``.

Every output directory gets a ``config.json`` with the resolved configuration
and seed.  Set RAMPFLOW_LOG (DEBUG, INFO, ...) to change the log level.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import statistics
import sys
from dataclasses import replace
from pathlib import Path


from . import dqn, runner
from .config import ConfigError, RunConfig, load_config
from .metrics import REPORT_COLUMNS, decision_latency
from .mdp_env import featurize
from .v2x import TrafficBulletin

log = logging.getLogger("rampflow")

SWEEP_COLUMNS = ("axis", "value", "seed", "controller", "status", "error") + REPORT_COLUMNS
EVAL_COLUMNS = ("run", "seed") + REPORT_COLUMNS


def _prepare_out(path) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise SystemExit(f"output directory {out} is not writable: {exc}")
    return out


def _echo_config(cfg: RunConfig, out: Path) -> None:
    (out / "config.json").write_text(cfg.to_json() + "\n")


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_rows(path: Path, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row.get(c)) for c in columns])


def cmd_train(cfg: RunConfig, out: Path) -> int:
    _echo_config(cfg, out)
    scenario = cfg.scenario()

    def progress(ep, r, eps):
        if ep % 10 == 0 or ep == cfg.run.episodes:
            log.info("episode %d mean reward %.3f epsilon %.4f", ep, r, eps)

    result = dqn.train_dacc(scenario, cfg.run.episodes, cfg.dqn, seed=cfg.run.seed,
                            action_set=cfg.action_set, progress=progress)
    dqn.save_model(result.net, out / "model.json", cfg.action_set)
    result.curve_csv(out / "reward_curve.csv")
    log.info("wrote %s", out / "model.json")
    return 0


def cmd_eval(cfg: RunConfig, out: Path, model: str | None) -> int:
    _echo_config(cfg, out)
    policy = runner.make_policy(cfg, cfg.controller.kind, model)
    rows = []
    for k in range(cfg.run.eval_runs):
        seed = cfg.run.seed + k
        res = runner.run_once(cfg, policy, seed, grid=(k == 0))
        if k == 0:
            res.report.space_time_grid.to_csv(out / "grid.csv")
        rows.append({"run": k, "seed": seed, **res.report.row()})
    for name, fn in (("mean", statistics.fmean), ("stdev", statistics.pstdev)):
        summary = {"run": name, "seed": ""}
        for c in REPORT_COLUMNS:
            vals = [r[c] for r in rows if r[c] is not None]
            summary[c] = float(fn(vals)) if vals else None
        rows.append(summary)
    _write_rows(out / "report.csv", EVAL_COLUMNS, rows)
    return 0


def cmd_sweep(cfg: RunConfig, out: Path, axis: str, values, model: str | None, jobs: int) -> int:
    _echo_config(cfg, out)
    controllers = ["fixed"] if axis == "headway" else list(cfg.run.sweep_controllers)
    if "dacc" in controllers and model is None and cfg.controller.model is None:
        log.warning("no model given; dropping the dacc controller from the sweep")
        controllers.remove("dacc")
    points = runner.sweep_points(cfg, axis, values, controllers)
    rows = runner.run_sweep(cfg, points, model, jobs)
    _write_rows(out / "sweep.csv", SWEEP_COLUMNS, rows)
    failed = sum(r["status"] != "ok" for r in rows)
    if failed:
        log.warning("%d of %d sweep points failed", failed, len(rows))
    return 0


def cmd_latency(cfg: RunConfig, out: Path, model: str | None, n: int) -> int:
    if model is None:
        raise SystemExit("latency needs --model")
    if not Path(model).exists():
        raise SystemExit(f"model file {model} not found")
    _echo_config(cfg, out)
    net, _ = dqn.load_model(model, cfg.action_set)
    agent = dqn.GreedyAgent(net)
    g = cfg.geometry
    bulletin = TrafficBulletin(20.0, 25.0, 30.0, 15.0, g.ramp_length, g.segment_length,
                               cfg.mdp.reward.congestion_speed, 0.0)
    summary = decision_latency(lambda: agent.act(featurize(bulletin).array()), n)
    with open(out / "latency.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["trial", "ms"])
        for k, ms in enumerate(summary.samples_ms):
            w.writerow([k, repr(ms)])
        for name in ("mean_ms", "p50_ms", "p95_ms", "max_ms"):
            w.writerow([name, repr(getattr(summary, name))])
    log.info("mean %.4f ms, p95 %.4f ms over %d trials", summary.mean_ms, summary.p95_ms, n)
    return 0


def _parse_values(text: str | None) -> list[float]:
    if text is None or not text.strip():
        raise ConfigError("--values needs a non-empty comma-separated list")
    return [float(v) for v in text.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rampflow",
                                description="Simulate an on-ramp merge and train or evaluate headway controllers.")
    sub = p.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--model", help="trained model file")
    sub.add_parser("train", parents=[common], help="train the D-ACC network")
    sub.add_parser("eval", parents=[common], help="evaluate the configured controller")
    sw = sub.add_parser("sweep", parents=[common], help="sweep one scenario axis")
    sw.add_argument("--axis", required=True, choices=runner.SWEEP_AXES)
    sw.add_argument("--values", required=True, help="comma-separated values")
    sw.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    lat = sub.add_parser("latency", parents=[common], help="time featurize+forward+select")
    lat.add_argument("--n", type=int, default=100, help="number of trials")
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("RAMPFLOW_LOG", "INFO").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            if not 0 <= args.seed < 2 ** 64:
                raise ConfigError("--seed must fit in 64 bits")
            cfg = replace(cfg, run=replace(cfg.run, seed=args.seed))
        if args.command == "sweep":
            values = _parse_values(args.values)
        out = _prepare_out(args.out)
        if args.command == "train":
            return cmd_train(cfg, out)
        if args.command == "eval":
            return cmd_eval(cfg, out, args.model)
        if args.command == "sweep":
            return cmd_sweep(cfg, out, args.axis, values, args.model, args.jobs)
        return cmd_latency(cfg, out, args.model, args.n)
    except (ConfigError, ValueError) as exc:
        print(f"rampflow: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
