"""Command-line interface.

Subcommands: simulate, train, eval, energy, mc, data-efficiency,
id-baseline.  Each takes one YAML experiment config plus a few overrides;
failures exit nonzero after printing a machine-readable JSON error record
to stderr.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from .csvio import write_csv
from .energy import align_offset, energy_table, estimate_energies
from .estimators import load_checkpoint, make_estimator, save_checkpoint
from .experiments import (ExperimentConfig, run_data_efficiency,
                          run_id_baseline, run_mc_generalization,
                          simulate_datasets)
from .metrics import global_mse, nmse
from .robot import energies as oracle_energies
from .robot import load_robot
from .trajectories import load_dataset


def _load_config(args):
    cfg = ExperimentConfig.from_file(args.config)
    if getattr(args, "seed", None) is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    if getattr(args, "out_dir", None) is not None:
        cfg = dataclasses.replace(cfg, out_dir=args.out_dir)
    if getattr(args, "estimator", None):
        cfg = dataclasses.replace(cfg, estimators=tuple(args.estimator))
    return cfg


def _cmd_simulate(args):
    cfg = _load_config(args)
    train, test = simulate_datasets(cfg, run=args.run)
    print(json.dumps({"train": str(train), "test": str(test)}))
    return 0


def _cmd_train(args):
    cfg = _load_config(args)
    robot = load_robot(cfg.robot)
    dataset = load_dataset(args.dataset)
    est = make_estimator(args.estimator[0] if args.estimator else "lip",
                         robot, cfg.fit_options())
    est.fit(dataset)
    out = Path(args.out or Path(cfg.out_dir) / f"{est.name}_model.json")
    out.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(est, out, robot_source=cfg.robot, dataset_path=args.dataset)
    print(json.dumps({"model": str(out), "lml": est.report.lml,
                      "fit_seconds": est.report.seconds}))
    return 0


def _restore(args, cfg):
    with open(args.model) as fh:
        payload = json.load(fh)
    train_path = payload.get("dataset")
    if train_path is None:
        raise ValueError("checkpoint lacks a dataset reference")
    train = load_dataset(train_path)
    robot = load_robot(payload.get("robot") or cfg.robot)
    return load_checkpoint(args.model, train, robot=robot), robot


def _cmd_eval(args):
    cfg = _load_config(args)
    est, robot = _restore(args, cfg)
    data = load_dataset(args.dataset)
    mean, var = est.predict(data.states)
    n = data.n
    header = (["t"] + [f"tau{j + 1}_mean" for j in range(n)]
              + [f"tau{j + 1}_var" for j in range(n)])
    rows = np.column_stack([data.t, mean, var])
    out = Path(args.out or Path(cfg.out_dir) / "predictions.csv")
    write_csv(out, header, [[float(v) for v in row] for row in rows])
    per_joint = nmse(mean, data.tau)
    print(json.dumps({"predictions": str(out),
                      "nmse": [float(v) for v in per_joint],
                      "avg_nmse": float(np.mean(per_joint)),
                      "global_mse": global_mse(mean, data.tau)}))
    return 0


def _cmd_energy(args):
    cfg = _load_config(args)
    est, robot = _restore(args, cfg)
    data = load_dataset(args.dataset)
    post = estimate_energies(est.model, data.states)
    _, T_true, V_true = oracle_energies(robot, data.states.q, data.states.qd)
    aligned = align_offset(post, V_true[0], index=0)
    header, table = energy_table(data.t, aligned, oracle_T=T_true, oracle_V=V_true)
    out = Path(args.out or Path(cfg.out_dir) / "energy.csv")
    write_csv(out, header, [[float(v) for v in row] for row in table])
    print(json.dumps({"energy": str(out), "offset_removed": aligned.offset,
                      "clamped_variances": aligned.clamped}))
    return 0


def _cmd_mc(args):
    cfg = _load_config(args)
    per_run, summary = run_mc_generalization(cfg)
    print(json.dumps({"runs": str(per_run), "summary": str(summary)}))
    return 0


def _cmd_data_efficiency(args):
    cfg = _load_config(args)
    per_run, curve = run_data_efficiency(cfg)
    print(json.dumps({"runs": str(per_run), "curve": str(curve)}))
    return 0


def _cmd_id_baseline(args):
    cfg = _load_config(args)
    path = run_id_baseline(cfg)
    print(json.dumps({"report": str(path)}))
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="lipgpr",
        description="GP inverse-dynamics identification with energy priors")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, dataset=False, model=False, out=False):
        p.add_argument("--config", required=True, help="YAML experiment config")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out-dir", default=None)
        p.add_argument("--estimator", action="append", default=None,
                       help="estimator name override (repeatable)")
        if dataset:
            p.add_argument("--dataset", required=True, help="dataset CSV path")
        if model:
            p.add_argument("--model", required=True, help="model checkpoint JSON")
        if out:
            p.add_argument("--out", default=None, help="output file path")

    p = sub.add_parser("simulate", help="synthesize train/test datasets")
    common(p)
    p.add_argument("--run", type=int, default=0)
    p.set_defaults(fn=_cmd_simulate)

    p = sub.add_parser("train", help="fit one estimator on a dataset")
    common(p, dataset=True, out=True)
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("eval", help="predict torques and report errors")
    common(p, dataset=True, model=True, out=True)
    p.set_defaults(fn=_cmd_eval)

    p = sub.add_parser("energy", help="estimate kinetic/potential energy")
    common(p, dataset=True, model=True, out=True)
    p.set_defaults(fn=_cmd_energy)

    p = sub.add_parser("mc", help="Monte-Carlo generalization study")
    common(p)
    p.set_defaults(fn=_cmd_mc)

    p = sub.add_parser("data-efficiency", help="error vs training-set size")
    common(p)
    p.set_defaults(fn=_cmd_data_efficiency)

    p = sub.add_parser("id-baseline", help="least-squares identification")
    common(p)
    p.set_defaults(fn=_cmd_id_baseline)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except Exception as exc:
        record = {"error": str(exc), "type": type(exc).__name__,
                  "command": args.command}
        print(json.dumps(record), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
