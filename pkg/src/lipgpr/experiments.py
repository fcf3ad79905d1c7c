"""Desk-scale experiment orchestration: Monte-Carlo generalization,
data-efficiency curves, the least-squares identification baseline, and
dataset simulation, all driven by one YAML config.

Every random draw is seeded from the config seed plus a documented offset,
workers return rows in run order, and CSV cells use round-trip float
formatting, so re-running a config reproduces its outputs byte for byte.
"""

from __future__ import annotations

import json
import multiprocessing
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import yaml

from .csvio import read_csv, rows_as_dicts, write_csv
from .energy import align_offset, estimate_energies
from .estimators import FitOptions, make_estimator
from .metrics import global_mse, nmse, quartiles, scalar_nmse
from .robot import energies as oracle_energies
from .robot import load_robot, param_vector, regressor_matrix
from .trajectories import (Dataset, JointLimits, SinusoidSpec,
                           generate_trajectory, save_dataset, synthesize_dataset)

# seed offsets: train trajectory = seed + run, test trajectory = seed +
# TEST_OFFSET + run, measurement noise = seed + NOISE_OFFSET + run
TEST_OFFSET = 10_000
NOISE_OFFSET = 20_000


@dataclass
class ExperimentConfig:
    robot: str = "planar_2r"
    out_dir: str = "results"
    seed: int = 0
    estimators: tuple = ("lip", "se", "lse")
    noise_sigma: float = 0.01
    include_friction: bool = False
    runs: int = 10
    workers: int = 1
    limits: dict = field(default_factory=lambda: {"q": 2.5, "qd": 2.2, "qdd": 10.0})
    # train slowly sampled over the full excitation window: consecutive
    # samples decorrelate and the polynomial features stay well excited
    train: dict = field(default_factory=lambda: {
        "n_harmonics": 50, "duration": 50.0, "sample_rate": 2.0})
    test: dict = field(default_factory=lambda: {
        "n_harmonics": 100, "duration": 50.0, "sample_rate": 10.0})
    fit: dict = field(default_factory=dict)
    sizes: tuple = (50, 100, 200, 300, 400, 500)
    size_seeds: int = 5
    ridge: float = 1e-8

    @classmethod
    def from_file(cls, path):
        with open(path) as fh:
            raw = yaml.safe_load(fh) or {}
        return cls.from_dict(raw)

    @classmethod
    def from_dict(cls, raw):
        known = set(cls.__dataclass_fields__)
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if "seed" not in raw:
            raise ValueError("config must set an explicit seed")
        cfg = cls(**raw)
        cfg.estimators = tuple(cfg.estimators)
        cfg.sizes = tuple(int(s) for s in cfg.sizes)
        FitOptions.from_dict(cfg.fit)  # validate early
        return cfg

    def fit_options(self):
        return FitOptions.from_dict(self.fit)

    def joint_limits(self, n):
        lm = self.limits
        if {"q", "qd", "qdd"} <= set(lm):
            return JointLimits.symmetric(n, q=lm["q"], qd=lm["qd"], qdd=lm["qdd"])
        return JointLimits(np.asarray(lm["q_min"], dtype=float),
                           np.asarray(lm["q_max"], dtype=float),
                           np.asarray(lm["qd_max"], dtype=float),
                           np.asarray(lm["qdd_max"], dtype=float))


def _spec(params, seed):
    return SinusoidSpec(seed=seed, **params)


def build_run_datasets(cfg: ExperimentConfig, run):
    """(noisy train, noiseless test) datasets of one Monte-Carlo run."""
    robot = load_robot(cfg.robot)
    limits = cfg.joint_limits(robot.n)
    train_traj = generate_trajectory(_spec(cfg.train, cfg.seed + run), limits, robot.n)
    test_traj = generate_trajectory(_spec(cfg.test, cfg.seed + TEST_OFFSET + run),
                                    limits, robot.n)
    train = synthesize_dataset(robot, train_traj, cfg.noise_sigma,
                               include_friction=cfg.include_friction,
                               seed=cfg.seed + NOISE_OFFSET + run,
                               meta={"role": "train", "run": run,
                                     "robot": cfg.robot, "spec": dict(cfg.train)})
    test = synthesize_dataset(robot, test_traj, 0.0,
                              include_friction=cfg.include_friction,
                              seed=0,
                              meta={"role": "test", "run": run,
                                    "robot": cfg.robot, "spec": dict(cfg.test)})
    return robot, train, test


def _mc_header(n):
    # wall-clock timings go to a JSON sidecar so CSV reruns stay
    # byte-identical
    return (["run", "estimator"]
            + [f"nmse_j{j + 1}" for j in range(n)]
            + ["avg_nmse", "global_mse",
               "kinetic_nmse", "potential_nmse_raw", "potential_nmse_aligned",
               "total_energy_nmse", "lml", "error"])


def evaluate_estimator(name, robot, train, test, options) -> dict:
    """Fit one estimator and score it on the test trajectory."""
    row = {"estimator": name, "error": None}
    est = make_estimator(name, robot, options)
    est.fit(train)
    pred, _ = est.predict(test.states)
    per_joint = nmse(pred, test.tau)
    for j, v in enumerate(per_joint):
        row[f"nmse_j{j + 1}"] = float(v)
    row["avg_nmse"] = float(np.mean(per_joint))
    row["global_mse"] = global_mse(pred, test.tau)
    row["fit_seconds"] = float(est.report.seconds)
    row["lml"] = float(est.report.lml)
    if est.supports_energy:
        _, T_true, V_true = oracle_energies(robot, test.states.q, test.states.qd)
        post = estimate_energies(est.model, test.states)
        aligned = align_offset(post, V_true[0], index=0)
        row["kinetic_nmse"] = scalar_nmse(post.kinetic_mean, T_true)
        row["potential_nmse_raw"] = scalar_nmse(post.potential_mean, V_true)
        row["potential_nmse_aligned"] = scalar_nmse(aligned.potential_mean, V_true)
        row["total_energy_nmse"] = scalar_nmse(
            post.kinetic_mean + aligned.potential_mean, T_true + V_true)
    return row


def _mc_worker(args):
    cfg, run = args
    robot, train, test = build_run_datasets(cfg, run)
    options = cfg.fit_options()
    rows = []
    for name in cfg.estimators:
        try:
            row = evaluate_estimator(name, robot, train, test, options)
        except Exception as exc:  # keep the run going, record the failure
            row = {"estimator": name, "error": f"{type(exc).__name__}: {exc}"}
        row["run"] = run
        rows.append(row)
    return rows


def _pool_map(fn, jobs, workers):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with multiprocessing.Pool(processes=min(workers, len(jobs))) as pool:
        return pool.map(fn, jobs)


def run_mc_generalization(cfg: ExperimentConfig, out_dir=None):
    """Fresh train/test trajectories per run; per-run and aggregate CSVs."""
    out = Path(out_dir or cfg.out_dir)
    robot = load_robot(cfg.robot)
    n = robot.n
    header = _mc_header(n)
    results = _pool_map(_mc_worker, [(cfg, r) for r in range(cfg.runs)],
                        cfg.workers)
    flat = [row for batch in results for row in batch]
    rows = [[row.get(col) for col in header] for row in flat]
    per_run = write_csv(out / "mc_runs.csv", header, rows)
    _write_timings(out / "mc_timings.json",
                   [{"run": r.get("run"), "estimator": r.get("estimator"),
                     "fit_seconds": r.get("fit_seconds")} for r in flat])
    agg_path = aggregate_mc(per_run, out / "mc_summary.csv")
    _write_gnuplot_stub(out / "mc_summary.gp", "mc_runs.csv",
                        "average torque nMSE per run, by estimator")
    return per_run, agg_path


def aggregate_mc(per_run_csv, out_path):
    """Quartile summary recomputed from the per-run CSV on disk."""
    header, rows = read_csv(per_run_csv)
    records = [r for r in rows_as_dicts(header, rows) if r.get("error") in (None, "")]
    names = sorted({r["estimator"] for r in records})
    value_cols = [c for c in header if c not in ("run", "estimator", "error")]
    out_rows = []
    for name in names:
        sub = [r for r in records if r["estimator"] == name]
        for stat_idx, stat in enumerate(("q25", "median", "q75")):
            row = [name, stat]
            for col in value_cols:
                vals = [r[col] for r in sub if isinstance(r[col], (int, float))]
                row.append(quartiles(vals)[stat_idx] if vals else None)
            out_rows.append(row)
    return write_csv(out_path, ["estimator", "stat"] + value_cols, out_rows)


# -- data efficiency ---------------------------------------------------------

def _de_worker(args):
    cfg, seed_idx = args
    robot = load_robot(cfg.robot)
    limits = cfg.joint_limits(robot.n)
    max_size = max(cfg.sizes)
    train_params = dict(cfg.train)
    train_params["duration"] = max_size / train_params.get("sample_rate", 10.0)
    train_traj = generate_trajectory(_spec(train_params, cfg.seed + seed_idx),
                                     limits, robot.n)
    train = synthesize_dataset(robot, train_traj, cfg.noise_sigma,
                               include_friction=cfg.include_friction,
                               seed=cfg.seed + NOISE_OFFSET + seed_idx)
    test_traj = generate_trajectory(_spec(cfg.test, cfg.seed + TEST_OFFSET),
                                    limits, robot.n)
    test = synthesize_dataset(robot, test_traj, 0.0,
                              include_friction=cfg.include_friction, seed=0)
    options = cfg.fit_options()
    rows = []
    seconds = []
    for name in cfg.estimators:
        # hyperparameters tuned once per seed on a capped prefix, then
        # frozen while the training-set size grows
        est = make_estimator(name, robot, options)
        if options.optimize:
            cap = int(min(options.subsample or max_size, max_size))
            try:
                est.fit(train.subset(slice(0, cap)))
            except Exception as exc:
                rows.extend([[seed_idx, size, name, None, None,
                              f"{type(exc).__name__}: {exc}"] for size in cfg.sizes])
                continue
            est.options = replace(options, optimize=False)
        for size in cfg.sizes:
            try:
                t0 = time.perf_counter()
                est.fit(train.subset(slice(0, size)))
                pred, _ = est.predict(test.states)
                per_joint = nmse(pred, test.tau)
                seconds.append({"seed": seed_idx, "size": size, "estimator": name,
                                "fit_seconds": time.perf_counter() - t0})
                rows.append([seed_idx, size, name, global_mse(pred, test.tau),
                             float(np.mean(per_joint)), None])
            except Exception as exc:
                rows.append([seed_idx, size, name, None, None,
                             f"{type(exc).__name__}: {exc}"])
    return rows, seconds


def run_data_efficiency(cfg: ExperimentConfig, out_dir=None):
    """Global MSE against training-set size on one fixed test trajectory."""
    out = Path(out_dir or cfg.out_dir)
    header = ["seed", "size", "estimator", "global_mse", "avg_nmse", "error"]
    results = _pool_map(_de_worker, [(cfg, s) for s in range(cfg.size_seeds)],
                        cfg.workers)
    rows = [row for batch, _ in results for row in batch]
    per_run = write_csv(out / "data_efficiency_runs.csv", header, rows)
    _write_timings(out / "data_efficiency_timings.json",
                   [t for _, ts in results for t in ts])
    # median curve per estimator and size, recomputed from the emitted CSV
    h, raw = read_csv(per_run)
    records = [r for r in rows_as_dicts(h, raw) if r["error"] in (None, "")]
    curve_rows = []
    for name in sorted({r["estimator"] for r in records}):
        for size in cfg.sizes:
            vals = [r["global_mse"] for r in records
                    if r["estimator"] == name and r["size"] == size
                    and isinstance(r["global_mse"], (int, float))]
            if vals:
                _, med, _ = quartiles(vals)
                curve_rows.append([name, size, med, len(vals)])
    curve = write_csv(out / "data_efficiency_curve.csv",
                      ["estimator", "size", "median_global_mse", "n_seeds"],
                      curve_rows)
    _write_gnuplot_stub(out / "data_efficiency.gp", "data_efficiency_curve.csv",
                        "median Global MSE vs training size")
    return per_run, curve


# -- least-squares identification baseline -----------------------------------

def fit_id_baseline(robot, train: Dataset, ridge=1e-8):
    """Ridge-regularized least squares on the inverse-dynamics regressor.

    Returns the estimated parameter vector; the regularizer is
    ``ridge * trace(Phi^T Phi) / n_params``.
    """
    phi = regressor_matrix(robot, train.states.q, train.states.qd, train.states.qdd)
    A = phi.reshape(-1, phi.shape[-1])
    y = train.tau.ravel()
    gram = A.T @ A
    rho = ridge * np.trace(gram) / gram.shape[0]
    w = np.linalg.solve(gram + rho * np.eye(gram.shape[0]), A.T @ y)
    return w


def run_id_baseline(cfg: ExperimentConfig, out_dir=None, run=0):
    """Classic linear identification scored like the GP estimators."""
    out = Path(out_dir or cfg.out_dir)
    robot, train, test = build_run_datasets(cfg, run)
    w = fit_id_baseline(robot, train, ridge=cfg.ridge)
    phi_test = regressor_matrix(robot, test.states.q, test.states.qd,
                                test.states.qdd)
    pred = phi_test @ w
    per_joint = nmse(pred, test.tau)
    header = (["estimator"] + [f"nmse_j{j + 1}" for j in range(robot.n)]
              + ["avg_nmse", "global_mse", "ridge"])
    row = (["id"] + [float(v) for v in per_joint]
           + [float(np.mean(per_joint)), global_mse(pred, test.tau), cfg.ridge])
    path = write_csv(out / "id_baseline.csv", header, [row])
    w_true = param_vector(robot, include_friction=True)
    write_csv(out / "id_parameters.csv", ["index", "estimated", "true"],
              [[i, float(w[i]), float(w_true[i])] for i in range(w.size)])
    return path


# -- dataset simulation -------------------------------------------------------

def simulate_datasets(cfg: ExperimentConfig, out_dir=None, run=0):
    out = Path(out_dir or cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _, train, test = build_run_datasets(cfg, run)
    train_path = save_dataset(train, out / "train.csv")
    test_path = save_dataset(test, out / "test.csv")
    return train_path, test_path


def _write_timings(path, records):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(records, fh, indent=2)
        fh.write("\n")
    return path


def _write_gnuplot_stub(path, data_file, title):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(
            f"# gnuplot stub; render the plot-ready CSV next to this file\n"
            f"set datafile separator ','\n"
            f"set key autotitle columnhead\n"
            f"set title '{title}'\n"
            f"set logscale y\n"
            f"plot '{data_file}' using 0:4\n")
    return path
