"""Excitation trajectories and noisy torque datasets.

Joint trajectories are sums of random-phase harmonics of a common base
frequency; position, velocity and acceleration come from term-wise analytic
differentiation.  Coefficients are rescaled per joint by the largest
limit-violation ratio, which preserves the spectral content and always
terminates, and the position track is centered on the limit midpoint so
that one-sided ranges are usable.

Datasets are persisted as a CSV (``t, q*, qd*, qdd*, tau*``) plus a JSON
metadata sidecar; floats are written with shortest round-trip formatting so
write -> read -> write is byte-identical.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .robot import StateBatch, inverse_dynamics


@dataclass(frozen=True)
class SinusoidSpec:
    """Sum-of-sinusoids excitation signal parameters."""

    n_harmonics: int = 50
    base_freq: float = 0.02  # rad/s
    amplitude: float = 1.0   # bound of the uniform coefficient draw
    seed: int = 0
    duration: float = 50.0   # s
    sample_rate: float = 10.0  # Hz

    def __post_init__(self):
        if self.n_harmonics < 1:
            raise ValueError("need at least one harmonic")
        if self.base_freq <= 0 or self.sample_rate <= 0 or self.duration <= 0:
            raise ValueError("base_freq, sample_rate and duration must be positive")


@dataclass(frozen=True)
class JointLimits:
    q_min: np.ndarray
    q_max: np.ndarray
    qd_max: np.ndarray
    qdd_max: np.ndarray

    def __post_init__(self):
        for name in ("q_min", "q_max", "qd_max", "qdd_max"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if not np.all(self.q_min < self.q_max):
            raise ValueError("q_min must be elementwise below q_max")
        if np.any(self.qd_max <= 0) or np.any(self.qdd_max <= 0):
            raise ValueError("velocity and acceleration limits must be positive")

    @classmethod
    def symmetric(cls, n, q=2.5, qd=2.2, qdd=10.0):
        ones = np.ones(n)
        return cls(-q * ones, q * ones, qd * ones, qdd * ones)

    def check(self, traj, atol=1e-9):
        ok = (np.all(traj.states.q >= self.q_min - atol)
              and np.all(traj.states.q <= self.q_max + atol)
              and np.all(np.abs(traj.states.qd) <= self.qd_max + atol)
              and np.all(np.abs(traj.states.qdd) <= self.qdd_max + atol))
        return bool(ok)


@dataclass(frozen=True)
class Trajectory:
    t: np.ndarray
    states: StateBatch


@dataclass(frozen=True)
class Dataset:
    """Time-indexed states with measured torques and the noise model."""

    t: np.ndarray
    states: StateBatch
    tau: np.ndarray
    sigma: np.ndarray  # per-joint torque noise standard deviation
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "t", np.asarray(self.t, dtype=float))
        object.__setattr__(self, "tau", np.atleast_2d(np.asarray(self.tau, dtype=float)))
        sig = np.asarray(self.sigma, dtype=float)
        if sig.ndim == 0:
            sig = np.full(self.states.n, float(sig))
        object.__setattr__(self, "sigma", sig)
        if self.tau.shape != self.states.q.shape:
            raise ValueError("tau must match the state batch shape")
        if self.sigma.shape != (self.states.n,):
            raise ValueError("one noise standard deviation per joint")

    def __len__(self):
        return len(self.states)

    @property
    def n(self):
        return self.states.n

    def subset(self, idx):
        return Dataset(self.t[idx], self.states.subset(idx), self.tau[idx],
                       self.sigma, dict(self.meta))


def generate_trajectory(spec: SinusoidSpec, limits: JointLimits, n: int) -> Trajectory:
    """Deterministic sum-of-sinusoids trajectory respecting the limits.

    q_i(t) = mid_i + s_i * sum_l [ a_l/(w l) sin(w l t) - b_l/(w l) cos(w l t) ]
    with a, b ~ U[-c, c] drawn per joint per harmonic from ``spec.seed`` and
    s_i the per-joint shrink factor making every limit hold.
    """
    rng = np.random.default_rng(spec.seed)
    c = np.broadcast_to(np.asarray(spec.amplitude, dtype=float), (n,))
    coeffs = rng.uniform(-1.0, 1.0, size=(2, n, spec.n_harmonics)) * c[:, None]
    a, b = coeffs[0], coeffs[1]

    n_samples = int(round(spec.duration * spec.sample_rate))
    t = np.arange(n_samples) / spec.sample_rate
    l = np.arange(1, spec.n_harmonics + 1)
    w = spec.base_freq * l
    wt = np.outer(t, w)
    sin_wt, cos_wt = np.sin(wt), np.cos(wt)

    q_osc = sin_wt @ (a / w).T - cos_wt @ (b / w).T
    qd = cos_wt @ a.T + sin_wt @ b.T
    qdd = -sin_wt @ (a * w).T + cos_wt @ (b * w).T

    mid = 0.5 * (limits.q_min + limits.q_max)
    half = 0.5 * (limits.q_max - limits.q_min)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.max(np.stack([
            np.max(np.abs(q_osc), axis=0) / half,
            np.max(np.abs(qd), axis=0) / limits.qd_max,
            np.max(np.abs(qdd), axis=0) / limits.qdd_max,
        ]), axis=0)
    scale = np.where(ratio > 1.0, (1.0 - 1e-12) / np.maximum(ratio, 1e-300), 1.0)

    traj = Trajectory(t, StateBatch(mid + scale * q_osc, scale * qd, scale * qdd))
    if not limits.check(traj):
        raise RuntimeError("trajectory rescaling failed to satisfy the joint limits")
    return traj


def synthesize_dataset(model, traj: Trajectory, sigma, include_friction=False,
                       seed=0, meta=None) -> Dataset:
    """Oracle torques along a trajectory plus Gaussian measurement noise."""
    s = traj.states
    tau = inverse_dynamics(model, s.q, s.qd, s.qdd, include_friction=include_friction)
    sig = np.broadcast_to(np.asarray(sigma, dtype=float), (s.n,)).copy()
    if np.any(sig > 0):
        rng = np.random.default_rng(seed)
        tau = tau + rng.normal(size=tau.shape) * sig
    info = {"seed": int(seed), "sigma": sig.tolist(),
            "include_friction": bool(include_friction)}
    if meta:
        info.update(meta)
    return Dataset(traj.t, s, tau, sig, info)


# -- persistence -----------------------------------------------------------

def _fmt(x):
    return repr(float(x))


def _meta_path(path):
    return Path(path).with_suffix(".meta.json")


def save_dataset(ds: Dataset, path):
    path = Path(path)
    n = ds.n
    cols = (["t"]
            + [f"q{i + 1}" for i in range(n)]
            + [f"qd{i + 1}" for i in range(n)]
            + [f"qdd{i + 1}" for i in range(n)]
            + [f"tau{i + 1}" for i in range(n)])
    table = np.hstack([ds.t[:, None], ds.states.q, ds.states.qd, ds.states.qdd, ds.tau])
    with open(path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for row in table:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    meta = dict(ds.meta)
    meta["sigma"] = ds.sigma.tolist()
    with open(_meta_path(path), "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def load_dataset(path) -> Dataset:
    path = Path(path)
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        table = np.array([[float(v) for v in line.strip().split(",")]
                          for line in fh if line.strip()])
    if (len(header) - 1) % 4:
        raise ValueError(f"malformed dataset header in {path}")
    n = (len(header) - 1) // 4
    meta = {}
    mpath = _meta_path(path)
    if mpath.exists():
        with open(mpath) as fh:
            meta = json.load(fh)
    sigma = np.asarray(meta.get("sigma", np.zeros(n)), dtype=float)
    t = table[:, 0]
    q, qd, qdd, tau = (table[:, 1 + k * n:1 + (k + 1) * n] for k in range(4))
    return Dataset(t, StateBatch(q, qd, qdd), tau, sigma, meta)


def spec_to_dict(spec: SinusoidSpec):
    return asdict(spec)


def spec_from_dict(d):
    return SinusoidSpec(**d)
