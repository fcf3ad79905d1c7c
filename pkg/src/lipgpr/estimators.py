"""Named inverse-dynamics estimators and their fitting policies.

Registry names: "lip", "lse", "se", "sp", "gip", "lip+friction",
"se+friction".  The first two are multi-output operator kernels; the rest
model each joint torque with an independent single-output GP.  "gip" is a
stand-in for the geometry-inspired polynomial baseline: the per-joint
diagonal of the multi-output operator kernel.

Polynomial hyperparameters start at unit weights (log 0).  Squared
exponential atoms instead start from the data scale (per-coordinate
variance times dimension, signal variance for the amplitude): at raw joint
scales a unit length-scale puts all pairwise similarities in the flat tail
of the exponential where the likelihood gradient vanishes.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .energy import estimate_energies
from .gpr import GPModel
from .lip import (FrictionKernel, JointOperatorKernel, LagrangianTorqueKernel,
                  TransformedInput, se_joint_kernel, sp_joint_kernel)
from .kernels import SquaredExponential
from .robot import RobotModel, StateBatch, load_robot

ESTIMATOR_NAMES = ("lip", "lse", "se", "sp", "gip", "lip+friction", "se+friction")

CHECKPOINT_FORMAT = "lipgpr-checkpoint-1"


@dataclass
class FitOptions:
    optimize: bool = True
    max_iter: int = 200
    fd_step: float = 1e-5
    gtol: float = 1e-6
    learn_noise: bool = True
    noise_init: float = 1e-2   # learned-noise start when the dataset says 0
    subsample: int | None = None  # cap on samples used during likelihood ascent

    @classmethod
    def from_dict(cls, d):
        d = dict(d or {})
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown fit options: {sorted(unknown)}")
        return cls(**d)


@dataclass
class FitReport:
    estimator: str
    seconds: float = 0.0
    lml: float = float("nan")
    n_evals: int = 0
    warnings: list = field(default_factory=list)


def _se_scale_init(atom: SquaredExponential, feats, y):
    var = np.var(feats, axis=0)[list(atom.selector)]
    dim = len(atom.selector)
    atom.log_lengthscales[:] = np.log(dim * np.maximum(var, 1e-6))
    atom.log_scale[...] = np.log(max(float(np.var(y)), 1e-6))


class _Fitted:
    """Common bookkeeping for the registry estimators."""

    supports_energy = False

    def __init__(self, name, options: FitOptions):
        self.name = name
        self.options = options
        self.report = FitReport(estimator=name)

    def _sigma_init(self, dataset):
        sigma = dataset.sigma.copy()
        if self.options.learn_noise:
            sigma = np.maximum(sigma, self.options.noise_init)
        return sigma

    def _opt_subset(self, dataset):
        k = self.options.subsample
        if k is not None and k < len(dataset):
            return dataset.subset(slice(0, int(k)))
        return dataset


class MultiOutputEstimator(_Fitted):
    """One GP over all joints with an operator-derived torque kernel."""

    def __init__(self, name, kernel: LagrangianTorqueKernel, options):
        super().__init__(name, options)
        self.kernel = kernel
        self.model = None
        self._se_initialized = False

    @property
    def supports_energy(self):
        return self.kernel.has_energy

    def _init_hyperparameters(self, dataset):
        # scale-based start for SE atoms, once; refits keep tuned values
        if self._se_initialized:
            return
        self._se_initialized = True
        se_atoms = [a for a in self.kernel.lagrangian.atoms()
                    if isinstance(a, SquaredExponential)]
        if se_atoms:
            coords = TransformedInput(dataset.states.q, dataset.states.qd,
                                      dataset.states.qdd, self.kernel.layout.kinds).coords()
            for atom in se_atoms:
                _se_scale_init(atom, coords, dataset.tau)
        if self.kernel.friction is not None and self.kernel.friction.se is not None:
            raw = dataset.states.raw()
            for atom in self.kernel.friction.se:
                _se_scale_init(atom, raw, dataset.tau)

    def fit(self, dataset):
        t0 = time.perf_counter()
        self._init_hyperparameters(dataset)
        self.model = GPModel(self.kernel, self._sigma_init(dataset),
                             learn_noise=self.options.learn_noise, name=self.name)
        if self.options.optimize:
            sub = self._opt_subset(dataset)
            self.model.fit(sub.states, sub.tau)
            res = self.model.optimize(max_iter=self.options.max_iter,
                                      fd_step=self.options.fd_step,
                                      gtol=self.options.gtol)
            self.report.n_evals = res.n_evals
            if res.warning:
                self.report.warnings.append(res.warning)
        self.model.fit(dataset.states, dataset.tau)
        self.report.lml = self.model.log_marginal_likelihood()
        self.report.seconds = time.perf_counter() - t0
        return self

    def predict(self, states: StateBatch):
        return self.model.predict(states)

    def energies(self, states: StateBatch):
        return estimate_energies(self.model, states)


class PerJointEstimator(_Fitted):
    """Independent single-output GPs, one per joint torque."""

    def __init__(self, name, kernels, options):
        super().__init__(name, options)
        self.kernels = list(kernels)
        self.models = None
        self._se_initialized = False

    def fit(self, dataset):
        t0 = time.perf_counter()
        sigma = self._sigma_init(dataset)
        init_se = not self._se_initialized
        self._se_initialized = True
        self.models = []
        lmls = []
        for j, kernel in enumerate(self.kernels):
            if init_se and hasattr(kernel, "features"):
                feats = kernel.features(dataset.states)
                for atom in kernel.expr.atoms():
                    if isinstance(atom, SquaredExponential):
                        _se_scale_init(atom, feats, dataset.tau[:, j])
            model = GPModel(kernel, sigma[j], learn_noise=self.options.learn_noise,
                            name=f"{self.name}.j{j + 1}")
            if self.options.optimize:
                sub = self._opt_subset(dataset)
                model.fit(sub.states, sub.tau[:, j])
                res = model.optimize(max_iter=self.options.max_iter,
                                     fd_step=self.options.fd_step,
                                     gtol=self.options.gtol)
                self.report.n_evals += res.n_evals
                if res.warning:
                    self.report.warnings.append(f"j{j + 1}: {res.warning}")
            model.fit(dataset.states, dataset.tau[:, j])
            lmls.append(model.log_marginal_likelihood())
            self.models.append(model)
        self.report.lml = float(np.sum(lmls))
        self.report.seconds = time.perf_counter() - t0
        return self

    def predict(self, states: StateBatch):
        means, variances = [], []
        for model in self.models:
            m, v = model.predict(states)
            means.append(m[:, 0])
            variances.append(v[:, 0])
        return np.column_stack(means), np.column_stack(variances)


def make_estimator(name, robot: RobotModel, options: FitOptions | None = None):
    options = options or FitOptions()
    kinds = robot.kinds
    n = robot.n
    if name == "lip":
        return MultiOutputEstimator(name, LagrangianTorqueKernel.lip(kinds), options)
    if name == "lip+friction":
        fric = FrictionKernel(n, with_se=True, raw_dim=3 * n)
        return MultiOutputEstimator(name, LagrangianTorqueKernel.lip(kinds, friction=fric),
                                    options)
    if name == "lse":
        # only the linear friction feature helps this baseline, so none here
        return MultiOutputEstimator(name, LagrangianTorqueKernel.lse(kinds), options)
    if name == "se":
        return PerJointEstimator(name, [se_joint_kernel(n, j) for j in range(n)],
                                 options)
    if name == "se+friction":
        return PerJointEstimator(name,
                                 [se_joint_kernel(n, j, with_friction=True)
                                  for j in range(n)], options)
    if name == "sp":
        return PerJointEstimator(name, [sp_joint_kernel(robot, j) for j in range(n)],
                                 options)
    if name == "gip":
        return PerJointEstimator(name, [JointOperatorKernel(kinds, j) for j in range(n)],
                                 options)
    raise ValueError(f"unknown estimator {name!r}; choose from {ESTIMATOR_NAMES}")


# -- checkpoints -------------------------------------------------------------

def save_checkpoint(est, path, robot_source=None, dataset_path=None):
    """Persist a fitted estimator: kernel name, log-parameters, noise,
    jitter and weight vector(s), plus references to what trained it."""
    if isinstance(est, MultiOutputEstimator):
        models = [est.model]
    else:
        models = est.models
    if models is None or models[0] is None or models[0].alpha is None:
        raise RuntimeError("fit the estimator before saving a checkpoint")
    payload = {
        "format": CHECKPOINT_FORMAT,
        "estimator": est.name,
        "robot": str(robot_source) if robot_source is not None else None,
        "dataset": str(dataset_path) if dataset_path is not None else None,
        "multi_output": isinstance(est, MultiOutputEstimator),
        "sigma": [m.sigma.tolist() for m in models],
        "theta": [m.kernel.theta().tolist() for m in models],
        "param_names": [m.kernel.param_names() for m in models],
        "jitter": [m.jitter for m in models],
        "alpha": [m.alpha.tolist() for m in models],
        "lml": [m.log_marginal_likelihood() for m in models],
    }
    path = Path(path)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    return path


def load_checkpoint(path, dataset, robot=None, options=None):
    """Rebuild a fitted estimator from a checkpoint and its training data.

    The Gram factorization is recomputed from the stored hyperparameters;
    the stored weight vector is kept for reference and cross-checked.
    """
    with open(path) as fh:
        payload = json.load(fh)
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"not a lipgpr checkpoint: {path}")
    if robot is None:
        if not payload.get("robot"):
            raise ValueError("checkpoint has no robot reference; pass one")
        robot = load_robot(payload["robot"])
    options = options or FitOptions(optimize=False, learn_noise=False)
    options.optimize = False
    est = make_estimator(payload["estimator"], robot, options)
    if isinstance(est, MultiOutputEstimator):
        est.kernel.set_theta(np.asarray(payload["theta"][0]))
        est.model = GPModel(est.kernel, np.asarray(payload["sigma"][0]),
                            learn_noise=False, name=est.name)
        est.model.fit(dataset.states, dataset.tau)
    else:
        est.models = []
        for j, kernel in enumerate(est.kernels):
            kernel.set_theta(np.asarray(payload["theta"][j]))
            model = GPModel(kernel, np.asarray(payload["sigma"][j]),
                            learn_noise=False, name=f"{est.name}.j{j + 1}")
            model.fit(dataset.states, dataset.tau[:, j])
            est.models.append(model)
    return est
