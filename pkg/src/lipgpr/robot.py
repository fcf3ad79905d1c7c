"""Analytic serial-manipulator model used as simulator and ground truth.

Kinematics follow the Denavit-Hartenberg convention: link frame ``i`` is
reached from frame ``i-1`` by ``Rz(theta_i) Rx(alpha_i)`` with translation
``[0, 0, d_i] + Rz(theta_i) [a_i, 0, 0]``.  For a revolute joint
``theta_i = theta0_i + q_i``; for a prismatic joint ``d_i = d0_i + q_i``.

Torques come from a Newton-Euler recursion expressed in base-frame
quantities and parameterized by the per-link vector

    [m, h_x, h_y, h_z, Ixx, Ixy, Ixz, Iyy, Iyz, Izz, fv, fc]

where ``h = m * com`` is the first moment and the inertia tensor is taken
about the link-frame origin (parallel-axis applied internally).  Torque is
exactly linear in this vector, which is what makes the regressor matrix
computable column-by-column from unit parameter vectors.

Potential energy uses the convention that V grows against gravity, so the
gravity torque is ``dV/dq`` and d(T+V)/dt equals the actuation power
``qd . tau`` on frictionless motion.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

REVOLUTE = "revolute"
PRISMATIC = "prismatic"

PARAMS_PER_LINK = 12
_ROBOT_DIR = Path(__file__).parent / "robots"


@dataclass(frozen=True)
class DhLink:
    """DH quadruple of one link; ``theta`` / ``d`` are the joint offsets."""

    a: float
    alpha: float
    d: float
    theta: float
    kind: str = REVOLUTE

    def __post_init__(self):
        if self.kind not in (REVOLUTE, PRISMATIC):
            raise ValueError(f"unknown joint kind {self.kind!r}")


@dataclass(frozen=True)
class InertialParams:
    """Mass, COM (link frame), inertia about the COM, friction pair."""

    mass: float
    com: np.ndarray
    inertia: np.ndarray  # 3x3 symmetric PSD, about the COM, link axes
    fv: float = 0.0
    fc: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "com", np.asarray(self.com, dtype=float))
        object.__setattr__(self, "inertia", np.asarray(self.inertia, dtype=float))
        if self.mass <= 0:
            raise ValueError("link mass must be positive")
        if self.com.shape != (3,):
            raise ValueError("com must be a 3-vector")
        if self.inertia.shape != (3, 3):
            raise ValueError("inertia must be a 3x3 tensor")
        if not np.allclose(self.inertia, self.inertia.T, atol=1e-12):
            raise ValueError("inertia tensor must be symmetric")
        if np.linalg.eigvalsh(self.inertia).min() < -1e-12:
            raise ValueError("inertia tensor must be positive semidefinite")
        if self.fv < 0 or self.fc < 0:
            raise ValueError("friction coefficients must be nonnegative")


@dataclass(frozen=True)
class RobotModel:
    """Ordered kinematic chain with inertial data and a gravity vector."""

    links: tuple
    gravity: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, -9.81]))

    def __post_init__(self):
        object.__setattr__(self, "links", tuple(self.links))
        object.__setattr__(self, "gravity", np.asarray(self.gravity, dtype=float))
        if self.gravity.shape != (3,):
            raise ValueError("gravity must be a 3-vector")
        if not self.links:
            raise ValueError("robot needs at least one link")

    @property
    def n(self):
        return len(self.links)

    @property
    def kinds(self):
        return tuple(link.kind for link, _ in self.links)

    @property
    def revolute_indices(self):
        return tuple(i for i, k in enumerate(self.kinds) if k == REVOLUTE)

    @property
    def prismatic_indices(self):
        return tuple(i for i, k in enumerate(self.kinds) if k == PRISMATIC)


@dataclass(frozen=True)
class JointState:
    """One sample of joint positions, velocities and accelerations."""

    q: np.ndarray
    qd: np.ndarray
    qdd: np.ndarray

    def __post_init__(self):
        for name in ("q", "qd", "qdd"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if not (self.q.shape == self.qd.shape == self.qdd.shape):
            raise ValueError("q, qd, qdd must share their shape")


@dataclass(frozen=True)
class StateBatch:
    """Columns of joint states; the GP input representation."""

    q: np.ndarray
    qd: np.ndarray
    qdd: np.ndarray

    def __post_init__(self):
        for name in ("q", "qd", "qdd"):
            arr = np.atleast_2d(np.asarray(getattr(self, name), dtype=float))
            object.__setattr__(self, name, arr)
        if not (self.q.shape == self.qd.shape == self.qdd.shape):
            raise ValueError("q, qd, qdd must share their shape")

    def __len__(self):
        return self.q.shape[0]

    @property
    def n(self):
        return self.q.shape[1]

    def subset(self, idx):
        return StateBatch(self.q[idx], self.qd[idx], self.qdd[idx])

    def raw(self):
        """Samples as rows (q, qd, qdd) concatenated, for plain kernels."""
        return np.hstack([self.q, self.qd, self.qdd])


# -- robot configuration files --------------------------------------------

def robot_from_dict(cfg):
    links = []
    for rec in cfg["links"]:
        iner6 = np.asarray(rec["inertia"], dtype=float)
        if iner6.shape == (6,):
            ixx, ixy, ixz, iyy, iyz, izz = iner6
            iner = np.array([[ixx, ixy, ixz], [ixy, iyy, iyz], [ixz, iyz, izz]])
        else:
            iner = iner6
        fv, fc = rec.get("friction", (0.0, 0.0))
        links.append((
            DhLink(a=float(rec["a"]), alpha=float(rec["alpha"]),
                   d=float(rec["d"]), theta=float(rec["theta"]),
                   kind=rec.get("joint", REVOLUTE)),
            InertialParams(mass=float(rec["mass"]), com=rec["com"],
                           inertia=iner, fv=float(fv), fc=float(fc)),
        ))
    return RobotModel(links=tuple(links), gravity=cfg.get("gravity", [0.0, 0.0, -9.81]))


def load_robot(source):
    """Load a robot from a YAML file path or a bundled fixture name."""
    path = Path(source)
    if not path.exists():
        bundled = _ROBOT_DIR / f"{source}.yaml"
        if bundled.exists():
            path = bundled
        else:
            raise FileNotFoundError(f"no robot file or bundled robot named {source!r}")
    with open(path) as fh:
        return robot_from_dict(yaml.safe_load(fh))


def builtin_robots():
    return sorted(p.stem for p in _ROBOT_DIR.glob("*.yaml"))


# -- kinematics ------------------------------------------------------------

def _batched(q, n):
    q = np.asarray(q, dtype=float)
    if q.ndim == 1:
        q = q[None, :]
        squeeze = True
    else:
        squeeze = False
    if q.shape[-1] != n:
        raise ValueError(f"expected {n} joint coordinates, got {q.shape[-1]}")
    return q, squeeze


def _link_transform(link, qi):
    """Rotation and translation of frame i relative to frame i-1, batched."""
    theta = link.theta + (qi if link.kind == REVOLUTE else 0.0)
    d = link.d + (qi if link.kind == PRISMATIC else 0.0)
    ct, st = np.cos(theta), np.sin(theta)
    ca, sa = np.cos(link.alpha), np.sin(link.alpha)
    B = qi.shape[0]
    R = np.empty((B, 3, 3))
    R[:, 0, 0], R[:, 0, 1], R[:, 0, 2] = ct, -st * ca, st * sa
    R[:, 1, 0], R[:, 1, 1], R[:, 1, 2] = st, ct * ca, -ct * sa
    R[:, 2, 0], R[:, 2, 1], R[:, 2, 2] = 0.0, sa, ca
    l = np.empty((B, 3))
    l[:, 0] = link.a * ct
    l[:, 1] = link.a * st
    l[:, 2] = d
    return R, l


def _chain(model, q):
    """Base-frame rotations, origins, COM positions and joint axes."""
    B = q.shape[0]
    n = model.n
    R = np.empty((B, n, 3, 3))
    origins = np.empty((B, n, 3))
    coms = np.empty((B, n, 3))
    axes = np.empty((B, n, 3))  # axis of joint i, i.e. z of frame i-1
    R_prev = np.broadcast_to(np.eye(3), (B, 3, 3))
    o_prev = np.zeros((B, 3))
    for i, (link, iner) in enumerate(model.links):
        axes[:, i] = R_prev[:, :, 2]
        Rl, l_local = _link_transform(link, q[:, i])
        R[:, i] = R_prev @ Rl
        origins[:, i] = o_prev + np.einsum("bij,bj->bi", R_prev, l_local)
        coms[:, i] = origins[:, i] + np.einsum("bij,j->bi", R[:, i], iner.com)
        R_prev = R[:, i]
        o_prev = origins[:, i]
    return R, origins, coms, axes


def forward_kinematics(model, q):
    """Per-link base-frame rotation, frame origin and COM position.

    Returns arrays of shape (n, 3, 3), (n, 3), (n, 3), batched over leading
    sample axes when ``q`` is 2-D.
    """
    q, squeeze = _batched(q, model.n)
    R, origins, coms, _ = _chain(model, q)
    if squeeze:
        return R[0], origins[0], coms[0]
    return R, origins, coms


def link_jacobians(model, q):
    """COM linear Jacobians and angular Jacobians, one pair per link.

    Column j of the angular Jacobian of link i is the joint axis for a
    revolute joint j and zero for a prismatic one; linear columns are the
    axis cross the lever arm (revolute) or the axis itself (prismatic).
    """
    q, squeeze = _batched(q, model.n)
    R, origins, coms, axes = _chain(model, q)
    B = q.shape[0]
    jac_p, jac_o = [], []
    for i in range(model.n):
        Jp = np.zeros((B, 3, i + 1))
        Jo = np.zeros((B, 3, i + 1))
        for j in range(i + 1):
            if model.links[j][0].kind == REVOLUTE:
                o_j = origins[:, j - 1] if j > 0 else np.zeros((B, 3))
                Jp[:, :, j] = np.cross(axes[:, j], coms[:, i] - o_j)
                Jo[:, :, j] = axes[:, j]
            else:
                Jp[:, :, j] = axes[:, j]
        jac_p.append(Jp[0] if squeeze else Jp)
        jac_o.append(Jo[0] if squeeze else Jo)
    return jac_p, jac_o


def inertia_matrix(model, q, per_link=False):
    """Joint-space inertia matrix B(q); optionally also each link's block.

    B is assembled as the sum over links of
    ``m_i Jp_i^T Jp_i + Jo_i^T R_i I_i R_i^T Jo_i`` with the inertia tensor
    about the COM, so it is symmetric by construction.
    """
    q, squeeze = _batched(q, model.n)
    R, _, _, _ = _chain(model, q)
    jac_p, jac_o = link_jacobians(model, q if not squeeze else q)
    B = q.shape[0]
    n = model.n
    Bq = np.zeros((B, n, n))
    blocks = []
    for i, (_, iner) in enumerate(model.links):
        Jp, Jo = jac_p[i], jac_o[i]
        I_base = R[:, i] @ iner.inertia @ np.swapaxes(R[:, i], -1, -2)
        Bi = iner.mass * np.swapaxes(Jp, -1, -2) @ Jp \
            + np.swapaxes(Jo, -1, -2) @ I_base @ Jo
        Bq[:, :i + 1, :i + 1] += Bi
        blocks.append(Bi[0] if squeeze else Bi)
    Bq = Bq[0] if squeeze else Bq
    return (Bq, blocks) if per_link else Bq


def energies(model, q, qd):
    """Per-link kinetic energies, total kinetic energy and potential energy.

    T_i = qd_i^T B_i qd_i / 2; V = -sum_i m_i g . c_i so that the gravity
    torque equals dV/dq.
    """
    q, squeeze = _batched(q, model.n)
    qd, _ = _batched(qd, model.n)
    _, blocks = inertia_matrix(model, q, per_link=True)
    _, _, coms, _ = _chain(model, q)
    B = q.shape[0]
    T_links = np.empty((B, model.n))
    for i, Bi in enumerate(blocks):
        v = qd[:, :i + 1]
        T_links[:, i] = 0.5 * np.einsum("bi,bij,bj->b", v, Bi, v)
    masses = np.array([iner.mass for _, iner in model.links])
    V = -np.einsum("j,bij,i->b", masses, np.swapaxes(coms, 1, 2), model.gravity)
    T = T_links.sum(axis=1)
    if squeeze:
        return T_links[0], T[0], V[0]
    return T_links, T, V


# -- Newton-Euler dynamics --------------------------------------------------

def param_vector(model, include_friction=True):
    """Stacked per-link parameters in which torque is linear."""
    w = np.zeros(PARAMS_PER_LINK * model.n)
    for i, (_, iner) in enumerate(model.links):
        c = iner.com
        m = iner.mass
        I_origin = iner.inertia + m * (np.dot(c, c) * np.eye(3) - np.outer(c, c))
        base = PARAMS_PER_LINK * i
        w[base] = m
        w[base + 1:base + 4] = m * c
        w[base + 4:base + 10] = I_origin[np.triu_indices(3)]
        if include_friction:
            w[base + 10] = iner.fv
            w[base + 11] = iner.fc
    return w


def param_names(model):
    fields = ["m", "hx", "hy", "hz", "Ixx", "Ixy", "Ixz", "Iyy", "Iyz", "Izz",
              "fv", "fc"]
    return [f"link{i + 1}.{f}" for i in range(model.n) for f in fields]


def _kinematic_pass(model, q, qd, qdd):
    """Velocities and accelerations of every link frame, gravity included.

    The base is given the fictitious acceleration -g, which folds gravity
    into the same linear recursion as the inertial terms.
    """
    B = q.shape[0]
    n = model.n
    R, origins, _, axes = _chain(model, q)
    omega = np.zeros((B, n, 3))
    domega = np.zeros((B, n, 3))
    acc = np.zeros((B, n, 3))
    w_prev = np.zeros((B, 3))
    dw_prev = np.zeros((B, 3))
    a_prev = np.broadcast_to(-model.gravity, (B, 3))
    o_prev = np.zeros((B, 3))
    for i, (link, _) in enumerate(model.links):
        z = axes[:, i]
        r = origins[:, i] - o_prev
        if link.kind == REVOLUTE:
            w = w_prev + qd[:, i:i + 1] * z
            dw = dw_prev + qdd[:, i:i + 1] * z + qd[:, i:i + 1] * np.cross(w_prev, z)
            a = a_prev + np.cross(dw, r) + np.cross(w, np.cross(w, r))
        else:
            w = w_prev
            dw = dw_prev
            a = a_prev + np.cross(dw, r) + np.cross(w, np.cross(w, r)) \
                + qdd[:, i:i + 1] * z + 2.0 * qd[:, i:i + 1] * np.cross(w, z)
        omega[:, i], domega[:, i], acc[:, i] = w, dw, a
        w_prev, dw_prev, a_prev, o_prev = w, dw, a, origins[:, i]
    return R, origins, axes, omega, domega, acc


def _torques_from_params(model, kin, w, qd):
    """Joint torques for the parameter vector ``w``; linear in ``w``."""
    R, origins, axes, omega, domega, acc = kin
    B = omega.shape[0]
    n = model.n
    iu = np.triu_indices(3)
    force = np.empty((B, n, 3))
    moment0 = np.empty((B, n, 3))  # inertial moment about the base origin
    for i in range(n):
        base = PARAMS_PER_LINK * i
        m = w[base]
        h_local = w[base + 1:base + 4]
        I_local = np.zeros((3, 3))
        I_local[iu] = w[base + 4:base + 10]
        I_local = I_local + np.triu(I_local, 1).T
        Ri = R[:, i]
        h = np.einsum("bij,j->bi", Ri, h_local)
        Io = Ri @ I_local @ np.swapaxes(Ri, -1, -2)
        wi, dwi, ai = omega[:, i], domega[:, i], acc[:, i]
        F = m * ai + np.cross(dwi, h) + np.cross(wi, np.cross(wi, h))
        N = np.einsum("bij,bj->bi", Io, dwi) \
            + np.cross(wi, np.einsum("bij,bj->bi", Io, wi)) \
            + np.cross(h, ai)
        force[:, i] = F
        moment0[:, i] = N + np.cross(origins[:, i], F)
    f_suffix = np.cumsum(force[:, ::-1], axis=1)[:, ::-1]
    m_suffix = np.cumsum(moment0[:, ::-1], axis=1)[:, ::-1]
    tau = np.empty((B, n))
    o_prev = np.zeros((B, 3))
    for i, (link, _) in enumerate(model.links):
        if link.kind == REVOLUTE:
            m_joint = m_suffix[:, i] - np.cross(o_prev, f_suffix[:, i])
            tau[:, i] = np.einsum("bi,bi->b", axes[:, i], m_joint)
        else:
            tau[:, i] = np.einsum("bi,bi->b", axes[:, i], f_suffix[:, i])
        base = PARAMS_PER_LINK * i
        tau[:, i] += w[base + 10] * qd[:, i] + w[base + 11] * np.sign(qd[:, i])
        o_prev = origins[:, i]
    return tau


def inverse_dynamics(model, q, qd, qdd, include_friction=False):
    """Joint torques B(q) qdd + c(q, qd) + g(q) (+ friction), Newton-Euler."""
    q, squeeze = _batched(q, model.n)
    qd, _ = _batched(qd, model.n)
    qdd, _ = _batched(qdd, model.n)
    kin = _kinematic_pass(model, q, qd, qdd)
    tau = _torques_from_params(model, kin, param_vector(model, include_friction), qd)
    return tau[0] if squeeze else tau


def regressor_matrix(model, q, qd, qdd):
    """Matrix Phi with tau = Phi(q, qd, qdd) w for the stacked parameters.

    Columns are obtained by evaluating the Newton-Euler pass on unit
    parameter vectors; the kinematic quantities are shared across columns.
    """
    q, squeeze = _batched(q, model.n)
    qd, _ = _batched(qd, model.n)
    qdd, _ = _batched(qdd, model.n)
    kin = _kinematic_pass(model, q, qd, qdd)
    nd = PARAMS_PER_LINK * model.n
    phi = np.empty((q.shape[0], model.n, nd))
    for j in range(nd):
        e = np.zeros(nd)
        e[j] = 1.0
        phi[:, :, j] = _torques_from_params(model, kin, e, qd)
    return phi[0] if squeeze else phi


def torque_from_state(model, state: JointState, include_friction=False):
    return inverse_dynamics(model, state.q, state.qd, state.qdd, include_friction)
