"""Energy-prior kernels and the torque covariance they induce.

The Lagrangian of a serial chain is modeled as a zero-mean GP with kernel
k_L = k_T + k_V on the transformed inputs (cos q, sin q of revolute joints,
raw prismatic positions, velocities).  Joint torques follow by the linear
operator

    G_i f = sum_j ( d2f/dqd_i dqd_j * qdd_j + d2f/dqd_i dq_j * qd_j )
            - df/dq_i

applied per output on each kernel argument, so the multi-output torque
kernel block is  block(i, j) = G_i G'_j k_L(x, x'),  and the energy /
torque cross-covariance rows are G'_j k_T and -G'_j k_V.

All derivatives are exact, computed with nested second-order Taylor
carriers seeded in the raw coordinates; the chain rule through the
cos / sin substitution happens inside the carriers.  Because the sums over
j in the operator are directional derivatives along (qd, qdd), one carrier
evaluation per (i, j) pair suffices, and the operator indices ride along as
broadcast axes.
"""

from __future__ import annotations

import numpy as np

from .jets import Jet, jet_sincos, level_coeff
from .kernels import Polynomial, Product, SquaredExponential, Sum
from .robot import PRISMATIC, REVOLUTE, StateBatch, regressor_matrix

_TILE_ELEMS = 2 ** 21  # per-tile budget for (n, n, N, M) work arrays


class InputLayout:
    """Index bookkeeping for the transformed input (q_c, q_s, q_p, qd)."""

    def __init__(self, kinds):
        self.kinds = tuple(kinds)
        for k in self.kinds:
            if k not in (REVOLUTE, PRISMATIC):
                raise ValueError(f"unknown joint kind {k!r}")
        self.n = len(self.kinds)
        self.rev = tuple(i for i, k in enumerate(self.kinds) if k == REVOLUTE)
        self.pri = tuple(i for i, k in enumerate(self.kinds) if k == PRISMATIC)
        self.n_rev, self.n_pri = len(self.rev), len(self.pri)
        self.dim = 2 * self.n_rev + self.n_pri + self.n

    def qc(self, joint):
        return self.rev.index(joint)

    def qs(self, joint):
        return self.n_rev + self.rev.index(joint)

    def qp(self, joint):
        return 2 * self.n_rev + self.pri.index(joint)

    def qd(self, joint):
        return 2 * self.n_rev + self.n_pri + joint

    def position_selector(self, joint):
        if self.kinds[joint] == REVOLUTE:
            return (self.qc(joint), self.qs(joint))
        return (self.qp(joint),)

    def transform_elems(self, q_elems, qd_elems):
        """Raw per-joint ring elements -> transformed coordinate list."""
        sincos = {b: jet_sincos(q_elems[b]) for b in self.rev}
        coords = [sincos[b][1] for b in self.rev]      # cos block
        coords += [sincos[b][0] for b in self.rev]     # sin block
        coords += [q_elems[b] for b in self.pri]
        coords += list(qd_elems)
        return coords


class TransformedInput:
    """Trigonometric substitution of a state batch (plain arrays)."""

    def __init__(self, q, qd, qdd, kinds):
        self.layout = InputLayout(kinds)
        q = np.atleast_2d(np.asarray(q, dtype=float))
        self.q = q
        self.qd = np.atleast_2d(np.asarray(qd, dtype=float))
        self.qdd = np.atleast_2d(np.asarray(qdd, dtype=float))
        self.qc = np.cos(q[:, self.layout.rev])
        self.qs = np.sin(q[:, self.layout.rev])
        self.qp = q[:, self.layout.pri]

    def coords(self):
        return np.hstack([self.qc, self.qs, self.qp, self.qd])


def transform_input(q, qd, qdd, kinds) -> TransformedInput:
    return TransformedInput(q, qd, qdd, kinds)


# -- energy prior construction ----------------------------------------------

def potential_prior(layout: InputLayout):
    """Product of degree-1 inhomogeneous atoms, one per joint."""
    factors = [Polynomial(layout.position_selector(b), degree=1, tag=f"kV.j{b + 1}")
               for b in range(layout.n)]
    return Product(factors)


def kinetic_link_prior(layout: InputLayout, link: int):
    """Kinetic-energy prior of one link: homogeneous squared velocity atom
    times degree-2 inhomogeneous position atoms of the joints up to it."""
    vel = Polynomial(tuple(layout.qd(j) for j in range(link + 1)), degree=2,
                     log_offset=None, tag=f"kT{link + 1}.qd")
    pos = [Polynomial(layout.position_selector(b), degree=2, tag=f"kT{link + 1}.j{b + 1}")
           for b in range(link + 1)]
    return Product([vel] + pos)


def kinetic_prior(layout: InputLayout):
    return Sum([kinetic_link_prior(layout, i) for i in range(layout.n)])


def lse_prior(layout: InputLayout):
    """Whole-Lagrangian squared-exponential prior on the transformed input."""
    return SquaredExponential(tuple(range(layout.dim)), tag="lse")


# -- friction ---------------------------------------------------------------

def _sign_feature(qd):
    return np.sign(qd)


class FrictionKernel:
    """Independent per-joint kernels for friction-like torque components.

    Linear kernel in the features (qd_i, sign(qd_i)) with one weight each,
    plus an optional squared-exponential term on the raw GP input.
    """

    def __init__(self, n, with_se=False, raw_dim=None):
        self.n = n
        self.log_gv = np.zeros(n)
        self.log_gc = np.zeros(n)
        self.se = None
        if with_se:
            if raw_dim is None:
                raw_dim = 3 * n
            self.se = [SquaredExponential(tuple(range(raw_dim)), tag=f"fric.se{i + 1}")
                       for i in range(n)]

    def log_params(self):
        out = [("fric.log_gv", self.log_gv), ("fric.log_gc", self.log_gc)]
        if self.se is not None:
            for atom in self.se:
                out.extend(atom.log_params())
        return out

    def diag_pairs(self, A: StateBatch, B: StateBatch):
        """(n, N, M) per-joint friction covariances."""
        gv, gc = np.exp(self.log_gv), np.exp(self.log_gc)
        sa, sb = _sign_feature(A.qd), _sign_feature(B.qd)
        out = (gv[:, None, None] * A.qd.T[:, :, None] * B.qd.T[:, None, :]
               + gc[:, None, None] * sa.T[:, :, None] * sb.T[:, None, :])
        if self.se is not None:
            ra, rb = A.raw(), B.raw()
            xs = [ra[:, k][:, None] for k in range(ra.shape[1])]
            ys = [rb[:, k][None, :] for k in range(rb.shape[1])]
            for i, atom in enumerate(self.se):
                out[i] += atom.kvalue(xs, ys)
        return out


# -- the operator kernel ------------------------------------------------------

class LagrangianTorqueKernel:
    """Multi-output torque covariance induced by a Lagrangian prior.

    ``kinetic`` and ``potential`` are kernel expressions on the transformed
    input layout; when both are given, energy cross-covariances and energy
    prior variances are available.  ``friction`` adds independent per-joint
    diagonal kernels.
    """

    def __init__(self, kinds, kinetic=None, potential=None, lagrangian=None,
                 friction=None, name="lagrangian"):
        self.layout = InputLayout(kinds)
        self.kinetic = kinetic
        self.potential = potential
        if lagrangian is None:
            parts = [e for e in (kinetic, potential) if e is not None]
            if not parts:
                raise ValueError("need a kinetic/potential pair or a Lagrangian kernel")
            lagrangian = Sum(parts) if len(parts) > 1 else parts[0]
        self.lagrangian = lagrangian
        self.friction = friction
        self.name = name

    @property
    def out_dim(self):
        return self.layout.n

    @property
    def has_energy(self):
        return self.kinetic is not None and self.potential is not None

    @classmethod
    def lip(cls, kinds, friction=None):
        layout = InputLayout(kinds)
        return cls(kinds, kinetic=kinetic_prior(layout),
                   potential=potential_prior(layout), friction=friction,
                   name="lip")

    @classmethod
    def lse(cls, kinds, friction=None):
        layout = InputLayout(kinds)
        return cls(kinds, lagrangian=lse_prior(layout), friction=friction,
                   name="lse")

    # -- hyperparameters --

    def log_params(self):
        out = self.lagrangian.log_params()
        if self.friction is not None:
            out.extend(self.friction.log_params())
        return out

    def theta(self):
        parts = [arr.ravel() for _, arr in self.log_params()]
        return np.concatenate(parts) if parts else np.zeros(0)

    def set_theta(self, theta):
        theta = np.asarray(theta, dtype=float)
        k = 0
        for _, arr in self.log_params():
            arr.flat[:] = theta[k:k + arr.size]
            k += arr.size
        if k != theta.size:
            raise ValueError(f"expected {k} hyperparameters, got {theta.size}")

    def param_names(self):
        names = []
        for name, arr in self.log_params():
            if arr.size == 1:
                names.append(name)
            else:
                names.extend(f"{name}[{j}]" for j in range(arr.size))
        return names

    # -- ring-element builders --

    def _side(self, states: StateBatch, level, val, ind):
        """Raw per-joint ring elements for one kernel argument.

        ``val`` shapes value columns; ``ind`` maps a joint index to its
        indicator array (operator axis) or None for an unseeded side.
        """
        q, qd, qdd = states.q, states.qd, states.qdd
        n = states.n
        if ind is None:
            qe = [val(q[:, j]) for j in range(n)]
            qde = [val(qd[:, j]) for j in range(n)]
        else:
            qe = [Jet(level, val(q[:, j]), fu=val(qd[:, j]), fs=ind(j))
                  for j in range(n)]
            qde = [Jet(level, val(qd[:, j]), fu=val(qdd[:, j]), fv=ind(j))
                   for j in range(n)]
        return self.layout.transform_elems(qe, qde)

    @staticmethod
    def _apply_operator(out, level):
        return level_coeff(out, level, "fuv") - level_coeff(out, level, "fs")

    def _operator_block(self, expr, A, B):
        """(n, n, N, M) tensor of G_i G'_j expr over a sample-pair grid."""
        n = self.layout.n
        eye = np.eye(n)
        xs = self._side(A, level=1,
                        val=lambda c: c[None, None, :, None],
                        ind=lambda j: eye[:, j].reshape(n, 1, 1, 1))
        ys = self._side(B, level=0,
                        val=lambda c: c[None, None, None, :],
                        ind=lambda j: eye[:, j].reshape(1, n, 1, 1))
        out = expr.kvalue(xs, ys)
        val = self._apply_operator(self._apply_operator(out, 1), 0)
        return np.broadcast_to(np.asarray(val, dtype=float),
                               (n, n, len(A), len(B)))

    def _operator_block_diag(self, expr, A):
        """(n, n, N) tensor of G_i G'_j expr at coincident inputs."""
        n = self.layout.n
        eye = np.eye(n)
        xs = self._side(A, level=1,
                        val=lambda c: c[None, None, :],
                        ind=lambda j: eye[:, j].reshape(n, 1, 1))
        ys = self._side(A, level=0,
                        val=lambda c: c[None, None, :],
                        ind=lambda j: eye[:, j].reshape(1, n, 1))
        out = expr.kvalue(xs, ys)
        val = self._apply_operator(self._apply_operator(out, 1), 0)
        return np.broadcast_to(np.asarray(val, dtype=float), (n, n, len(A)))

    def _operator_row(self, expr, A, B, sign=1.0):
        """(n, N, M) tensor of G'_j expr; the operator acts on the second
        argument only."""
        n = self.layout.n
        eye = np.eye(n)
        xs = self._side(A, level=None, val=lambda c: c[None, :, None], ind=None)
        ys = self._side(B, level=0,
                        val=lambda c: c[None, None, :],
                        ind=lambda j: eye[:, j].reshape(n, 1, 1))
        out = expr.kvalue(xs, ys)
        val = self._apply_operator(out, 0)
        return sign * np.broadcast_to(np.asarray(val, dtype=float),
                                      (n, len(A), len(B)))

    def _plain_pairs(self, expr, A, B):
        xs = self._side(A, level=None, val=lambda c: c[:, None], ind=None)
        ys = self._side(B, level=None, val=lambda c: c[None, :], ind=None)
        return np.broadcast_to(np.asarray(expr.kvalue(xs, ys), dtype=float),
                               (len(A), len(B)))

    def _plain_diag(self, expr, A):
        xs = self._side(A, level=None, val=lambda c: c, ind=None)
        return np.broadcast_to(np.asarray(expr.kvalue(xs, xs), dtype=float),
                               (len(A),))

    # -- public surface --

    def block_pairs(self, A: StateBatch, B: StateBatch):
        """Torque covariance blocks: out[i, j, s, r] = Cov[tau_i(a_s), tau_j(b_r)]."""
        out = self._operator_block(self.lagrangian, A, B).copy()
        if self.friction is not None:
            fric = self.friction.diag_pairs(A, B)
            for i in range(self.layout.n):
                out[i, i] += fric[i]
        return out

    def block_diag(self, A: StateBatch):
        """(N, n, n) prior covariance blocks at coincident inputs."""
        out = self._operator_block_diag(self.lagrangian, A).copy()
        if self.friction is not None:
            fric = self.friction.diag_pairs(A, A)
            for i in range(self.layout.n):
                out[i, i] += np.diagonal(fric[i])
        return np.moveaxis(out, -1, 0)

    def torque_block(self, x: StateBatch, xp: StateBatch):
        """Single (n, n) torque covariance block between two states."""
        return self.block_pairs(x, xp)[:, :, 0, 0]

    def _tiles(self, M, n, N):
        tile = max(1, _TILE_ELEMS // max(1, n * n * N))
        for start in range(0, M, tile):
            yield start, min(start + tile, M)

    def cross(self, A: StateBatch, B: StateBatch):
        """Stacked covariance matrix (N*n, M*n), sample-major blocks."""
        n, N, M = self.layout.n, len(A), len(B)
        out = np.empty((N * n, M * n))
        for lo, hi in self._tiles(M, n, N):
            blk = self.block_pairs(A, B.subset(slice(lo, hi)))
            out[:, lo * n:hi * n] = blk.transpose(2, 0, 3, 1).reshape(N * n, (hi - lo) * n)
        return out

    def gram(self, A: StateBatch):
        """Symmetric stacked covariance; only triangular tiles are evaluated."""
        n, N = self.layout.n, len(A)
        out = np.empty((N * n, N * n))
        tile = max(1, min(int(np.sqrt(_TILE_ELEMS // max(1, n * n))), (N + 1) // 2))
        for lo in range(0, N, tile):
            hi = min(lo + tile, N)
            rows = A.subset(slice(lo, hi))
            for lo2 in range(lo, N, tile):
                hi2 = min(lo2 + tile, N)
                blk = self.block_pairs(rows, A.subset(slice(lo2, hi2)))
                flat = blk.transpose(2, 0, 3, 1).reshape((hi - lo) * n, (hi2 - lo2) * n)
                out[lo * n:hi * n, lo2 * n:hi2 * n] = flat
                if lo2 > lo:
                    out[lo2 * n:hi2 * n, lo * n:hi * n] = flat.T
        # exact symmetry for the diagonal tiles
        out = 0.5 * (out + out.T)
        return out

    def energy_cross(self, which, A: StateBatch, B: StateBatch):
        """Cov[energy(a), tau(b)] rows, stacked to (N, M*n).

        ``which`` is "kinetic" or "potential"; the potential rows carry the
        minus sign of L = T - V.
        """
        if not self.has_energy:
            raise ValueError(f"kernel {self.name!r} does not expose energy priors")
        if which == "kinetic":
            expr, sign = self.kinetic, 1.0
        elif which == "potential":
            expr, sign = self.potential, -1.0
        else:
            raise ValueError("which must be 'kinetic' or 'potential'")
        n, N, M = self.layout.n, len(A), len(B)
        out = np.empty((N, M * n))
        for lo, hi in self._tiles(M, n, N):
            rows = self._operator_row(expr, A, B.subset(slice(lo, hi)), sign=sign)
            out[:, lo * n:hi * n] = rows.transpose(1, 2, 0).reshape(N, (hi - lo) * n)
        return out

    def energy_prior_diag(self, which, A: StateBatch):
        if not self.has_energy:
            raise ValueError(f"kernel {self.name!r} does not expose energy priors")
        expr = self.kinetic if which == "kinetic" else self.potential
        return self._plain_diag(expr, A)

    def lagrangian_pairs(self, A: StateBatch, B: StateBatch):
        return self._plain_pairs(self.lagrangian, A, B)


class JointOperatorKernel:
    """Single-output diagonal G_i G'_i k_L of an operator kernel.

    Stand-in for the geometry-inspired polynomial baseline: the per-joint
    restriction of the full multi-output model.
    """

    out_dim = 1

    def __init__(self, kinds, joint, name="gip"):
        self.base = LagrangianTorqueKernel.lip(kinds)
        self.joint = int(joint)
        self.name = name

    def log_params(self):
        return self.base.log_params()

    theta = LagrangianTorqueKernel.theta
    set_theta = LagrangianTorqueKernel.set_theta
    param_names = LagrangianTorqueKernel.param_names

    def _entry(self, expr, A, B):
        n = self.base.layout.n
        i = self.joint
        eye = np.eye(n)
        side = self.base._side
        xs = side(A, level=1, val=lambda c: c[:, None],
                  ind=lambda j: eye[i, j])
        ys = side(B, level=0, val=lambda c: c[None, :],
                  ind=lambda j: eye[i, j])
        out = expr.kvalue(xs, ys)
        val = self.base._apply_operator(self.base._apply_operator(out, 1), 0)
        return np.broadcast_to(np.asarray(val, dtype=float), (len(A), len(B)))

    def cross(self, A, B):
        return self._entry(self.base.lagrangian, A, B)

    def gram(self, A):
        return self.cross(A, A)

    def block_diag(self, A):
        d = self._entry(self.base.lagrangian, A, A)
        return np.diagonal(d)[:, None, None]


class FeatureKernel:
    """Single-output kernel expression over per-sample feature rows."""

    out_dim = 1

    def __init__(self, expr, feature_fn, name):
        self.expr = expr
        self.feature_fn = feature_fn
        self.name = name
        self._cache = {}

    def log_params(self):
        return self.expr.log_params()

    def theta(self):
        return self.expr.theta()

    def set_theta(self, theta):
        self.expr.set_theta(theta)

    def param_names(self):
        return self.expr.param_names()

    def features(self, A: StateBatch):
        key = id(A)
        hit = self._cache.get(key)
        if hit is not None and hit[0] is A:
            return hit[1]
        feats = self.feature_fn(A)
        self._cache = {key: (A, feats)}  # keep the last batch only
        return feats

    def cross(self, A, B):
        fa, fb = self.features(A), self.features(B)
        xs = [fa[:, k][:, None] for k in range(fa.shape[1])]
        ys = [fb[:, k][None, :] for k in range(fb.shape[1])]
        return np.asarray(self.expr.kvalue(xs, ys), dtype=float)

    def gram(self, A):
        return self.cross(A, A)

    def block_diag(self, A):
        f = self.features(A)
        xs = [f[:, k] for k in range(f.shape[1])]
        d = np.asarray(self.expr.kvalue(xs, xs), dtype=float)
        return np.broadcast_to(d, (len(A),))[:, None, None]


def se_joint_kernel(n, joint, with_friction=False):
    """Per-joint squared-exponential kernel on the raw (q, qd, qdd) input."""
    raw = 3 * n
    se = SquaredExponential(tuple(range(raw)), tag=f"se.j{joint + 1}")
    if not with_friction:
        return FeatureKernel(se, StateBatch.raw, name="se")
    lin = Polynomial((raw + 0, raw + 1), degree=1, log_offset=None,
                     tag=f"fric.j{joint + 1}")

    def features(A):
        return np.hstack([A.raw(), A.qd[:, [joint]], _sign_feature(A.qd[:, [joint]])])

    return FeatureKernel(Sum([se, lin]), features, name="se+friction")


def sp_joint_kernel(model, joint):
    """Semiparametric kernel: linear in the joint's regressor row plus SE."""
    n = model.n
    raw = 3 * n
    nd = 12 * n
    se = SquaredExponential(tuple(range(raw)), tag=f"sp.se.j{joint + 1}")
    lin = Polynomial(tuple(range(raw, raw + nd)), degree=1, log_offset=None,
                     tag=f"sp.lin.j{joint + 1}")

    def features(A):
        phi = regressor_matrix(model, A.q, A.qd, A.qdd)
        return np.hstack([A.raw(), phi[:, joint, :]])

    return FeatureKernel(Sum([se, lin]), features, name="sp")
