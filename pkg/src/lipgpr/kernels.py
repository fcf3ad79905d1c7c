"""Scalar covariance atoms, kernel composition and exact mixed derivatives.

Atoms evaluate generically over floats, broadcast numpy arrays or
:class:`~lipgpr.jets.Jet` carriers, so the same code path produces kernel
values, Gram matrices and exact derivatives up to second order in each
argument.  Hyperparameters live in log space; positive values are
materialized on demand.
"""

from __future__ import annotations

import numpy as np

from .jets import Jet, jet_exp, jet_pow, level_coeff

OFFSET_FLOOR = 1e-12


class KernelNode:
    """Base class for nodes of a kernel expression tree."""

    def kvalue(self, xs, ys):
        """Evaluate on two sequences of per-coordinate ring elements."""
        raise NotImplementedError

    def atoms(self):
        raise NotImplementedError

    def log_params(self):
        """Ordered (name, array) pairs of log-space hyperparameters."""
        out = []
        for i, atom in enumerate(self.atoms()):
            for name, arr in atom._own_params():
                out.append((f"{atom.tag or i}.{name}", arr))
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

    def input_dim(self):
        return max(max(a.selector) for a in self.atoms()) + 1

    def __add__(self, other):
        return Sum([self, other])

    def __mul__(self, other):
        return Product([self, other])


class SquaredExponential(KernelNode):
    """k(x, x') = scale * exp(-sum_k (x_k - x'_k)^2 / ell_k).

    ``ell`` is the per-coordinate squared-distance scale (one positive
    hyperparameter per selected coordinate).
    """

    def __init__(self, selector, log_scale=0.0, log_lengthscales=None, tag=""):
        self.selector = tuple(selector)
        self.log_scale = np.array(float(log_scale))
        if log_lengthscales is None:
            log_lengthscales = np.zeros(len(self.selector))
        self.log_lengthscales = np.asarray(log_lengthscales, dtype=float).copy()
        if self.log_lengthscales.shape != (len(self.selector),):
            raise ValueError("one length-scale per selected coordinate")
        self.tag = tag

    def _own_params(self):
        return [("log_scale", self.log_scale), ("log_ell", self.log_lengthscales)]

    def atoms(self):
        return [self]

    def kvalue(self, xs, ys):
        inv_ell = np.exp(-self.log_lengthscales)
        d2 = 0
        for w, k in zip(inv_ell, self.selector):
            diff = xs[k] - ys[k]
            d2 = d2 + diff * diff * w
        return np.exp(self.log_scale) * jet_exp(-d2)


class Polynomial(KernelNode):
    """k(x, x') = (sum_k w_k x_k x'_k + offset)^degree.

    ``log_offset=None`` declares the homogeneous variant (offset fixed to
    zero); otherwise the offset is exp(log_offset) floored at
    ``OFFSET_FLOOR``.
    """

    def __init__(self, selector, degree, log_weights=None, log_offset=0.0, tag=""):
        self.selector = tuple(selector)
        if degree < 1 or degree != int(degree):
            raise ValueError("polynomial degree must be a positive integer")
        self.degree = int(degree)
        if log_weights is None:
            log_weights = np.zeros(len(self.selector))
        self.log_weights = np.asarray(log_weights, dtype=float).copy()
        if self.log_weights.shape != (len(self.selector),):
            raise ValueError("one weight per selected coordinate")
        self.log_offset = None if log_offset is None else np.array(float(log_offset))
        self.tag = tag

    @property
    def homogeneous(self):
        return self.log_offset is None

    def _own_params(self):
        params = [("log_weight", self.log_weights)]
        if self.log_offset is not None:
            params.append(("log_offset", self.log_offset))
        return params

    def atoms(self):
        return [self]

    def offset(self):
        if self.log_offset is None:
            return 0.0
        return max(float(np.exp(self.log_offset)), OFFSET_FLOOR)

    def kvalue(self, xs, ys):
        weights = np.exp(self.log_weights)
        acc = 0
        for w, k in zip(weights, self.selector):
            acc = acc + xs[k] * ys[k] * w
        if not self.homogeneous:
            acc = acc + self.offset()
        return jet_pow(acc, self.degree)


class Sum(KernelNode):
    def __init__(self, children):
        self.children = list(children)

    def atoms(self):
        return [a for c in self.children for a in c.atoms()]

    def kvalue(self, xs, ys):
        out = self.children[0].kvalue(xs, ys)
        for c in self.children[1:]:
            out = out + c.kvalue(xs, ys)
        return out


class Product(KernelNode):
    def __init__(self, children):
        self.children = list(children)

    def atoms(self):
        return [a for c in self.children for a in c.atoms()]

    def kvalue(self, xs, ys):
        out = self.children[0].kvalue(xs, ys)
        for c in self.children[1:]:
            out = out * c.kvalue(xs, ys)
        return out


# -- public operations ---------------------------------------------------

def _coords(x, m):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] < m:
        raise ValueError(f"kernel needs {m} coordinates, input has {x.shape[-1]}")
    return [x[..., k] for k in range(x.shape[-1])]


def kernel_eval(kernel, x, xp):
    """Evaluate a kernel expression on two input vectors (or batches)."""
    m = kernel.input_dim()
    return kernel.kvalue(_coords(x, m), _coords(xp, m))


def eval_pairs(kernel, X1, X2):
    """Dense (N, M) kernel matrix between the rows of X1 and X2."""
    X1 = np.asarray(X1, dtype=float)
    X2 = np.asarray(X2, dtype=float)
    m = kernel.input_dim()
    xs = _coords(X1[:, None, :], m)
    ys = _coords(X2[None, :, :], m)
    return np.asarray(kernel.kvalue(xs, ys))


def _seed_side(x, alpha, level):
    """Per-coordinate jets realizing the multi-index ``alpha`` on one side."""
    x = np.asarray(x, dtype=float)
    order = int(np.sum(alpha))
    idx = [k for k, a in enumerate(alpha) for _ in range(a)]
    coords = []
    for k in range(x.shape[-1]):
        if order == 0:
            coords.append(x[..., k])
        elif order == 1:
            coords.append(Jet(level, x[..., k], fs=1.0 if k == idx[0] else 0))
        else:
            coords.append(Jet(level, x[..., k],
                              fu=1.0 if k == idx[0] else 0,
                              fv=1.0 if k == idx[1] else 0))
    slot = {0: "f", 1: "fs", 2: "fuv"}[order]
    return coords, slot


def mixed_partial(kernel, x, xp, alpha, beta):
    """Exact mixed partial  d^|alpha| d^|beta| k / dx^alpha dx'^beta.

    ``alpha`` and ``beta`` are multi-indices over the coordinates of the
    first and second argument; at most total order 2 per side.
    """
    alpha = np.asarray(alpha, dtype=int)
    beta = np.asarray(beta, dtype=int)
    if alpha.sum() > 2 or beta.sum() > 2:
        raise ValueError("mixed_partial supports orders up to 2 per side")
    if np.any(alpha < 0) or np.any(beta < 0):
        raise ValueError("multi-indices must be nonnegative")
    m = kernel.input_dim()
    if len(alpha) < m or len(beta) < m:
        raise ValueError(f"multi-indices must cover {m} coordinates")
    xs, slot_x = _seed_side(x, alpha, level=1)
    ys, slot_y = _seed_side(xp, beta, level=0)
    out = kernel.kvalue(xs, ys)
    coeff = level_coeff(level_coeff(out, 1, slot_x), 0, slot_y)
    return np.asarray(coeff, dtype=float) if np.ndim(coeff) else float(coeff)
