"""Truncated second-order forward-mode Taylor carriers.

A :class:`Jet` tracks the value of a quantity together with directional
derivatives along up to three directions (``u``, ``v``, ``s``) and the mixed
second derivative along ``u`` and ``v``:

    (f, D_u f, D_v f, D_s f, D_u D_v f)

Coefficients may be floats, numpy arrays (broadcasting is the vectorization
mechanism) or other jets.  Nesting jets of different ``level`` gives exact
mixed partial derivatives in two independent argument groups, which is how
kernel derivatives with respect to both kernel arguments are obtained: the
outer level carries derivatives in the first argument, the inner level in
the second.

The integer ``0`` is used as a structural zero so that absent coefficients
cost nothing to propagate.
"""

from __future__ import annotations

import numpy as np


def _is_zero(x):
    return type(x) is int and x == 0


def _add(a, b):
    if _is_zero(a):
        return b
    if _is_zero(b):
        return a
    return a + b


def _mul(a, b):
    if _is_zero(a) or _is_zero(b):
        return 0
    return a * b


def _neg(a):
    return 0 if _is_zero(a) else -a


class Jet:
    """Second-order truncated Taylor carrier.

    Parameters
    ----------
    level : int
        Nesting level.  In a product of two jets the one with the higher
        level treats the other as a constant coefficient.
    f, fu, fv, fs, fuv :
        Value, the three first-order directional derivatives and the mixed
        second derivative D_u D_v.  Use the integer ``0`` for slots that are
        identically zero.
    """

    __slots__ = ("level", "f", "fu", "fv", "fs", "fuv")

    # make numpy defer to the reflected operators instead of building
    # object arrays when an ndarray is the left operand
    __array_ufunc__ = None

    def __init__(self, level, f, fu=0, fv=0, fs=0, fuv=0):
        self.level = level
        self.f = f
        self.fu = fu
        self.fv = fv
        self.fs = fs
        self.fuv = fuv

    def __repr__(self):
        return (f"Jet(level={self.level}, f={self.f!r}, fu={self.fu!r}, "
                f"fv={self.fv!r}, fs={self.fs!r}, fuv={self.fuv!r})")

    # -- ring operations ------------------------------------------------

    def __add__(self, other):
        if isinstance(other, Jet):
            if other.level > self.level:
                return other + self
            if other.level == self.level:
                return Jet(self.level,
                           _add(self.f, other.f),
                           _add(self.fu, other.fu),
                           _add(self.fv, other.fv),
                           _add(self.fs, other.fs),
                           _add(self.fuv, other.fuv))
        # lower-level jet, array or scalar: a constant at this level
        return Jet(self.level, _add(self.f, other),
                   self.fu, self.fv, self.fs, self.fuv)

    __radd__ = __add__

    def __neg__(self):
        return Jet(self.level, _neg(self.f), _neg(self.fu), _neg(self.fv),
                   _neg(self.fs), _neg(self.fuv))

    def __sub__(self, other):
        return self + (-other if isinstance(other, Jet) else _neg(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Jet):
            if other.level > self.level:
                return other * self
            if other.level == self.level:
                a, b = self, other
                return Jet(self.level,
                           _mul(a.f, b.f),
                           _add(_mul(a.f, b.fu), _mul(a.fu, b.f)),
                           _add(_mul(a.f, b.fv), _mul(a.fv, b.f)),
                           _add(_mul(a.f, b.fs), _mul(a.fs, b.f)),
                           _add(_add(_mul(a.f, b.fuv), _mul(a.fuv, b.f)),
                                _add(_mul(a.fu, b.fv), _mul(a.fv, b.fu))))
        if _is_zero(other):
            return 0
        return Jet(self.level, _mul(self.f, other), _mul(self.fu, other),
                   _mul(self.fv, other), _mul(self.fs, other),
                   _mul(self.fuv, other))

    __rmul__ = __mul__


def _lift(x, g, g1, g2, xu, xv, xs, xuv):
    """Assemble g(x) from g, g', g'' at the value and the carried parts."""
    fuv = _add(_mul(g1, xuv), _mul(g2, _mul(xu, xv)))
    return Jet(x.level, g, _mul(g1, xu), _mul(g1, xv), _mul(g1, xs), fuv)


def jet_sincos(x):
    """(sin x, cos x) for a jet, array or scalar, sharing the recursion."""
    if not isinstance(x, Jet):
        return np.sin(x), np.cos(x)
    s, c = jet_sincos(x.f)
    sin_x = _lift(x, s, c, -s, x.fu, x.fv, x.fs, x.fuv)
    cos_x = _lift(x, c, -s, -c, x.fu, x.fv, x.fs, x.fuv)
    return sin_x, cos_x


def jet_sin(x):
    return jet_sincos(x)[0]


def jet_cos(x):
    return jet_sincos(x)[1]


def jet_exp(x):
    if not isinstance(x, Jet):
        return np.exp(x)
    e = jet_exp(x.f)
    return _lift(x, e, e, e, x.fu, x.fv, x.fs, x.fuv)


def jet_pow(x, p):
    """x**p for a small positive integer p, by repeated multiplication.

    Exact for jets carrying polynomial data (no truncation error beyond the
    carried order).
    """
    if p < 1 or p != int(p):
        raise ValueError(f"jet_pow expects a positive integer degree, got {p}")
    out = x
    for _ in range(int(p) - 1):
        out = out * x
    return out


def level_coeff(x, level, slot):
    """Taylor coefficient ``slot`` of ``x`` viewed at nesting ``level``.

    An expression that never touched the seeds of ``level`` is a constant
    there: its value slot is itself and every derivative slot is the
    structural zero ``0``.
    """
    if isinstance(x, Jet) and x.level == level:
        return getattr(x, slot)
    return x if slot == "f" else 0
