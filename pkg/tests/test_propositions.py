"""Polynomial-structure checks of the energies on the transformed inputs.

The potential energy must be reproduced exactly by monomials of joint
degree at most one per joint (cos and sin of the same joint never multiply
together), and each link's kinetic energy by velocity-pair monomials times
position monomials of joint degree at most two.
"""

import itertools

import numpy as np
import pytest

from conftest import KIND_SETS, random_robot
from lipgpr.robot import PRISMATIC, REVOLUTE, energies


def _position_factors(kind, q_col, max_deg):
    """Per-joint monomial factors of joint degree <= max_deg."""
    if kind == REVOLUTE:
        c, s = np.cos(q_col), np.sin(q_col)
        if max_deg == 1:
            return [np.ones_like(c), c, s]
        return [np.ones_like(c), c, s, c * c, c * s, s * s]
    if max_deg == 1:
        return [np.ones_like(q_col), q_col]
    return [np.ones_like(q_col), q_col, q_col ** 2]


def _monomial_matrix(kinds, q, max_deg, upto=None):
    n = len(kinds) if upto is None else upto
    factor_sets = [_position_factors(kinds[b], q[:, b], max_deg)
                   for b in range(n)]
    cols = []
    for combo in itertools.product(*factor_sets):
        col = np.ones(q.shape[0])
        for f in combo:
            col = col * f
        cols.append(col)
    return np.column_stack(cols)


def _relative_residual(A, y):
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    return np.linalg.norm(A @ coef - y) / np.linalg.norm(y)


@pytest.mark.parametrize("dof", [1, 2, 3])
def test_potential_energy_polynomial_structure(dof):
    rng = np.random.default_rng(100 + dof)
    model = random_robot(rng, KIND_SETS[dof])
    q = rng.uniform(-np.pi, np.pi, size=(400, dof))
    _, _, V = energies(model, q, np.zeros_like(q))
    A = _monomial_matrix(model.kinds, q, max_deg=1)
    assert _relative_residual(A, V) < 1e-9


@pytest.mark.parametrize("dof", [1, 2, 3])
def test_link_kinetic_energy_polynomial_structure(dof):
    rng = np.random.default_rng(200 + dof)
    model = random_robot(rng, KIND_SETS[dof])
    q = rng.uniform(-np.pi, np.pi, size=(700, dof))
    qd = rng.uniform(-2.0, 2.0, size=(700, dof))
    T_links, _, _ = energies(model, q, qd)
    for i in range(dof):
        pos = _monomial_matrix(model.kinds, q, max_deg=2, upto=i + 1)
        vel_pairs = [qd[:, a] * qd[:, b]
                     for a in range(i + 1) for b in range(a, i + 1)]
        cols = [pos[:, k] * vp for vp in vel_pairs for k in range(pos.shape[1])]
        A = np.column_stack(cols)
        assert _relative_residual(A, T_links[:, i]) < 1e-9
