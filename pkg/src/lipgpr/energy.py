"""Posterior kinetic and potential energy from torque observations.

A model trained with the energy-prior torque kernel is jointly Gaussian
with the kinetic and potential energies, so their posteriors follow from
the cross-covariance rows against the stacked training torques.  The
potential energy is identifiable only up to an additive constant; aligning
against one reference value removes it.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import solve_triangular

VARIANCE_WARN = -1e-8


@dataclass(frozen=True)
class EnergyPosterior:
    kinetic_mean: np.ndarray
    kinetic_var: np.ndarray
    potential_mean: np.ndarray
    potential_var: np.ndarray
    offset: float = 0.0          # shift applied to the potential mean
    clamped: int = 0             # variances below the warning threshold


def _energy_posterior(model, which, B):
    rows = model.kernel.energy_cross(which, B, model.A)  # (M, N d)
    mean = rows @ model.alpha
    v = solve_triangular(model.L, rows.T, lower=True)
    var = model.kernel.energy_prior_diag(which, B) - np.sum(v * v, axis=0)
    return mean, var


def estimate_energies(model, B) -> EnergyPosterior:
    """Posterior mean and variance of T and V at the query states.

    Requires a trained model whose kernel exposes separate kinetic and
    potential priors; raises for kernels that only model torques.
    """
    if model.alpha is None:
        raise RuntimeError("fit the model first")
    if not getattr(model.kernel, "has_energy", False):
        raise ValueError(
            f"kernel {getattr(model.kernel, 'name', '?')!r} does not support "
            "energy estimation")
    t_mean, t_var = _energy_posterior(model, "kinetic", B)
    v_mean, v_var = _energy_posterior(model, "potential", B)
    clamped = int(np.sum(t_var < VARIANCE_WARN) + np.sum(v_var < VARIANCE_WARN))
    return EnergyPosterior(kinetic_mean=t_mean,
                           kinetic_var=np.maximum(t_var, 0.0),
                           potential_mean=v_mean,
                           potential_var=np.maximum(v_var, 0.0),
                           clamped=clamped)


def align_offset(post: EnergyPosterior, reference, index=0) -> EnergyPosterior:
    """Shift the potential estimate so it matches ``reference`` at one state.

    The kinetic estimate is untouched; aligning twice with the same anchor
    is a no-op.
    """
    shift = float(post.potential_mean[index] - reference)
    return replace(post,
                   potential_mean=post.potential_mean - shift,
                   offset=post.offset + shift)


def energy_table(t, post: EnergyPosterior, oracle_T=None, oracle_V=None):
    """Column stack ``t, T_mean, T_var, V_mean, V_var[, T_oracle, V_oracle]``."""
    cols = [np.asarray(t, dtype=float), post.kinetic_mean, post.kinetic_var,
            post.potential_mean, post.potential_var]
    header = ["t", "T_mean", "T_var", "V_mean", "V_var"]
    if oracle_T is not None:
        cols.append(np.asarray(oracle_T, dtype=float))
        header.append("T_oracle")
    if oracle_V is not None:
        cols.append(np.asarray(oracle_V, dtype=float))
        header.append("V_oracle")
    return header, np.column_stack(cols)
