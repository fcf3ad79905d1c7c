"""Exact GP regression: Gram assembly, posteriors, likelihood ascent.

Works with any kernel object exposing ``out_dim``, ``gram(A)``,
``cross(A, B)``, ``block_diag(A)`` and the log-parameter protocol.  Outputs
are stacked sample-major (all joints of sample 1, then sample 2, ...), and
the noise covariance repeats one per-output variance block down the
diagonal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular
from scipy.optimize import minimize

JITTER_START = 1e-10  # times the mean Gram diagonal
JITTER_MAX = 1e-4
LOG_2PI = float(np.log(2.0 * np.pi))


class GramFactorizationError(RuntimeError):
    pass


def chol_with_jitter(K):
    """Lower Cholesky factor with adaptive diagonal inflation.

    Jitter starts at 1e-10 of the mean diagonal and grows tenfold up to
    1e-4 of it; beyond that the matrix is reported non-PD together with its
    minimum eigenvalue.
    """
    mean_diag = float(np.mean(np.diag(K)))
    scale = mean_diag if mean_diag > 0 else 1.0
    jitter = JITTER_START * scale
    eye = np.eye(K.shape[0])
    while True:
        try:
            L = cholesky(K + jitter * eye, lower=True)
            return L, jitter
        except np.linalg.LinAlgError:
            pass
        jitter *= 10.0
        if jitter > JITTER_MAX * scale:
            min_eig = float(np.linalg.eigvalsh(K).min())
            raise GramFactorizationError(
                f"Gram matrix not positive definite within the jitter budget "
                f"(min eigenvalue {min_eig:.3e}, mean diagonal {mean_diag:.3e})")


def noise_diagonal(sigma, n_samples):
    """Stacked noise variances for sample-major outputs."""
    sigma = np.asarray(sigma, dtype=float)
    return np.tile(sigma ** 2, n_samples)


def assemble_gram(kernel, A, sigma):
    """(K_XX + Sigma_e) and its Cholesky factor with the jitter used."""
    K = kernel.gram(A)
    K = K + np.diag(noise_diagonal(sigma, len(A)))
    L, jitter = chol_with_jitter(K)
    return K, L, jitter


@dataclass
class OptimizeResult:
    theta: np.ndarray
    lml: float
    n_evals: int
    converged: bool
    warning: str | None = None


class GPModel:
    """A trainable GP over one kernel object and per-output noise."""

    def __init__(self, kernel, sigma, learn_noise=True, name=None):
        self.kernel = kernel
        d = kernel.out_dim
        sigma = np.broadcast_to(np.asarray(sigma, dtype=float), (d,)).copy()
        if np.any(sigma < 0):
            raise ValueError("noise standard deviations must be nonnegative")
        self.sigma = sigma
        self.learn_noise = bool(learn_noise)
        self.name = name or getattr(kernel, "name", "gp")
        self.A = None
        self.y = None
        self.L = None
        self.alpha = None
        self.jitter = None

    # -- fitting --

    def fit(self, A, Y):
        Y = np.asarray(Y, dtype=float)
        if Y.ndim == 1:
            Y = Y[:, None]
        d = self.kernel.out_dim
        if Y.shape != (len(A), d):
            raise ValueError(f"outputs must have shape ({len(A)}, {d})")
        self.A = A
        self.y = Y.ravel()
        _, self.L, self.jitter = assemble_gram(self.kernel, A, self.sigma)
        self.alpha = cho_solve((self.L, True), self.y)
        return self

    def log_marginal_likelihood(self):
        if self.L is None:
            raise RuntimeError("fit the model first")
        return float(-0.5 * self.y @ self.alpha
                     - np.sum(np.log(np.diag(self.L)))
                     - 0.5 * self.y.size * LOG_2PI)

    # -- hyperparameter vector, optionally including log noise --

    def _pack(self):
        theta = self.kernel.theta()
        if self.learn_noise:
            return np.concatenate([theta, np.log(np.maximum(self.sigma, 1e-8))])
        return theta

    def _unpack(self, p):
        k = self.kernel.theta().size
        self.kernel.set_theta(p[:k])
        if self.learn_noise:
            self.sigma = np.exp(p[k:])

    def optimize(self, max_iter=200, fd_step=1e-5, gtol=1e-6):
        """Quasi-Newton ascent of the log marginal likelihood.

        Gradients are central finite differences in log-space; the best
        parameter vector seen by any evaluation is kept, so the returned
        likelihood never falls below the starting one.
        """
        if self.A is None:
            raise RuntimeError("fit the model first")
        p0 = self._pack()
        best = {"p": p0.copy(), "f": np.inf}
        n_evals = [0]

        def objective(p):
            n_evals[0] += 1
            self._unpack(p)
            try:
                _, L, _ = assemble_gram(self.kernel, self.A, self.sigma)
            except (GramFactorizationError, FloatingPointError):
                return 1e25
            alpha = cho_solve((L, True), self.y)
            lml = (-0.5 * self.y @ alpha - np.sum(np.log(np.diag(L)))
                   - 0.5 * self.y.size * LOG_2PI)
            f = float(-lml)
            if not np.isfinite(f):
                return 1e25
            if f < best["f"]:
                best["f"] = f
                best["p"] = p.copy()
            return f

        def gradient(p):
            g = np.empty_like(p)
            for i in range(p.size):
                dp = np.zeros_like(p)
                dp[i] = fd_step
                g[i] = (objective(p + dp) - objective(p - dp)) / (2 * fd_step)
            return g

        warning = None
        try:
            res = minimize(objective, p0, jac=gradient, method="L-BFGS-B",
                           options={"maxiter": max_iter, "gtol": gtol})
            if not res.success:
                warning = str(res.message)
        except Exception as exc:  # line-search breakdowns: keep best seen
            warning = f"optimizer aborted: {exc}"
        if not np.isfinite(best["f"]):
            best["p"] = p0
        self._unpack(best["p"])
        self.fit(self.A, self.y.reshape(len(self.A), -1))
        return OptimizeResult(theta=best["p"], lml=self.log_marginal_likelihood(),
                              n_evals=n_evals[0], converged=warning is None,
                              warning=warning)

    # -- prediction --

    def predict(self, B, return_cov=False):
        """Posterior mean (M, d) and per-output variances (M, d).

        With ``return_cov`` the full (M, d, d) posterior covariance blocks
        are returned instead of the diagonal.
        """
        if self.alpha is None:
            raise RuntimeError("fit the model first")
        d = self.kernel.out_dim
        Kx = self.kernel.cross(B, self.A)  # (M d, N d)
        mean = (Kx @ self.alpha).reshape(len(B), d)
        V = solve_triangular(self.L, Kx.T, lower=True)  # (N d, M d)
        prior = self.kernel.block_diag(B)  # (M, d, d)
        if return_cov:
            expl = (V.T @ V).reshape(len(B), d, len(B), d)
            cov = prior - np.stack([expl[i, :, i, :] for i in range(len(B))])
            return mean, 0.5 * (cov + np.swapaxes(cov, -1, -2))
        explained = np.sum(V ** 2, axis=0).reshape(len(B), d)
        var = np.stack([np.diagonal(prior[i]) for i in range(len(B))]) - explained
        return mean, var

    def posterior(self, state):
        """Full posterior mean and covariance at a single query state."""
        single = state.subset(slice(0, 1)) if len(state) > 1 else state
        mean, cov = self.predict(single, return_cov=True)
        return mean[0], cov[0]


def log_marginal_likelihood(kernel, A, Y, sigma):
    """Likelihood of the outputs under the kernel, without keeping state."""
    model = GPModel(kernel, sigma, learn_noise=False)
    model.fit(A, Y)
    return model.log_marginal_likelihood()
