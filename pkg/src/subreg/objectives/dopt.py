"""D-optimal design: ``f(lam) = log det(sum_i lam_i x_i x_i^T + ridge * I)``.

The ridge keeps ``f`` finite down to ``lam = 0`` (where Frank-Wolfe partial
sums begin); it acts like extra fixed design points and does not change
the sign of any second partial ``-(x_j^T A^{-1} x_i)^2``.

A single object may hold a batch of design sets; it then evaluates the mean
of their log-determinants, which is how prefix averages are formed.
"""

from __future__ import annotations

import numpy as np

from ..core import Box, Polytope, Rng
from .base import DomainError, Objective

DEFAULT_RIDGE = 1e-6


class DOptObjective(Objective):
    family = "dopt"

    def __init__(self, design_vectors, ridge_eps: float = DEFAULT_RIDGE,
                 lower: float = 1.0, upper: float = 2.0, noise: float = 0.5):
        X = np.array(design_vectors, dtype=float)
        if X.ndim == 2:
            X = X[None]
        if X.ndim != 3:
            raise ValueError("design vectors must be an (N, n) array or a batch of them")
        if not ridge_eps > 0.0:
            raise ValueError("ridge_eps must be positive")
        n_points = X.shape[1]
        super().__init__(Box.uniform(n_points, lower, upper), Box.uniform(n_points, 0.0, upper))
        self.design = X
        self.ridge_eps = float(ridge_eps)
        self.noise = float(noise)

    @property
    def design_vectors(self) -> np.ndarray:
        return self.design[0] if self.design.shape[0] == 1 else self.design

    def _information(self, lam):
        A = np.einsum("bin,i,bim->bnm", self.design, lam, self.design)
        A += self.ridge_eps * np.eye(self.design.shape[2])
        return A

    def _cholesky(self, lam):
        try:
            return np.linalg.cholesky(self._information(lam))
        except np.linalg.LinAlgError:
            raise DomainError("information matrix is not positive definite") from None

    def value(self, x) -> float:
        L = self._cholesky(self._checked(x))
        logdets = 2.0 * np.log(np.diagonal(L, axis1=1, axis2=2)).sum(axis=1)
        return float(logdets.mean())

    def _leverages(self, lam):
        L = self._cholesky(lam)
        Y = np.linalg.solve(L, np.transpose(self.design, (0, 2, 1)))
        return Y

    def gradient(self, x) -> np.ndarray:
        Y = self._leverages(self._checked(x))
        return (Y * Y).sum(axis=1).mean(axis=0)

    def hessian(self, x) -> np.ndarray:
        """``-(x_j^T A^{-1} x_i)^2`` entrywise, averaged over the batch."""
        Y = self._leverages(self._checked(x))
        M = np.einsum("bki,bkj->bij", Y, Y)
        return -(M * M).mean(axis=0)

    def stochastic_gradient(self, x, rng: Rng) -> np.ndarray:
        """Exact gradient scaled coordinatewise by ``1 + U[-noise, noise]``."""
        g = self.gradient(x)
        return g * (1.0 + rng.generator.uniform(-self.noise, self.noise, g.size))

    @property
    def grad_bound(self) -> float:
        # antitone nonnegative gradient: largest at the lower corner
        return float(np.linalg.norm(self.gradient(self.domain_box.lower)))

    @property
    def stochastic_grad_bound(self) -> float:
        return (1.0 + self.noise) * self.grad_bound

    @property
    def smoothness(self) -> float:
        # Hessian is -M o M with M = X A^{-1} X^T PSD and shrinking as lam grows;
        # Schur: ||M o M|| <= max_i M_ii * ||M||, evaluated at the lower corner
        Y = self._leverages(self.domain_box.lower)
        M = np.einsum("bki,bkj->bij", Y, Y)
        diag = np.diagonal(M, axis1=1, axis2=2).max(axis=1)
        norms = np.linalg.eigvalsh(M)[:, -1]
        return float(np.mean(diag * norms))

    @staticmethod
    def mean(parts) -> DOptObjective:
        parts = list(parts)
        p0 = parts[0]
        return DOptObjective(
            np.concatenate([p.design for p in parts]), p0.ridge_eps,
            float(p0.domain_box.lower[0]), float(p0.domain_box.upper[0]), p0.noise,
        )


def dopt_objective(n: int, N: int, rng: Rng, ridge_eps: float = DEFAULT_RIDGE,
                   noise: float = 0.5) -> DOptObjective:
    """``N`` design vectors in ``R^n`` with i.i.d. standard normal entries."""
    return DOptObjective(rng.generator.standard_normal((N, n)), ridge_eps, noise=noise)


def dopt_polytope(N: int, m: int, rng: Rng) -> Polytope:
    """``{lam : A (lam - 1) <= 1, 1 <= lam <= 2}`` with ``A ~ U[0, 1]``."""
    A = rng.generator.uniform(0.0, 1.0, (m, N))
    return Polytope(A, 1.0 + A.sum(axis=1), Box.uniform(N, 1.0, 2.0))


def dopt_generate(n: int, N: int, m: int, rng: Rng, ridge_eps: float = DEFAULT_RIDGE):
    if min(n, N, m) < 1:
        raise ValueError("n, N and m must be positive")
    return dopt_objective(n, N, rng, ridge_eps), dopt_polytope(N, m, rng)
