"""Non-convex/non-concave quadratic ``f(x) = (x/2 - u)^T H x`` on ``[0, u]``.

With ``H <= 0`` entrywise and symmetric, the Hessian is ``H`` (so every
second partial is nonpositive) and the gradient ``H (x - u)`` is
nonnegative on the box.
"""

from __future__ import annotations

import numpy as np

from ..core import Box, Polytope, Rng
from .base import Objective


class NqpObjective(Objective):
    family = "nqp"

    def __init__(self, h_matrix, u_vec, noise: float = 0.5, validate: bool = True):
        H = np.array(h_matrix, dtype=float)
        u = np.array(u_vec, dtype=float).reshape(-1)
        if H.shape != (u.size, u.size):
            raise ValueError("H must be square and match u")
        super().__init__(Box(np.zeros(u.size), u))
        self.h_matrix = H
        self.u_vec = u
        self.noise = float(noise)
        self._hess = 0.5 * (H + H.T)
        self._lin = H.T @ u
        if validate:
            if np.any(H > 0.0):
                raise ValueError("NQP matrix must be entrywise nonpositive")
            # gradient is affine with nonpositive slopes: its minimum is at x = u
            if np.any(self._hess @ u - self._lin < -1e-9 * (1.0 + np.abs(self._lin).max())):
                raise ValueError("NQP objective is not monotone on [0, u]")

    @property
    def grad_bound(self) -> float:
        return float(np.linalg.norm(self._lin))

    @property
    def stochastic_grad_bound(self) -> float:
        return (1.0 + self.noise) * self.grad_bound

    @property
    def smoothness(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvalsh(self._hess))))

    def value(self, x) -> float:
        x = self._checked(x)
        return float((0.5 * x - self.u_vec) @ (self.h_matrix @ x))

    def gradient(self, x) -> np.ndarray:
        x = self._checked(x)
        return self._hess @ x - self._lin

    def stochastic_gradient(self, x, rng: Rng) -> np.ndarray:
        """Exact gradient scaled coordinatewise by ``1 + U[-noise, noise]``."""
        g = self.gradient(x)
        return g * (1.0 + rng.generator.uniform(-self.noise, self.noise, g.size))

    @staticmethod
    def mean(parts) -> NqpObjective:
        parts = list(parts)
        H = np.mean([p.h_matrix for p in parts], axis=0)
        return NqpObjective(H, parts[0].u_vec, parts[0].noise, validate=False)


def nqp_objective(n: int, rng: Rng, noise: float = 0.5) -> NqpObjective:
    """``H`` drawn from ``U[-100, 0]`` and symmetrized.

    Symmetrizing keeps every entry in ``[-100, 0]`` and makes the objective
    monotone on the whole box ``[0, 1]^n``.
    """
    raw = rng.generator.uniform(-100.0, 0.0, (n, n))
    return NqpObjective(0.5 * (raw + raw.T), np.ones(n), noise)


def nqp_polytope(n: int, m: int, rng: Rng) -> Polytope:
    """``{A x <= 1, 0 <= x <= 1}`` with ``A ~ U[0, 1]``; always contains 0."""
    A = rng.generator.uniform(0.0, 1.0, (m, n))
    return Polytope(A, np.ones(m), Box.uniform(n, 0.0, 1.0))


def nqp_generate(n: int, m: int, rng: Rng, noise: float = 0.5):
    if n < 1 or m < 1:
        raise ValueError("n and m must be positive")
    return nqp_objective(n, rng, noise), nqp_polytope(n, m, rng)
