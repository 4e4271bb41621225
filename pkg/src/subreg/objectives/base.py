from __future__ import annotations

import numpy as np

from ..core import Box, Rng, as_point


class DomainError(ValueError):
    """Objective evaluated outside the box where it is defined."""


class Objective:
    """A differentiable reward ``f_t`` on a box.

    ``domain_box`` is where the declared constants (``grad_bound``,
    ``smoothness``, ``gamma``) hold and where property checks sample.
    ``eval_box`` is where ``value``/``gradient`` are defined at all; it
    contains ``domain_box`` and also covers the partial Frank-Wolfe sums
    that start at the origin.
    """

    family = "custom"
    gamma = 1.0

    def __init__(self, domain_box: Box, eval_box: Box | None = None):
        self.domain_box = domain_box
        self.eval_box = domain_box if eval_box is None else eval_box

    @property
    def dim(self) -> int:
        return self.domain_box.dim

    @property
    def grad_bound(self) -> float:
        raise NotImplementedError

    @property
    def smoothness(self) -> float:
        raise NotImplementedError

    @property
    def stochastic_grad_bound(self) -> float:
        return self.grad_bound

    def _checked(self, x, tol=1e-9) -> np.ndarray:
        x = as_point(x, self.dim)
        if not self.eval_box.contains(x, tol):
            raise DomainError(
                f"{self.family} objective evaluated outside its domain "
                f"[{self.eval_box.lower.min()}, {self.eval_box.upper.max()}]"
            )
        return self.eval_box.clip(x)

    def value(self, x) -> float:
        raise NotImplementedError

    def gradient(self, x) -> np.ndarray:
        raise NotImplementedError

    def stochastic_gradient(self, x, rng: Rng) -> np.ndarray:
        raise NotImplementedError(f"{self.family} objective has no stochastic gradient")


class CallableObjective(Objective):
    """Objective assembled from plain functions; used for tests and synthetic cases."""

    def __init__(self, value, gradient, domain_box, grad_bound=np.inf, smoothness=np.inf,
                 gamma=1.0, stochastic_gradient=None, family="custom"):
        super().__init__(domain_box)
        self._value = value
        self._gradient = gradient
        self._grad_bound = grad_bound
        self._smoothness = smoothness
        self._stoch = stochastic_gradient
        self.gamma = gamma
        self.family = family

    @property
    def grad_bound(self):
        return self._grad_bound

    @property
    def smoothness(self):
        return self._smoothness

    def value(self, x):
        return float(self._value(self._checked(x)))

    def gradient(self, x):
        return np.asarray(self._gradient(self._checked(x)), dtype=float)

    def stochastic_gradient(self, x, rng):
        if self._stoch is None:
            return super().stochastic_gradient(x, rng)
        return np.asarray(self._stoch(self._checked(x), rng), dtype=float)


def linear_objective(c, box: Box) -> CallableObjective:
    """``f(x) = <c, x>``: modular, zero curvature."""
    c = as_point(c, box.dim)
    return CallableObjective(
        lambda x: c @ x, lambda x: c.copy(), box,
        grad_bound=float(np.linalg.norm(c)), smoothness=0.0,
        stochastic_gradient=lambda x, rng: c.copy(), family="linear",
    )


class MeanObjective(Objective):
    """Pointwise mean of objectives sharing one domain (generic, unbatched)."""

    def __init__(self, parts):
        parts = list(parts)
        if not parts:
            raise ValueError("need at least one objective")
        super().__init__(parts[0].domain_box, parts[0].eval_box)
        self.parts = parts
        self.family = parts[0].family

    @property
    def grad_bound(self):
        return max(p.grad_bound for p in self.parts)

    @property
    def smoothness(self):
        return max(p.smoothness for p in self.parts)

    def value(self, x):
        return float(np.mean([p.value(x) for p in self.parts]))

    def gradient(self, x):
        return np.mean([p.gradient(x) for p in self.parts], axis=0)
