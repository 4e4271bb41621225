"""Regularized Follow-The-Leader for online linear maximization over a polytope.

With the quadratic regularizer ``r(v) = ||v - x0||^2 / 2`` the leader is

    argmax_{v in P}  eta * <S, v> - ||v - x0||^2 / 2

where ``S`` is the sum of all payoff vectors seen so far. Completing the
square, ``eta <S, v> - ||v - x0||^2 / 2 = -||v - (x0 + eta S)||^2 / 2 + const``,
so the leader is the Euclidean projection of ``x0 + eta S`` onto ``P``. One
projection per selection is therefore all RFTL costs here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .core import DimensionError, Polytope, as_point
from .polytope import contains, project


def default_anchor(p: Polytope) -> np.ndarray:
    """Projection of the bounding-box center onto ``p``."""
    return project(p.box.center, p)


def default_eta(diameter: float, grad_bound: float, horizon: int) -> float:
    """``D / (G sqrt(T))``; falls back to 1 when ``D`` or ``G`` vanish."""
    if diameter <= 0.0 or grad_bound <= 0.0:
        return 1.0
    return diameter / (grad_bound * math.sqrt(horizon))


@dataclass(frozen=True)
class RftlState:
    payoff_sum: np.ndarray
    anchor_x0: np.ndarray
    eta: float
    round: int = 0

    def __post_init__(self):
        if self.payoff_sum.shape != self.anchor_x0.shape:
            raise DimensionError("payoff_sum and anchor_x0 differ in dimension")
        if not self.eta > 0.0:
            raise ValueError("eta must be positive")

    @classmethod
    def start(cls, p: Polytope, eta: float, anchor=None) -> RftlState:
        x0 = default_anchor(p) if anchor is None else as_point(anchor, p.dim)
        if not contains(x0, p, 1e-7):
            raise ValueError("RFTL anchor must lie in the polytope")
        return cls(np.zeros(p.dim), x0, float(eta), 0)


def rftl_select(state: RftlState, p: Polytope) -> np.ndarray:
    if not state.payoff_sum.any():
        return state.anchor_x0.copy()
    return project(state.anchor_x0 + state.eta * state.payoff_sum, p)


def rftl_feedback(state: RftlState, payoff_gradient) -> RftlState:
    """Return the state after observing the linear payoff ``<payoff_gradient, .>``."""
    g = as_point(payoff_gradient, state.payoff_sum.size)
    return replace(state, payoff_sum=state.payoff_sum + g, round=state.round + 1)
