"""Online policies: Meta-Frank-Wolfe, (stochastic) online gradient ascent and
the two baselines, plus the offline Frank-Wolfe used for hindsight optima.

Protocol per round ``t``: ``x = policy.play()`` (oracle baselines get
``f_t`` as an argument), the environment collects ``f_t(x)``, then
``policy.observe(f_t)`` supplies whatever feedback the policy uses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Polytope, Rng, as_point
from .objectives.coverage import SURROGATE_RATIO
from .online_linear import RftlState, default_anchor, default_eta, rftl_feedback, rftl_select
from .polytope import linear_maximize, project, sample_uniform_many

POLICY_KINDS = ("meta_fw", "oga", "stochastic_oga", "random100", "surrogate_ga")


@dataclass(frozen=True)
class StepRecord:
    t: int
    play: np.ndarray
    reward: float
    grad_evals: int
    fn_evals: int


class Policy:
    kind = "abstract"
    oracle = False

    def play(self, f=None) -> np.ndarray:
        raise NotImplementedError

    def observe(self, f) -> None:
        raise NotImplementedError


def _feedback_gradient(f, x, stochastic, rng):
    if stochastic:
        return f.stochastic_gradient(x, rng)
    return f.gradient(x)


class MetaFrankWolfe(Policy):
    """``K`` RFTL instances, one per Frank-Wolfe step.

    The play is the average of their selections. Instance ``k`` is paid the
    gradient at the partial sum ``(1/K) sum_{s<k} v^s`` (zero for ``k=0``),
    so each round costs exactly ``K`` gradient queries. With stochastic
    feedback every ``k`` draws fresh noise.
    """

    kind = "meta_fw"

    def __init__(self, p: Polytope, k: int, eta: float, anchor=None,
                 stochastic: bool = False, rng: Rng | None = None):
        if k < 1:
            raise ValueError("K must be at least 1")
        if stochastic and rng is None:
            raise ValueError("stochastic feedback needs an rng")
        self.p = p
        self.k = int(k)
        anchor = default_anchor(p) if anchor is None else anchor
        self.states = [RftlState.start(p, eta, anchor) for _ in range(self.k)]
        self.stochastic = stochastic
        self.rng = rng
        self._selections = None

    def play(self, f=None) -> np.ndarray:
        self._selections = [rftl_select(s, self.p) for s in self.states]
        return np.mean(self._selections, axis=0)

    def observe(self, f) -> None:
        if self._selections is None:
            raise RuntimeError("observe called before play")
        partial = np.zeros(self.p.dim)
        for k, v in enumerate(self._selections):
            g = _feedback_gradient(f, partial, self.stochastic, self.rng)
            self.states[k] = rftl_feedback(self.states[k], g)
            partial = partial + v / self.k
        self._selections = None


class OnlineGradientAscent(Policy):
    """Projected gradient ascent with ``eta_t = D / (G sqrt(t))``.

    An explicit ``eta`` replaces ``D / G`` in the schedule, giving
    ``eta / sqrt(t)``.
    """

    kind = "oga"

    def __init__(self, p: Polytope, diameter: float, grad_bound: float, x1=None,
                 eta: float | None = None, stochastic: bool = False, rng: Rng | None = None):
        if stochastic and rng is None:
            raise ValueError("stochastic feedback needs an rng")
        self.p = p
        self.diameter = float(diameter)
        self.grad_bound = float(grad_bound)
        self.eta = eta
        self.x = default_anchor(p) if x1 is None else as_point(x1, p.dim)
        self.t = 0
        self.stochastic = stochastic
        self.rng = rng
        if stochastic:
            self.kind = "stochastic_oga"

    def step_size(self, t: int) -> float:
        if self.eta is not None:
            return self.eta / math.sqrt(t)
        if self.diameter == 0.0 or self.grad_bound == 0.0:
            return 0.0
        return self.diameter / (self.grad_bound * math.sqrt(t))

    def play(self, f=None) -> np.ndarray:
        return self.x.copy()

    def step(self, grad) -> np.ndarray:
        g = as_point(grad, self.p.dim)
        self.t += 1
        self.x = project(self.x + self.step_size(self.t) * g, self.p)
        return self.x

    def _ascent_direction(self, f):
        return _feedback_gradient(f, self.x, self.stochastic, self.rng)

    def observe(self, f) -> None:
        self.step(self._ascent_direction(f))


class SurrogateGradientAscent(OnlineGradientAscent):
    """Supergradient ascent on ``(1 - 1/e) f~``, the concave coverage surrogate."""

    kind = "surrogate_ga"

    def __init__(self, p, diameter, grad_bound, x1=None, eta=None):
        super().__init__(p, diameter, grad_bound, x1, eta)

    def _ascent_direction(self, f):
        return SURROGATE_RATIO * f.surrogate_supergradient(self.x)


class Random100(Policy):
    """Oracle baseline: best of ``n_samples`` uniform points under ``f_t``.

    It evaluates ``f_t`` before playing, which no online policy may do.
    Ties go to the lowest sample index.
    """

    kind = "random100"
    oracle = True

    def __init__(self, p: Polytope, rng: Rng, n_samples: int = 100):
        if n_samples < 1:
            raise ValueError("n_samples must be positive")
        self.p = p
        self.rng = rng
        self.n_samples = int(n_samples)

    def play(self, f=None) -> np.ndarray:
        if f is None:
            raise ValueError("random100 needs the round's objective")
        pts = sample_uniform_many(self.p, self.rng, self.n_samples)
        vals = np.array([f.value(x) for x in pts])
        return pts[int(np.argmax(vals))]

    def observe(self, f) -> None:
        pass


def offline_fw_maximize(f, p: Polytope, k_steps: int) -> np.ndarray:
    """Frank-Wolfe from the origin with step ``1/k_steps``.

    The result is the average of ``k_steps`` vertices of ``p``; the
    intermediate iterates only need to stay in the objective's domain.
    """
    if k_steps < 1:
        raise ValueError("k_steps must be at least 1")
    x = np.zeros(p.dim)
    for _ in range(k_steps):
        x = x + linear_maximize(f.gradient(x), p) / k_steps
    return x


def make_policy(kind: str, p: Polytope, *, diameter: float, grad_bound: float, horizon: int,
                rng: Rng, k: int | None = None, eta: float | None = None,
                n_samples: int = 100, stochastic: bool = False) -> Policy:
    """Build a policy by name with the default parameter choices."""
    if kind == "meta_fw":
        k = math.ceil(math.sqrt(horizon)) if k is None else k
        eta = default_eta(diameter, grad_bound, horizon) if eta is None else eta
        return MetaFrankWolfe(p, k, eta, stochastic=stochastic, rng=rng)
    if kind in ("oga", "stochastic_oga"):
        return OnlineGradientAscent(p, diameter, grad_bound, eta=eta,
                                    stochastic=stochastic or kind == "stochastic_oga", rng=rng)
    if kind == "surrogate_ga":
        return SurrogateGradientAscent(p, diameter, grad_bound, eta=eta)
    if kind == "random100":
        return Random100(p, rng, n_samples)
    raise ValueError(f"unknown policy kind {kind!r}; expected one of {', '.join(POLICY_KINDS)}")
