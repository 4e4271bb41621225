"""Experiment orchestration: instance sequences, episodes, hindsight optima,
alpha-regret and the regret-bound checks.

Every random quantity is drawn from a named child stream of the cell's
master seed, so a round-``t`` objective is the same whatever the horizon
and a policy's noise does not depend on which other policies ran.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .algorithms import POLICY_KINDS, Policy, StepRecord, make_policy, offline_fw_maximize
from .core import GeometryConstants, Polytope, Rng
from .objectives import FAMILIES
from .objectives.base import MeanObjective
from .objectives.coverage import coverage_generate, coverage_polytope
from .objectives.dopt import dopt_objective, dopt_polytope
from .objectives.nqp import nqp_objective, nqp_polytope
from .polytope import contains, diameter_upper_bound, project, radius_upper_bound

ALPHA_FW = 1.0 - math.exp(-1.0)
ALPHA_OGA = 0.5
K_OFF = 200
N_CHECKPOINTS = 20

DEFAULT_DIMS = {
    "coverage": {"n": 20, "m": 2, "universe": 50, "degree": 3},
    "nqp": {"n": 10, "m": 2},
    "dopt": {"n": 5, "N": 20, "m": 2},
}

CSV_HEADER = ["family", "policy", "seed", "t", "reward", "cum_reward", "checkpoint",
              "hindsight_value", "alpha", "alpha_regret"]


class EpisodeError(RuntimeError):
    def __init__(self, round_index, cause):
        super().__init__(f"round {round_index}: {type(cause).__name__}: {cause}")
        self.round_index = round_index
        self.cause = cause


class GradientBoundError(RuntimeError):
    pass


# --- instances --------------------------------------------------------------


@dataclass
class InstanceSequence:
    family: str
    seed: int
    polytope: Polytope
    objectives: list

    @property
    def horizon(self) -> int:
        return len(self.objectives)

    def grad_bound(self, stochastic: bool = False) -> float:
        if stochastic:
            return max(f.stochastic_grad_bound for f in self.objectives)
        return max(f.grad_bound for f in self.objectives)

    def constants(self, stochastic: bool = False) -> GeometryConstants:
        p = self.polytope
        return GeometryConstants(
            diameter_upper_bound(p), radius_upper_bound(p),
            self.grad_bound(stochastic), max(f.smoothness for f in self.objectives),
        )


def resolve_dims(family: str, dims: dict | None = None) -> dict:
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}; expected one of {', '.join(FAMILIES)}")
    out = dict(DEFAULT_DIMS[family])
    for key, val in (dims or {}).items():
        if key not in out:
            raise ValueError(f"dimension {key!r} does not apply to family {family!r}")
        out[key] = int(val)
    return out


def build_instances(family: str, horizon: int, seed: int, dims: dict | None = None) -> InstanceSequence:
    """One fixed polytope and ``horizon`` independently drawn objectives."""
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    d = resolve_dims(family, dims)
    root = Rng(seed).child("instances", family)
    prng = root.child("polytope")
    orng = [root.child("objective", t) for t in range(1, horizon + 1)]
    if family == "coverage":
        p = coverage_polytope(d["n"], d["m"], prng)
        objs = [coverage_generate(d["n"], d["universe"], d["degree"], r) for r in orng]
    elif family == "nqp":
        p = nqp_polytope(d["n"], d["m"], prng)
        objs = [nqp_objective(d["n"], r) for r in orng]
    else:
        p = dopt_polytope(d["N"], d["m"], prng)
        objs = [dopt_objective(d["n"], d["N"], r) for r in orng]
    return InstanceSequence(family, seed, p, objs)


# --- episodes ---------------------------------------------------------------


class RevealGuard:
    """Wraps ``f_t`` to count evaluations and flag any made before the play.

    It also asserts the declared gradient bound for every gradient taken
    inside the objective's domain box.
    """

    def __init__(self, f, grad_bound: float, stoch_bound: float):
        self.f = f
        self.revealed = False
        self.early = 0
        self.grad_evals = 0
        self.fn_evals = 0
        self._bounds = (grad_bound, stoch_bound)

    def __getattr__(self, name):
        return getattr(self.f, name)

    def _touch(self):
        if not self.revealed:
            self.early += 1

    def _checked_grad(self, x, g, bound):
        if self.f.domain_box.contains(x, 1e-9):
            norm = float(np.linalg.norm(g))
            if norm > bound * (1.0 + 1e-9) + 1e-12:
                raise GradientBoundError(f"gradient norm {norm:.6g} exceeds declared bound {bound:.6g}")
        return g

    def value(self, x):
        self._touch()
        self.fn_evals += 1
        return self.f.value(x)

    def gradient(self, x):
        self._touch()
        self.grad_evals += 1
        return self._checked_grad(x, self.f.gradient(x), self._bounds[0])

    def stochastic_gradient(self, x, rng):
        self._touch()
        self.grad_evals += 1
        return self._checked_grad(x, self.f.stochastic_gradient(x, rng), self._bounds[1])

    def surrogate_supergradient(self, x):
        self._touch()
        self.grad_evals += 1
        return self.f.surrogate_supergradient(x)


@dataclass(frozen=True)
class CheckpointRecord:
    t: int
    hindsight_value: float
    cum_reward: float
    alpha: float
    alpha_regret: float


@dataclass
class RegretTrace:
    family: str
    policy: str
    seed: int
    records: list = field(default_factory=list)
    checkpoints: list = field(default_factory=list)
    early_evals: int = 0

    @property
    def rewards(self) -> np.ndarray:
        return np.array([r.reward for r in self.records])

    @property
    def cum_rewards(self) -> np.ndarray:
        return np.cumsum(self.rewards)

    def regret_at(self, t: int, alpha: float) -> float:
        for c in self.checkpoints:
            if c.t == t and c.alpha == alpha:
                return c.alpha_regret
        raise KeyError(f"no checkpoint at t={t} with alpha={alpha}")


def run_episode(instances: InstanceSequence, policy: Policy, label: str | None = None,
                horizon: int | None = None) -> RegretTrace:
    """Play the online protocol over the first ``horizon`` rounds."""
    p = instances.polytope
    T = instances.horizon if horizon is None else horizon
    g_exact, g_stoch = instances.grad_bound(False), instances.grad_bound(True)
    trace = RegretTrace(instances.family, label or policy.kind, instances.seed)
    for t in range(1, T + 1):
        guard = RevealGuard(instances.objectives[t - 1], g_exact, g_stoch)
        try:
            if policy.oracle:
                guard.revealed = True
                x = policy.play(guard)
            else:
                x = policy.play()
                trace.early_evals += guard.early
                guard.revealed = True
            if not contains(x, p, 1e-7):
                raise RuntimeError("play left the polytope")
            reward = guard.f.value(x)
            policy.observe(guard)
        except Exception as exc:
            raise EpisodeError(t, exc) from exc
        trace.records.append(StepRecord(t, x, reward, guard.grad_evals, guard.fn_evals))
    return trace


# --- hindsight and regret ---------------------------------------------------


def prefix_mean(objectives, prefix_t: int):
    parts = objectives[:prefix_t]
    mean = getattr(type(parts[0]), "mean", None)
    return mean(parts) if callable(mean) else MeanObjective(parts)


def hindsight_optimum(objectives, prefix_t: int, p: Polytope, k_off: int = K_OFF):
    """Offline Frank-Wolfe on the prefix average; returns ``(x, sum_{s<=t} f_s(x))``."""
    if not 1 <= prefix_t <= len(objectives):
        raise ValueError(f"prefix_t must lie in [1, {len(objectives)}]")
    F = prefix_mean(objectives, prefix_t)
    x = project(offline_fw_maximize(F, p, k_off), p)
    return x, prefix_t * F.value(x)


def default_checkpoints(horizon: int, count: int = N_CHECKPOINTS) -> list[int]:
    """``min(count, horizon)`` distinct rounds, geometrically spaced from 1 to ``horizon``."""
    count = min(count, horizon)
    grid: list[int] = []
    for i, v in enumerate(np.geomspace(1, horizon, count)):
        t = max(int(round(v)), grid[-1] + 1 if grid else 1)
        grid.append(min(t, horizon - (count - 1 - i)))
    return grid


def hindsight_table(instances: InstanceSequence, checkpoints, k_off: int = K_OFF) -> dict:
    return {t: hindsight_optimum(instances.objectives, t, instances.polytope, k_off)[1]
            for t in checkpoints}


def compute_alpha_regret(trace: RegretTrace, hindsight_values: dict, alpha: float,
                         checkpoints=None) -> RegretTrace:
    """Append ``alpha * hindsight - cum_reward`` records at each checkpoint."""
    cum = trace.cum_rewards
    for t in (sorted(hindsight_values) if checkpoints is None else checkpoints):
        if t not in hindsight_values:
            raise KeyError(f"no hindsight value for checkpoint {t}")
        if not 1 <= t <= cum.size:
            raise KeyError(f"checkpoint {t} outside the trace")
        h = float(hindsight_values[t])
        c = float(cum[t - 1])
        trace.checkpoints.append(CheckpointRecord(t, h, c, alpha, alpha * h - c))
    return trace


def alphas_for(kind: str, gamma: float = 1.0) -> list[float]:
    """Meta-FW is judged at ``1 - 1/e``; gradient ascent at both that and its own ratio."""
    if kind in ("oga", "stochastic_oga"):
        return [ALPHA_FW, gamma**2 / (gamma**2 + 1.0)]
    return [ALPHA_FW]


@dataclass
class BoundReport:
    policy: str
    lhs: float
    rhs: float
    lhs_inflated: float
    slack: float = 0.0

    @property
    def margin(self) -> float:
        return self.rhs + self.slack - self.lhs

    @property
    def margin_inflated(self) -> float:
        return self.rhs + self.slack - self.lhs_inflated

    @property
    def passed(self) -> bool:
        return self.margin >= 0.0

    def __str__(self):
        status = "pass" if self.passed else "FAIL"
        return (f"{self.policy}: {status} lhs={self.lhs:.6g} rhs={self.rhs:.6g} "
                f"margin={self.margin:.6g} inflated margin={self.margin_inflated:.6g}")


def theorem_bound_check(trace: RegretTrace, constants: GeometryConstants, hindsight_value: float,
                        policy_kind: str, k: int | None = None, sum_f_zero: float = 0.0,
                        gamma: float = 1.0) -> BoundReport:
    """Compare the realized regret with the guarantee for ``policy_kind``.

    ``lhs`` uses the Frank-Wolfe comparator as is; ``lhs_inflated`` divides
    it by ``1 - 1/e``, an upper estimate of the true hindsight maximum.
    """
    T = len(trace.records)
    total = float(trace.rewards.sum())
    D, R, G, beta = (constants.diameter_d, constants.radius_r,
                     constants.grad_bound_g, constants.smoothness_beta)
    inflated = hindsight_value / ALPHA_FW
    if policy_kind == "meta_fw":
        if k is None:
            raise ValueError("meta_fw bound needs K")
        rhs = -math.exp(-1.0) * sum_f_zero + 2.0 * D * G * math.sqrt(T) + beta * R**2 * T / (2.0 * k)
        alpha = ALPHA_FW
    elif policy_kind in ("oga", "stochastic_oga"):
        alpha = gamma**2 / (gamma**2 + 1.0)
        rhs = 3.0 * gamma * D * G * math.sqrt(T) / (2.0 * (gamma**2 + 1.0))
    else:
        raise ValueError(f"no regret guarantee for {policy_kind!r}")
    return BoundReport(policy_kind, alpha * hindsight_value - total, rhs, alpha * inflated - total)


def expectation_bound_check(traces, constants: GeometryConstants, hindsight_value: float,
                            gamma: float = 1.0) -> BoundReport:
    """Stochastic gradient ascent bound on the replicate mean, with slack
    ``2 * std / sqrt(replicates)``."""
    reports = [theorem_bound_check(tr, constants, hindsight_value, "stochastic_oga", gamma=gamma)
               for tr in traces]
    lhs = np.array([r.lhs for r in reports])
    n = lhs.size
    slack = 2.0 * float(lhs.std(ddof=1)) / math.sqrt(n) if n > 1 else 0.0
    return BoundReport("stochastic_oga", float(lhs.mean()), reports[0].rhs,
                       float(np.mean([r.lhs_inflated for r in reports])), slack)


# --- experiment matrix ------------------------------------------------------


@dataclass
class ExperimentSpec:
    family: str
    horizon_t: int
    dims: dict = field(default_factory=dict)
    policies: list = field(default_factory=lambda: [("meta_fw", {}), ("oga", {})])
    seeds: list = field(default_factory=lambda: [0])
    k_meta: int | None = None
    eta_overrides: dict = field(default_factory=dict)
    checkpoint_grid: list | None = None
    stochastic_gradients: bool = False
    k_off: int = K_OFF

    def __post_init__(self):
        if self.horizon_t < 1:
            raise ValueError("horizon_t must be at least 1")
        self.dims = resolve_dims(self.family, self.dims)
        self.policies = [(kind, dict(params)) for kind, params in self.policies]
        for kind, _ in self.policies:
            if kind not in POLICY_KINDS:
                raise ValueError(f"unknown policy kind {kind!r}")
            if kind == "surrogate_ga" and self.family != "coverage":
                raise ValueError("surrogate_ga applies to the coverage family only")
        if self.checkpoint_grid is None:
            self.checkpoint_grid = default_checkpoints(self.horizon_t)
        grid = sorted({int(t) for t in self.checkpoint_grid})
        if not grid or grid[0] < 1 or grid[-1] > self.horizon_t:
            raise ValueError(f"checkpoints must lie in [1, {self.horizon_t}]")
        if self.horizon_t not in grid:
            grid.append(self.horizon_t)
        self.checkpoint_grid = grid


def policy_label(kind: str, stochastic: bool) -> str:
    if stochastic and kind == "meta_fw":
        return "stochastic_meta_fw"
    if stochastic and kind == "oga":
        return "stochastic_oga"
    return kind


def make_cell_policy(spec: ExperimentSpec, kind: str, params: dict, instances: InstanceSequence,
                     label: str, replicate: int | None = None) -> Policy:
    stochastic = spec.stochastic_gradients and kind in ("meta_fw", "oga")
    consts = instances.constants(stochastic or kind == "stochastic_oga")
    rng = Rng(instances.seed).child("policy", label)
    if replicate is not None:
        rng = rng.child("replicate", replicate)
    k = params.get("k", spec.k_meta)
    eta = params.get("eta", spec.eta_overrides.get(kind))
    return make_policy(kind, instances.polytope, diameter=consts.diameter_d,
                       grad_bound=consts.grad_bound_g, horizon=spec.horizon_t, rng=rng,
                       k=k, eta=eta, n_samples=params.get("n_samples", 100),
                       stochastic=stochastic)


@dataclass
class CellResult:
    family: str
    seed: int
    traces: list
    hindsight: dict


class CellError(RuntimeError):
    """An episode failed; the message names the (family, policy, seed) cell."""


def run_cell(spec: ExperimentSpec, seed: int, instances: InstanceSequence | None = None) -> CellResult:
    """All policies of ``spec`` on one seed's instance sequence."""
    if instances is None:
        instances = build_instances(spec.family, spec.horizon_t, seed, spec.dims)
    hindsight = hindsight_table(instances, spec.checkpoint_grid, spec.k_off)
    traces = []
    for kind, params in spec.policies:
        label = policy_label(kind, spec.stochastic_gradients)
        policy = make_cell_policy(spec, kind, params, instances, label)
        try:
            trace = run_episode(instances, policy, label)
        except EpisodeError as exc:
            raise CellError(f"family={spec.family} policy={label} seed={seed}: {exc}") from exc
        for alpha in alphas_for(kind):
            compute_alpha_regret(trace, hindsight, alpha, spec.checkpoint_grid)
        traces.append(trace)
    return CellResult(spec.family, seed, traces, hindsight)


def run_matrix(spec: ExperimentSpec, workers: int = 1) -> list[CellResult]:
    """Run every seed; results come back in seed order whatever ``workers`` is."""
    if workers <= 1 or len(spec.seeds) <= 1:
        return [run_cell(spec, s) for s in spec.seeds]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run_cell, [spec] * len(spec.seeds), spec.seeds))


def _fmt(v) -> str:
    return repr(float(v))


def trace_rows(trace: RegretTrace):
    cum = trace.cum_rewards
    by_t: dict[int, list] = {}
    for c in trace.checkpoints:
        by_t.setdefault(c.t, []).append(c)
    for rec in trace.records:
        base = [trace.family, trace.policy, trace.seed, rec.t, _fmt(rec.reward), _fmt(cum[rec.t - 1])]
        yield base + [0, "", "", ""]
        for c in by_t.get(rec.t, []):
            yield base + [1, _fmt(c.hindsight_value), _fmt(c.alpha), _fmt(c.alpha_regret)]


def traces_to_csv(traces) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for tr in traces:
        w.writerows(trace_rows(tr))
    return buf.getvalue()
