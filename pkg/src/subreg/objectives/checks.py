"""Sampled property checks: DR-submodularity, directional concavity, the
weak-DR inequality and beta-smoothness.

Every check returns a ``CheckReport`` rather than raising. Tolerances are
absolute for quantities of order one and scale with the magnitude of the
compared terms beyond that, so large-valued families (NQP) are not judged
on floating-point noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import Rng
from .base import Objective


@dataclass
class CheckReport:
    name: str
    passed: bool
    samples: int
    worst_slack: float
    witness: tuple | None = None

    def __str__(self):
        status = "pass" if self.passed else "FAIL"
        return f"{self.name}: {status} ({self.samples} samples, worst slack {self.worst_slack:.3g})"


def _tol(base, *terms):
    return base * max(1.0, *(float(np.max(np.abs(t))) for t in terms))


def _sample(f: Objective, gen, k=1):
    lo, hi = f.domain_box.lower, f.domain_box.upper
    return lo + (hi - lo) * gen.random((k, lo.size))


class _Tracker:
    def __init__(self, name, samples):
        self.name = name
        self.samples = samples
        self.worst = np.inf
        self.witness = None

    def record(self, slack, tol, witness):
        # normalized so that >= -1 means within tolerance
        if slack / tol < (self.worst if np.isfinite(self.worst) else np.inf):
            self.worst = slack / tol
            self.witness = witness

    def report(self):
        passed = self.worst >= -1.0
        return CheckReport(self.name, passed, self.samples, float(self.worst),
                           None if passed else self.witness)


def check_dr_submodular(f: Objective, rng: Rng, samples: int = 200) -> CheckReport:
    """For sampled ``x <= y``: ``grad f(x) >= grad f(y)`` and ``f(x) <= f(y)``.

    ``worst_slack`` is reported in units of the tolerance (``>= -1`` passes).
    """
    gen = rng.generator
    tr = _Tracker("dr_submodular", samples)
    for _ in range(samples):
        a, b = _sample(f, gen, 2)
        x, y = np.minimum(a, b), np.maximum(a, b)
        gx, gy = f.gradient(x), f.gradient(y)
        fx, fy = f.value(x), f.value(y)
        tr.record(np.min(gx - gy), _tol(1e-7, gx, gy), (x, y))
        tr.record(fy - fx, _tol(1e-9, fx, fy), (x, y))
    return tr.report()


def _concavity_slack(f, x, v, z_max, grid):
    zs = np.linspace(0.0, z_max, grid)
    vals = np.array([f.value(x + z * v) for z in zs])
    mids = vals[1:-1] - 0.5 * (vals[:-2] + vals[2:])
    return np.min(mids), vals


def check_concave_along_nonneg(f: Objective, rng: Rng, samples: int = 200,
                               grid: int = 7) -> CheckReport:
    """Midpoint concavity of ``z -> f(x + z v)`` for ``v >= 0`` and ``v <= 0``."""
    gen = rng.generator
    lo, hi = f.domain_box.lower, f.domain_box.upper
    tr = _Tracker("concave_along_nonneg", samples)
    for _ in range(samples):
        x = _sample(f, gen)[0]
        v = gen.random(x.size)
        v /= max(np.linalg.norm(v), 1e-300)
        for direction in (v, -v):
            with np.errstate(divide="ignore", invalid="ignore"):
                room = np.where(direction > 0, (hi - x) / direction,
                                np.where(direction < 0, (lo - x) / direction, np.inf))
            z_max = float(np.min(room))
            if not np.isfinite(z_max) or z_max <= 0.0:
                continue
            slack, vals = _concavity_slack(f, x, direction, z_max, grid)
            tr.record(slack, _tol(1e-7, vals), (x, direction))
    return tr.report()


def check_weak_dr_inequality(f: Objective, gamma: float, rng: Rng,
                             samples: int = 200) -> CheckReport:
    """``F(y) - (1 + 1/gamma^2) F(x) <= (1/gamma) <grad F(x), y - x>`` on sampled pairs."""
    if not 0.0 < gamma <= 1.0:
        raise ValueError("gamma must lie in (0, 1]")
    gen = rng.generator
    tr = _Tracker("weak_dr_inequality", samples)
    for k in range(samples):
        x, y = _sample(f, gen, 2)
        if k == 0:
            y = x.copy()
        fx, fy, gx = f.value(x), f.value(y), f.gradient(x)
        lhs = fy - (1.0 + 1.0 / gamma**2) * fx
        rhs = gx @ (y - x) / gamma
        tr.record(rhs - lhs, _tol(1e-7, fx, fy, rhs), (x, y))
    return tr.report()


def check_beta_smooth(f: Objective, beta: float, rng: Rng, samples: int = 200) -> CheckReport:
    """Both quadratic bounds ``|f(x) - f(y) - grad f(.)^T (x - y)| <= beta/2 ||x - y||^2``
    and gradient Lipschitzness ``||grad f(x) - grad f(y)|| <= beta ||x - y||``."""
    if beta < 0.0:
        raise ValueError("beta must be nonnegative")
    gen = rng.generator
    tr = _Tracker("beta_smooth", samples)
    for _ in range(samples):
        x, y = _sample(f, gen, 2)
        fx, fy = f.value(x), f.value(y)
        gx, gy = f.gradient(x), f.gradient(y)
        d = x - y
        quad = 0.5 * beta * (d @ d)
        tol = _tol(1e-7, fx, fy)
        tr.record(quad - abs(fx - fy - gx @ d), tol, (x, y))
        tr.record(quad - abs(fx - fy - gy @ d), tol, (x, y))
        tr.record(beta * np.linalg.norm(d) - np.linalg.norm(gx - gy), _tol(1e-7, gx, gy), (x, y))
    return tr.report()
