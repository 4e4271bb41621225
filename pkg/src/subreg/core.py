"""Shared types: points, boxes, polytopes, seeded streams, geometry constants.

Points are plain 1-d ``float64`` numpy arrays. ``as_point`` is the single
gate that validates them.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field

import numpy as np

from ._simplex import InfeasibleLPError, solve_lp

EPS_NUM = 1e-9


class DimensionError(ValueError):
    pass


class InfeasiblePolytopeError(ValueError):
    pass


def as_point(x, dim=None) -> np.ndarray:
    """Return ``x`` as a finite 1-d float array, optionally of length ``dim``."""
    arr = np.array(x, dtype=float).reshape(-1)
    if dim is not None and arr.size != dim:
        raise DimensionError(f"expected a point of dimension {dim}, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("point has non-finite coordinates")
    return arr


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


def dominance_meet_join(x, y) -> tuple[np.ndarray, np.ndarray]:
    """Coordinatewise ``(min(x, y), max(x, y))``, the lattice meet and join."""
    x = as_point(x)
    y = as_point(y)
    if x.size != y.size:
        raise DimensionError(f"dimension mismatch: {x.size} vs {y.size}")
    return np.minimum(x, y), np.maximum(x, y)


@dataclass(frozen=True)
class Box:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = as_point(self.lower)
        hi = as_point(self.upper)
        if lo.size != hi.size:
            raise DimensionError("box bounds differ in dimension")
        if np.any(lo > hi):
            raise ValueError("box lower bound exceeds upper bound")
        if np.any(lo < 0.0):
            raise ValueError("box must lie in the nonnegative orthant")
        object.__setattr__(self, "lower", _frozen(lo))
        object.__setattr__(self, "upper", _frozen(hi))

    @classmethod
    def uniform(cls, dim: int, lo: float, hi: float) -> Box:
        return cls(np.full(dim, float(lo)), np.full(dim, float(hi)))

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    def contains(self, x, tol: float = EPS_NUM) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))

    def clip(self, x) -> np.ndarray:
        return np.clip(x, self.lower, self.upper)


@dataclass(frozen=True)
class Polytope:
    """``{x : a_matrix @ x <= b_vector} ∩ box``; rejected at construction if empty."""

    a_matrix: np.ndarray
    b_vector: np.ndarray
    box: Box
    feasible_point: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        n = self.box.dim
        A = np.array(self.a_matrix, dtype=float).reshape(-1, n)
        b = np.array(self.b_vector, dtype=float).reshape(-1)
        if A.shape[0] != b.size:
            raise DimensionError(f"A has {A.shape[0]} rows but b has {b.size} entries")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise ValueError("polytope data must be finite")
        object.__setattr__(self, "a_matrix", _frozen(A))
        object.__setattr__(self, "b_vector", _frozen(b))
        try:
            x0 = solve_lp(np.zeros(n), A, b, self.box.lower, self.box.upper)
        except InfeasibleLPError as exc:
            raise InfeasiblePolytopeError(str(exc)) from None
        object.__setattr__(self, "feasible_point", _frozen(x0))

    @classmethod
    def from_box(cls, box: Box) -> Polytope:
        return cls(np.zeros((0, box.dim)), np.zeros(0), box)

    @property
    def dim(self) -> int:
        return self.box.dim

    @property
    def n_constraints(self) -> int:
        return self.b_vector.size


def _key_to_int(key) -> int:
    if isinstance(key, (int, np.integer)):
        return int(key) & 0xFFFFFFFF
    return zlib.crc32(str(key).encode())


class Rng:
    """Seeded random stream that can be split into independent child streams.

    A child is identified by the parent's path plus a key, so
    ``Rng(7).child("oga", 3)`` always yields the same draws no matter what
    other streams were consumed before it.
    """

    def __init__(self, seed: int, path: tuple[int, ...] = ()):
        if seed < 0 or seed >= 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        self.seed = int(seed)
        self.path = tuple(path)
        ss = np.random.SeedSequence(self.seed, spawn_key=self.path)
        self.generator = np.random.Generator(np.random.PCG64(ss))

    def child(self, *keys) -> Rng:
        return Rng(self.seed, self.path + tuple(_key_to_int(k) for k in keys))

    def __repr__(self):
        return f"Rng(seed={self.seed}, path={self.path})"


def rng_uniform(rng: Rng, lo: float, hi: float) -> float:
    """One draw from ``[lo, hi)``; returns ``lo`` for a degenerate interval."""
    if lo > hi:
        raise ValueError(f"empty interval [{lo}, {hi})")
    if lo == hi:
        return float(lo)
    return float(rng.generator.uniform(lo, hi))


@dataclass(frozen=True)
class GeometryConstants:
    """Diameter ``D``, radius ``R``, gradient bound ``G`` and smoothness ``beta``."""

    diameter_d: float
    radius_r: float
    grad_bound_g: float
    smoothness_beta: float

    def __post_init__(self):
        vals = (self.diameter_d, self.radius_r, self.grad_bound_g, self.smoothness_beta)
        if not all(np.isfinite(v) and v >= 0.0 for v in vals):
            raise ValueError("geometry constants must be finite and nonnegative")
        if self.diameter_d > 2.0 * self.radius_r:
            raise ValueError("diameter cannot exceed twice the radius")
