"""Multilinear extension of a weighted coverage function.

Ground set: ``n`` subsets ``B_1..B_n`` of a universe ``U`` with weights
``w(u) >= 0``. The multilinear extension has the closed form

    f(x) = sum_u w(u) * (1 - prod_{i : u in B_i} (1 - x_i)).

Internally the incidence is stored per element: ``members[u]`` lists the
sets covering ``u``, padded with ``n`` which points at a phantom set whose
coordinate is always zero.
"""

from __future__ import annotations

import itertools

import numpy as np

from ..core import Box, Polytope, Rng
from .base import Objective

SURROGATE_RATIO = 1.0 - np.exp(-1.0)


def _exclusive_products(factors):
    """Row-wise leave-one-out products along axis 1, without division."""
    ones = np.ones((factors.shape[0], 1))
    before = np.cumprod(np.hstack([ones, factors[:, :-1]]), axis=1)
    after = np.cumprod(np.hstack([ones, factors[:, :0:-1]]), axis=1)[:, ::-1]
    return before * after


class CoverageObjective(Objective):
    family = "coverage"

    def __init__(self, weights, members, n_sets: int):
        weights = np.asarray(weights, dtype=float).reshape(-1)
        members = np.asarray(members, dtype=np.int64).reshape(weights.size, -1)
        if np.any(weights < 0.0):
            raise ValueError("coverage weights must be nonnegative")
        if members.size and (members.min() < 0 or members.max() > n_sets):
            raise ValueError("member index out of range")
        if not np.any(members < n_sets):
            raise ValueError("no set covers any element")
        super().__init__(Box.uniform(n_sets, 0.0, 1.0))
        self.weights = weights
        self.members = members
        self.n_sets = n_sets

    @classmethod
    def from_incidence(cls, weights, incidence):
        """Build from a dense ``(n_sets, |U|)`` boolean incidence matrix."""
        inc = np.asarray(incidence, dtype=bool)
        n, n_u = inc.shape
        width = max(1, int(inc.sum(axis=0).max(initial=0)))
        members = np.full((n_u, width), n, dtype=np.int64)
        for u in range(n_u):
            idx = np.flatnonzero(inc[:, u])
            members[u, : idx.size] = idx
        return cls(weights, members, n)

    @property
    def incidence(self) -> np.ndarray:
        inc = np.zeros((self.n_sets + 1, self.weights.size), dtype=bool)
        inc[self.members, np.arange(self.weights.size)[:, None]] = True
        return inc[: self.n_sets]

    def _padded(self, x):
        return np.append(x, 0.0)

    @property
    def grad_bound(self) -> float:
        # the gradient is antitone and nonnegative, so its norm peaks at 0
        return float(np.linalg.norm(self.gradient(np.zeros(self.n_sets))))

    @property
    def smoothness(self) -> float:
        # |d2f/dxi dxj| <= sum of w(u) over u in B_i & B_j, and the spectral
        # norm is monotone in the entrywise absolute value
        inc = self.incidence.astype(float)
        M = (inc * self.weights) @ inc.T
        np.fill_diagonal(M, 0.0)
        return float(np.linalg.eigvalsh(M)[-1]) if M.size else 0.0

    def value(self, x) -> float:
        x = self._checked(x)
        miss = np.prod(1.0 - self._padded(x)[self.members], axis=1)
        return float(self.weights @ (1.0 - miss))

    def gradient(self, x) -> np.ndarray:
        x = self._checked(x)
        others = _exclusive_products(1.0 - self._padded(x)[self.members])
        contrib = self.weights[:, None] * others
        g = np.bincount(self.members.ravel(), weights=contrib.ravel(), minlength=self.n_sets + 1)
        return g[: self.n_sets]

    def set_value(self, chosen) -> float:
        """Weighted coverage ``W(S)`` of the sets flagged in the boolean mask."""
        mask = np.append(np.asarray(chosen, dtype=bool), False)
        return float(self.weights @ mask[self.members].any(axis=1))

    def stochastic_gradient(self, x, rng: Rng) -> np.ndarray:
        """Unbiased estimate: ``W(R_i + i) - W(R_i)`` with ``j in R_i`` w.p. ``x_j``.

        Each coordinate draws its own independent ``R_i``.
        """
        x = self._checked(x)
        n = self.n_sets
        draws = rng.generator.random((n + 1, n + 1)) < self._padded(x)[None, :]
        np.fill_diagonal(draws, False)
        draws[n] = False
        draws[:, n] = False
        est = np.zeros(n + 1)
        width = self.members.shape[1]
        for s in range(width):
            owner = self.members[:, s]
            covered = np.zeros(owner.size, dtype=bool)
            for t in range(width):
                if t != s:
                    covered |= draws[owner, self.members[:, t]]
            est += np.bincount(owner, weights=self.weights * ~covered, minlength=n + 1)
        return est[:n]

    def surrogate_value(self, x) -> float:
        """Concave envelope ``sum_u w(u) min(1, sum_{i: u in B_i} x_i)``."""
        x = self._checked(x)
        load = self._padded(x)[self.members].sum(axis=1)
        return float(self.weights @ np.minimum(1.0, load))

    def surrogate_supergradient(self, x) -> np.ndarray:
        # saturated elements (load >= 1, kinks included) contribute nothing
        x = self._checked(x)
        load = self._padded(x)[self.members].sum(axis=1)
        live = self.weights * (load < 1.0)
        g = np.bincount(self.members.ravel(), weights=np.repeat(live, self.members.shape[1]),
                        minlength=self.n_sets + 1)
        return g[: self.n_sets]

    @staticmethod
    def mean(parts) -> CoverageObjective:
        """Exact pointwise mean: disjoint union of universes, weights scaled."""
        parts = list(parts)
        n = parts[0].n_sets
        width = max(p.members.shape[1] for p in parts)
        weights = np.concatenate([p.weights for p in parts]) / len(parts)
        members = np.vstack([
            np.pad(p.members, ((0, 0), (0, width - p.members.shape[1])), constant_values=n)
            for p in parts
        ])
        return CoverageObjective(weights, members, n)


def coverage_generate(n: int, universe: int, degree: int, rng: Rng) -> CoverageObjective:
    """Random instance: ``w ~ U[0,1]``, each element covered by ``degree`` distinct sets."""
    if not 1 <= degree <= n:
        raise ValueError("degree must lie in [1, n]")
    gen = rng.generator
    weights = gen.uniform(0.0, 1.0, universe)
    members = np.argsort(gen.random((universe, n)), axis=1)[:, :degree]
    return CoverageObjective(weights, np.sort(members, axis=1), n)


def coverage_polytope(n: int, m: int, rng: Rng) -> Polytope:
    """``{A x <= 1, 0 <= x <= 1}`` with ``A ~ U[0, 1]``, a random packing budget."""
    A = rng.generator.uniform(0.0, 1.0, (m, n))
    return Polytope(A, np.ones(m), Box.uniform(n, 0.0, 1.0))


# --- exponential-cost reference evaluations (small n only) -------------------


def _all_masks(n):
    return np.array(list(itertools.product([False, True], repeat=n)), dtype=bool).reshape(-1, n)


def multilinear_bruteforce(obj: CoverageObjective, x) -> float:
    """``sum_S W(S) prod_{i in S} x_i prod_{j not in S} (1 - x_j)`` over all ``2^n`` sets."""
    n = obj.n_sets
    if n > 16:
        raise ValueError("brute force is limited to n <= 16")
    x = np.asarray(x, dtype=float)
    masks = _all_masks(n)
    probs = np.prod(np.where(masks, x, 1.0 - x), axis=1)
    padded = np.hstack([masks, np.zeros((masks.shape[0], 1), dtype=bool)])
    covered = padded[:, obj.members].any(axis=2)
    return float(probs @ (covered @ obj.weights))


def estimator_expectation(obj: CoverageObjective, x) -> np.ndarray:
    """Exact mean of ``stochastic_gradient`` by enumerating every ``R_i``."""
    n = obj.n_sets
    if n > 12:
        raise ValueError("enumeration is limited to n <= 12")
    x = np.asarray(x, dtype=float)
    out = np.zeros(n)
    rest_masks = _all_masks(n - 1)
    for i in range(n):
        others = [j for j in range(n) if j != i]
        total = 0.0
        for row in rest_masks:
            mask = np.zeros(n, dtype=bool)
            mask[others] = row
            prob = np.prod(np.where(row, x[others], 1.0 - x[others]))
            with_i = mask.copy()
            with_i[i] = True
            total += prob * (obj.set_value(with_i) - obj.set_value(mask))
        out[i] = total
    return out
