"""Oracles over a polytope: linear maximization, projection, membership,
rejection sampling and diameter/radius bounds."""

from __future__ import annotations

import numpy as np

from ._simplex import solve_lp
from .core import DimensionError, Polytope, Rng, as_point

DYKSTRA_TOL = 1e-10
DYKSTRA_MAX_SWEEPS = 50_000


class ProjectionError(RuntimeError):
    """Projection did not converge; carries the best iterate and its residual."""

    def __init__(self, message, best, residual):
        super().__init__(message)
        self.best = best
        self.residual = residual


class SamplingError(RuntimeError):
    pass


def _check_dim(x, p: Polytope) -> np.ndarray:
    x = as_point(x)
    if x.size != p.dim:
        raise DimensionError(f"point has dimension {x.size}, polytope {p.dim}")
    return x


def linear_maximize(c, p: Polytope) -> np.ndarray:
    """Vertex of ``p`` maximizing ``<c, v>``.

    With no inequality rows the problem splits per coordinate; zero
    coefficients pick the upper bound.
    """
    c = _check_dim(c, p)
    if p.n_constraints == 0:
        return np.where(c >= 0.0, p.box.upper, p.box.lower)
    return solve_lp(c, p.a_matrix, p.b_vector, p.box.lower, p.box.upper)


def contains(x, p: Polytope, tol: float = 1e-9) -> bool:
    x = _check_dim(x, p)
    if not p.box.contains(x, tol):
        return False
    if p.n_constraints == 0:
        return True
    return bool(np.all(p.a_matrix @ x <= p.b_vector + tol))


# --- projection ------------------------------------------------------------


def _dual_line_search(w0, v, lo, hi, db, t_max):
    """Maximize the dual along ``mu + t d`` for ``t`` in ``[0, t_max]``.

    The derivative ``v . clip(w0 - t v) - db`` is piecewise linear and
    nonincreasing, so the root is found exactly from its breakpoints.
    """
    def slope(t):
        return v @ np.clip(w0 - t * v, lo, hi) - db

    s0 = slope(0.0)
    if s0 <= 0.0:
        return 0.0
    nz = v != 0.0
    ts = np.concatenate([(w0[nz] - lo[nz]) / v[nz], (w0[nz] - hi[nz]) / v[nz]])
    ts = np.unique(ts[(ts > 0.0) & (ts < t_max)])
    if np.isfinite(t_max):
        ts = np.append(ts, t_max)
    if ts.size == 0:
        return t_max
    vals = v @ np.clip(w0[:, None] - ts[None, :] * v[:, None], lo[:, None], hi[:, None]) - db
    hit = np.flatnonzero(vals <= 0.0)
    if hit.size == 0:
        return t_max
    k = hit[0]
    t_lo, s_lo = (0.0, s0) if k == 0 else (ts[k - 1], vals[k - 1])
    t_hi, s_hi = ts[k], vals[k]
    if s_lo == s_hi:
        return t_hi
    return t_lo + (t_hi - t_lo) * s_lo / (s_lo - s_hi)


def _polish(z, w, mu, A, b, lo, hi, rounds=2):
    """Remove rounding left by ``x - A.T mu`` when ``x`` is huge.

    Corrections are applied to ``z`` itself (order-one numbers) along the
    active rows restricted to the free coordinates.
    """
    active = mu > 0.0
    free = (w > lo) & (w < hi)
    if not active.any() or not free.any():
        return z
    Af = A[active][:, free]
    gram = Af @ Af.T
    for _ in range(rounds):
        r = A[active] @ z - b[active]
        delta = np.linalg.lstsq(gram, r, rcond=None)[0]
        z = z.copy()
        z[free] -= Af.T @ delta
        z = np.clip(z, lo, hi)
    return z


def _project_dual_newton(x, A, b, lo, hi, max_iter=200):
    """Exact projection through the multipliers of the ``A x <= b`` rows.

    For fixed multipliers ``mu >= 0`` the box-constrained minimizer is
    ``clip(x - A.T mu)``; the dual in ``mu`` is concave and piecewise
    quadratic. Feasible-direction Newton steps with an exact line search
    reach its maximizer in a handful of iterations for small ``m``.
    Returns ``(z, mu)`` or ``None`` when the iteration budget runs out.
    """
    m = b.size
    mu = np.zeros(m)
    # residuals are measured at clipped points, so only rounding in x - A.T mu
    # brings the magnitude of x into the tolerance
    a_max = np.max(np.abs(A))
    tol = (1e-12 * (1.0 + np.max(np.abs(b)) + a_max * np.max(np.abs(hi)))
           + 8.0 * np.finfo(float).eps * a_max * x.size * np.max(np.abs(x)))
    for _ in range(max_iter):
        w = x - A.T @ mu
        z = np.clip(w, lo, hi)
        q = A @ z - b
        resid = np.where(mu > 0.0, np.abs(q), np.maximum(q, 0.0))
        if resid.max() <= tol:
            return _polish(z, w, mu, A, b, lo, hi), mu
        free = (w > lo) & (w < hi)
        fixed = (mu <= 0.0) & (q <= 0.0)
        while True:
            rows = ~fixed
            Af = A[rows][:, free]
            H = Af @ Af.T
            H[np.diag_indices_from(H)] += 1e-12 * (1.0 + np.trace(H))
            d = np.zeros(m)
            d[rows] = np.linalg.solve(H, q[rows])
            blocked = (d < 0.0) & (mu <= 0.0)
            if not blocked.any():
                break
            fixed |= blocked
        neg = d < 0.0
        ratios = np.full(m, np.inf)
        ratios[neg] = -mu[neg] / d[neg]
        t_max = ratios.min()
        t = _dual_line_search(w, A.T @ d, lo, hi, d @ b, t_max)
        new_mu = mu + t * d
        if t == t_max:
            new_mu[ratios <= t_max] = 0.0
        mu = np.maximum(new_mu, 0.0)
    return None


def dykstra_project(x, A, b, lo, hi, tol=DYKSTRA_TOL, max_sweeps=DYKSTRA_MAX_SWEEPS):
    """Dykstra's alternating projections over the halfspaces and the box.

    Stops once neither the iterate nor any correction term moves by more
    than ``tol`` during a sweep.
    """
    m = b.size
    norms2 = np.einsum("ij,ij->i", A, A)
    corr = np.zeros((m + 1, x.size))
    z = x.copy()
    for _ in range(max_sweeps):
        z_prev = z
        corr_prev = corr.copy()
        for i in range(m):
            v = z + corr[i]
            viol = A[i] @ v - b[i]
            y = v - (viol / norms2[i]) * A[i] if viol > 0.0 and norms2[i] > 0.0 else v
            corr[i] = v - y
            z = y
        v = z + corr[m]
        z = np.clip(v, lo, hi)
        corr[m] = v - z
        if np.linalg.norm(z - z_prev) < tol and np.max(np.abs(corr - corr_prev)) < tol:
            return z
    viol = max(0.0, float(np.max(A @ z - b))) if m else 0.0
    raise ProjectionError(
        f"Dykstra projection did not converge in {max_sweeps} sweeps", z, viol
    )


def project(x, p: Polytope, method: str = "newton") -> np.ndarray:
    """Euclidean projection of ``x`` onto ``p``.

    ``method="newton"`` (default) solves the dual exactly and falls back to
    Dykstra if it stalls; ``method="dykstra"`` uses alternating projections
    only.
    """
    x = _check_dim(x, p)
    lo, hi = p.box.lower, p.box.upper
    if p.n_constraints == 0:
        return np.clip(x, lo, hi)
    A, b = p.a_matrix, p.b_vector
    z = np.clip(x, lo, hi)
    if np.all(A @ z <= b):
        return z
    if method == "newton":
        out = _project_dual_newton(x, A, b, lo, hi)
        if out is not None:
            return out[0]
    elif method != "dykstra":
        raise ValueError(f"unknown projection method {method!r}")
    return dykstra_project(x, A, b, lo, hi)


# --- sampling and bounds -----------------------------------------------------


SAMPLE_BATCH = 512


def _simplex_proposal(p: Polytope):
    """Smallest-volume corner simplex ``{x >= lower, a_j (x - lower) <= c_j}``
    among rows with strictly positive coefficients, if it beats the box.

    Returns ``(scale, c)`` so that ``lower + c * z / scale`` with ``z``
    uniform on the standard simplex is uniform on the chosen simplex.
    """
    lo, hi = p.box.lower, p.box.upper
    best = None
    width = hi - lo
    log_box = np.sum(np.log(width)) if np.all(width > 0.0) else -np.inf
    log_fact = float(np.sum(np.log(np.arange(1, p.dim + 1))))
    for a, b in zip(p.a_matrix, p.b_vector):
        c = b - a @ lo
        if np.all(a > 0.0) and c > 0.0:
            log_vol = p.dim * np.log(c) - log_fact - np.sum(np.log(a))
            if log_vol < log_box and (best is None or log_vol < best[0]):
                best = (log_vol, a, c)
    return None if best is None else (best[1], best[2])


def _proposals(p: Polytope, gen, count: int, simplex) -> np.ndarray:
    lo, hi = p.box.lower, p.box.upper
    if simplex is None:
        return gen.uniform(lo, hi, (count, p.dim))
    a, c = simplex
    e = gen.exponential(size=(count, p.dim + 1))
    z = e[:, :-1] / e.sum(axis=1, keepdims=True)
    return lo + c * z / a


def sample_uniform_many(p: Polytope, rng: Rng, count: int,
                        max_attempts: int = 10_000) -> np.ndarray:
    """``count`` independent uniform points of ``p`` by rejection sampling.

    Candidates come from the box or, when it is smaller, from the corner
    simplex cut out by one positive inequality row. Either region contains
    ``p``, so accepted candidates are exactly uniform on ``p``.
    ``max_attempts`` is the candidate budget per requested point.
    """
    gen = rng.generator
    simplex = _simplex_proposal(p)
    out = []
    found = 0
    budget = max_attempts * count
    drawn = 0
    while found < count:
        if drawn >= budget:
            raise SamplingError(
                f"only {found} of {count} points accepted after {drawn} draws; "
                "the polytope fills too little of its proposal region"
            )
        batch = min(SAMPLE_BATCH, budget - drawn)
        cand = _proposals(p, gen, batch, simplex)
        drawn += batch
        ok = np.all(cand >= p.box.lower, axis=1) & np.all(cand <= p.box.upper, axis=1)
        if p.n_constraints:
            ok &= np.all(cand @ p.a_matrix.T <= p.b_vector, axis=1)
        acc = cand[ok][: count - found]
        out.append(acc)
        found += acc.shape[0]
    return np.vstack(out)


def sample_uniform(p: Polytope, rng: Rng, max_attempts: int = 10_000) -> np.ndarray:
    """One uniform point of ``p``; see ``sample_uniform_many``."""
    return sample_uniform_many(p, rng, 1, max_attempts)[0]


def coordinate_ranges(p: Polytope) -> tuple[np.ndarray, np.ndarray]:
    """Per-coordinate minimum and maximum over ``p``, by one LP each."""
    n = p.dim
    if p.n_constraints == 0:
        return p.box.lower.copy(), p.box.upper.copy()
    mins = np.empty(n)
    maxs = np.empty(n)
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        maxs[i] = linear_maximize(e, p)[i]
        mins[i] = linear_maximize(-e, p)[i]
    return mins, maxs


def diameter_upper_bound(p: Polytope) -> float:
    """Upper bound on ``diam(p)``: the diagonal of the tightened bounding box."""
    mins, maxs = coordinate_ranges(p)
    return float(np.linalg.norm(maxs - mins))


def radius_upper_bound(p: Polytope) -> float:
    """Upper bound on ``sup ||x||`` over ``p`` (coordinates are nonnegative)."""
    _, maxs = coordinate_ranges(p)
    return float(np.linalg.norm(maxs))
