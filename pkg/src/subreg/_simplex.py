"""Bounded-variable primal simplex for small dense LPs.

Solves ``max c.x  s.t.  A x <= b,  lo <= x <= hi`` and returns a vertex.
Pivoting follows Bland's rule (lowest eligible index enters, lowest index
leaves among ratio-test ties), so the path and the returned vertex are
fully determined by the input.
"""

import numpy as np


class LPError(RuntimeError):
    pass


class InfeasibleLPError(LPError):
    pass


def _bounded_simplex(M, rhs, cost, ub, basis, at_upper, z, max_iter):
    """Run primal simplex iterations in place on a feasible basis.

    ``z`` holds every variable value; nonbasic variables sit at 0 or at
    ``ub`` as recorded in ``at_upper``.
    """
    m, nvar = M.shape
    scale = 1.0 + np.max(np.abs(cost), initial=0.0)
    dtol = 1e-11 * scale
    ptol = 1e-11
    is_basic = np.zeros(nvar, dtype=bool)
    is_basic[basis] = True

    for _ in range(max_iter):
        B = M[:, basis]
        z[basis] = 0.0
        z[basis] = np.linalg.solve(B, rhs - M @ z)
        duals = np.linalg.solve(B.T, cost[basis])
        reduced = cost - M.T @ duals

        entering = -1
        for j in range(nvar):
            if is_basic[j]:
                continue
            if not at_upper[j] and reduced[j] > dtol and ub[j] > 0.0:
                entering = j
                break
            if at_upper[j] and reduced[j] < -dtol:
                entering = j
                break
        if entering < 0:
            return

        j = entering
        direction = -1.0 if at_upper[j] else 1.0
        alpha = np.linalg.solve(B, M[:, j])
        rate = direction * alpha

        theta = ub[j]
        leave_pos = -1
        leave_to_upper = False
        zb = z[basis]
        for pos in range(m):
            r = rate[pos]
            var = basis[pos]
            if r > ptol:
                step = max(zb[pos], 0.0) / r
                hits_upper = False
            elif r < -ptol and np.isfinite(ub[var]):
                step = max(ub[var] - zb[pos], 0.0) / (-r)
                hits_upper = True
            else:
                continue
            if step < theta or (
                step == theta and leave_pos >= 0 and var < basis[leave_pos]
            ):
                theta = step
                leave_pos = pos
                leave_to_upper = hits_upper

        if not np.isfinite(theta):
            raise LPError("LP is unbounded")

        z[j] += direction * theta
        z[basis] = zb - theta * rate
        if leave_pos < 0:
            at_upper[j] = not at_upper[j]
            z[j] = ub[j] if at_upper[j] else 0.0
            continue

        out = basis[leave_pos]
        z[out] = ub[out] if leave_to_upper else 0.0
        at_upper[out] = leave_to_upper
        is_basic[out] = False
        basis[leave_pos] = j
        is_basic[j] = True
        at_upper[j] = False

    raise LPError(f"simplex did not terminate within {max_iter} pivots")


def solve_lp(c, A, b, lo, hi, max_iter=None):
    """Maximize ``c.x`` over ``{A x <= b, lo <= x <= hi}``.

    Returns the optimal vertex. Raises ``InfeasibleLPError`` when the
    region is empty.
    """
    c = np.asarray(c, dtype=float)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    A = np.asarray(A, dtype=float).reshape(-1, lo.size)
    b = np.asarray(b, dtype=float).reshape(-1)
    n = lo.size
    m = A.shape[0]
    width = hi - lo

    if m == 0:
        return np.where(c >= 0.0, hi, lo)

    r = b - A @ lo
    neg = np.flatnonzero(r < 0.0)
    k = neg.size
    nvar = n + m + k
    M = np.zeros((m, nvar))
    M[:, :n] = A
    M[:, n : n + m] = np.eye(m)
    rhs = r.copy()
    M[neg] *= -1.0
    rhs[neg] *= -1.0
    for col, row in enumerate(neg):
        M[row, n + m + col] = 1.0

    ub = np.concatenate([width, np.full(m, np.inf), np.full(k, np.inf)])
    basis = [n + i for i in range(m)]
    for col, row in enumerate(neg):
        basis[row] = n + m + col
    at_upper = np.zeros(nvar, dtype=bool)
    z = np.zeros(nvar)
    z[basis] = rhs
    if max_iter is None:
        max_iter = 200 * (nvar + m) + 1000

    if k:
        phase1 = np.zeros(nvar)
        phase1[n + m :] = -1.0
        _bounded_simplex(M, rhs, phase1, ub, basis, at_upper, z, max_iter)
        infeas = np.sum(z[n + m :])
        if infeas > 1e-9 * (1.0 + np.max(np.abs(rhs))):
            raise InfeasibleLPError(f"polytope is empty (phase-1 residual {infeas:.3g})")
        # artificials are pinned at zero for phase 2
        ub[n + m :] = 0.0
        z[n + m :] = 0.0

    cost = np.zeros(nvar)
    cost[:n] = c
    _bounded_simplex(M, rhs, cost, ub, basis, at_upper, z, max_iter)
    return np.clip(lo + z[:n], lo, hi)
