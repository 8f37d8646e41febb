"""Dense two-phase primal simplex for small LPs.

Solves ``min c.x  s.t.  lo_i <= A_i x <= hi_i,  lb <= x <= ub`` with finite
``lb``. Pivoting follows Bland's rule (lowest-index entering column, ratio
ties broken by lowest basic index), which cannot cycle. Intended for the
relaxations of small placement instances; dense tableaus limit it to a few
thousand rows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

OPTIMAL, INFEASIBLE, UNBOUNDED, ITERATION_LIMIT = "optimal", "infeasible", "unbounded", "iteration-limit"


@dataclass
class LpResult:
    status: str
    x: np.ndarray | None
    objective: float
    iterations: int


def _pivot(T: np.ndarray, basis: np.ndarray, r: int, c: int) -> None:
    T[r] /= T[r, c]
    col = T[:, c].copy()
    col[r] = 0.0
    T -= np.outer(col, T[r])
    basis[r] = c


def _run(T, basis, cost_row, n_allowed, tol, max_iter):
    """Bland-rule iterations on tableau ``T`` minimizing the objective held in row ``cost_row``."""
    it = 0
    m = T.shape[0] - 2
    while True:
        d = T[cost_row, :n_allowed]
        candidates = np.flatnonzero(d < -tol)
        if candidates.size == 0:
            return OPTIMAL, it
        if it >= max_iter:
            return ITERATION_LIMIT, it
        c = candidates[0]
        col = T[:m, c]
        pos = col > tol
        if not pos.any():
            return UNBOUNDED, it
        ratios = np.full(m, np.inf)
        ratios[pos] = np.maximum(T[:m, -1][pos], 0.0) / col[pos]
        best = ratios.min()
        ties = np.flatnonzero(ratios <= best + tol * max(1.0, abs(best)))
        r = ties[np.argmin(basis[ties])]
        _pivot(T, basis, r, c)
        it += 1


def solve_lp(c, A, lo, hi, lb, ub, tol: float = 1e-9, max_iter: int = 100_000) -> LpResult:
    c = np.asarray(c, dtype=float)
    A = np.asarray(A.toarray() if hasattr(A, "toarray") else A, dtype=float)
    lb = np.asarray(lb, dtype=float)
    ub = np.asarray(ub, dtype=float)
    if np.any(lb > ub + tol):
        return LpResult(INFEASIBLE, None, np.inf, 0)

    # eliminate fixed columns, shift the rest to x' = x - lb >= 0
    fixed = np.isclose(lb, ub, rtol=0.0, atol=tol)
    free = np.flatnonzero(~fixed)
    x_fixed = np.where(fixed, lb, 0.0)
    shift = A @ lb
    Af = A[:, free]
    lo_s, hi_s = np.asarray(lo, float) - shift, np.asarray(hi, float) - shift

    # rows as (a, sense, b) with sense in {"<=", "=", ">="}
    rows, rhs, kinds = [], [], []
    for i in range(A.shape[0]):
        if np.isfinite(lo_s[i]) and np.isfinite(hi_s[i]) and abs(lo_s[i] - hi_s[i]) <= tol:
            rows.append(Af[i]); rhs.append(hi_s[i]); kinds.append(0)
            continue
        if np.isfinite(hi_s[i]):
            rows.append(Af[i]); rhs.append(hi_s[i]); kinds.append(1)
        if np.isfinite(lo_s[i]):
            rows.append(Af[i]); rhs.append(lo_s[i]); kinds.append(-1)
    width = ub[free] - lb[free]
    for jj in np.flatnonzero(np.isfinite(width)):
        e = np.zeros(free.size)
        e[jj] = 1.0
        rows.append(e); rhs.append(width[jj]); kinds.append(1)

    m, nf = len(rows), free.size
    R = np.array(rows, dtype=float).reshape(m, nf)
    b = np.array(rhs, dtype=float)
    kinds = np.array(kinds, dtype=int)
    # flip rows with negative rhs so that b >= 0
    neg = b < 0
    R[neg] *= -1.0
    b[neg] *= -1.0
    kinds[neg] *= -1

    n_slack = int(np.count_nonzero(kinds != 0))
    needs_art = kinds != 1  # equality or >= rows start with an artificial
    n_art = int(np.count_nonzero(needs_art))
    total = nf + n_slack + n_art
    T = np.zeros((m + 2, total + 1))
    T[:m, :nf] = R
    T[:m, -1] = b
    basis = np.empty(m, dtype=int)
    s = nf
    a = nf + n_slack
    for i in range(m):
        if kinds[i] != 0:
            T[i, s] = 1.0 if kinds[i] == 1 else -1.0
            if kinds[i] == 1:
                basis[i] = s
            s += 1
        if needs_art[i]:
            T[i, a] = 1.0
            basis[i] = a
            a += 1

    obj_row, ph1_row = m, m + 1
    T[obj_row, :nf] = c[free]
    for i in range(m):
        if needs_art[i]:
            T[ph1_row, :] -= T[i, :]
    T[ph1_row, nf + n_slack : total] = 0.0

    iters = 0
    if n_art:
        status, k = _run(T, basis, ph1_row, total, tol, max_iter)
        iters += k
        if status == ITERATION_LIMIT:
            return LpResult(ITERATION_LIMIT, None, np.nan, iters)
        if -T[ph1_row, -1] > 1e-7 * max(1.0, np.abs(b).max(initial=0.0)):
            return LpResult(INFEASIBLE, None, np.inf, iters)
        # drive remaining artificials out of the basis where possible
        for i in range(m):
            if basis[i] >= nf + n_slack:
                cand = np.flatnonzero(np.abs(T[i, : nf + n_slack]) > tol)
                if cand.size:
                    _pivot(T, basis, i, cand[0])
    # price out the basic columns in the objective row
    for i in range(m):
        if T[obj_row, basis[i]] != 0.0:
            T[obj_row] -= T[obj_row, basis[i]] * T[i]
    status, k = _run(T, basis, obj_row, nf + n_slack, tol, max_iter)
    iters += k
    if status != OPTIMAL:
        return LpResult(status, None, -np.inf if status == UNBOUNDED else np.nan, iters)

    xf = np.zeros(total)
    xf[basis] = T[:m, -1]
    x = x_fixed.copy()
    x[free] = lb[free] + np.maximum(xf[:nf], 0.0)
    return LpResult(OPTIMAL, x, float(c @ x), iters)
