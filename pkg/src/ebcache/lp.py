"""Dense two-phase primal simplex for small linear programs.

Solves ``min c @ x`` subject to ``A_ub @ x <= b_ub``, ``A_eq @ x == b_eq``
and ``0 <= x <= upper``. Finite upper bounds are turned into ordinary rows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["LPResult", "LPError", "LPInfeasible", "simplex", "solve_lp"]


class LPError(RuntimeError):
    pass


class LPInfeasible(LPError):
    pass


@dataclass
class LPResult:
    x: np.ndarray
    fun: float
    iterations: int


def _pivot(T, basis, r, col):
    T[r] /= T[r, col]
    rows = np.nonzero(T[:, col])[0]
    rows = rows[rows != r]
    T[rows] -= np.outer(T[rows, col], T[r])
    basis[r] = col


def _entering(obj, allowed, rule, tol):
    cand = np.nonzero((obj[:-1] < -tol) & allowed)[0]
    if cand.size == 0:
        return -1
    if rule == "bland":
        return int(cand[0])
    return int(cand[np.argmin(obj[cand])])


def _leaving(T, basis, col, tol):
    column = T[:-1, col]
    rows = np.nonzero(column > tol)[0]
    if rows.size == 0:
        return -1
    ratios = T[rows, -1] / column[rows]
    best = ratios.min()
    ties = rows[ratios <= best + tol * max(1.0, abs(best))]
    # Bland: among tied rows leave the smallest basic variable index
    return int(ties[np.argmin(basis[ties])])


def _run(T, basis, allowed, rule, tol, max_iter, count):
    while True:
        col = _entering(T[-1], allowed, rule, tol)
        if col < 0:
            return count
        r = _leaving(T, basis, col, tol)
        if r < 0:
            raise LPError("problem is unbounded")
        _pivot(T, basis, r, col)
        count += 1
        if count > max_iter:
            raise LPError(f"simplex exceeded {max_iter} pivots")


def simplex(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, upper=None, *,
            rule: str = "bland", tol: float = 1e-9, max_iter: int = 200_000) -> LPResult:
    """Minimise ``c @ x`` with the tableau simplex method.

    ``rule="bland"`` picks the lowest-index improving column and cannot cycle;
    ``rule="dantzig"`` picks the most negative reduced cost (usually fewer
    pivots, no anti-cycling guarantee).

    Raises
    ------
    LPInfeasible
        If the constraints admit no solution.
    LPError
        If the problem is unbounded or the pivot limit is hit.
    """
    if rule not in ("bland", "dantzig"):
        raise ValueError(f"unknown pivot rule {rule!r}")
    c = np.asarray(c, dtype=float)
    n = c.size
    ub_rows = [] if A_ub is None else [np.asarray(A_ub, dtype=float).reshape(-1, n)]
    ub_rhs = [] if b_ub is None else [np.asarray(b_ub, dtype=float).ravel()]
    if upper is not None:
        upper = np.broadcast_to(np.asarray(upper, dtype=float), (n,))
        finite = np.nonzero(np.isfinite(upper))[0]
        bound_rows = np.zeros((finite.size, n))
        bound_rows[np.arange(finite.size), finite] = 1.0
        ub_rows.append(bound_rows)
        ub_rhs.append(upper[finite])
    A1 = np.vstack(ub_rows) if ub_rows else np.zeros((0, n))
    b1 = np.concatenate(ub_rhs) if ub_rhs else np.zeros(0)
    A2 = np.zeros((0, n)) if A_eq is None else np.asarray(A_eq, dtype=float).reshape(-1, n)
    b2 = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float).ravel()
    m1, m2 = A1.shape[0], A2.shape[0]
    m = m1 + m2

    # columns: structural | slacks (one per ub row) | artificials | rhs
    flip1 = b1 < 0
    needs_art = np.concatenate([flip1, np.ones(m2, dtype=bool)])
    art_rows = np.nonzero(needs_art)[0]
    n_art = art_rows.size
    width = n + m1 + n_art + 1
    T = np.zeros((m + 1, width))
    T[:m1, :n] = A1
    T[:m1, n:n + m1] = np.eye(m1)
    T[:m1, -1] = b1
    T[:m1][flip1] *= -1.0
    T[m1:m, :n] = A2
    T[m1:m, -1] = b2
    neg2 = np.nonzero(b2 < 0)[0] + m1
    T[neg2] *= -1.0
    basis = np.empty(m, dtype=np.int64)
    basis[:m1] = n + np.arange(m1)
    for a, r in enumerate(art_rows):
        col = n + m1 + a
        T[r, col] = 1.0
        basis[r] = col

    iterations = 0
    allowed = np.ones(width - 1, dtype=bool)
    if n_art:
        # phase 1: minimise the sum of artificials
        T[-1, :] = 0.0
        T[-1, n + m1:n + m1 + n_art] = 1.0
        T[-1] -= T[art_rows].sum(axis=0)
        iterations = _run(T, basis, allowed, rule, tol, max_iter, iterations)
        scale = max(1.0, float(np.abs(T[:m, -1]).max(initial=0.0)))
        if -T[-1, -1] > 1e-7 * scale:
            raise LPInfeasible("constraints are infeasible")
        # drive remaining (zero-level) artificials out of the basis
        keep = np.ones(m + 1, dtype=bool)
        for r in range(m):
            if basis[r] >= n + m1:
                row = T[r, :n + m1]
                nz = np.nonzero(np.abs(row) > tol)[0]
                if nz.size:
                    _pivot(T, basis, r, int(nz[0]))
                else:
                    keep[r] = False
        T = T[keep]
        basis = basis[keep[:-1]]
        T = np.delete(T, np.s_[n + m1:n + m1 + n_art], axis=1)
        allowed = np.ones(n + m1, dtype=bool)

    # phase 2
    cost = np.zeros(T.shape[1])
    cost[:n] = c
    T[-1] = cost
    T[-1] -= cost[basis] @ T[:-1]
    iterations = _run(T, basis, allowed, rule, tol, max_iter, iterations)

    x = np.zeros(T.shape[1] - 1)
    x[basis] = T[:-1, -1]
    x = x[:n]
    x[np.abs(x) < tol] = 0.0
    return LPResult(x=x, fun=float(c @ x), iterations=iterations)


def solve_lp(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, upper=None, *,
             backend: str = "simplex", rule: str = "bland") -> LPResult:
    """Dispatch to the embedded simplex or to scipy's HiGHS solver."""
    if backend == "simplex":
        return simplex(c, A_ub, b_ub, A_eq, b_eq, upper, rule=rule)
    if backend == "highs":
        from scipy.optimize import linprog

        c = np.asarray(c, dtype=float)
        bounds = [(0.0, None if upper is None or not np.isfinite(u) else float(u))
                  for u in np.broadcast_to(np.inf if upper is None else upper, c.shape)]
        res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds,
                      method="highs")
        if res.status == 2:
            raise LPInfeasible("constraints are infeasible")
        if res.status != 0:
            raise LPError(res.message)
        return LPResult(x=np.asarray(res.x), fun=float(res.fun), iterations=int(res.nit))
    raise ValueError(f"unknown LP backend {backend!r}")
