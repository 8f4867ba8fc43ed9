"""Dense two-phase primal simplex with Bland's anti-cycling rule.

Solves ``max c.x  s.t.  A_ub x <= b_ub,  A_eq x = b_eq,  0 <= x <= upper``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

EPS = 1e-9


class LPError(RuntimeError):
    pass


@dataclass
class LPResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray | None
    value: float | None
    iterations: int = 0


def _pivot(T: np.ndarray, basis: list, row: int, col: int) -> None:
    T[row] /= T[row, col]
    for r in range(T.shape[0]):
        if r != row and T[r, col] != 0.0:
            T[r] -= T[r, col] * T[row]
    basis[row] = col


def _run(T: np.ndarray, basis: list, ncols: int, max_iter: int) -> tuple:
    """Maximise the objective held in the last row (stored as reduced costs
    ``-c_j``); only the first ``ncols`` columns may enter."""
    it = 0
    m = T.shape[0] - 1
    while True:
        obj = T[-1, :ncols]
        enter = next((j for j in range(ncols) if obj[j] < -EPS), None)
        if enter is None:
            return "optimal", it
        col = T[:m, enter]
        best = None
        for r in range(m):
            if col[r] > EPS:
                ratio = T[r, -1] / col[r]
                key = (ratio, basis[r])
                if best is None or key[0] < best[0] - EPS or (
                        abs(key[0] - best[0]) <= EPS and key[1] < best[1]):
                    best = (ratio, basis[r], r)
        if best is None:
            return "unbounded", it
        _pivot(T, basis, best[2], enter)
        it += 1
        if it > max_iter:
            raise LPError("simplex iteration limit reached")


def simplex_solve(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, upper=None,
                  max_iter: int = 50_000) -> LPResult:
    c = np.asarray(c, dtype=float)
    n = c.size
    rows: list = []  # (coeffs, rhs, sense)
    if A_ub is not None:
        for a, b in zip(np.atleast_2d(np.asarray(A_ub, dtype=float)), np.asarray(b_ub, dtype=float)):
            rows.append((a, b, "<="))
    if upper is not None:
        for j, u in enumerate(upper):
            if u is not None and np.isfinite(u):
                a = np.zeros(n)
                a[j] = 1.0
                rows.append((a, float(u), "<="))
    if A_eq is not None:
        for a, b in zip(np.atleast_2d(np.asarray(A_eq, dtype=float)), np.asarray(b_eq, dtype=float)):
            rows.append((a, b, "=="))

    m = len(rows)
    # normalise to non-negative right-hand sides
    norm = []
    for a, b, sense in rows:
        if b < 0:
            a, b = -a, -b
            sense = {"<=": ">=", ">=": "<=", "==": "=="}[sense]
        norm.append((a, b, sense))

    n_slack = sum(1 for _, _, s in norm if s in ("<=", ">="))
    n_art = sum(1 for _, _, s in norm if s in (">=", "=="))
    total = n + n_slack + n_art
    T = np.zeros((m + 1, total + 1))
    basis = [0] * m
    si = n
    ai = n + n_slack
    art_cols = []
    for r, (a, b, sense) in enumerate(norm):
        T[r, :n] = a
        T[r, -1] = b
        if sense == "<=":
            T[r, si] = 1.0
            basis[r] = si
            si += 1
        elif sense == ">=":
            T[r, si] = -1.0
            si += 1
            T[r, ai] = 1.0
            basis[r] = ai
            art_cols.append(ai)
            ai += 1
        else:
            T[r, ai] = 1.0
            basis[r] = ai
            art_cols.append(ai)
            ai += 1

    iters = 0
    if art_cols:
        # phase one: maximise -sum(artificials)
        T[-1, :] = 0.0
        for col in art_cols:
            T[-1, col] = 1.0
        for r in range(m):
            if basis[r] in art_cols:
                T[-1] -= T[r]
        status, it = _run(T, basis, total, max_iter)
        iters += it
        if -T[-1, -1] > 1e-7 * max(1.0, np.abs(T[:m, -1]).max(initial=0.0)):
            return LPResult("infeasible", None, None, iters)
        # drive artificials out of the basis
        art = set(art_cols)
        keep = []
        for r in range(m):
            if basis[r] in art:
                cand = next((j for j in range(n + n_slack) if abs(T[r, j]) > EPS), None)
                if cand is None:
                    continue  # redundant row
                _pivot(T, basis, r, cand)
            keep.append(r)
        T = np.vstack([T[keep], T[-1:]])
        basis = [basis[r] for r in keep]
        m = len(keep)
        T = np.delete(T, art_cols, axis=1)
        total = n + n_slack

    T[-1, :] = 0.0
    T[-1, :n] = -c
    for r in range(m):
        cb = T[-1, basis[r]]
        if cb != 0.0:
            T[-1] -= cb * T[r]
    status, it = _run(T, basis, total, max_iter)
    iters += it
    if status == "unbounded":
        return LPResult("unbounded", None, None, iters)
    x = np.zeros(total)
    for r in range(m):
        x[basis[r]] = T[r, -1]
    x = x[:n]
    return LPResult("optimal", x, float(c @ x), iters)
