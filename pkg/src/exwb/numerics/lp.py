"""Dense two-phase revised simplex with Bland's anti-cycling rule.

Problems are small (hundreds of rows at most), so the basis is refactorized
from scratch with ``numpy.linalg.solve`` at every pivot.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

log = logging.getLogger(__name__)

PIVOT_TOL = 1e-10
COST_TOL = 1e-11
FEAS_TOL = 1e-9


class LPError(ValueError):
    pass


@dataclass
class LinearProgram:
    """``min (or max) c.x  s.t.  A_ub x <= b_ub,  A_eq x = b_eq,  lo <= x <= hi``.

    ``bounds`` defaults to ``(0, inf)`` for every variable; use ``None`` or
    ``+-inf`` for a missing side.
    """

    c: np.ndarray
    A_ub: np.ndarray | None = None
    b_ub: np.ndarray | None = None
    A_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    bounds: Sequence[tuple[float | None, float | None]] | None = None
    maximize: bool = False

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).reshape(-1)
        n = self.c.size
        self.A_ub, self.b_ub = _rows(self.A_ub, self.b_ub, n, "ub")
        self.A_eq, self.b_eq = _rows(self.A_eq, self.b_eq, n, "eq")
        if self.bounds is None:
            self.bounds = [(0.0, np.inf)] * n
        if len(self.bounds) != n:
            raise LPError(f"{len(self.bounds)} bounds for {n} variables")
        clean = []
        for lo, hi in self.bounds:
            lo = -np.inf if lo is None else float(lo)
            hi = np.inf if hi is None else float(hi)
            clean.append((lo, hi))
        self.bounds = clean
        for arr in (self.c, self.A_ub, self.b_ub, self.A_eq, self.b_eq):
            if not np.all(np.isfinite(arr)):
                raise LPError("LP coefficients must be finite")

    @property
    def n(self) -> int:
        return self.c.size


def _rows(A, b, n, tag):
    if A is None:
        if b is not None and np.size(b):
            raise LPError(f"b_{tag} given without A_{tag}")
        return np.zeros((0, n)), np.zeros(0)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).reshape(-1)
    if A.shape != (b.size, n):
        raise LPError(f"A_{tag} has shape {A.shape}, expected {(b.size, n)}")
    return A, b


@dataclass
class LPResult:
    status: str  # optimal | infeasible | unbounded
    value: float | None = None
    x: np.ndarray | None = None
    dual_ub: np.ndarray | None = None
    dual_eq: np.ndarray | None = None
    dual_value: float | None = None
    farkas: "FarkasCertificate | None" = None
    iterations: int = 0
    residuals: dict = field(default_factory=dict)


@dataclass
class FarkasCertificate:
    """``y`` with ``A^T y <= 0`` and ``b.y > 0`` for the standard form ``Ax = b, x >= 0``."""

    A: np.ndarray
    b: np.ndarray
    y: np.ndarray

    def margin(self) -> float:
        return float(self.b @ self.y)

    def verify(self, tol: float = 1e-9) -> bool:
        scale = 1.0 + np.abs(self.y).max(initial=0.0)
        return bool(np.all(self.A.T @ self.y <= tol * scale) and self.margin() > tol * scale)


@dataclass
class _Standard:
    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    T: np.ndarray  # x = T xs + o
    o: np.ndarray
    row_sign: np.ndarray
    n_ub: int
    n_eq: int


def _standardize(lp: LinearProgram) -> _Standard:
    n = lp.n
    cols, offset, bound_rows = [], np.zeros(n), []
    for j, (lo, hi) in enumerate(lp.bounds):
        if lo > hi:
            raise LPError(f"variable {j} has empty bounds [{lo}, {hi}]")
        e = np.zeros(n)
        e[j] = 1.0
        if np.isfinite(lo):
            offset[j] = lo
            cols.append(e)
            if np.isfinite(hi):
                bound_rows.append((len(cols) - 1, hi - lo))
        elif np.isfinite(hi):
            offset[j] = hi
            cols.append(-e)
        else:
            cols.append(e)
            cols.append(-e)
    T = np.array(cols).T if cols else np.zeros((n, 0))
    nv = T.shape[1]
    m_ub, m_eq, m_b = lp.A_ub.shape[0], lp.A_eq.shape[0], len(bound_rows)
    n_slack = m_ub + m_b
    A = np.zeros((m_ub + m_eq + m_b, nv + n_slack))
    b = np.zeros(m_ub + m_eq + m_b)
    A[:m_ub, :nv] = lp.A_ub @ T
    b[:m_ub] = lp.b_ub - lp.A_ub @ offset
    A[m_ub:m_ub + m_eq, :nv] = lp.A_eq @ T
    b[m_ub:m_ub + m_eq] = lp.b_eq - lp.A_eq @ offset
    for k, (col, width) in enumerate(bound_rows):
        A[m_ub + m_eq + k, col] = 1.0
        b[m_ub + m_eq + k] = width
    for k in range(m_ub):
        A[k, nv + k] = 1.0
    for k in range(m_b):
        A[m_ub + m_eq + k, nv + m_ub + k] = 1.0
    sign = np.where(b < 0, -1.0, 1.0)
    A *= sign[:, None]
    b *= sign
    c_min = -lp.c if lp.maximize else lp.c
    c = np.concatenate([T.T @ c_min, np.zeros(n_slack)])
    T_full = np.hstack([T, np.zeros((n, n_slack))])
    return _Standard(A, b, c, T_full, offset, sign, m_ub, m_eq)


def _simplex(A, b, c, basis, allowed, max_iter):
    """Revised simplex on ``min c.x, Ax = b, x >= 0`` from a feasible basis.

    Returns ``(status, basis, x_B, y, iterations)``.
    """
    m = A.shape[0]
    it = 0
    while True:
        B = A[:, basis]
        xB = np.linalg.solve(B, b)
        xB[np.abs(xB) < 1e-14] = 0.0
        y = np.linalg.solve(B.T, c[basis])
        if it >= max_iter:
            return "iteration_limit", basis, xB, y, it
        r = c - A.T @ y
        in_basis = np.zeros(A.shape[1], dtype=bool)
        in_basis[basis] = True
        entering = None
        for j in np.flatnonzero(allowed & ~in_basis):
            if r[j] < -COST_TOL:
                entering = int(j)
                break
        if entering is None:
            return "optimal", basis, xB, y, it
        d = np.linalg.solve(B, A[:, entering])
        rows = np.flatnonzero(d > PIVOT_TOL)
        if rows.size == 0:
            return "unbounded", basis, xB, y, it
        ratios = np.maximum(xB[rows], 0.0) / d[rows]
        best = ratios.min()
        ties = rows[ratios <= best + 1e-12 * (1 + best)]
        leave = min(ties, key=lambda i: basis[i])
        basis = list(basis)
        basis[leave] = entering
        it += 1


def solve_lp(lp: LinearProgram, max_iter: int = 50_000) -> LPResult:
    """Solve ``lp``; the result carries duals (optimal) or a Farkas ray (infeasible)."""
    st = _standardize(lp)
    A, b = st.A, st.b
    m, nv = A.shape
    if m == 0:
        if np.any(st.c < -COST_TOL):
            return LPResult("unbounded")
        x = st.T @ np.zeros(nv) + st.o
        val = float(lp.c @ x)
        return LPResult("optimal", val, x, np.zeros(0), np.zeros(0), val)

    # phase 1: one artificial per row
    A1 = np.hstack([A, np.eye(m)])
    c1 = np.concatenate([np.zeros(nv), np.ones(m)])
    basis = list(range(nv, nv + m))
    allowed = np.ones(nv + m, dtype=bool)
    status, basis, xB, y1, it1 = _simplex(A1, b, c1, basis, allowed, max_iter)
    if status == "iteration_limit":
        raise LPError("phase 1 hit the iteration limit")
    infeas = float(c1[basis] @ xB)
    if infeas > FEAS_TOL * (1 + np.abs(b).max()):
        y = y1 * st.row_sign
        A_orig = A * st.row_sign[:, None]
        b_orig = b * st.row_sign
        cert = FarkasCertificate(A_orig, b_orig, y)
        log.debug("LP infeasible after %d phase-1 pivots (residual %.3g)", it1, infeas)
        return LPResult("infeasible", farkas=cert, iterations=it1)

    # pivot artificials out of the basis where possible
    for pos in range(m):
        if basis[pos] < nv:
            continue
        B = A1[:, basis]
        row = np.linalg.solve(B.T, np.eye(m)[:, pos])
        cand = [j for j in range(nv) if j not in basis and abs(row @ A[:, j]) > 1e-9]
        if cand:
            basis[pos] = cand[0]

    c2 = np.concatenate([st.c, np.zeros(m)])
    allowed = np.concatenate([np.ones(nv, dtype=bool), np.zeros(m, dtype=bool)])
    status, basis, xB, y, it2 = _simplex(A1, b, c2, basis, allowed, max_iter)
    if status == "iteration_limit":
        raise LPError("phase 2 hit the iteration limit")
    iters = it1 + it2
    if status == "unbounded":
        return LPResult("unbounded", iterations=iters)

    xs = np.zeros(nv + m)
    xs[basis] = xB
    x = st.T @ xs[:nv] + st.o
    val = float(lp.c @ x)
    y_orig = y * st.row_sign
    sgn = -1.0 if lp.maximize else 1.0
    dual_ub = sgn * y_orig[:st.n_ub]
    dual_eq = sgn * y_orig[st.n_ub:st.n_ub + st.n_eq]
    dual_value = sgn * float(b @ y) + float(lp.c @ st.o)
    red = c2[:nv] - A.T @ y
    residuals = {
        "primal": float(np.abs(A @ xs[:nv] - b).max(initial=0.0)),
        "bound": float(max(0.0, -xs[:nv].min(initial=0.0))),
        "dual": float(max(0.0, -red.min(initial=0.0))),
        "gap": abs(val - dual_value),
    }
    return LPResult("optimal", val, x, dual_ub, dual_eq, dual_value, None, iters, residuals)
