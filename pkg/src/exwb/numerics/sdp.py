"""Small dense semidefinite programs in standard form.

``maximize <C, M>  s.t.  <A_k, M> = b_k,  M >= 0`` (PSD), solved with the
primal-dual interior-point method of :mod:`cvxopt` (Nesterov-Todd scaling).

Without an objective the program is a feasibility question.  It is answered
through the margin problem

    maximize t  s.t.  <A_k, M> = b_k,  M - t I >= 0,  t <= 1,

whose optimum ``t*`` is the largest achievable minimum eigenvalue.  ``t* >= 0``
means feasible; a strictly negative ``t*`` comes with a dual vector ``y`` such
that ``sum_k y_k A_k >= 0`` and ``b.y = t* < 0``, which rules out every PSD
``M`` (Farkas).  Between ``-infeasible_margin`` and ``-feasible_tol`` the
answer is ``inconclusive``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

log = logging.getLogger(__name__)

MAX_ORDER = 512
FEASIBLE_TOL = 1e-7
INFEASIBLE_MARGIN = 1e-7
TRACE_BOUND = 1e3  # tr(M) <= TRACE_BOUND * order * (1 + max|b|) in feasibility mode
RESIDUAL_TOL = 1e-7  # relative, on the recomputed affine constraints of a "feasible" matrix


class SDPError(ValueError):
    pass


@dataclass
class SemidefiniteProgram:
    order: int
    A: Sequence[np.ndarray]
    b: Sequence[float]
    C: np.ndarray | None = None

    def __post_init__(self):
        m = int(self.order)
        if m < 1 or m > MAX_ORDER:
            raise SDPError(f"matrix order {m} outside 1..{MAX_ORDER}")
        mats = [np.asarray(a, dtype=float) for a in self.A]
        for k, a in enumerate(mats):
            if a.shape != (m, m):
                raise SDPError(f"constraint {k} has shape {a.shape}, expected {(m, m)}")
            if not np.allclose(a, a.T, atol=1e-12):
                raise SDPError(f"constraint matrix {k} is not symmetric")
        self.A = mats
        self.b = np.asarray(self.b, dtype=float).reshape(-1)
        if self.b.size != len(mats):
            raise SDPError(f"{len(mats)} constraint matrices but {self.b.size} targets")
        if self.C is not None:
            self.C = np.asarray(self.C, dtype=float)
            if self.C.shape != (m, m) or not np.allclose(self.C, self.C.T, atol=1e-12):
                raise SDPError("objective matrix must be symmetric of the program's order")


@dataclass
class SDPResult:
    status: str  # optimal | feasible | infeasible | inconclusive | unbounded
    value: float | None = None
    matrix: np.ndarray | None = None
    dual: np.ndarray | None = None
    margin: float | None = None
    gap: float | None = None
    certificate: "SDPInfeasibility | None" = None
    info: dict = field(default_factory=dict)


@dataclass
class SDPInfeasibility:
    """``y`` with ``sum_k y_k A_k`` PSD and ``b.y < 0``."""

    A: Sequence[np.ndarray]
    b: np.ndarray
    y: np.ndarray

    def slack(self) -> np.ndarray:
        S = sum(yk * Ak for yk, Ak in zip(self.y, self.A))
        return 0.5 * (S + S.T)

    def min_eig(self) -> float:
        return float(np.linalg.eigvalsh(self.slack())[0])

    def margin(self) -> float:
        return float(self.b @ self.y)

    def verify(self, margin: float = INFEASIBLE_MARGIN, psd_tol: float = 1e-9) -> bool:
        return self.min_eig() >= -psd_tol and self.margin() < -margin


def _independent_rows(A: Sequence[np.ndarray], b: np.ndarray):
    """Drop linearly dependent constraints; report a linear contradiction if any."""
    if not A:
        return [], None
    m = A[0].shape[0]
    iu = np.triu_indices(m)
    w = np.where(iu[0] == iu[1], 1.0, np.sqrt(2.0))
    V = np.array([a[iu] * w for a in A])  # svec, so <A, M> = svec(A).svec(M)
    _, R, piv = scipy.linalg.qr(V.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R)) if R.size else np.zeros(0)
    tol = max(V.shape) * np.finfo(float).eps * (diag[0] if diag.size else 1.0) * 100
    rank = int(np.sum(diag > tol))
    keep = sorted(piv[:rank].tolist())
    if rank == len(A):
        return keep, None
    coef, *_ = np.linalg.lstsq(V[keep].T, V.T, rcond=None)  # V[k] = coef[:, k] . V[keep]
    for k in range(len(A)):
        if k in keep:
            continue
        resid = float(b[k] - coef[:, k] @ b[keep])
        if abs(resid) > 1e-9 * (1 + abs(b[k])):
            y = np.zeros(len(A))
            y[k] = 1.0
            y[keep] = -coef[:, k]
            y *= -np.sign(resid)
            return keep, y
    return keep, None


def _vec(a: np.ndarray):
    from cvxopt import matrix

    return matrix(np.asarray(a, dtype=float).reshape(-1, order="F"))


def _cvxopt_options(tol: float, maxiters: int) -> dict:
    return {"show_progress": False, "abstol": tol, "reltol": tol, "feastol": tol, "maxiters": maxiters}


def _robust(call, tol: float, maxiters: int):
    """Run ``call(options)``, loosening the tolerances when cvxopt breaks down
    or stops without converging.

    Returns ``(solution, tolerance used)`` or ``(None, error text)``; a
    non-converged solution is returned only when no rung converged.
    """
    err, fallback = "", None
    for t in (tol, 10 * tol, 100 * tol):
        try:
            sol = call(_cvxopt_options(t, maxiters))
        except (ArithmeticError, ValueError) as exc:  # singular KKT systems, zero steps
            err = f"{type(exc).__name__}: {exc}"
            log.debug("cvxopt failed at tol=%g (%s); loosening", t, err)
            continue
        if sol["status"] == "optimal":
            return sol, t
        log.debug("cvxopt stopped with status %s at tol=%g; loosening", sol["status"], t)
        fallback = fallback or (sol, t)
    return fallback if fallback is not None else (None, err)


def solve_sdp(sdp: SemidefiniteProgram, tol: float = 1e-9, maxiters: int = 200,
              feasible_tol: float = FEASIBLE_TOL, infeasible_margin: float = INFEASIBLE_MARGIN) -> SDPResult:
    """Solve ``sdp``; feasibility mode when ``sdp.C`` is ``None``."""
    from cvxopt import matrix, solvers

    m = sdp.order
    keep, contradiction = _independent_rows(sdp.A, sdp.b)
    if contradiction is not None:
        cert = SDPInfeasibility(sdp.A, sdp.b, contradiction)
        return SDPResult("infeasible", certificate=cert, margin=-np.inf, info={"reason": "linear"})
    A = [sdp.A[k] for k in keep]
    b = sdp.b[keep]
    K = len(A)
    if sdp.C is not None:
        if K == 0:
            raise SDPError("an objective needs at least one constraint to be bounded")
        G = matrix(np.hstack([-np.asarray(_vec(a)) for a in A]))
        sol, used = _robust(lambda o: solvers.sdp(matrix(b), Gs=[G], hs=[matrix(-sdp.C)], options=o),
                            tol, maxiters)
        if sol is None:
            return SDPResult("inconclusive", info={"error": used})
        M = np.array(sol["zs"][0]) if sol["zs"][0] is not None else None
        y = np.zeros(len(sdp.A))
        if sol["x"] is not None:
            y[keep] = np.array(sol["x"]).reshape(-1)
        status = {"optimal": "optimal", "dual infeasible": "infeasible",
                  "primal infeasible": "unbounded"}.get(sol["status"], "inconclusive")
        value = float(np.sum(sdp.C * M)) if M is not None else None
        gap = abs(float(b @ y[keep]) - value) if value is not None else None
        if status == "inconclusive" and M is not None and gap is not None and gap <= 1e-6 * (1 + abs(value)):
            status = "optimal"
        log.debug("sdp status=%s value=%s gap=%s", sol["status"], value, gap)
        return SDPResult(status, value, M, y, gap=gap, info={"solver_status": sol["status"],
                                                               "iterations": sol.get("iterations"), "tol": used})

    # feasibility via the margin problem; unknowns (y_1..y_K, u, v).  The dual
    # maximizes t with M = X + tI satisfying the constraints, t <= 1 and
    # tr X <= R; the v I column gives the primal an interior point even when
    # the constraints leave diagonal entries free.
    scale = 1.0 + max((abs(float(v)) for v in sdp.b), default=0.0)
    R = TRACE_BOUND * m * scale
    eye = np.eye(m).reshape(-1, 1) / R  # unit cost on v keeps cvxopt's relative stopping tests meaningful
    cols = [-np.asarray(_vec(a)) for a in A] + [np.zeros((m * m, 1)), -eye]
    G = matrix(np.hstack(cols))
    c = matrix(np.concatenate([b, [1.0, 1.0]]))
    Gl = matrix(np.hstack([np.zeros((2, K)), -np.eye(2)]))
    hl = matrix([0.0, 0.0])
    Aeq = matrix(np.concatenate([[np.trace(a) for a in A], [1.0, 0.0]]).reshape(1, -1))
    sol, used = _robust(lambda o: solvers.sdp(c, Gl=Gl, hl=hl, Gs=[G], hs=[matrix(np.zeros((m, m)))],
                                              A=Aeq, b=matrix([1.0]), options=o), tol, maxiters)
    if sol is None:
        return SDPResult("inconclusive", info={"error": used})
    info = {"solver_status": sol["status"], "iterations": sol.get("iterations"), "tol": used}
    if sol["zs"][0] is None or sol["y"] is None:
        return SDPResult("inconclusive", info=info)
    t = -float(sol["y"][0])
    X = np.array(sol["zs"][0])
    M = 0.5 * (X + X.T) + t * np.eye(m)
    y = np.zeros(len(sdp.A))
    y[keep] = np.array(sol["x"]).reshape(-1)[:K]
    cert = SDPInfeasibility(sdp.A, sdp.b, y)
    info["constraint_residual"] = max((abs(float(np.sum(a * M)) - bk) for a, bk in zip(sdp.A, sdp.b)),
                                      default=0.0)
    log.debug("sdp margin t*=%.3e status=%s", t, sol["status"])
    if t >= -feasible_tol and info["constraint_residual"] <= RESIDUAL_TOL * scale:
        return SDPResult("feasible", matrix=M, margin=t, dual=y, info=info)
    if cert.verify(infeasible_margin):
        return SDPResult("infeasible", matrix=M, margin=t, dual=y, certificate=cert, info=info)
    return SDPResult("inconclusive", matrix=M, margin=t, dual=y, certificate=cert, info=info)


def min_eigenvalue(M: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(0.5 * (M + M.T))[0])
