"""The theta body ``TH(G)``: membership with vector certificates, linear
optimization, antiblocker duality and the uniform-ray sandwich.

``w`` lies in ``TH(G)`` iff some PSD matrix ``M`` of order ``|V|+1`` has
``M_00 = 1``, ``M_ii = M_0i = w_i`` and ``M_ij = 0`` on every edge.  Factoring
``M`` gives a unit handle ``psi`` and unit vectors ``u_i`` with
``|<u_i, psi>|^2 = w_i`` and ``u_i`` orthogonal to ``u_j`` on edges.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .exgraph import (ExclusivityGraph, GraphError, as_weights, complement, is_self_complementary,
                      is_vertex_transitive, or_power)
from .numerics import SDPInfeasibility, SemidefiniteProgram, solve_sdp
from .polytope import clique_number, max_uniform_in_stab, max_weight_clique, or_square_clique

log = logging.getLogger(__name__)

VECTOR_TOL = 1e-6
FEASIBLE_TOL = 1e-7
INFEASIBLE_MARGIN = 1e-6


def _unit(m: int, i: int, j: int) -> np.ndarray:
    a = np.zeros((m, m))
    a[i, j] += 0.5
    a[j, i] += 0.5
    return a


def _structure(g: ExclusivityGraph) -> list[np.ndarray]:
    """``M_00 = 1`` is constraint 0; edge zeros follow the weight constraints."""
    m = g.n + 1
    return [_unit(m, 0, 0)] + [_unit(m, i + 1, j + 1) for i, j in g.edges]


@dataclass
class ThetaCertificate:
    """Gram matrix with its fixed entries overwritten, plus derived vectors."""

    matrix: np.ndarray
    handle: np.ndarray
    vectors: np.ndarray  # one unit vector per row
    weights: np.ndarray
    edges: list

    def residuals(self) -> dict:
        """Independent re-check of every invariant, in plain numpy."""
        M, w = self.matrix, self.weights
        n = w.size
        res = {
            "handle_norm": abs(float(np.linalg.norm(self.handle)) - 1.0),
            "vector_norm": max((abs(float(np.linalg.norm(u)) - 1.0) for u in self.vectors), default=0.0),
            "edge_orthogonality": max((abs(float(np.vdot(self.vectors[i], self.vectors[j])))
                                       for i, j in self.edges), default=0.0),
            "probabilities": max((abs(abs(float(np.vdot(self.vectors[i], self.handle))) ** 2 - w[i])
                                  for i in range(n)), default=0.0),
            "matrix_fixed": max([abs(M[0, 0] - 1.0)]
                                + [abs(M[i + 1, i + 1] - w[i]) for i in range(n)]
                                + [abs(M[0, i + 1] - w[i]) for i in range(n)]
                                + [abs(M[i + 1, j + 1]) for i, j in self.edges]),
            "matrix_min_eig": max(0.0, -float(np.linalg.eigvalsh(M)[0])),
        }
        return res

    def verify(self, tol: float = VECTOR_TOL) -> bool:
        return all(v <= tol for v in self.residuals().values())

    def to_json(self) -> dict:
        return {"matrix": self.matrix.tolist(), "handle": self.handle.tolist(),
                "vectors": self.vectors.tolist(), "residuals": self.residuals()}


@dataclass
class ThetaVerdict:
    status: str  # member | non-member | inconclusive
    margin: float | None
    certificate: ThetaCertificate | SDPInfeasibility | None = None
    info: dict = field(default_factory=dict)

    @property
    def member(self) -> bool | None:
        return {"member": True, "non-member": False}.get(self.status)

    def to_json(self) -> dict:
        out = {"status": self.status, "margin": self.margin, "info": self.info}
        if isinstance(self.certificate, ThetaCertificate):
            out["certificate"] = {"type": "theta-vectors", "data": self.certificate.to_json()}
        elif isinstance(self.certificate, SDPInfeasibility):
            c = self.certificate
            out["certificate"] = {"type": "sdp-dual", "data": {"y": c.y.tolist(), "margin": c.margin(),
                                                                "slack_min_eig": c.min_eig()}}
        return out


def _certificate_from_matrix(g: ExclusivityGraph, w: np.ndarray, M: np.ndarray) -> ThetaCertificate:
    n = g.n
    M = 0.5 * (M + M.T)
    M[0, 0] = 1.0
    for i in range(n):
        M[i + 1, i + 1] = M[0, i + 1] = M[i + 1, 0] = w[i]
    for i, j in g.edges:
        M[i + 1, j + 1] = M[j + 1, i + 1] = 0.0
    vals, vecs = np.linalg.eigh(M)
    V = (vecs * np.sqrt(np.clip(vals, 0.0, None))).T  # M ~ V^T V, columns are vectors
    zero = [i for i in range(n) if w[i] <= 0.0]
    # fresh orthogonal directions for zero-weight vertices
    V = np.vstack([V, np.zeros((len(zero), n + 1))])
    handle = V[:, 0]
    handle = handle / np.linalg.norm(handle)
    vectors = np.zeros((n, V.shape[0]))
    for i in range(n):
        if w[i] > 0.0:
            vectors[i] = V[:, i + 1] / np.linalg.norm(V[:, i + 1])
        else:
            vectors[i, n + 1 + zero.index(i)] = 1.0
    return ThetaCertificate(M, handle, vectors, w.copy(), list(g.edges))


def in_theta_body(g: ExclusivityGraph, w, feasible_tol: float = FEASIBLE_TOL,
                  infeasible_margin: float = INFEASIBLE_MARGIN, vector_tol: float = VECTOR_TOL) -> ThetaVerdict:
    """Membership of ``w`` in ``TH(g)``.

    ``member`` needs the margin SDP optimum ``t* >= -feasible_tol`` and a vector
    certificate that re-checks within ``vector_tol``.  ``non-member`` needs a
    dual certificate that re-verifies with margin beyond ``infeasible_margin``.
    Everything else is ``inconclusive``; boundary points sit on the member side.
    """
    w = as_weights(w)
    if w.size != g.n:
        raise GraphError(f"{w.size} weights for {g.n} vertices")
    n = g.n
    m = n + 1
    A = _structure(g)
    b = [1.0] + [0.0] * len(g.edges)
    for i in range(n):
        A.append(_unit(m, i + 1, i + 1))
        b.append(w[i])
        A.append(_unit(m, 0, i + 1))
        b.append(w[i])
    res = solve_sdp(SemidefiniteProgram(m, A, b), feasible_tol=feasible_tol, infeasible_margin=infeasible_margin)
    info = dict(res.info)
    if res.status == "feasible":
        cert = _certificate_from_matrix(g, w, res.matrix)
        resid = cert.residuals()
        info["residuals"] = resid
        if all(v <= vector_tol for v in resid.values()):
            return ThetaVerdict("member", res.margin, cert, info)
        return ThetaVerdict("inconclusive", res.margin, cert, info)
    if res.status == "infeasible" and res.certificate is not None and res.certificate.verify(infeasible_margin):
        return ThetaVerdict("non-member", res.margin, res.certificate, info)
    return ThetaVerdict("inconclusive", res.margin, res.certificate, info)


@dataclass
class ThetaOptimum:
    value: float
    weights: np.ndarray
    gap: float | None
    status: str

    def to_json(self) -> dict:
        return {"value": self.value, "weights": self.weights.tolist(), "gap": self.gap, "status": self.status}


def max_linear_over_theta(g: ExclusivityGraph, c) -> ThetaOptimum:
    """``max c.w`` over ``TH(g)`` for ``c >= 0``."""
    c = np.asarray(as_weights(c) if not isinstance(c, np.ndarray) else c, dtype=float)
    if c.size != g.n:
        raise GraphError(f"{c.size} coefficients for {g.n} vertices")
    if np.any(c < 0):
        raise ValueError("directions must be nonnegative")
    if not np.any(c > 0):
        return ThetaOptimum(0.0, np.zeros(g.n), 0.0, "optimal")
    m = g.n + 1
    A = _structure(g)
    b = [1.0] + [0.0] * len(g.edges)
    for i in range(g.n):
        A.append(_unit(m, i + 1, i + 1) - _unit(m, 0, i + 1))
        b.append(0.0)
    C = np.zeros((m, m))
    C[1:, 1:] = np.diag(c)
    res = solve_sdp(SemidefiniteProgram(m, A, b, C))
    if res.matrix is None:
        raise RuntimeError(f"theta SDP failed: {res.info}")
    weights = np.clip(np.diag(res.matrix)[1:], 0.0, 1.0)
    rel = res.gap / max(1.0, abs(res.value)) if res.gap is not None else None
    return ThetaOptimum(float(res.value), weights, rel, res.status)


def theta_number(g: ExclusivityGraph) -> float:
    """Lovasz theta of ``g`` (the maximum of ``sum w`` over ``TH(g)``)."""
    return max_linear_over_theta(g, np.ones(g.n)).value


def theta_gauge(g: ExclusivityGraph, r) -> float:
    """Largest ``s`` with ``s * r`` in ``TH(g)`` for a direction ``r >= 0``."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0) or not np.any(r > 0):
        raise ValueError("the ray direction must be nonnegative and nonzero")
    m = g.n + 1
    p = int(np.argmax(r))
    A = _structure(g)
    b = [1.0] + [0.0] * len(g.edges)
    for i in range(g.n):
        A.append(_unit(m, i + 1, i + 1) - _unit(m, 0, i + 1))
        b.append(0.0)
        if i != p:
            A.append(r[p] * _unit(m, i + 1, i + 1) - r[i] * _unit(m, p + 1, p + 1))
            b.append(0.0)
    C = _unit(m, p + 1, p + 1) / r[p]
    res = solve_sdp(SemidefiniteProgram(m, A, b, C))
    if res.value is None:
        raise RuntimeError(f"gauge SDP failed: {res.info}")
    return float(res.value)


# -- antiblocker duality ---------------------------------------------------

@dataclass
class DualityReport:
    samples: list
    max_value: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_value <= 1 + self.tol

    def to_json(self) -> dict:
        return {"passed": self.passed, "tol": self.tol, "max_value": self.max_value,
                "samples": [{"q": q.tolist(), "value": v} for q, v in self.samples]}


def antiblocker_duality_check(g: ExclusivityGraph, samples: int = 20, seed: int = 0,
                              tol: float = 1e-4, directions=None) -> DualityReport:
    """Sample points ``q`` on the boundary of ``TH(complement g)`` and check
    ``max_{p in TH(g)} p.q <= 1``.

    The boundary point along a direction ``d`` is found in ``TH(g)`` itself,
    through the self-complementing map ``phi``: ``q`` lies in ``TH(co-g)`` iff
    ``q o phi`` lies in ``TH(g)``.
    """
    ok, phi = is_self_complementary(g)
    if not ok:
        raise GraphError("antiblocker duality check needs a self-complementary graph")
    perm = np.array([phi[i] for i in range(g.n)])
    if directions is None:
        rng = np.random.default_rng(seed)
        directions = [rng.dirichlet(np.ones(g.n)) for _ in range(samples)]
    out = []
    for d in directions:
        d = np.asarray(d, dtype=float)
        if not np.any(d > 0):
            out.append((np.zeros(g.n), 0.0))
            continue
        s = theta_gauge(g, d[perm])
        q = s * d
        out.append((q, max_linear_over_theta(g, q).value))
    worst = max((v for _, v in out), default=0.0)
    return DualityReport(out, float(worst), tol)


# -- sandwich on the uniform ray -------------------------------------------

@dataclass
class SandwichReport:
    n_vertices: int
    upper: dict  # n -> u_n
    clique_numbers: dict
    theta: float
    lower: float
    self_complementary: bool
    tol: float
    notes: list = field(default_factory=list)

    @property
    def upper_monotone(self) -> bool:
        us = [self.upper[k] for k in sorted(self.upper)]
        return all(b <= a + self.tol for a, b in zip(us, us[1:]))

    @property
    def upper_divisible(self) -> bool:
        """``u_m <= u_n`` whenever ``n`` divides ``m``.

        A clique ``K`` of weight ``s > 1`` in ``G^{*n}`` gives ``K^k`` of
        weight ``s^k`` in ``G^{*kn}``, so ``E^{kn}`` sits inside ``E^n``.  Plain
        monotonicity in ``n`` fails: ``omega(C5^{*3}) = 10`` puts ``u_3`` above
        ``u_2``.
        """
        return all(self.upper[m] <= self.upper[n] + self.tol
                   for n in self.upper for m in self.upper if m % n == 0)

    @property
    def upper_chain(self) -> bool:
        return all(self.theta <= u + self.tol for u in self.upper.values())

    @property
    def lower_chain(self) -> bool | None:
        if not self.self_complementary:
            return None
        return self.lower <= self.theta + self.tol

    @property
    def passed(self) -> bool:
        return self.upper_divisible and self.upper_chain and self.lower_chain is not False

    def to_json(self) -> dict:
        return {"n_vertices": self.n_vertices, "u": {str(k): v for k, v in self.upper.items()},
                "clique_numbers": {str(k): v for k, v in self.clique_numbers.items()},
                "t": self.theta, "l1": self.lower, "self_complementary": self.self_complementary,
                "upper_monotone": self.upper_monotone,
                "upper_divisible": self.upper_divisible, "upper_chain": self.upper_chain,
                "lower_chain": self.lower_chain, "passed": self.passed, "notes": list(self.notes)}


def _power_clique_number(g: ExclusivityGraph, n: int) -> int:
    if n == 1:
        return clique_number(g)
    if n == 2:
        res = or_square_clique(g, np.ones(g.n))
        if res is not None:
            return int(round(res[0]))
    p = or_power(g, n)
    return len(max_weight_clique(p, np.ones(p.n), lexicographic_ties=False).vertices)


def sandwich_report(g: ExclusivityGraph, n_max: int = 2, tol: float = 1e-6) -> SandwichReport:
    """Uniform-ray values ``l_1 <= t <= u_n`` for a vertex-transitive graph.

    ``u_n = omega(G^{*n})^{-1/n}`` is the largest uniform weight in ``E^n``,
    ``t`` the largest in ``TH(G)`` and ``l_1`` the largest in
    ``STAB(co-G) = abl(QSTAB(G))``.  The lower link is asserted only for
    self-complementary graphs.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    if not is_vertex_transitive(g):
        raise GraphError("sandwich report needs a vertex-transitive graph")
    sc, _ = is_self_complementary(g)
    omegas = {k: _power_clique_number(g, k) for k in range(1, n_max + 1)}
    upper = {k: float(om ** (-1.0 / k)) for k, om in omegas.items()}
    t = theta_gauge(g, np.ones(g.n))
    lower = max_uniform_in_stab(complement(g))
    notes = []
    if not sc:
        notes.append("not self-complementary: STAB(co-G) is the antiblocker of QSTAB(G) but need not sit inside TH(G)")
    return SandwichReport(g.n, upper, omegas, t, lower, sc, tol, notes)
