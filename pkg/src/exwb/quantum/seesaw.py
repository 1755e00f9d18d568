"""Search for projective realizations of a target behaviour.

Each restart draws a seeded random model and alternates two blocks:

* the state step replaces ``psi`` by the top eigenvector of the payoff
  operator ``sum_e p_e Pi_e`` (target-weighted event projectors) when that
  lowers the distance;
* the measurement step moves every measurement along unitary conjugations
  ``U = exp(iH)`` (and the state along its sphere) by damped least squares.

Steps are accepted only when they lower the distance, so the recorded
history never increases.  Compatibility is built in: for Bell-type scenarios
(compatible iff in different parties) each party acts on its own tensor
factor, otherwise compatible measurements are driven to commute by a penalty
and a candidate counts only once it validates.
"""
from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.optimize

from ..scenario import Behaviour, Scenario, enumerate_contexts
from .realization import Realization, RealizationError, behaviour_from_realization, validate_realization

log = logging.getLogger(__name__)

DEFAULT_RESTARTS = 10
DEFAULT_BUDGET = 60
QUANTUM_TOL = 1e-6
PENALTY_STAGES = np.array([1e-2, 1e0, 1e2, 1e4, 1e6, 1e8, 1e12])


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get("EXWB_THREADS", "1")))
    except ValueError:
        return 1


def bell_parties(s: Scenario) -> list[list[str]] | None:
    """Parties of a Bell-type scenario, or ``None`` if compatibility is not
    complete multipartite (or contexts are declared)."""
    if s.contexts is not None:
        return None
    parties: list[list[str]] = []
    for m in s.ids:
        for p in parties:
            if not s.are_compatible(m, p[0]):
                p.append(m)
                break
        else:
            parties.append([m])
    for p in parties:
        for a in p:
            for b in p:
                if a != b and s.are_compatible(a, b):
                    return None
    for p, q in ((p, q) for i, p in enumerate(parties) for q in parties[i + 1:]):
        if not all(s.are_compatible(a, b) for a in p for b in q):
            return None
    return parties


def _factorizations(d: int, k: int) -> list[tuple[int, ...]]:
    if k == 1:
        return [(d,)]
    out = []
    for f in range(1, d + 1):
        if d % f == 0:
            out += [(f,) + rest for rest in _factorizations(d // f, k - 1)]
    return out


def _ranks(marginal: np.ndarray, dim: int) -> np.ndarray:
    """Outcome ranks summing to ``dim``.

    Every outcome gets rank 1 when ``dim`` allows it, so no measurement is
    frozen into a trivial one; the spare ranks (or all of them when ``dim`` is
    smaller than the outcome count) follow the marginal by largest remainder.
    """
    marginal = np.asarray(marginal, dtype=float)
    k = marginal.size
    base = np.ones(k, int) if dim >= k else np.zeros(k, int)
    spare = dim - base.sum()
    x = spare * marginal
    r = np.floor(x).astype(int)
    order = np.argsort(-(x - r), kind="stable")
    r[order[:spare - r.sum()]] += 1
    return base + r


def _hermitian(theta: np.ndarray, n: int) -> np.ndarray:
    H = np.zeros((n, n), complex)
    iu = np.triu_indices(n, 1)
    k = len(iu[0])
    H[iu] = theta[:k] + 1j * theta[k:2 * k]
    H = H + H.conj().T
    H[np.diag_indices(n)] = theta[2 * k:2 * k + n]
    return H


class _Model:
    """Parametrized projective model on a fixed layout of tensor factors."""

    def __init__(self, s: Scenario, target: Behaviour, dims: tuple[int, ...], groups: list[list[str]],
                 penalty: bool):
        self.s, self.dims, self.groups, self.penalty = s, dims, groups, penalty
        self.d = int(np.prod(dims))
        self.ctxs = enumerate_contexts(s)
        self.target = np.concatenate([target.table(c) for c in self.ctxs])
        counts = s.outcome_counts
        self.layout = []  # (measurement, factor index, diagonal masks per outcome)
        for f, group in enumerate(groups):
            for m in group:
                marg = np.array([target.probability(_single(m, o)) for o in range(counts[m])])
                rk = _ranks(marg, dims[f])
                edges = np.concatenate([[0], np.cumsum(rk)])
                masks = [np.arange(dims[f]) >= edges[o] for o in range(counts[m])]
                masks = [(mk & (np.arange(dims[f]) < edges[o + 1])).astype(float) for o, mk in enumerate(masks)]
                self.layout.append((m, f, masks))
        self.sizes = [dims[f] ** 2 for _, f, _ in self.layout]
        self.compat = [(i, j) for i in range(len(self.layout)) for j in range(i + 1, len(self.layout))
                       if self.layout[i][1] == self.layout[j][1]
                       and s.are_compatible(self.layout[i][0], self.layout[j][0])]

    def _embed(self, f: int, X: np.ndarray) -> np.ndarray:
        out = np.ones((1, 1), complex)
        for g, n in enumerate(self.dims):
            out = np.kron(out, X if g == f else np.eye(n))
        return out

    def projectors(self, bases, thetas) -> dict:
        proj = {}
        off = 0
        for (m, f, masks), U0, size in zip(self.layout, bases, self.sizes):
            n = self.dims[f]
            U = U0 @ scipy.linalg.expm(1j * _hermitian(thetas[off:off + size], n)) if thetas is not None else U0
            off += size
            for o, mk in enumerate(masks):
                proj[(m, o)] = self._embed(f, (U * mk) @ U.conj().T)
        return proj

    def probabilities(self, proj: dict, psi: np.ndarray) -> np.ndarray:
        out = []
        counts = self.s.outcome_counts
        for c in self.ctxs:
            for outs in np.ndindex(*[counts[m] for m in c.members]):
                v = psi
                for m, o in zip(c.members, outs):
                    v = proj[(m, o)] @ v
                out.append(float(np.vdot(v, v).real))
        return np.array(out)

    def commutators(self, proj: dict) -> np.ndarray:
        res = []
        for i, j in self.compat:
            mi, mj = self.layout[i][0], self.layout[j][0]
            for (m, o), P in proj.items():
                if m != mi:
                    continue
                for (m2, o2), Q in proj.items():
                    if m2 == mj:
                        C = P @ Q - Q @ P
                        res.append(C.real.ravel())
                        res.append(C.imag.ravel())
        return np.concatenate(res) if res else np.zeros(0)


def _single(m: str, o: int):
    from ..scenario import Context, Event

    return Event.of(Context((m,)), (o,))


@dataclass
class SeesawResult:
    distance: float
    realization: Realization | None
    scenario: Scenario
    history: list = field(default_factory=list)
    dims: tuple = ()
    restart: int = -1
    info: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"distance": self.distance, "dims": list(self.dims), "restart": self.restart,
                "history": list(self.history), "info": self.info,
                "realization": self.realization.to_json() if self.realization is not None else None}


def _restart(model: _Model, rng: np.random.Generator, budget: int, tol: float):
    """One seeded restart; returns the final bases, state and distance history.

    With a commutation penalty the weight grows through ``PENALTY_STAGES`` so
    that the last stage pins commutators near zero; the history records the
    distances of that last stage.
    """
    d = model.d
    bases = [np.linalg.qr(rng.normal(size=(model.dims[f],) * 2) + 1j * rng.normal(size=(model.dims[f],) * 2))[0]
             for _, f, _ in model.layout]
    psi = rng.normal(size=d) + 1j * rng.normal(size=d)
    psi /= np.linalg.norm(psi)
    ntheta = sum(model.sizes)
    counts = model.s.outcome_counts

    def residual(x, bases, weight):
        proj = model.projectors(bases, x[:ntheta])
        v = x[ntheta:ntheta + d] + 1j * x[ntheta + d:]
        v = v / np.linalg.norm(v)
        r = model.probabilities(proj, v) - model.target
        if weight:
            r = np.concatenate([r, weight * model.commutators(proj)])
        # zero padding keeps the damped solver usable when parameters outnumber residuals
        return np.concatenate([r, np.zeros(max(0, x.size - r.size))])

    def objective(bases, psi, weight):
        proj = model.projectors(bases, None)
        val = float(np.sum((model.probabilities(proj, psi) - model.target) ** 2))
        if weight:
            val += weight ** 2 * float(np.sum(model.commutators(proj) ** 2))
        return val

    history: list = []
    for weight in (np.sqrt(PENALTY_STAGES) if model.penalty else [0.0]):
        history = []
        cur = objective(bases, psi, weight)
        stalled = 0
        for it in range(budget):
            start = cur
            # state step: top eigenvector of the payoff operator
            proj = model.projectors(bases, None)
            pay = np.zeros((d, d), complex)
            k = 0
            for c in model.ctxs:
                for outs in np.ndindex(*[counts[m] for m in c.members]):
                    P = np.eye(d, dtype=complex)
                    for m, o in zip(c.members, outs):
                        P = proj[(m, o)] @ P
                    pay += model.target[k] * (P.conj().T @ P)
                    k += 1
            cand = np.linalg.eigh(pay)[1][:, -1]
            val = objective(bases, cand, weight)
            if val < cur:
                psi, cur = cand, val
            # measurement step: damped least squares in local unitary coordinates
            x0 = np.concatenate([np.zeros(ntheta), psi.real, psi.imag])
            sol = scipy.optimize.least_squares(residual, x0, args=(bases, weight), method="lm",
                                               max_nfev=20 * (x0.size + 1), xtol=1e-15, ftol=1e-15, gtol=1e-15)
            off = 0
            new_bases = []
            for (m, f, _), U0, size in zip(model.layout, bases, model.sizes):
                new_bases.append(U0 @ scipy.linalg.expm(1j * _hermitian(sol.x[off:off + size], model.dims[f])))
                off += size
            v = sol.x[ntheta:ntheta + d] + 1j * sol.x[ntheta + d:]
            v = v / np.linalg.norm(v)
            val = objective(new_bases, v, weight)
            if val < cur:
                bases, psi, cur = new_bases, v, val
            history.append(float(np.sqrt(cur)))
            if cur <= (tol * 1e-3) ** 2:
                break
            # a local minimum: both blocks stopped paying off
            stalled = stalled + 1 if start - cur <= 1e-9 * start else 0
            if stalled >= 2:
                break
    return bases, psi, history


def _build(model: _Model, bases, psi) -> Realization:
    proj = model.projectors(bases, None)
    return Realization(model.d, psi, proj)


def seesaw_fit(s: Scenario, target: Behaviour, d: int, budget: int = DEFAULT_BUDGET, seed: int = 0,
               restarts: int = DEFAULT_RESTARTS, tol: float = QUANTUM_TOL) -> SeesawResult:
    """Best projective model of ``target`` in dimension ``d``.

    The reported distance is the Euclidean norm between the stacked context
    tables of the model and of ``target``, and belongs to a realization that
    passes :func:`validate_realization`.  Ties between restarts go to the lowest
    restart index; a fixed ``seed`` makes the result reproducible.
    """
    if d < 1:
        raise ValueError("dimension must be >= 1")
    if target.scenario != s:
        raise RealizationError("target belongs to a different scenario")
    parties = bell_parties(s)
    if parties is not None:
        # most balanced split first
        facts = sorted(_factorizations(d, len(parties)), key=lambda f: (max(f), f))
        layouts = [(dims, parties, False) for dims in facts]
    else:
        layouts = [((d,), [list(s.ids)], True)]
    seeds = np.random.SeedSequence(seed).spawn(restarts)
    jobs = [(r, layouts[r % len(layouts)]) for r in range(restarts)]

    def run(job):
        r, (dims, groups, penalty) = job
        model = _Model(s, target, dims, groups, penalty)
        bases, psi, hist = _restart(model, np.random.default_rng(seeds[r]), budget, tol)
        real = _build(model, bases, psi)
        try:
            rep = validate_realization(real, s)
            ok = rep.passed
        except RealizationError:
            ok = False
        dist = float(np.linalg.norm(model.probabilities(model.projectors(bases, None), psi) - model.target))
        return r, dims, (dist if ok else np.inf), real if ok else None, hist

    with ThreadPoolExecutor(max_workers=thread_count()) as ex:
        results = list(ex.map(run, jobs))
    best = min(results, key=lambda t: (t[2], t[0]))
    r, dims, dist, real, hist = best
    if real is None:
        # every candidate failed validation; fall back to a commuting diagonal model
        real, dist = _diagonal_fallback(s, target, d)
        hist, r, dims = [dist], -1, (d,)
    log.debug("seesaw d=%d best restart %d distance %.3e", d, r, dist)
    return SeesawResult(float(dist), real, s, hist, tuple(dims), r,
                        {"restarts": restarts, "budget": budget, "seed": seed,
                         "layouts": [list(l[0]) for l in layouts]})


def _diagonal_fallback(s: Scenario, target: Behaviour, d: int):
    proj = {}
    for m, k in s.measurements:
        for o in range(k):
            proj[(m, o)] = np.eye(d, dtype=complex) * (1.0 if o == 0 else 0.0)
    psi = np.zeros(d, complex)
    psi[0] = 1.0
    real = Realization(d, psi, proj)
    b = behaviour_from_realization(real, s)
    return real, float(np.linalg.norm(b.vector() - np.concatenate([target.table(c) for c in b.contexts])))


# -- constraint (C) --------------------------------------------------------

@dataclass
class ConstraintCReport:
    verdict: str  # quantum | non-quantum | undecided
    seesaw: dict  # d -> SeesawResult
    npa: dict  # level -> NPAResult
    best_distance: float
    tol: float

    def to_json(self) -> dict:
        return {"verdict": self.verdict, "best_distance": self.best_distance, "tol": self.tol,
                "seesaw": {str(d): r.to_json() for d, r in self.seesaw.items()},
                "npa": {str(k): r.to_json() for k, r in self.npa.items()}}


def constraintC_verdict(b: Behaviour, d_max: int = 6, level=2, budget: int = DEFAULT_BUDGET, seed: int = 0,
                        restarts: int = DEFAULT_RESTARTS, tol: float = QUANTUM_TOL) -> ConstraintCReport:
    """Combine the realization search with the moment relaxation.

    ``non-quantum`` requires a re-verified infeasibility certificate,
    ``quantum`` a validated realization within ``tol`` of ``b``.  Anything
    else, including the (unexpected) case where both hold, is ``undecided``.
    """
    from .npa import npa_infeasibility

    s = b.scenario
    levels = ["1+AB"] + ([level] if level != "1+AB" else [])
    npa = {lv: npa_infeasibility(s, b, lv) for lv in levels}
    refuted = any(r.status == "infeasible" and r.verify_certificate() for r in npa.values())
    see = {}
    for d in range(1, d_max + 1):
        see[d] = seesaw_fit(s, b, d, budget=budget, seed=seed, restarts=restarts, tol=tol)
        if see[d].distance < tol:
            break
    best = min(r.distance for r in see.values())
    found = best < tol
    if refuted and not found:
        verdict = "non-quantum"
    elif found and not refuted:
        verdict = "quantum"
    else:
        verdict = "undecided"
    return ConstraintCReport(verdict, see, npa, float(best), tol)
