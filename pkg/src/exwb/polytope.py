"""Clique and stable-set polytopes, the exclusivity principle on OR powers,
local polytopes and antiblockers.

Every verdict carries a certificate that :func:`verify_verdict` can re-check
without trusting the search or the LP that produced it.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from . import _clique
from .exgraph import (DEFAULT_VERTEX_CAP, CapExceeded, ExclusivityGraph, as_weights, cycle_graph,
                      or_power, tensor_power_weights)
from .numerics import LinearProgram, solve_lp
from .scenario import Behaviour, Context, enumerate_contexts

EP_TOL = 1e-9
INDEPENDENT_SET_CAP = 32
STRATEGY_CAP = 10 ** 6


@dataclass(frozen=True)
class CliqueWitness:
    vertices: tuple
    weight: float

    def to_json(self):
        return {"vertices": [list(v) if isinstance(v, tuple) else v for v in self.vertices],
                "weight": self.weight}


@dataclass
class MembershipVerdict:
    member: bool
    certificate: dict
    value: float | None = None
    details: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"member": self.member, "value": self.value,
                "certificate": _jsonable(self.certificate), "details": _jsonable(self.details)}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if hasattr(obj, "to_json"):
        return obj.to_json()
    return obj


# -- cliques ---------------------------------------------------------------

def _bits(vs) -> int:
    out = 0
    for v in vs:
        out |= 1 << v
    return out


def _members(bits: int) -> list[int]:
    out = []
    while bits:
        low = bits & -bits
        out.append(low.bit_length() - 1)
        bits ^= low
    return out


def max_weight_clique(g: ExclusivityGraph, w, threshold: float | None = None,
                      lexicographic_ties: bool = True) -> CliqueWitness:
    """Maximum-weight clique of ``g`` (exact).

    Zero-weight vertices are dropped first.  With ``threshold`` the search
    returns the first clique found whose weight exceeds it, or the empty
    witness if none exists.
    """
    w = as_weights(w)
    if w.size != g.n:
        raise ValueError(f"{w.size} weights for {g.n} vertices")
    if np.any(w < 0):
        raise ValueError("clique search needs nonnegative weights")
    keep = np.flatnonzero(w > 0)
    if keep.size == 0:
        return CliqueWitness((), 0.0)
    order = keep[np.lexsort((keep, -w[keep]))]  # heaviest first
    sub = g.adj[np.ix_(order, order)]
    nb = _clique.pack_rows(sub)
    ws = np.ascontiguousarray(w[order], dtype=float)
    m = order.size
    everything = _clique.pack_set(range(m), m)
    if threshold is not None:
        _, cl, found = _clique.search(nb, ws, everything, 0.0, float(threshold), True, 0.0)
        if not found:
            return CliqueWitness((), 0.0)
        verts = tuple(sorted(int(order[i]) for i in cl))
        return CliqueWitness(verts, float(math.fsum(w[v] for v in verts)))
    best, cl, _ = _clique.search(nb, ws, everything, 0.0, 0.0, False, 1e-12)
    verts = sorted(int(order[i]) for i in cl)
    if lexicographic_ties:
        verts = _lex_smallest(order, sub, nb, ws, best - 1e-12)
    verts = tuple(verts)
    return CliqueWitness(verts, float(math.fsum(w[v] for v in verts)))


def _lex_smallest(order, sub, nb, ws, target) -> list[int]:
    """Lexicographically smallest vertex set among cliques heavier than ``target``.

    Greedy over original indices: keep ``v`` iff some heavy clique extends the
    current prefix by ``v`` and vertices after ``v``.
    """
    m = order.size
    pos = {int(v): i for i, v in enumerate(order)}
    cand = np.ones(m, dtype=bool)
    chosen: list[int] = []
    cw = 0.0
    for v in sorted(pos):
        i = pos[v]
        if not cand[i]:
            continue
        nxt = cand & sub[i] & (order > v)
        nw = cw + ws[i]
        _, _, ok = _clique.search(nb, ws, _clique.pack_set(np.flatnonzero(nxt), m), nw, target, True, 0.0)
        if ok:
            chosen.append(v)
            cw, cand = nw, nxt
            if cw > target:
                break
    return chosen


SQUARE_VERTEX_CAP = 22
SQUARE_CLIQUE_CAP = 500_000


def _all_cliques(adjmask: list[int], cap: int) -> list[int] | None:
    """Every nonempty clique as a bitmask, or ``None`` past ``cap``."""
    out: list[int] = []
    m = len(adjmask)

    def grow(mask: int, cand: int):
        while cand:
            low = cand & -cand
            v = low.bit_length() - 1
            cand ^= low
            nm = mask | low
            out.append(nm)
            if len(out) > cap:
                raise OverflowError
            grow(nm, cand & adjmask[v])

    try:
        grow(0, (1 << m) - 1)
    except OverflowError:
        return None
    return out


def or_square_clique(g: ExclusivityGraph, w, threshold: float | None = None):
    """Heaviest clique of ``g * g`` under ``w (x) w`` using the product structure.

    Returns ``(weight, vertices)`` with vertices as ``(i, j)`` pairs, or
    ``None`` when ``g`` exceeds the table caps.  With ``threshold`` the first
    clique heavier than it is returned (``(threshold, [])`` if none).
    """
    w = as_weights(w)
    m = g.n
    if m == 0 or m > SQUARE_VERTEX_CAP:
        return None
    adjmask = [int(sum(1 << int(j) for j in np.flatnonzero(row))) for row in g.adj]
    cliques = _all_cliques(adjmask, SQUARE_CLIQUE_CAP)
    if cliques is None:
        return None
    cw = np.array([math.fsum(w[_members(c)]) for c in cliques])
    rank = np.lexsort((np.arange(len(cliques)), -cw))
    cl_mask = np.array([cliques[k] for k in rank], dtype=np.int64)
    cl_w = cw[rank]
    full = (1 << m) - 1
    cl_cn = np.empty(len(cliques), dtype=np.int64)
    for t, k in enumerate(rank):
        cn = full
        for v in _members(cliques[k]):
            cn &= adjmask[v]
        cl_cn[t] = cn
    am = np.array(adjmask, dtype=np.int64)
    wf = np.ascontiguousarray(w, dtype=float)
    T = _clique.clique_table(am, wf)
    if threshold is None:
        best, choice, _ = _clique.square_search(am, wf, T, cl_mask, cl_w, cl_cn, 0.0, False, 1e-12)
    else:
        best, choice, found = _clique.square_search(am, wf, T, cl_mask, cl_w, cl_cn, float(threshold), True, 0.0)
        if not found:
            return float(threshold), []
    verts = [(i, j) for i in range(m) if choice[i] >= 0 for j in _members(int(cl_mask[choice[i]]))]
    return float(best), sorted(verts)


def clique_number(g: ExclusivityGraph) -> int:
    if g.n == 0:
        return 0
    return len(max_weight_clique(g, np.ones(g.n), lexicographic_ties=False).vertices)


def maximal_cliques(g: ExclusivityGraph) -> list[tuple[int, ...]]:
    """Bron-Kerbosch with pivoting; cliques sorted lexicographically."""
    nbrs = g.nbr_bits
    out: list[tuple[int, ...]] = []

    def bk(r: list[int], p: int, x: int):
        if not p and not x:
            out.append(tuple(sorted(r)))
            return
        px = _members(p | x)
        pivot = max(px, key=lambda u: (bin(nbrs[u] & p).count("1"), -u))
        for v in _members(p & ~nbrs[pivot]):
            bk(r + [v], p & nbrs[v], x & nbrs[v])
            p &= ~(1 << v)
            x |= 1 << v

    if g.n:
        bk([], (1 << g.n) - 1, 0)
    return sorted(out)


def verify_clique(g: ExclusivityGraph, w, witness: CliqueWitness, bound: float = 1.0,
                  tol: float = EP_TOL) -> bool:
    """Independent re-check of a violation: pairwise adjacent and heavier than ``bound``."""
    w = as_weights(w)
    vs = list(witness.vertices)
    adj = all(g.adj[i, j] for i, j in itertools.combinations(vs, 2))
    total = math.fsum(w[v] for v in vs)
    return adj and len(set(vs)) == len(vs) and total > bound + tol and abs(total - witness.weight) < 1e-12


# -- exclusivity principle on n copies ------------------------------------

def satisfies_ep(g: ExclusivityGraph, w, n: int = 1, tol: float = EP_TOL,
                 cap: int = DEFAULT_VERTEX_CAP, exact: bool = False,
                 method: str = "auto") -> MembershipVerdict:
    """EP for ``n`` independent copies: every clique of ``g^{*n}`` has weight <= 1.

    The OR power is built on the positive-weight vertices only.  With
    ``exact=True`` the maximum clique weight is computed and reported; otherwise
    the search stops at the first violation (members get the bound only).

    ``method`` is ``"auto"``, ``"square"`` (row-by-row search exploiting the
    product structure, ``n=2`` and small supports only) or ``"generic"``
    (branch and bound on the explicit OR power).
    """
    if method not in ("auto", "square", "generic"):
        raise ValueError(f"unknown method {method!r}")
    if method == "square" and n != 2:
        raise ValueError("the square search needs n=2")
    if n < 1:
        raise ValueError("the number of copies must be >= 1")
    w = as_weights(w)
    support = np.flatnonzero(w > 0).tolist()
    if len(support) ** n > cap:
        raise CapExceeded(f"OR power of the support has {len(support) ** n} vertices; "
                          f"raise the cap to at least {len(support) ** n}")
    if not support:
        return MembershipVerdict(True, {"type": "clique-bound", "data": {"max_weight": 0.0, "bound": 1 + tol}},
                                 0.0, {"copies": n, "support": 0})
    sub = g.induced(support)
    details = {"copies": n, "support": len(support), "power_vertices": len(support) ** n}
    if n == 2 and method != "generic":
        res = or_square_clique(sub, w[support], None if exact else 1 + tol)
        if res is None and method == "square":
            raise CapExceeded(f"the square search is capped at {SQUARE_VERTEX_CAP} support vertices")
        if res is not None:
            value, pairs = res
            details["method"] = "or-square"
            if exact:
                member = value <= 1 + tol
            else:
                member = not pairs
                value = None if member else math.fsum(w[support[i]] * w[support[j]] for i, j in pairs)
            if member:
                return MembershipVerdict(True, {"type": "clique-bound", "data": {"bound": 1 + tol, "max_weight": value}},
                                         value, details)
            verts = tuple((support[i], support[j]) for i, j in pairs)
            weight = math.fsum(w[i] * w[j] for i, j in verts)
            cert = {"type": "clique-violation", "data": {"vertices": verts, "weight": weight, "copies": n}}
            return MembershipVerdict(False, cert, value if exact else weight, details)
    details["method"] = "bitset-branch-and-bound"
    power = or_power(sub, n, cap=cap)
    pw = tensor_power_weights(w[support], n)
    if exact:
        wit = max_weight_clique(power, pw)
        member = wit.weight <= 1 + tol
        value = wit.weight
    else:
        wit = max_weight_clique(power, pw, threshold=1 + tol)
        member = not wit.vertices
        value = None
    if member:
        data = {"bound": 1 + tol, "max_weight": value}
        return MembershipVerdict(True, {"type": "clique-bound", "data": data}, value, details)
    verts = tuple(tuple(support[i] for i in power.labels[v]) for v in wit.vertices)
    cert = {"type": "clique-violation", "data": {"vertices": verts, "weight": wit.weight, "copies": n}}
    return MembershipVerdict(False, cert, value if value is not None else wit.weight, details)


def warm_up() -> float:
    """Compile (or load from cache) every clique kernel; returns the seconds spent.

    Timed callers run this first so one-time JIT compilation is not charged to
    the first measured computation.
    """
    import time

    t0 = time.perf_counter()
    c5 = cycle_graph(5)
    w = np.full(5, 0.5)
    for exact in (False, True):
        satisfies_ep(c5, w, 1, exact=exact)
        satisfies_ep(c5, w, 2, exact=exact, method="square")
        satisfies_ep(c5, w, 2, exact=exact, method="generic")
    max_weight_clique(c5, w)
    return time.perf_counter() - t0


def in_qstab(g: ExclusivityGraph, w, tol: float = EP_TOL) -> MembershipVerdict:
    return satisfies_ep(g, w, 1, tol=tol, exact=True)


def in_E_n(g: ExclusivityGraph, w, n: int, tol: float = EP_TOL, cap: int = DEFAULT_VERTEX_CAP,
           exact: bool = False, method: str = "auto") -> MembershipVerdict:
    return satisfies_ep(g, w, n, tol=tol, cap=cap, exact=exact, method=method)


def verify_ep_violation(g: ExclusivityGraph, w, cert: dict, tol: float = EP_TOL) -> bool:
    """Re-check a clique-violation certificate on ``g^{*n}`` from first principles."""
    w = as_weights(w)
    data = cert["data"]
    verts = [tuple(v) for v in data["vertices"]]
    n = data["copies"]
    if any(len(v) != n for v in verts) or len(set(verts)) != len(verts):
        return False
    for u, v in itertools.combinations(verts, 2):
        if not any(g.adj[a, b] for a, b in zip(u, v)):
            return False
    total = math.fsum(math.prod(w[i] for i in v) for v in verts)
    return total > 1 + tol


# -- stable sets -----------------------------------------------------------

def enumerate_independent_sets(g: ExclusivityGraph, cap: int = INDEPENDENT_SET_CAP) -> list[tuple[int, ...]]:
    """All independent sets (empty set first), lexicographic DFS order."""
    if g.n > cap:
        raise CapExceeded(f"independent-set enumeration is capped at {cap} vertices (graph has {g.n})")
    nbrs = g.nbr_bits
    out: list[tuple[int, ...]] = []

    def rec(chosen: list[int], allowed: int, start: int):
        out.append(tuple(chosen))
        for v in range(start, g.n):
            if (allowed >> v) & 1:
                chosen.append(v)
                rec(chosen, allowed & ~nbrs[v] & ~((1 << (v + 1)) - 1), v + 1)
                chosen.pop()

    rec([], (1 << g.n) - 1, 0)
    return out


def _incidence(sets: Sequence[tuple[int, ...]], n: int) -> np.ndarray:
    X = np.zeros((len(sets), n))
    for k, s in enumerate(sets):
        X[k, list(s)] = 1.0
    return X


def in_stab(g: ExclusivityGraph, w, tol: float = EP_TOL, cap: int = INDEPENDENT_SET_CAP) -> MembershipVerdict:
    """Convex-hull membership in the stable set polytope, decided by LP."""
    w = as_weights(w)
    sets = [s for s in enumerate_independent_sets(g, cap) if s]
    X = _incidence(sets, g.n)
    lp = LinearProgram(np.zeros(len(sets)), A_ub=np.ones((1, len(sets))), b_ub=[1.0], A_eq=X.T, b_eq=w)
    res = solve_lp(lp)
    if res.status == "optimal":
        lam = np.clip(res.x, 0.0, None)
        mix = {s: float(l) for s, l in zip(sets, lam) if l > 1e-15}
        mix[()] = max(0.0, 1.0 - float(lam.sum()))
        return MembershipVerdict(True, {"type": "mixture", "data": {"coefficients": mix}}, None,
                                 {"independent_sets": len(sets) + 1})
    # separating inequality a.w > 1 >= a.chi_S, from the covering LP's duals
    cover = solve_lp(LinearProgram(np.ones(len(sets)), A_ub=-X.T, b_ub=-w))
    a = np.clip(-cover.dual_ub, 0.0, None)
    cert = {"type": "separating-inequality",
            "data": {"coefficients": a, "bound": 1.0, "value": float(a @ w)}}
    return MembershipVerdict(False, cert, float(cover.value), {"independent_sets": len(sets) + 1})


def verify_stab_certificate(g: ExclusivityGraph, w, verdict: MembershipVerdict, tol: float = 1e-8) -> bool:
    w = as_weights(w)
    cert = verdict.certificate
    if cert["type"] == "mixture":
        mix = cert["data"]["coefficients"]
        if any(c < -1e-15 for c in mix.values()) or abs(math.fsum(mix.values()) - 1) > tol:
            return False
        for s in mix:
            if any(g.adj[i, j] for i, j in itertools.combinations(s, 2)):
                return False
        point = np.zeros(g.n)
        for s, c in mix.items():
            point[list(s)] += c
        return bool(np.abs(point - w).max(initial=0.0) <= tol)
    if cert["type"] == "separating-inequality":
        a = np.asarray(cert["data"]["coefficients"], dtype=float)
        if np.any(a < 0):
            return False
        worst = max(a[list(s)].sum() for s in enumerate_independent_sets(g))
        return worst <= 1 + tol and float(a @ w) > 1 + tol
    return False


def antiblocker_max(set_spec: str, g: ExclusivityGraph, q) -> float:
    """``max p.q`` over ``QSTAB(g)`` or ``STAB(g)``; ``q`` is in the antiblocker iff this is <= 1."""
    q = as_weights(q) if not isinstance(q, np.ndarray) else q.astype(float)
    if np.any(q < 0):
        raise ValueError("antiblocker queries need q >= 0")
    if not np.any(q > 0):
        return 0.0
    spec = set_spec.lower()
    if spec == "qstab":
        cliques = maximal_cliques(g)
        A = _incidence(cliques, g.n)
        res = solve_lp(LinearProgram(q, A_ub=A, b_ub=np.ones(len(cliques)), maximize=True))
    elif spec == "stab":
        sets = [s for s in enumerate_independent_sets(g) if s]
        vals = _incidence(sets, g.n) @ q
        res = solve_lp(LinearProgram(vals, A_ub=np.ones((1, len(sets))), b_ub=[1.0], maximize=True))
    else:
        raise ValueError(f"unknown set {set_spec!r}; expected 'qstab' or 'stab'")
    if res.status != "optimal":
        raise RuntimeError(f"antiblocker LP ended with status {res.status}")
    return float(res.value)


def max_uniform_in_stab(g: ExclusivityGraph) -> float:
    """Largest ``c`` with ``c * 1`` in ``STAB(g)`` (LP over independent sets)."""
    sets = [s for s in enumerate_independent_sets(g) if s]
    X = _incidence(sets, g.n)
    # variables (lambda_S..., c): sum lambda chi_S - c 1 = 0, sum lambda <= 1
    A_eq = np.hstack([X.T, -np.ones((g.n, 1))])
    A_ub = np.concatenate([np.ones(len(sets)), [0.0]]).reshape(1, -1)
    c = np.concatenate([np.zeros(len(sets)), [1.0]])
    res = solve_lp(LinearProgram(c, A_ub=A_ub, b_ub=[1.0], A_eq=A_eq, b_eq=np.zeros(g.n), maximize=True))
    return float(res.value)


# -- local polytope --------------------------------------------------------

def deterministic_strategies(b_or_scenario, cap: int = STRATEGY_CAP):
    scen = b_or_scenario.scenario if isinstance(b_or_scenario, Behaviour) else b_or_scenario
    counts = [k for _, k in scen.measurements]
    total = math.prod(counts)
    if total > cap:
        raise CapExceeded(f"{total} deterministic strategies exceed the cap {cap}")
    return [dict(zip(scen.ids, outs)) for outs in itertools.product(*map(range, counts))]


def _strategy_vector(scen, ctxs: Sequence[Context], strat: dict) -> np.ndarray:
    parts = []
    for ctx in ctxs:
        shape = scen.shape(ctx)
        t = np.zeros(math.prod(shape))
        t[np.ravel_multi_index(tuple(strat[m] for m in ctx.members), shape)] = 1.0
        parts.append(t)
    return np.concatenate(parts)


def local_vertices(scen, cap: int = STRATEGY_CAP):
    ctxs = enumerate_contexts(scen)
    strats = deterministic_strategies(scen, cap)
    D = np.array([_strategy_vector(scen, ctxs, s) for s in strats])
    return ctxs, strats, D


def local_bound(scen, coefficients: np.ndarray, cap: int = STRATEGY_CAP) -> float:
    """Largest value of ``coefficients . p`` over deterministic behaviours."""
    _, _, D = local_vertices(scen, cap)
    return float((D @ np.asarray(coefficients, dtype=float)).max())


def chsh_coefficients(signs=None) -> np.ndarray:
    """Stacked-probability coefficients of ``sum_xy s_xy E_xy`` in CHSH order."""
    signs = signs or {(0, 0): 1, (0, 1): 1, (1, 0): 1, (1, 1): -1}
    parity = np.array([1.0, -1.0, -1.0, 1.0])
    return np.concatenate([signs[(x, y)] * parity for x in (0, 1) for y in (0, 1)])


def in_local_polytope(b: Behaviour, tol: float = 1e-9, cap: int = STRATEGY_CAP) -> MembershipVerdict:
    """Mixture of deterministic assignments, or a separating inequality."""
    scen = b.scenario
    ctxs, strats, D = local_vertices(scen, cap)
    p = np.concatenate([b.tables[c] for c in ctxs])
    # dedupe identical vertices (keeps the first strategy)
    _, first = np.unique(D, axis=0, return_index=True)
    first = np.sort(first)
    Du, su = D[first], [strats[i] for i in first]
    N = len(su)
    lp = LinearProgram(np.zeros(N), A_eq=np.vstack([Du.T, np.ones((1, N))]), b_eq=np.concatenate([p, [1.0]]))
    res = solve_lp(lp)
    if res.status == "optimal":
        mix = [(s, float(m)) for s, m in zip(su, res.x) if m > 1e-15]
        cert = {"type": "mixture",
                "data": {"strategies": [{"assignment": s, "weight": m} for s, m in mix]}}
        return MembershipVerdict(True, cert, None, {"strategies": N})
    # max c.p - beta  s.t.  c.d - beta <= 0 for every vertex, -1 <= c <= 1
    nvar = p.size + 1
    cvec = np.concatenate([p, [-1.0]])
    A_ub = np.hstack([Du, -np.ones((N, 1))])
    bounds = [(-1.0, 1.0)] * p.size + [(None, None)]
    sep = solve_lp(LinearProgram(cvec, A_ub=A_ub, b_ub=np.zeros(N), bounds=bounds, maximize=True))
    coeff = sep.x[:p.size]
    beta = float(sep.x[-1])
    table_coeffs = {}
    off = 0
    for ctx in ctxs:
        k = b.tables[ctx].size
        table_coeffs[ctx.key] = coeff[off:off + k]
        off += k
    cert = {"type": "separating-inequality",
            "data": {"coefficients": table_coeffs, "bound": beta, "value": float(coeff @ p)}}
    return MembershipVerdict(False, cert, float(coeff @ p) - beta, {"strategies": N, "variables": nvar})


def verify_local_certificate(b: Behaviour, verdict: MembershipVerdict, tol: float = 1e-8) -> bool:
    ctxs, strats, D = local_vertices(b.scenario)
    p = np.concatenate([b.tables[c] for c in ctxs])
    cert = verdict.certificate
    if cert["type"] == "mixture":
        items = cert["data"]["strategies"]
        if any(it["weight"] < -1e-15 for it in items):
            return False
        point = sum(it["weight"] * _strategy_vector(b.scenario, ctxs, it["assignment"]) for it in items)
        return abs(sum(it["weight"] for it in items) - 1) <= tol and np.abs(point - p).max() <= tol
    coeff = np.concatenate([np.asarray(cert["data"]["coefficients"][c.key]) for c in ctxs])
    return float((D @ coeff).max()) <= cert["data"]["bound"] + tol and float(coeff @ p) > cert["data"]["bound"] + tol


def verify_verdict(kind: str, g: ExclusivityGraph, w, verdict: MembershipVerdict, tol: float = EP_TOL) -> bool:
    """Dispatch for re-checking ``qstab``/``en``/``stab`` verdict certificates.

    Member verdicts of the clique kind are re-checked by brute force over
    maximal cliques of ``g`` (single copy only).
    """
    cert = verdict.certificate
    if kind == "stab":
        return verify_stab_certificate(g, w, verdict)
    if cert["type"] == "clique-violation":
        return verify_ep_violation(g, w, cert, tol)
    if cert["type"] == "clique-bound":
        if verdict.details.get("copies", 1) != 1:
            return True
        wv = as_weights(w)
        return all(math.fsum(wv[list(c)]) <= 1 + tol for c in maximal_cliques(g))
    return False
