"""Bell and Kochen-Specker scenarios, contexts and behaviours.

A :class:`Scenario` is a finite set of measurements together with a symmetric
compatibility relation.  Contexts are cliques of the compatibility graph,
unless the scenario declares its maximal contexts explicitly: Specker's
triangle has three pairwise compatible measurements but no joint context.  A
:class:`Behaviour` stores one joint probability table per *maximal* context;
probabilities of smaller contexts are always obtained by marginalization.

Joint outcome tables are flat arrays in lexicographic order of the outcome
tuple, where the tuple follows the sorted measurement ids of the context (the
first id is the most significant digit).  For the CHSH scenario this is the
familiar ``P(00|xy), P(01|xy), P(10|xy), P(11|xy)`` row layout.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

DEFAULT_TOL = 1e-9


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class Scenario:
    """Measurements ``(id, outcome count)`` plus a compatibility relation.

    ``contexts`` optionally declares the maximal contexts.  Each must be
    pairwise compatible and every compatible pair must lie in one of them.
    When omitted, the maximal contexts are the maximal cliques.
    """

    measurements: tuple[tuple[str, int], ...]
    compatible: frozenset[frozenset[str]] = frozenset()
    contexts: frozenset[frozenset[str]] | None = None

    def __post_init__(self):
        ids = [m for m, _ in self.measurements]
        if len(set(ids)) != len(ids):
            raise ScenarioError(f"duplicate measurement ids in {ids}")
        for m, k in self.measurements:
            if int(k) < 2:
                raise ScenarioError(f"measurement {m!r} needs at least 2 outcomes, got {k}")
        object.__setattr__(
            self, "measurements", tuple(sorted((str(m), int(k)) for m, k in self.measurements))
        )
        pairs = set()
        known = set(ids)
        for pair in self.compatible:
            pair = frozenset(pair)
            if len(pair) != 2:
                raise ScenarioError(f"compatibility pair {sorted(pair)} must join two distinct measurements")
            if not pair <= known:
                raise ScenarioError(f"compatibility pair {sorted(pair)} names unknown measurements")
            pairs.add(pair)
        object.__setattr__(self, "compatible", frozenset(pairs))
        if self.contexts is not None:
            declared = {frozenset(c) for c in self.contexts}
            for c in declared:
                if not c or not c <= known:
                    raise ScenarioError(f"declared context {sorted(c)} is empty or names unknown measurements")
                if not all(frozenset(e) in pairs for e in itertools.combinations(c, 2)):
                    raise ScenarioError(f"declared context {sorted(c)} is not pairwise compatible")
                if any(c < other for other in declared):
                    raise ScenarioError(f"declared context {sorted(c)} is not maximal")
            for pair in pairs:
                if not any(pair <= c for c in declared):
                    raise ScenarioError(f"compatible pair {sorted(pair)} lies in no declared context")
            for m in known:
                if not any(m in c for c in declared):
                    raise ScenarioError(f"measurement {m!r} lies in no declared context")
            object.__setattr__(self, "contexts", frozenset(declared))

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(m for m, _ in self.measurements)

    @property
    def outcome_counts(self) -> dict[str, int]:
        return dict(self.measurements)

    def are_compatible(self, a: str, b: str) -> bool:
        return frozenset((a, b)) in self.compatible

    def neighbours(self, m: str) -> set[str]:
        return {x for x in self.ids if x != m and self.are_compatible(m, x)}

    def is_context(self, members: Iterable[str]) -> bool:
        members = list(members)
        if not members or not set(members) <= set(self.ids):
            return False
        if self.contexts is not None:
            return any(set(members) <= c for c in self.contexts)
        return all(self.are_compatible(a, b) for a, b in itertools.combinations(members, 2))

    def context(self, members: Iterable[str]) -> "Context":
        ctx = Context(tuple(members))
        if not self.is_context(ctx.members):
            raise ScenarioError(f"{ctx.key} is not a context of this scenario")
        return ctx

    def shape(self, ctx: "Context") -> tuple[int, ...]:
        counts = self.outcome_counts
        return tuple(counts[m] for m in ctx.members)

    # -- constructors -------------------------------------------------------
    @classmethod
    def from_edges(cls, measurements: Mapping[str, int] | Sequence[tuple[str, int]],
                   edges: Iterable[tuple[str, str]] = (),
                   contexts: Iterable[Iterable[str]] | None = None) -> "Scenario":
        items = measurements.items() if isinstance(measurements, Mapping) else measurements
        declared = None if contexts is None else frozenset(frozenset(c) for c in contexts)
        return cls(tuple(items), frozenset(frozenset(e) for e in edges), declared)

    @classmethod
    def bell(cls, settings: Sequence[Sequence[int]], party_names: str = "xyzuvw") -> "Scenario":
        """Bell scenario; ``settings[p][i]`` is the outcome count of setting ``i`` of party ``p``.

        Measurement ids are ``x0, x1, ...`` for the first party, ``y0, ...`` for
        the second and so on.  Measurements of different parties are compatible.
        """
        if len(settings) > len(party_names):
            raise ScenarioError("too many parties for the default naming")
        parties = [[(f"{party_names[p]}{i}", k) for i, k in enumerate(outs)]
                   for p, outs in enumerate(settings)]
        edges = [(a, b) for p, q in itertools.combinations(range(len(parties)), 2)
                 for a, _ in parties[p] for b, _ in parties[q]]
        return cls.from_edges([m for party in parties for m in party], edges)

    @classmethod
    def chsh(cls) -> "Scenario":
        return cls.bell([[2, 2], [2, 2]])

    @classmethod
    def cycle(cls, n: int, outcomes: int = 2) -> "Scenario":
        """Measurements ``1..n`` with ``i`` compatible with ``i+1`` (mod n).

        ``n=3`` is Specker's triangle, ``n=5`` the KCBS/Wright pentagon.  The
        maximal contexts are always the adjacent pairs, so for ``n=3`` they are
        declared explicitly (the triangle itself is not a context).
        """
        if n < 3:
            raise ScenarioError("a compatibility cycle needs at least 3 measurements")
        ids = [str(i) for i in range(1, n + 1)]
        edges = [(ids[i], ids[(i + 1) % n]) for i in range(n)]
        return cls.from_edges([(m, outcomes) for m in ids], edges, edges if n == 3 else None)

    # -- JSON ---------------------------------------------------------------
    def to_json(self) -> dict:
        out = {
            "measurements": [{"id": m, "outcomes": k} for m, k in self.measurements],
            "compatible": sorted(sorted(p) for p in self.compatible),
        }
        if self.contexts is not None:
            out["contexts"] = sorted(sorted(c) for c in self.contexts)
        return out

    @classmethod
    def from_json(cls, data: Mapping) -> "Scenario":
        try:
            ms = [(m["id"], m["outcomes"]) for m in data["measurements"]]
            edges = [tuple(e) for e in data.get("compatible", [])]
            ctxs = data.get("contexts")
        except (KeyError, TypeError) as exc:
            raise ScenarioError(f"malformed scenario JSON: {exc!r}") from exc
        return cls.from_edges(ms, edges, ctxs)


@dataclass(frozen=True, order=True)
class Context:
    """A nonempty set of pairwise compatible measurements, kept as sorted ids."""

    members: tuple[str, ...]

    def __post_init__(self):
        members = tuple(sorted(set(self.members)))
        if not members:
            raise ScenarioError("a context must be nonempty")
        object.__setattr__(self, "members", members)

    @property
    def key(self) -> str:
        return ",".join(self.members)

    @classmethod
    def from_key(cls, key: str) -> "Context":
        return cls(tuple(key.split(",")))

    def __contains__(self, m) -> bool:
        return m in self.members

    def __iter__(self):
        return iter(self.members)

    def __len__(self):
        return len(self.members)

    def issubset(self, other: "Context") -> bool:
        return set(self.members) <= set(other.members)


@dataclass(frozen=True)
class Event:
    """An assignment of outcomes to the measurements of one context."""

    assignment: tuple[tuple[str, int], ...]

    def __post_init__(self):
        object.__setattr__(self, "assignment", tuple(sorted((str(m), int(a)) for m, a in self.assignment)))

    @classmethod
    def of(cls, ctx: Context, outcomes: Sequence[int]) -> "Event":
        return cls(tuple(zip(ctx.members, outcomes)))

    @property
    def context(self) -> Context:
        return Context(tuple(m for m, _ in self.assignment))

    @property
    def outcomes(self) -> tuple[int, ...]:
        return tuple(a for _, a in self.assignment)

    def as_dict(self) -> dict[str, int]:
        return dict(self.assignment)

    def exclusive_with(self, other: "Event") -> bool:
        """True iff some shared measurement is assigned different outcomes."""
        mine = dict(self.assignment)
        return any(m in mine and mine[m] != a for m, a in other.assignment)

    def validate(self, scenario: Scenario) -> None:
        counts = scenario.outcome_counts
        scenario.context(self.context.members)
        for m, a in self.assignment:
            if not 0 <= a < counts[m]:
                raise ScenarioError(f"outcome {a} out of range for measurement {m!r}")

    def label(self) -> str:
        outs = "".join(str(a) for a in self.outcomes)
        return f"({outs}|{','.join(self.context.members)})"


def enumerate_contexts(s: Scenario, maximal_only: bool = True) -> list[Context]:
    """All cliques (or maximal cliques) of the compatibility graph, sorted.

    Declared contexts replace the maximal cliques; all contexts are then their
    nonempty subsets.
    """
    if s.contexts is not None:
        if maximal_only:
            return sorted(Context(tuple(c)) for c in s.contexts)
        subs = {Context(sub) for c in s.contexts for r in range(1, len(c) + 1)
                for sub in itertools.combinations(sorted(c), r)}
        return sorted(subs)
    ids = s.ids
    nbr = {m: s.neighbours(m) for m in ids}
    if maximal_only:
        found: list[Context] = []

        def bk(r: set, p: set, x: set):
            if not p and not x:
                found.append(Context(tuple(r)))
                return
            pivot = max(sorted(p | x), key=lambda u: len(nbr[u] & p))
            for v in sorted(p - nbr[pivot]):
                bk(r | {v}, p & nbr[v], x & nbr[v])
                p = p - {v}
                x = x | {v}

        bk(set(), set(ids), set())
        return sorted(found)

    out: list[Context] = []

    def grow(clique: tuple[str, ...], cands: list[str]):
        for i, v in enumerate(cands):
            c = clique + (v,)
            out.append(Context(c))
            grow(c, [u for u in cands[i + 1:] if u in nbr[v]])

    grow((), list(ids))
    return sorted(out)


def _as_table(values, size: int) -> np.ndarray:
    arr = np.array(values, dtype=float).reshape(-1)
    if arr.size != size:
        raise ScenarioError(f"table has {arr.size} entries, expected {size}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Behaviour:
    """One probability table per maximal context of ``scenario``."""

    scenario: Scenario
    tables: Mapping[Context, np.ndarray]
    annotations: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        maximal = enumerate_contexts(self.scenario, maximal_only=True)
        given = {Context(tuple(c.members)) if isinstance(c, Context) else Context.from_key(c): t
                 for c, t in self.tables.items()}
        if set(given) != set(maximal):
            missing = sorted(c.key for c in set(maximal) - set(given))
            extra = sorted(c.key for c in set(given) - set(maximal))
            raise ScenarioError(f"tables must cover exactly the maximal contexts; missing {missing}, extra {extra}")
        tables = {}
        for ctx in maximal:
            t = _as_table(given[ctx], math.prod(self.scenario.shape(ctx)))
            if np.any(t < 0) or np.any(t > 1 + 1e-12):
                raise ScenarioError(f"table for {ctx.key} has entries outside [0, 1]")
            tables[ctx] = t
        object.__setattr__(self, "tables", tables)
        object.__setattr__(self, "annotations", dict(self.annotations))

    @property
    def contexts(self) -> list[Context]:
        return list(self.tables)

    def table(self, ctx: Context | str) -> np.ndarray:
        if isinstance(ctx, str):
            ctx = Context.from_key(ctx)
        return self.tables[ctx]

    def matrix(self) -> np.ndarray:
        """Tables stacked row by row (only when all contexts share a table size)."""
        return np.vstack([self.tables[c] for c in self.contexts])

    def vector(self) -> np.ndarray:
        return np.concatenate([self.tables[c] for c in self.contexts])

    def events(self) -> list[tuple[Event, float]]:
        out = []
        for ctx, t in self.tables.items():
            for idx, outs in enumerate(itertools.product(*map(range, self.scenario.shape(ctx)))):
                out.append((Event.of(ctx, outs), float(t[idx])))
        return out

    def probability(self, event: Event) -> float:
        """Probability of an event on any context, via marginalization."""
        sub = event.context
        for ctx in self.contexts:
            if sub.issubset(ctx):
                marg = marginalize(self, ctx, sub)
                idx = np.ravel_multi_index(event.outcomes, self.scenario.shape(sub))
                return float(marg[idx])
        raise ScenarioError(f"{sub.key} is not contained in any maximal context")

    def to_json(self) -> dict:
        out = {
            "scenario": self.scenario.to_json(),
            "tables": {c.key: [float(x) for x in t] for c, t in self.tables.items()},
        }
        if self.annotations:
            out["annotations"] = dict(sorted(self.annotations.items()))
        return out

    @classmethod
    def from_json(cls, data: Mapping) -> "Behaviour":
        try:
            scen = Scenario.from_json(data["scenario"])
            tables = {Context.from_key(k): v for k, v in data["tables"].items()}
        except (KeyError, TypeError, AttributeError) as exc:
            raise ScenarioError(f"malformed behaviour JSON: {exc!r}") from exc
        return cls(scen, tables, data.get("annotations", {}))

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, indent=1)

    @classmethod
    def from_rows(cls, scenario: Scenario, rows: Sequence[Sequence[float]],
                  annotations: Mapping[str, str] | None = None) -> "Behaviour":
        """Build from rows given in the sorted maximal-context order."""
        ctxs = enumerate_contexts(scenario)
        if len(rows) != len(ctxs):
            raise ScenarioError(f"expected {len(ctxs)} rows, got {len(rows)}")
        return cls(scenario, dict(zip(ctxs, rows)), annotations or {})


@dataclass(frozen=True)
class NormalizationReport:
    passed: bool
    worst_context: Context | None
    worst_deviation: float  # signed: table sum minus one


@dataclass(frozen=True)
class MarginalReport:
    pairs_checked: int
    max_mismatch: float
    witnesses: tuple[tuple, ...]  # (measurements, outcomes, context a, context b, mismatch)
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_mismatch <= self.tol


def check_normalization(b: Behaviour, tol: float = DEFAULT_TOL) -> NormalizationReport:
    worst, dev = None, 0.0
    for ctx, t in b.tables.items():
        d = float(math.fsum(t)) - 1.0
        if worst is None or abs(d) > abs(dev):
            worst, dev = ctx, d
    return NormalizationReport(abs(dev) <= tol, worst, dev)


def marginalize(b: Behaviour, c: Context, subset: Context) -> np.ndarray:
    """Sum the table of ``c`` over the outcomes of measurements outside ``subset``."""
    if not subset.issubset(c):
        raise ScenarioError(f"{subset.key} is not contained in {c.key}")
    if c in b.tables:
        t = b.tables[c]
    else:
        t = None
        for ctx in b.contexts:
            if c.issubset(ctx):
                t = marginalize(b, ctx, c)
                break
        if t is None:
            raise ScenarioError(f"{c.key} is not a context of the behaviour's scenario")
    shape = b.scenario.shape(c)
    axes = tuple(i for i, m in enumerate(c.members) if m not in subset)
    return np.asarray(t).reshape(shape).sum(axis=axes).reshape(-1)


def check_nondisturbance(b: Behaviour, tol: float = DEFAULT_TOL) -> MarginalReport:
    """Compare marginals on the overlap of every pair of maximal contexts.

    Agreement on the full overlap implies agreement for every single shared
    measurement, so this is at least as strong as the per-measurement check.
    """
    ctxs = b.contexts
    worst = 0.0
    witnesses = []
    pairs = 0
    for c1, c2 in itertools.combinations(ctxs, 2):
        shared = tuple(m for m in c1.members if m in c2)
        if not shared:
            continue
        pairs += 1
        sub = Context(shared)
        m1 = marginalize(b, c1, sub)
        m2 = marginalize(b, c2, sub)
        diff = np.abs(m1 - m2)
        k = int(np.argmax(diff))
        if diff[k] > worst:
            worst = float(diff[k])
        if diff[k] > tol:
            outs = np.unravel_index(k, b.scenario.shape(sub))
            witnesses.append((shared, tuple(int(o) for o in outs), c1.key, c2.key, float(diff[k])))
    return MarginalReport(pairs, worst, tuple(witnesses), tol)


def tensor_behaviours(b1: Behaviour, b2: Behaviour, prefixes: tuple[str, str] = ("A", "B")) -> Behaviour:
    """Statistically independent joint behaviour on the disjoint-union scenario.

    Measurement ids are prefixed (``A.x0``, ``B.x0``); every measurement of one
    side is compatible with every measurement of the other.
    """
    pa, pb = prefixes
    if pa >= pb:
        raise ScenarioError("prefixes must be strictly increasing so tables stay kron-ordered")
    s1, s2 = b1.scenario, b2.scenario
    ms = [(f"{pa}.{m}", k) for m, k in s1.measurements] + [(f"{pb}.{m}", k) for m, k in s2.measurements]
    edges = [(f"{pa}.{a}", f"{pa}.{c}") for a, c in map(sorted, s1.compatible)]
    edges += [(f"{pb}.{a}", f"{pb}.{c}") for a, c in map(sorted, s2.compatible)]
    edges += [(f"{pa}.{a}", f"{pb}.{c}") for a in s1.ids for c in s2.ids]
    declared = None
    if s1.contexts is not None or s2.contexts is not None:
        declared = [[f"{pa}.{m}" for m in c1] + [f"{pb}.{m}" for m in c2]
                    for c1 in enumerate_contexts(s1) for c2 in enumerate_contexts(s2)]
    scen = Scenario.from_edges(ms, edges, declared)
    tables = {}
    for c1, t1 in b1.tables.items():
        for c2, t2 in b2.tables.items():
            ctx = Context(tuple(f"{pa}.{m}" for m in c1) + tuple(f"{pb}.{m}" for m in c2))
            tables[ctx] = np.kron(t1, t2)
    return Behaviour(scen, tables)


# -- catalog ---------------------------------------------------------------

_SQ2 = math.sqrt(2.0)


def _specker() -> Behaviour:
    row = [0.0, 0.5, 0.5, 0.0]
    return Behaviour.from_rows(Scenario.cycle(3), [row] * 3, {"rows": "(0, 1/2, 1/2, 0) per context"})


def _wright() -> Behaviour:
    row = [0.0, 0.5, 0.5, 0.0]
    return Behaviour.from_rows(Scenario.cycle(5), [row] * 5, {"rows": "(0, 1/2, 1/2, 0) per context"})


def _pr_box() -> Behaviour:
    rows = [[0.5, 0, 0, 0.5]] * 3 + [[0, 0.5, 0.5, 0]]
    return Behaviour.from_rows(Scenario.chsh(), rows,
                               {"x0,y0": "(1/2,0,0,1/2)", "x0,y1": "(1/2,0,0,1/2)",
                                "x1,y0": "(1/2,0,0,1/2)", "x1,y1": "(0,1/2,1/2,0)"})


def _almost_quantum() -> Behaviour:
    r = _SQ2 / 9
    rows = [
        [2993 / 5500, 8 / 1375, 137 / 500, 22 / 125],
        [107 / 700, 139 / 350, 139 / 350, 37 / 700],
        [7 / 11 + r, 2 / 11 - r, 2 / 11 - r, r],
        [2993 / 5500, 137 / 500, 8 / 1375, 22 / 125],
    ]
    notes = {
        "x0,y0": "(2993/5500, 8/1375, 137/500, 22/125)",
        "x0,y1": "(107/700, 139/350, 139/350, 37/700)",
        "x1,y0": "(7/11+sqrt2/9, 2/11-sqrt2/9, 2/11-sqrt2/9, sqrt2/9)",
        "x1,y1": "(2993/5500, 137/500, 8/1375, 22/125)",
    }
    return Behaviour.from_rows(Scenario.chsh(), rows, notes)


def _tsirelson() -> Behaviour:
    from .quantum.realization import behaviour_from_realization, tsirelson_realization

    scen, real = tsirelson_realization()
    b = behaviour_from_realization(real, scen)
    return Behaviour(b.scenario, b.tables, {"entries": "(2 +- sqrt2)/8, CHSH value 2*sqrt2"})


def _deterministic() -> Behaviour:
    return Behaviour.from_rows(Scenario.chsh(), [[1.0, 0, 0, 0]] * 4, {"rows": "P(00|xy) = 1"})


CATALOG = {
    "specker_triangle": _specker,
    "wright_pentagon": _wright,
    "pr_box": _pr_box,
    "almost_quantum_chsh": _almost_quantum,
    "tsirelson_chsh": _tsirelson,
    "deterministic_chsh": _deterministic,
}


def catalog_get(name: str) -> Behaviour:
    try:
        return CATALOG[name]()
    except KeyError:
        raise KeyError(f"unknown behaviour {name!r}; catalog: {', '.join(sorted(CATALOG))}") from None


def chsh_value(b: Behaviour, signs: Mapping[tuple[int, int], int] | None = None) -> float:
    """``sum_xy s_xy E_xy`` for a two-party, two-setting, binary-outcome behaviour.

    ``E_xy`` is the correlator ``P(a=b|xy) - P(a!=b|xy)``; default signs are
    ``+1`` except ``s_11 = -1``.
    """
    signs = signs or {(0, 0): 1, (0, 1): 1, (1, 0): 1, (1, 1): -1}
    parity = np.array([1.0, -1.0, -1.0, 1.0])
    total = 0.0
    for (x, y), s in signs.items():
        total += s * float(parity @ b.table(f"x{x},y{y}"))
    return total
