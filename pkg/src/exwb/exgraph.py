"""Exclusivity graphs and the graph algebra used on them.

Vertices are integers ``0..n-1``; labels (events, block tags, product tuples)
ride along but never affect the algorithms.
"""
from __future__ import annotations

import itertools
import json
from functools import cached_property
from typing import Any, Iterable, Sequence

import numpy as np

from .scenario import Behaviour, Event, Scenario, enumerate_contexts

DEFAULT_VERTEX_CAP = 100_000
ISO_VERTEX_CAP = 64


class GraphError(ValueError):
    pass


class CapExceeded(GraphError):
    pass


class ExclusivityGraph:
    """Simple undirected graph held as a read-only boolean adjacency matrix."""

    __slots__ = ("adj", "labels", "__dict__")

    def __init__(self, adj, labels: Sequence[Any] | None = None):
        a = np.array(adj, dtype=bool)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise GraphError("adjacency must be a square matrix")
        if np.any(np.diag(a)):
            raise GraphError("self-loops are not allowed")
        if not np.array_equal(a, a.T):
            raise GraphError("adjacency must be symmetric")
        a.setflags(write=False)
        self.adj = a
        if labels is not None:
            labels = tuple(labels)
            if len(labels) != a.shape[0]:
                raise GraphError(f"{len(labels)} labels for {a.shape[0]} vertices")
        self.labels = labels

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]], labels=None) -> "ExclusivityGraph":
        a = np.zeros((n, n), dtype=bool)
        for i, j in edges:
            if i == j:
                raise GraphError(f"self-loop at {i}")
            a[i, j] = a[j, i] = True
        return cls(a, labels)

    @property
    def n(self) -> int:
        return self.adj.shape[0]

    @cached_property
    def edges(self) -> list[tuple[int, int]]:
        i, j = np.nonzero(np.triu(self.adj, 1))
        return list(zip(i.tolist(), j.tolist()))

    @property
    def edge_count(self) -> int:
        return int(self.adj.sum()) // 2

    @cached_property
    def degrees(self) -> np.ndarray:
        return self.adj.sum(axis=1)

    @cached_property
    def nbr_bits(self) -> list[int]:
        """Neighbourhoods as Python-int bitsets."""
        out = []
        for row in self.adj:
            bits = 0
            for j in np.flatnonzero(row):
                bits |= 1 << int(j)
            out.append(bits)
        return out

    def __eq__(self, other):
        return isinstance(other, ExclusivityGraph) and np.array_equal(self.adj, other.adj)

    def __hash__(self):
        return hash(self.adj.tobytes())

    def __repr__(self):
        return f"ExclusivityGraph(n={self.n}, edges={self.edge_count})"

    def induced(self, vertices: Sequence[int]) -> "ExclusivityGraph":
        vs = list(vertices)
        labels = None if self.labels is None else [self.labels[v] for v in vs]
        return ExclusivityGraph(self.adj[np.ix_(vs, vs)], labels)

    def relabel(self, labels) -> "ExclusivityGraph":
        return ExclusivityGraph(self.adj, labels)

    # -- JSON / DOT ----------------------------------------------------------
    def to_json(self) -> dict:
        out: dict = {"n": self.n, "edges": [list(e) for e in self.edges]}
        if self.labels is not None:
            out["labels"] = [_label_to_json(l) for l in self.labels]
        return out

    @classmethod
    def from_json(cls, data) -> "ExclusivityGraph":
        try:
            n = int(data["n"])
            edges = [tuple(map(int, e)) for e in data["edges"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise GraphError(f"malformed graph JSON: {exc!r}") from exc
        for i, j in edges:
            if not (0 <= i < n and 0 <= j < n):
                raise GraphError(f"edge {(i, j)} out of range for n={n}")
        labels = data.get("labels")
        if labels is not None:
            labels = [_label_from_json(l) for l in labels]
        return cls.from_edges(n, edges, labels)

    def to_dot(self, name: str = "G") -> str:
        lines = [f"graph {name} {{"]
        for v in range(self.n):
            lab = str(v) if self.labels is None else _label_text(self.labels[v])
            lines.append(f'  {v} [label="{lab}"];')
        lines += [f"  {i} -- {j};" for i, j in self.edges]
        lines.append("}")
        return "\n".join(lines) + "\n"


def _label_to_json(label):
    if isinstance(label, Event):
        return {"event": label.as_dict()}
    if isinstance(label, tuple):
        return [_label_to_json(x) for x in label]
    return label


def _label_from_json(data):
    if isinstance(data, dict) and "event" in data:
        return Event(tuple(data["event"].items()))
    if isinstance(data, list):
        return tuple(_label_from_json(x) for x in data)
    return data


def _label_text(label) -> str:
    if isinstance(label, Event):
        return label.label()
    if isinstance(label, tuple):
        return "(" + ",".join(_label_text(x) for x in label) + ")"
    return str(label)


class VertexWeights:
    """A point of ``[0,1]^|V|``."""

    __slots__ = ("values",)

    def __init__(self, values, tol: float = 1e-12):
        v = np.array(values, dtype=float).reshape(-1)
        if np.any(~np.isfinite(v)) or np.any(v < -tol) or np.any(v > 1 + tol):
            raise GraphError("vertex weights must lie in [0, 1]")
        v = np.clip(v, 0.0, 1.0)
        v.setflags(write=False)
        self.values = v

    def __len__(self):
        return self.values.size

    def __getitem__(self, i):
        return self.values[i]

    def __iter__(self):
        return iter(self.values)

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def __repr__(self):
        return f"VertexWeights({self.values.tolist()})"

    @classmethod
    def uniform(cls, n: int, c: float) -> "VertexWeights":
        return cls(np.full(n, c))

    def to_json(self) -> list[float]:
        return [float(x) for x in self.values]

    @classmethod
    def from_json(cls, data) -> "VertexWeights":
        if isinstance(data, dict):
            data = data.get("weights")
        if not isinstance(data, list):
            raise GraphError("weights JSON must be a list or {\"weights\": [...]}")
        return cls(data)


def as_weights(w) -> np.ndarray:
    return np.asarray(w.values if isinstance(w, VertexWeights) else w, dtype=float)


# -- graph families --------------------------------------------------------

def cycle_graph(n: int) -> ExclusivityGraph:
    return ExclusivityGraph.from_edges(n, [(i, (i + 1) % n) for i in range(n)])


def complete_graph(n: int) -> ExclusivityGraph:
    return ExclusivityGraph(~np.eye(n, dtype=bool))


def empty_graph(n: int) -> ExclusivityGraph:
    return ExclusivityGraph(np.zeros((n, n), dtype=bool))


def path_graph(n: int) -> ExclusivityGraph:
    return ExclusivityGraph.from_edges(n, [(i, i + 1) for i in range(n - 1)])


# -- operations ------------------------------------------------------------

def exclusivity_graph(s: Scenario, include_subcontexts: bool = False) -> ExclusivityGraph:
    """Events of the (maximal) contexts of ``s``; edges join events that give
    different outcomes to a shared measurement."""
    events = []
    for ctx in enumerate_contexts(s, maximal_only=not include_subcontexts):
        for outs in itertools.product(*map(range, s.shape(ctx))):
            events.append(Event.of(ctx, outs))
    n = len(events)
    a = np.zeros((n, n), dtype=bool)
    for i, j in itertools.combinations(range(n), 2):
        if events[i].exclusive_with(events[j]):
            a[i, j] = a[j, i] = True
    return ExclusivityGraph(a, events)


def behaviour_to_weights(b: Behaviour, g: ExclusivityGraph) -> VertexWeights:
    if g.labels is None:
        raise GraphError("graph carries no event labels")
    out = []
    for lab in g.labels:
        if not isinstance(lab, Event):
            raise GraphError(f"vertex label {lab!r} is not an event")
        try:
            lab.validate(b.scenario)
        except ValueError as exc:
            raise GraphError(f"label {lab.label()} does not match the behaviour's scenario") from exc
        out.append(b.probability(lab))
    return VertexWeights(out)


def complement(g: ExclusivityGraph) -> ExclusivityGraph:
    a = ~g.adj
    np.fill_diagonal(a, False)
    return ExclusivityGraph(a, g.labels)


def or_product(g: ExclusivityGraph, h: ExclusivityGraph, cap: int = DEFAULT_VERTEX_CAP) -> ExclusivityGraph:
    """Disjunctive product; vertex ``(i, j)`` sits at index ``i * |V(h)| + j``."""
    n = g.n * h.n
    if n > cap:
        raise CapExceeded(f"OR product has {n} vertices; raise the cap to at least {n}")
    a = np.kron(g.adj, np.ones((h.n, h.n), dtype=bool)) | np.kron(np.ones((g.n, g.n), dtype=bool), h.adj)
    np.fill_diagonal(a, False)
    lg = g.labels if g.labels is not None else range(g.n)
    lh = h.labels if h.labels is not None else range(h.n)
    return ExclusivityGraph(a, [(x, y) for x in lg for y in lh])


def or_power(g: ExclusivityGraph, n: int, cap: int = DEFAULT_VERTEX_CAP) -> ExclusivityGraph:
    """``g * g * ... * g`` (n factors), row-major lexicographic vertex order.

    Labels are the coordinate tuples ``(i1, ..., in)`` of vertices of ``g``.
    """
    if n < 1:
        raise GraphError("or_power needs n >= 1")
    if g.n ** n > cap:
        raise CapExceeded(f"OR power has {g.n ** n} vertices; raise the cap to at least {g.n ** n}")
    a = g.adj
    for _ in range(n - 1):
        a = np.kron(a, np.ones((g.n, g.n), dtype=bool)) | np.kron(np.ones(a.shape, dtype=bool), g.adj)
        np.fill_diagonal(a, False)
    return ExclusivityGraph(a, list(itertools.product(range(g.n), repeat=n)))


def tensor_power_weights(w, n: int) -> np.ndarray:
    """Weights of ``or_power(g, n)``: products in the same row-major order."""
    w = as_weights(w)
    out = np.ones(1)
    for _ in range(n):
        out = np.kron(out, w)
    return out


# -- isomorphism -----------------------------------------------------------

def _refine(adjs, colors):
    """Joint colour refinement over several graphs; colours comparable across them."""
    ncolors = len(set(c for col in colors for c in col))
    while True:
        sigs = []
        for adj, col in zip(adjs, colors):
            colarr = np.asarray(col)
            s = []
            for v in range(len(col)):
                nb = np.sort(colarr[adj[v]])
                s.append((col[v], tuple(nb.tolist())))
            sigs.append(s)
        table = {sig: k for k, sig in enumerate(sorted(set(x for s in sigs for x in s)))}
        new = [[table[x] for x in s] for s in sigs]
        if len(table) == ncolors:
            return new
        colors, ncolors = new, len(table)


def find_isomorphism(g: ExclusivityGraph, h: ExclusivityGraph,
                     pinned: dict[int, int] | None = None,
                     cap: int = ISO_VERTEX_CAP) -> dict[int, int] | None:
    """An edge-preserving bijection ``V(g) -> V(h)`` or ``None``.

    Individualization-refinement backtracking; candidates are tried in
    increasing vertex order, so the returned witness is deterministic.
    ``pinned`` fixes some images up front.
    """
    if g.n > cap or h.n > cap:
        raise CapExceeded(f"isomorphism search is capped at {cap} vertices")
    if g.n != h.n or g.edge_count != h.edge_count:
        return None
    if sorted(g.degrees.tolist()) != sorted(h.degrees.tolist()):
        return None
    n = g.n
    if n == 0:
        return {}
    adjs = (g.adj, h.adj)
    col_g = [0] * n
    col_h = [0] * n
    next_color = 1
    for v, w in sorted((pinned or {}).items()):
        col_g[v] = col_h[w] = next_color
        next_color += 1

    def consistent(cg, ch):
        return sorted(cg) == sorted(ch)

    def search(cg, ch):
        cg, ch = _refine(adjs, [cg, ch])
        if not consistent(cg, ch):
            return None
        cells: dict[int, list[int]] = {}
        for v, c in enumerate(cg):
            cells.setdefault(c, []).append(v)
        if all(len(vs) == 1 for vs in cells.values()):
            where = {c: w for w, c in enumerate(ch)}
            mapping = {v: where[c] for v, c in enumerate(cg)}
            perm = np.array([mapping[v] for v in range(n)])
            if np.array_equal(g.adj, h.adj[np.ix_(perm, perm)]):
                return mapping
            return None
        color = min((len(vs), c) for c, vs in cells.items() if len(vs) > 1)[1]
        v = cells[color][0]
        fresh = max(max(cg), max(ch)) + 1
        for w in [u for u in range(n) if ch[u] == color]:
            cg2, ch2 = list(cg), list(ch)
            cg2[v] = fresh
            ch2[w] = fresh
            found = search(cg2, ch2)
            if found is not None:
                return found
        return None

    return search(col_g, col_h)


def verify_isomorphism(g: ExclusivityGraph, h: ExclusivityGraph, mapping: dict[int, int]) -> bool:
    if sorted(mapping) != list(range(g.n)) or sorted(mapping.values()) != list(range(h.n)):
        return False
    return all(bool(g.adj[i, j]) == bool(h.adj[mapping[i], mapping[j]])
               for i, j in itertools.combinations(range(g.n), 2))


def is_self_complementary(g: ExclusivityGraph, cap: int = ISO_VERTEX_CAP) -> tuple[bool, dict[int, int] | None]:
    """Whether ``g`` is isomorphic to its complement, with the witness map."""
    n = g.n
    if g.edge_count * 4 != n * (n - 1):
        if n > cap:
            raise CapExceeded(f"isomorphism search is capped at {cap} vertices")
        return False, None
    m = find_isomorphism(g, complement(g), cap=cap)
    return m is not None, m


def is_vertex_transitive(g: ExclusivityGraph, cap: int = ISO_VERTEX_CAP) -> bool:
    if len(set(g.degrees.tolist())) > 1:
        return False
    return all(find_isomorphism(g, g, pinned={0: v}, cap=cap) is not None for v in range(1, g.n))


# -- H(G) ------------------------------------------------------------------

def h_embedding(g: ExclusivityGraph) -> ExclusivityGraph:
    """Four blocks ``G, co-G, co-G, G`` with complete joins between consecutive blocks.

    Vertex ``k`` of block ``b`` (``b = 1..4``) is index ``(b-1)*n + k`` and is
    labelled ``("B<b>", k)``.
    """
    n = g.n
    if n < 1:
        raise GraphError("h_embedding needs a nonempty graph")
    cg = complement(g).adj
    blocks = [g.adj, cg, cg, g.adj]
    a = np.zeros((4 * n, 4 * n), dtype=bool)
    for b, blk in enumerate(blocks):
        a[b * n:(b + 1) * n, b * n:(b + 1) * n] = blk
    for b in range(3):
        a[b * n:(b + 1) * n, (b + 1) * n:(b + 2) * n] = True
        a[(b + 1) * n:(b + 2) * n, b * n:(b + 1) * n] = True
    labels = [(f"B{b + 1}", k) for b in range(4) for k in range(n)]
    return ExclusivityGraph(a, labels)


H_BLOCK_PERMUTATION = (2, 4, 1, 3)


def h_embedding_witness(n: int) -> dict[int, int]:
    """Explicit isomorphism ``H(G) -> complement(H(G))`` for any ``G`` on ``n`` vertices.

    Block ``b`` goes to block ``H_BLOCK_PERMUTATION[b-1]`` with the identity
    inside each block.
    """
    return {b * n + k: (H_BLOCK_PERMUTATION[b] - 1) * n + k for b in range(4) for k in range(n)}


def h_embedding_weights(p, x, y, z, a=(0.5, 0.5), b=(0.5, 0.5), c=(0.5, 0.5)) -> VertexWeights:
    """Weights ``(a0 p, a1 b0 x, b1 c0 y, c1 z)`` on the four blocks of ``H(G)``.

    ``a``, ``b``, ``c`` are the outcome probabilities of three independent coins.
    """
    for coin in (a, b, c):
        if min(coin) < 0 or sum(coin) > 1 + 1e-12:
            raise GraphError(f"coin weights {coin} are not a sub-probability")
    parts = [a[0] * as_weights(p), a[1] * b[0] * as_weights(x),
             b[1] * c[0] * as_weights(y), c[1] * as_weights(z)]
    return VertexWeights(np.concatenate(parts))


def random_graph(n: int, p: float, rng: np.random.Generator) -> ExclusivityGraph:
    a = np.triu(rng.random((n, n)) < p, 1)
    return ExclusivityGraph(a | a.T)


def dumps(obj) -> str:
    return json.dumps(obj.to_json(), sort_keys=True)
