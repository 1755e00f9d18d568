"""Projective realizations: a state plus one projector per (measurement, outcome)."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Sequence

import numpy as np

from ..scenario import Behaviour, Context, Scenario, ScenarioError, enumerate_contexts

AXIOM_TOL = 1e-8
PARTITION_OUTCOME_CAP = 8


class RealizationError(ValueError):
    pass


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Realization:
    """State ``psi`` in ``C^d`` and projectors keyed by ``(measurement, outcome)``."""

    d: int
    state: np.ndarray
    projectors: Mapping[tuple[str, int], np.ndarray]

    def __post_init__(self):
        if self.d < 1:
            raise RealizationError("dimension must be >= 1")
        st = _frozen(self.state).reshape(-1)
        if st.size != self.d:
            raise RealizationError(f"state has length {st.size}, expected {self.d}")
        projs = {}
        for (m, o), E in self.projectors.items():
            E = _frozen(E)
            if E.shape != (self.d, self.d):
                raise RealizationError(f"projector {m}:{o} has shape {E.shape}, expected {(self.d, self.d)}")
            projs[(str(m), int(o))] = E
        object.__setattr__(self, "state", st)
        object.__setattr__(self, "projectors", projs)

    def projector(self, m: str, o: int) -> np.ndarray:
        try:
            return self.projectors[(m, o)]
        except KeyError:
            raise RealizationError(f"no projector for {m}:{o}") from None

    def measurement(self, m: str) -> list[np.ndarray]:
        outs = sorted(o for mm, o in self.projectors if mm == m)
        return [self.projectors[(m, o)] for o in outs]

    def to_json(self) -> dict:
        def cplx(z):
            return [float(z.real), float(z.imag)]

        return {
            "d": self.d,
            "state": [cplx(z) for z in self.state],
            "projectors": {f"{m}:{o}": [[cplx(z) for z in row] for row in E]
                           for (m, o), E in sorted(self.projectors.items())},
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "Realization":
        def arr(x):
            a = np.asarray(x, dtype=float)
            return a[..., 0] + 1j * a[..., 1]

        projs = {}
        for key, mat in data["projectors"].items():
            m, _, o = key.rpartition(":")
            if not m:
                raise RealizationError(f"projector key {key!r} is not of the form 'measurement:outcome'")
            projs[(m, int(o))] = arr(mat)
        return cls(int(data["d"]), arr(data["state"]), projs)


@dataclass
class RealizationReport:
    residuals: dict
    tol: float

    @property
    def passed(self) -> bool:
        return all(v <= self.tol for v in self.residuals.values())

    def to_json(self) -> dict:
        return {"passed": self.passed, "tol": self.tol, "residuals": dict(self.residuals)}


def _opnorm(a: np.ndarray) -> float:
    return float(np.linalg.norm(a, 2)) if a.size else 0.0


def validate_realization(r: Realization, s: Scenario, tol: float = AXIOM_TOL) -> RealizationReport:
    """Residuals of the projector axioms (operator norm) and of the state norm."""
    for m, k in s.measurements:
        for o in range(k):
            if (m, o) not in r.projectors:
                raise RealizationError(f"realization has no projector for {m}:{o}")
    extra = [key for key in r.projectors if key[0] not in s.outcome_counts
             or key[1] >= s.outcome_counts[key[0]]]
    if extra:
        raise RealizationError(f"projectors outside the scenario: {sorted(extra)}")
    eye = np.eye(r.d)
    res = {"state_norm": abs(float(np.vdot(r.state, r.state).real) - 1.0),
           "hermiticity": 0.0, "idempotence": 0.0, "orthogonality": 0.0,
           "completeness": 0.0, "commutation": 0.0}
    for m, k in s.measurements:
        Es = r.measurement(m)
        for E in Es:
            res["hermiticity"] = max(res["hermiticity"], _opnorm(E - E.conj().T))
            res["idempotence"] = max(res["idempotence"], _opnorm(E @ E - E))
        for E, F in itertools.combinations(Es, 2):
            res["orthogonality"] = max(res["orthogonality"], _opnorm(E @ F))
        res["completeness"] = max(res["completeness"], _opnorm(sum(Es) - eye))
    for pair in s.compatible:
        a, b = sorted(pair)
        for E in r.measurement(a):
            for F in r.measurement(b):
                res["commutation"] = max(res["commutation"], _opnorm(E @ F - F @ E))
    return RealizationReport(res, tol)


def _joint_table(r: Realization, s: Scenario, members: Sequence[str]) -> np.ndarray:
    """``||E_{a_k} ... E_{a_1} psi||^2`` with the product applied in ``members`` order."""
    shape = tuple(s.outcome_counts[m] for m in members)
    out = np.zeros(shape)
    for outs in itertools.product(*map(range, shape)):
        v = r.state
        for m, o in zip(members, outs):
            v = r.projectors[(m, o)] @ v
        out[outs] = float(np.vdot(v, v).real)
    return out


def behaviour_from_realization(r: Realization, s: Scenario, tol: float = AXIOM_TOL) -> Behaviour:
    """Joint probabilities as squared norms of projected states.

    This equals ``|<psi'|psi>|^2`` for the normalized post-measurement state
    ``psi'`` whenever that state exists, and gives 0 where it does not.
    """
    rep = validate_realization(r, s, tol)
    if not rep.passed:
        bad = {k: v for k, v in rep.residuals.items() if v > tol}
        raise RealizationError(f"realization fails the projector axioms: {bad}")
    tables = {}
    for ctx in enumerate_contexts(s):
        t = _joint_table(r, s, ctx.members).reshape(-1)
        tables[ctx] = np.clip(t, 0.0, 1.0)
    return Behaviour(s, tables)


def tensor_realizations(r1: Realization, s1: Scenario, r2: Realization, s2: Scenario,
                        prefixes: tuple[str, str] = ("A", "B")) -> tuple[Scenario, Realization]:
    """Product realization on the disjoint-union scenario (ids prefixed as in
    :func:`exwb.scenario.tensor_behaviours`)."""
    pa, pb = prefixes
    ms = [(f"{pa}.{m}", k) for m, k in s1.measurements] + [(f"{pb}.{m}", k) for m, k in s2.measurements]
    edges = [(f"{pa}.{a}", f"{pa}.{c}") for a, c in map(sorted, s1.compatible)]
    edges += [(f"{pb}.{a}", f"{pb}.{c}") for a, c in map(sorted, s2.compatible)]
    edges += [(f"{pa}.{a}", f"{pb}.{c}") for a in s1.ids for c in s2.ids]
    declared = None
    if s1.contexts is not None or s2.contexts is not None:
        declared = [[f"{pa}.{m}" for m in c1] + [f"{pb}.{m}" for m in c2]
                    for c1 in enumerate_contexts(s1) for c2 in enumerate_contexts(s2)]
    scen = Scenario.from_edges(ms, edges, declared)
    i1, i2 = np.eye(r1.d), np.eye(r2.d)
    projs = {(f"{pa}.{m}", o): np.kron(E, i2) for (m, o), E in r1.projectors.items()}
    projs.update({(f"{pb}.{m}", o): np.kron(i1, E) for (m, o), E in r2.projectors.items()})
    return scen, Realization(r1.d * r2.d, np.kron(r1.state, r2.state), projs)


def tsirelson_realization() -> tuple[Scenario, Realization]:
    """Two qubits in a maximally entangled state with the standard CHSH observables.

    Outcome 0 is the +1 eigenspace.  ``A0 = Z, A1 = X, B0 = (Z+X)/sqrt2,
    B1 = (Z-X)/sqrt2`` give correlators ``1/sqrt2`` except ``E11 = -1/sqrt2``.
    """
    Z = np.diag([1.0, -1.0])
    X = np.array([[0.0, 1.0], [1.0, 0.0]])
    i2 = np.eye(2)
    obs = {"x0": Z, "x1": X, "y0": (Z + X) / math.sqrt(2), "y1": (Z - X) / math.sqrt(2)}
    projs = {}
    for m, A in obs.items():
        for o, sign in ((0, 1.0), (1, -1.0)):
            P = (i2 + sign * A) / 2
            projs[(m, o)] = np.kron(P, i2) if m[0] == "x" else np.kron(i2, P)
    phi = np.array([1.0, 0.0, 0.0, 1.0]) / math.sqrt(2)
    return Scenario.chsh(), Realization(4, phi, projs)


def trivial_realization(s: Scenario, outcomes: Mapping[str, int] | None = None) -> Realization:
    """One-dimensional realization: each measurement yields a fixed outcome (default 0)."""
    outcomes = outcomes or {}
    projs = {}
    for m, k in s.measurements:
        for o in range(k):
            projs[(m, o)] = np.array([[1.0 if o == outcomes.get(m, 0) else 0.0]])
    return Realization(1, np.array([1.0]), projs)


# -- coarse-graining -------------------------------------------------------

@dataclass(frozen=True)
class CoarseGrainingPartition:
    measurement: str
    blocks: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        blocks = tuple(tuple(sorted(int(a) for a in blk)) for blk in self.blocks)
        if any(not blk for blk in blocks):
            raise RealizationError("coarse-graining blocks must be nonempty")
        object.__setattr__(self, "blocks", blocks)

    def validate(self, outcome_count: int) -> None:
        flat = [a for blk in self.blocks for a in blk]
        if len(flat) != len(set(flat)):
            raise RealizationError(f"blocks of {self.measurement} overlap: {self.blocks}")
        if sorted(flat) != list(range(outcome_count)):
            raise RealizationError(f"blocks of {self.measurement} do not cover outcomes 0..{outcome_count - 1}")


def set_partitions(items: Sequence[int]) -> Iterator[tuple[tuple[int, ...], ...]]:
    """All set partitions of ``items`` (restricted-growth order)."""
    items = list(items)
    if not items:
        yield ()
        return

    def rec(i: int, blocks: list[list[int]]):
        if i == len(items):
            yield tuple(tuple(b) for b in blocks)
            return
        for b in blocks:
            b.append(items[i])
            yield from rec(i + 1, blocks)
            b.pop()
        blocks.append([items[i]])
        yield from rec(i + 1, blocks)
        blocks.pop()

    yield from rec(0, [])


def coarse_grain_projectors(r: Realization, s: Scenario, p: CoarseGrainingPartition,
                            new_id: str | None = None) -> tuple[Scenario, Realization]:
    """Projectors ``E_c = sum_{a in A_c} E_a``.

    By default the measurement is replaced in place (its outcome count becomes
    the number of blocks).  With ``new_id`` the coarse-grained measurement is
    added next to the original and is compatible with it and its neighbours.
    """
    if p.measurement not in s.outcome_counts:
        raise RealizationError(f"unknown measurement {p.measurement!r}")
    p.validate(s.outcome_counts[p.measurement])
    merged = {c: sum(r.projector(p.measurement, a) for a in blk) for c, blk in enumerate(p.blocks)}
    counts = dict(s.measurements)
    projs = dict(r.projectors)
    edges = [tuple(sorted(e)) for e in s.compatible]
    if new_id is None:
        target = p.measurement
        for key in [k for k in projs if k[0] == target]:
            del projs[key]
    else:
        if new_id in counts:
            raise RealizationError(f"measurement id {new_id!r} already exists")
        if s.contexts is not None:
            raise RealizationError("adding a coarse-grained measurement to declared contexts is not supported")
        target = new_id
        edges += [(p.measurement, new_id)] + [(m, new_id) for m in s.neighbours(p.measurement)]
    counts[target] = len(p.blocks)
    for c, E in merged.items():
        projs[(target, c)] = E
    try:
        scen = Scenario.from_edges(counts, edges, s.contexts)
    except ScenarioError as exc:
        raise RealizationError(str(exc)) from None
    return scen, Realization(r.d, r.state, projs)


def coarse_grain_behaviour(b: Behaviour, p: CoarseGrainingPartition) -> Behaviour:
    """Merge outcome probabilities block by block (in place, like the projector version)."""
    s = b.scenario
    p.validate(s.outcome_counts[p.measurement])
    counts = dict(s.measurements)
    counts[p.measurement] = len(p.blocks)
    scen = Scenario.from_edges(counts, [tuple(sorted(e)) for e in s.compatible], s.contexts)
    lookup = {a: c for c, blk in enumerate(p.blocks) for a in blk}
    tables = {}
    for ctx, t in b.tables.items():
        t = t.reshape(s.shape(ctx))
        if p.measurement not in ctx:
            tables[ctx] = t.reshape(-1).copy()
            continue
        ax = ctx.members.index(p.measurement)
        shape = list(t.shape)
        shape[ax] = len(p.blocks)
        out = np.zeros(shape)
        for a in range(t.shape[ax]):
            src = np.take(t, a, axis=ax)
            idx = [slice(None)] * t.ndim
            idx[ax] = lookup[a]
            out[tuple(idx)] += src
        tables[ctx] = out.reshape(-1)
    return Behaviour(scen, tables)


# -- ideal-measurement axioms ----------------------------------------------

@dataclass
class IdealReport:
    repeatability: float
    nondisturbance: float
    coarse_grainings: float
    partitions_checked: int
    tol: float
    failures: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return max(self.repeatability, self.nondisturbance, self.coarse_grainings) <= self.tol

    def to_json(self) -> dict:
        return {"passed": self.passed, "tol": self.tol, "repeatability": self.repeatability,
                "nondisturbance": self.nondisturbance, "coarse_grainings": self.coarse_grainings,
                "partitions_checked": self.partitions_checked, "failures": list(self.failures)}


def _repeatability(psi: np.ndarray, Es: Sequence[np.ndarray], tol: float) -> float:
    """Max over outcomes of ``|1 - P(a again | a)|`` for outcomes with P(a) > tol."""
    worst = 0.0
    for E in Es:
        v = E @ psi
        nrm = float(np.vdot(v, v).real)
        if nrm <= tol:
            continue
        v = v / math.sqrt(nrm)
        w = E @ v
        worst = max(worst, abs(1.0 - float(np.vdot(w, w).real)))
    return worst


def _order_disturbance(psi, Es, Fs) -> float:
    """Joint table measured E-then-F versus F-then-E, plus the marginal of E."""
    worst = 0.0
    for E in Es:
        marg = 0.0
        pe = float(np.vdot(E @ psi, E @ psi).real)
        for F in Fs:
            u, v = F @ (E @ psi), E @ (F @ psi)
            pu, pv = float(np.vdot(u, u).real), float(np.vdot(v, v).real)
            worst = max(worst, abs(pu - pv))
            marg += pv
        worst = max(worst, abs(marg - pe))
    return worst


def check_ideal(r: Realization, s: Scenario, tol: float = AXIOM_TOL,
                cap: int = PARTITION_OUTCOME_CAP) -> IdealReport:
    """Repeatability, order independence for compatible measurements, and the
    same two properties for every coarse-graining of every measurement."""
    too_big = [m for m, k in s.measurements if k > cap]
    if too_big:
        raise RealizationError(f"partition enumeration is capped at {cap} outcomes; {too_big} exceed it")
    psi = r.state
    failures = []
    rep = 0.0
    for m, _ in s.measurements:
        val = _repeatability(psi, r.measurement(m), tol)
        if val > tol:
            failures.append({"axiom": "repeatability", "measurement": m, "residual": val})
        rep = max(rep, val)
    nd = 0.0
    for pair in s.compatible:
        a, b = sorted(pair)
        val = _order_disturbance(psi, r.measurement(a), r.measurement(b))
        if val > tol:
            failures.append({"axiom": "nondisturbance", "measurements": [a, b], "residual": val})
        nd = max(nd, val)
    for ctx in enumerate_contexts(s):
        fwd = _joint_table(r, s, ctx.members)
        rev = _joint_table(r, s, ctx.members[::-1])
        val = float(np.abs(fwd - np.transpose(rev, tuple(range(len(ctx) - 1, -1, -1)))).max())
        if val > tol:
            failures.append({"axiom": "context-order", "context": ctx.key, "residual": val})
        nd = max(nd, val)
    cg, count = 0.0, 0
    for m, k in s.measurements:
        Es = r.measurement(m)
        partners = [r.measurement(n) for n in sorted(s.neighbours(m))]
        for blocks in set_partitions(range(k)):
            count += 1
            merged = [sum(Es[a] for a in blk) for blk in blocks]
            val = _repeatability(psi, merged, tol)
            for Fs in partners:
                val = max(val, _order_disturbance(psi, merged, Fs))
            if val > tol:
                failures.append({"axiom": "coarse-graining", "measurement": m, "blocks": blocks, "residual": val})
            cg = max(cg, val)
    return IdealReport(rep, nd, cg, count, tol, failures)
