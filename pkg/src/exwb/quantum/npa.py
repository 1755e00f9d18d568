"""Moment-matrix relaxation of quantum realizability.

Letters are the projectors ``E(m, o)`` for every outcome but the last; the
last one is ``1 - sum`` of the others, so completeness holds implicitly.
Words are products of letters reduced by idempotence, orthogonality within a
measurement and commutation between compatible measurements.  The moment
matrix ``Gamma[u, v] = <psi| u^dag v |psi>`` is PSD for every realization.
Only its real part is used: it is PSD as well, and entries whose words are
reverses of each other share their real part.

Entries whose word is a product over a context are fixed to the behaviour's
probabilities.  An infeasible program therefore rules out every projective
realization in every dimension; a feasible one proves nothing.
"""
from __future__ import annotations

import itertools
import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from ..numerics import SDPInfeasibility, SemidefiniteProgram, solve_sdp
from ..numerics.sdp import MAX_ORDER
from ..scenario import Behaviour, Context, Event, Scenario

log = logging.getLogger(__name__)

ZERO = None  # canonical form of a vanishing word
LEVELS = (1, 2, "1+AB")
FEASIBLE_TOL = 1e-7
INFEASIBLE_MARGIN = 1e-7


class RelaxationError(ValueError):
    pass


def _letters(s: Scenario) -> list[tuple[str, int]]:
    return [(m, o) for m, k in s.measurements for o in range(k - 1)]


class _Reducer:
    """Canonical forms of words over the scenario's projector letters."""

    def __init__(self, s: Scenario):
        self.s = s
        self.letters = _letters(s)
        self.cache: dict = {}

    def _commute(self, a, b) -> bool:
        ma, mb = self.letters[a][0], self.letters[b][0]
        return ma != mb and self.s.are_compatible(ma, mb)

    def canon(self, word: tuple[int, ...]):
        """Shortest, then lexicographically smallest, equivalent word or ``ZERO``."""
        word = tuple(word)
        if word in self.cache:
            return self.cache[word]
        seen = {word}
        queue = deque([word])
        best = word
        zero = False
        while queue and not zero:
            w = queue.popleft()
            if (len(w), w) < (len(best), best):
                best = w
            for i in range(len(w) - 1):
                a, b = w[i], w[i + 1]
                if self.letters[a][0] == self.letters[b][0]:
                    if a != b:
                        zero = True
                        break
                    nxt = w[:i + 1] + w[i + 2:]
                elif self._commute(a, b):
                    nxt = w[:i] + (b, a) + w[i + 2:]
                else:
                    continue
                if nxt not in seen:
                    seen.add(nxt)
                    queue.append(nxt)
        out = ZERO if zero else best
        self.cache[word] = out
        return out

    def moment_key(self, u: tuple[int, ...], v: tuple[int, ...]):
        w = self.canon(tuple(reversed(u)) + tuple(v))
        if w is ZERO:
            return ZERO
        r = self.canon(tuple(reversed(w)))
        return min(w, r, key=lambda x: (len(x), x))

    def context_event(self, word: tuple[int, ...]) -> Event | None:
        """The event a commuting product over one context stands for, if any."""
        ms = [self.letters[a][0] for a in word]
        if len(set(ms)) != len(ms) or not self.s.is_context(ms):
            return None
        outs = dict(self.letters[a] for a in word)
        ctx = Context(tuple(ms))
        return Event.of(ctx, [outs[m] for m in ctx.members])


def generate_words(s: Scenario, level) -> list[tuple[int, ...]]:
    """Canonical operator words spanning the moment matrix at ``level``."""
    if level not in LEVELS:
        raise RelaxationError(f"level must be one of {LEVELS}, got {level!r}")
    red = _Reducer(s)
    n = len(red.letters)
    raw = [()] + [(a,) for a in range(n)]
    if level == 2:
        raw += list(itertools.product(range(n), repeat=2))
    elif level == "1+AB":
        for k in range(2, len(s.ids) + 1):
            for combo in itertools.combinations(range(n), k):
                if red.context_event(combo) is not None:
                    raw.append(combo)
    out, seen = [], set()
    for w in raw:
        c = red.canon(w)
        if c is ZERO or c in seen:
            continue
        seen.add(c)
        out.append(c)
    return out


@dataclass
class MomentRelaxation:
    """Words, moment classes and the linear system tying the moment matrix."""

    scenario: Scenario
    level: object
    words: list
    keys: dict  # (i, j) with i <= j -> moment key
    letters: list

    @classmethod
    def build(cls, s: Scenario, level) -> "MomentRelaxation":
        words = generate_words(s, level)
        if len(words) > MAX_ORDER:
            raise RelaxationError(f"moment matrix order {len(words)} exceeds {MAX_ORDER}")
        red = _Reducer(s)
        keys = {(i, j): red.moment_key(words[i], words[j])
                for i in range(len(words)) for j in range(i, len(words))}
        return cls(s, level, words, keys, red.letters)

    @property
    def order(self) -> int:
        return len(self.words)

    def classes(self) -> dict:
        out: dict = {}
        for ij, k in self.keys.items():
            out.setdefault(k, []).append(ij)
        return out

    def word_label(self, w) -> str:
        if w is ZERO:
            return "0"
        return "*".join(f"{m}={o}" for m, o in (self.letters[a] for a in w)) or "1"

    def known_value(self, key, b: Behaviour | None):
        """Fixed value of a moment: 1, 0 or a context probability (``None`` if free)."""
        if key is ZERO:
            return 0.0
        if key == ():
            return 1.0
        if b is None:
            return None
        ev = _Reducer(self.scenario).context_event(key)
        return None if ev is None else b.probability(ev)

    def system(self, b: Behaviour | None):
        """``(A, b)`` with ``<A_k, M> = b_k``; ``b=None`` fixes only 1 and 0."""
        m = self.order
        A, rhs = [], []
        red = _Reducer(self.scenario)
        for key, entries in sorted(self.classes().items(), key=lambda kv: _sort_key(kv[0])):
            if key is ZERO:
                val = 0.0
            elif key == ():
                val = 1.0
            elif b is not None and red.context_event(key) is not None:
                val = b.probability(red.context_event(key))
            else:
                val = None
            if val is not None:
                for ij in entries:
                    A.append(_unit(m, *ij))
                    rhs.append(val)
            else:
                first = entries[0]
                for ij in entries[1:]:
                    A.append(_unit(m, *first) - _unit(m, *ij))
                    rhs.append(0.0)
        return A, np.array(rhs)


def _sort_key(k):
    return (-1, ()) if k is ZERO else (len(k), k)


def _unit(m: int, i: int, j: int) -> np.ndarray:
    a = np.zeros((m, m))
    a[i, j] += 0.5
    a[j, i] += 0.5
    return a


@dataclass
class NPAResult:
    status: str  # feasible | infeasible | inconclusive
    level: object
    order: int
    margin: float | None
    certificate: SDPInfeasibility | None = None
    moment_matrix: np.ndarray | None = None
    words: list = field(default_factory=list)
    info: dict = field(default_factory=dict)

    def verify_certificate(self, margin: float = INFEASIBLE_MARGIN) -> bool:
        """Dual matrix PSD and affine system violated by more than ``margin``."""
        return self.certificate is not None and self.certificate.verify(margin)

    def to_json(self) -> dict:
        out = {"status": self.status, "level": self.level, "order": self.order, "margin": self.margin,
               "words": list(self.words), "info": self.info}
        if self.certificate is not None and self.status == "infeasible":
            c = self.certificate
            out["certificate"] = {"type": "moment-dual", "data": {
                "y": c.y.tolist(), "margin": c.margin(), "slack_min_eig": c.min_eig(),
                "verified": self.verify_certificate()}}
        return out


def npa_infeasibility(s: Scenario, b: Behaviour, level=1, feasible_tol: float = FEASIBLE_TOL,
                      infeasible_margin: float = INFEASIBLE_MARGIN) -> NPAResult:
    """Decide whether ``b`` survives the moment relaxation at ``level``.

    ``level`` is 1, 2 or ``"1+AB"`` (level 1 plus every product over a
    context).  ``infeasible`` comes with a dual certificate re-verified here.
    """
    if b.scenario != s:
        raise RelaxationError("behaviour belongs to a different scenario")
    rel = MomentRelaxation.build(s, level)
    A, rhs = rel.system(b)
    res = solve_sdp(SemidefiniteProgram(rel.order, A, rhs), feasible_tol=feasible_tol,
                    infeasible_margin=infeasible_margin)
    labels = [rel.word_label(w) for w in rel.words]
    status = res.status
    if status == "infeasible" and not (res.certificate is not None and res.certificate.verify(infeasible_margin)):
        status = "inconclusive"
    log.debug("npa level=%s order=%d status=%s margin=%s", level, rel.order, status, res.margin)
    return NPAResult(status, level, rel.order, res.margin, res.certificate, res.matrix, labels, dict(res.info))


def npa_max_linear(s: Scenario, objective: Mapping, level=1, constant: float = 0.0) -> float:
    """Upper bound on ``constant + sum c_e P(e)`` over quantum behaviours.

    ``objective`` maps events (``{measurement: outcome}`` dicts, outcomes other
    than the last) to coefficients.
    """
    rel = MomentRelaxation.build(s, level)
    red = _Reducer(s)
    index = {l: a for a, l in enumerate(rel.letters)}
    where = {}
    for ij, k in rel.keys.items():
        where.setdefault(k, ij)
    C = np.zeros((rel.order, rel.order))
    for ev, coef in objective:
        word = red.canon(tuple(index[(m, o)] for m, o in sorted(ev.items())))
        key = red.moment_key((), word)
        if key not in where:
            raise RelaxationError(f"event {ev} has no moment at level {level}")
        C += coef * _unit(rel.order, *where[key])
    A, rhs = rel.system(None)
    res = solve_sdp(SemidefiniteProgram(rel.order, A, rhs, C))
    if res.value is None:
        raise RuntimeError(f"moment SDP failed: {res.info}")
    return constant + float(res.value)


def chsh_objective(signs: Mapping[tuple[int, int], int] | None = None):
    """CHSH value as ``constant + sum c_e P(e)`` over outcome-0 events.

    Uses ``E_xy = 1 - 2 P(a=0) - 2 P(b=0) + 4 P(a=0, b=0)``.
    """
    signs = signs or {(0, 0): 1, (0, 1): 1, (1, 0): 1, (1, 1): -1}
    coef: dict = {}
    const = 0.0
    for (x, y), sg in signs.items():
        const += sg
        for ev, c in (({f"x{x}": 0}, -2), ({f"y{y}": 0}, -2), ({f"x{x}": 0, f"y{y}": 0}, 4)):
            key = tuple(sorted(ev.items()))
            coef[key] = coef.get(key, 0.0) + sg * c
    return [(dict(k), v) for k, v in coef.items() if v != 0], const
