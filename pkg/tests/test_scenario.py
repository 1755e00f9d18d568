import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from exwb.scenario import (CATALOG, Behaviour, Context, Event, Scenario, ScenarioError, catalog_get,
                           check_nondisturbance, check_normalization, chsh_value, enumerate_contexts, marginalize,
                           tensor_behaviours)

SQ2 = math.sqrt(2)


def test_chsh_contexts():
    ctxs = enumerate_contexts(Scenario.chsh())
    assert [c.key for c in ctxs] == ["x0,y0", "x0,y1", "x1,y0", "x1,y1"]


def test_single_measurement_one_context():
    s = Scenario.from_edges([("a", 2)])
    assert enumerate_contexts(s) == [Context(("a",))]


def test_kcbs_five_adjacent_pairs():
    ctxs = enumerate_contexts(Scenario.cycle(5))
    assert len(ctxs) == 5
    assert all(len(c) == 2 for c in ctxs)


def test_all_contexts_include_subcontexts():
    all_ctx = enumerate_contexts(Scenario.chsh(), maximal_only=False)
    # 4 singletons + 4 edges
    assert len(all_ctx) == 8


def test_invalid_scenarios_rejected():
    with pytest.raises(ScenarioError):
        Scenario.from_edges([("a", 1)])
    with pytest.raises(ScenarioError):
        Scenario.from_edges([("a", 2), ("a", 3)])
    with pytest.raises(ScenarioError):
        Scenario.from_edges([("a", 2)], [("a", "b")])


def test_catalog_matrices_match_source():
    half = [0, 0.5, 0.5, 0]
    assert np.array_equal(catalog_get("specker_triangle").matrix(), np.array([half] * 3))
    assert np.array_equal(catalog_get("wright_pentagon").matrix(), np.array([half] * 5))
    pr = catalog_get("pr_box").matrix()
    assert np.array_equal(pr, np.array([[0.5, 0, 0, 0.5]] * 3 + [[0, 0.5, 0.5, 0]]))
    aq = catalog_get("almost_quantum_chsh").matrix()
    expected = [[2993 / 5500, 8 / 1375, 137 / 500, 22 / 125],
                [107 / 700, 139 / 350, 139 / 350, 37 / 700],
                [7 / 11 + SQ2 / 9, 2 / 11 - SQ2 / 9, 2 / 11 - SQ2 / 9, SQ2 / 9],
                [2993 / 5500, 137 / 500, 8 / 1375, 22 / 125]]
    assert np.allclose(aq, expected, atol=0, rtol=1e-15)


def test_catalog_unknown_name_lists_entries():
    with pytest.raises(KeyError, match="pr_box"):
        catalog_get("nope")


@pytest.mark.parametrize("name", ["specker_triangle", "wright_pentagon", "pr_box", "almost_quantum_chsh"])
def test_source_matrices_pass_A_and_B(name):
    b = catalog_get(name)
    assert check_normalization(b, 1e-12).passed
    assert check_nondisturbance(b, 1e-12).passed


def test_tsirelson_entries_and_value():
    b = catalog_get("tsirelson_chsh")
    hi, lo = (2 + SQ2) / 8, (2 - SQ2) / 8
    assert np.allclose(np.sort(np.unique(np.round(b.matrix(), 12))), [round(lo, 12), round(hi, 12)])
    assert abs(chsh_value(b) - 2 * SQ2) < 1e-12


def test_deterministic_entry():
    b = catalog_get("deterministic_chsh")
    assert np.array_equal(b.matrix()[:, 0], np.ones(4))


def test_normalization_deficit_reported():
    s = Scenario.chsh()
    b = Behaviour.from_rows(s, [[0.5, 0.4, 0, 0]] + [[0.25] * 4] * 3)
    rep = check_normalization(b, 1e-9)
    assert not rep.passed
    assert rep.worst_context.key == "x0,y0"
    assert rep.worst_deviation == pytest.approx(-0.1)


def test_signalling_behaviour_fails_on_x0():
    s = Scenario.chsh()
    b = Behaviour.from_rows(s, [[1, 0, 0, 0], [0, 0, 0, 1], [0.25] * 4, [0.25] * 4])
    rep = check_nondisturbance(b, 1e-9)
    assert not rep.passed
    assert rep.max_mismatch == pytest.approx(1.0)
    assert any("x0" in str(w[0]) for w in rep.witnesses)


def test_pr_marginals_uniform_by_direct_summation():
    b = catalog_get("pr_box")
    for c in b.contexts:
        t = b.table(c).reshape(2, 2)
        assert np.allclose(t.sum(axis=0), 0.5) and np.allclose(t.sum(axis=1), 0.5)
    assert check_nondisturbance(b).passed


def test_marginalize_examples():
    b = catalog_get("pr_box")
    c = Context(("x0", "y0"))
    assert np.allclose(marginalize(b, c, Context(("x0",))), [0.5, 0.5])
    assert np.allclose(marginalize(b, c, c), b.table(c))
    with pytest.raises(ScenarioError):
        marginalize(b, c, Context(("x1",)))


def test_marginalize_uniform_four_outcomes():
    s = Scenario.from_edges([("a", 2), ("b", 2)], [("a", "b")])
    b = Behaviour.from_rows(s, [[0.25] * 4])
    assert np.allclose(marginalize(b, Context(("a", "b")), Context(("b",))), [0.5, 0.5])


def _random_behaviour(seed, dims=(2, 3, 2)):
    rng = np.random.default_rng(seed)
    ms = [(f"m{i}", k) for i, k in enumerate(dims)]
    s = Scenario.from_edges(ms, itertools.combinations([m for m, _ in ms], 2))
    t = rng.dirichlet(np.ones(int(np.prod(dims))))
    return Behaviour.from_rows(s, [t])


@given(st.integers(0, 10_000))
def test_marginalize_tower_property(seed):
    b = _random_behaviour(seed)
    full = b.contexts[0]
    mid = Context(("m0", "m1"))
    low = Context(("m0",))
    two_step = marginalize(Behaviour(Scenario.from_edges([("m0", 2), ("m1", 3)], [("m0", "m1")]),
                                     {mid: marginalize(b, full, mid)}), mid, low)
    assert np.allclose(two_step, marginalize(b, full, low), atol=1e-12)


def test_tensor_examples():
    d = catalog_get("deterministic_chsh")
    dd = tensor_behaviours(d, d)
    assert all(dd.table(c)[0] == 1.0 for c in dd.contexts)
    s = catalog_get("specker_triangle")
    ss = tensor_behaviours(s, s)
    assert all(len(c) == 4 for c in ss.contexts)
    assert set(np.unique(ss.matrix())) <= {0.0, 0.25}
    pr = catalog_get("pr_box")
    pp = tensor_behaviours(pr, pr)
    assert len(pp.contexts) == 16
    c0 = pp.contexts[0]
    assert np.allclose(pp.table(c0), np.kron(pr.table("x0,y0"), pr.table("x0,y0")))


@given(st.sampled_from(sorted(CATALOG)), st.sampled_from(sorted(CATALOG)))
def test_tensor_preserves_A_and_B(n1, n2):
    b = tensor_behaviours(catalog_get(n1), catalog_get(n2))
    assert check_normalization(b, 1e-9).passed
    assert check_nondisturbance(b, 1e-9).passed


@given(st.integers(0, 10_000))
def test_contexts_closed_under_subsets(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 7))
    ids = [f"m{i}" for i in range(n)]
    edges = [(a, b) for a, b in itertools.combinations(ids, 2) if rng.random() < 0.5]
    s = Scenario.from_edges([(m, 2) for m in ids], edges)
    for c in enumerate_contexts(s):
        for a, b in itertools.combinations(c.members, 2):
            assert s.are_compatible(a, b)


def test_json_round_trip():
    for name in sorted(CATALOG):
        b = catalog_get(name)
        back = Behaviour.from_json(json.loads(b.dumps()))
        assert back.scenario == b.scenario
        assert np.array_equal(back.matrix(), b.matrix())


def test_event_exclusivity_rule():
    e1 = Event((("x0", 0), ("y0", 1)))
    e2 = Event((("x0", 1), ("y1", 1)))
    e3 = Event((("x1", 0), ("y1", 1)))
    assert e1.exclusive_with(e2)
    assert not e1.exclusive_with(e3)
