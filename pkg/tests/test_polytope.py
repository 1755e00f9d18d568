import itertools
import math

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import linprog

from exwb import exgraph as eg
from exwb import polytope as pt
from exwb.scenario import Behaviour, Scenario, catalog_get, chsh_value

from test_exgraph import graphs, to_nx


def brute_max_clique(g, w):
    w = np.asarray(w, dtype=float)
    best = 0.0
    for c in nx.enumerate_all_cliques(to_nx(g)):
        best = max(best, float(w[c].sum()))
    return best


def chsh_graph_weights(name):
    b = catalog_get(name)
    g = eg.exclusivity_graph(b.scenario)
    return g, eg.behaviour_to_weights(b, g)


# -- cliques -----------------------------------------------------------------

def test_max_clique_examples():
    assert pt.max_weight_clique(eg.complete_graph(3), [0.5] * 3).weight == pytest.approx(1.5)
    g, w = chsh_graph_weights("pr_box")
    assert pt.max_weight_clique(g, w).weight == pytest.approx(brute_max_clique(g, w), abs=1e-12)
    assert pt.max_weight_clique(g, w).weight == pytest.approx(1.0, abs=1e-9)
    sq = eg.or_power(eg.cycle_graph(5), 2)
    assert pt.max_weight_clique(sq, np.full(25, 0.25)).weight == pytest.approx(1.25)


def test_max_clique_lexicographic_tie_break():
    wit = pt.max_weight_clique(eg.cycle_graph(5), np.full(5, 0.5))
    assert wit.vertices == (0, 1)


@given(graphs(9), st.integers(0, 10_000))
def test_max_clique_matches_brute_force(g, seed):
    w = np.random.default_rng(seed).random(g.n)
    wit = pt.max_weight_clique(g, w)
    assert wit.weight == pytest.approx(brute_max_clique(g, w), abs=1e-12)
    assert pt.verify_clique(g, w, wit, bound=-1.0)


def test_clique_number_c5_square():
    assert pt.clique_number(eg.or_power(eg.cycle_graph(5), 2)) == 5


@given(graphs(7), st.integers(0, 10_000))
def test_or_square_search_matches_generic(g, seed):
    w = np.random.default_rng(seed).random(g.n)
    fast = pt.satisfies_ep(g, w, 2, exact=True, method="square")
    slow = pt.satisfies_ep(g, w, 2, exact=True, method="generic")
    assert fast.value == pytest.approx(slow.value, abs=1e-12)
    assert fast.member == slow.member


# -- EP and E^n ----------------------------------------------------------------

@pytest.mark.parametrize("name", ["specker_triangle", "wright_pentagon", "pr_box"])
def test_two_copy_violations_certified(name):
    b = catalog_get(name)
    g = eg.exclusivity_graph(b.scenario)
    w = eg.behaviour_to_weights(b, g)
    v = pt.satisfies_ep(g, w, 2)
    assert not v.member
    assert v.certificate["type"] == "clique-violation"
    assert v.certificate["data"]["weight"] > 1 + 1e-9
    assert pt.verify_ep_violation(g, w, v.certificate)


def test_single_copy_results_recorded():
    # Specker: the triangle of (01|12),(01|23),(01|31)-type events sums to 3/2
    b = catalog_get("specker_triangle")
    g = eg.exclusivity_graph(b.scenario)
    w = eg.behaviour_to_weights(b, g)
    assert pt.max_weight_clique(g, w).weight == pytest.approx(1.5)
    assert not pt.in_qstab(g, w).member
    # Wright: every clique of its graph sums to at most 1
    b = catalog_get("wright_pentagon")
    g = eg.exclusivity_graph(b.scenario)
    w = eg.behaviour_to_weights(b, g)
    assert pt.max_weight_clique(g, w).weight == pytest.approx(brute_max_clique(g, w))
    assert pt.in_qstab(g, w).member


def test_violation_certificate_tampering_detected():
    g, w = chsh_graph_weights("pr_box")
    cert = pt.satisfies_ep(g, w, 2).certificate
    bad = {"type": cert["type"], "data": dict(cert["data"])}
    verts = list(bad["data"]["vertices"])
    verts[0] = verts[1]
    bad["data"]["vertices"] = verts
    assert not pt.verify_ep_violation(g, w, bad)


@pytest.mark.parametrize("c,e1,e2", [(0.40, True, True), (0.447, True, True), (0.45, True, False),
                                     (0.5, True, False), (0.51, False, False)])
def test_uniform_c5_thresholds(c, e1, e2):
    g = eg.cycle_graph(5)
    w = np.full(5, c)
    assert pt.in_E_n(g, w, 1).member is e1
    assert pt.in_E_n(g, w, 2).member is e2
    assert e2 == (5 * c * c <= 1)


def test_ep_cap_error_names_required_cap():
    g = eg.cycle_graph(7)
    with pytest.raises(eg.CapExceeded, match="343"):
        pt.satisfies_ep(g, np.full(7, 0.3), 3, cap=100)


@given(graphs(6), st.integers(0, 10_000))
def test_en_monotone(g, seed):
    w = np.random.default_rng(seed).random(g.n) * 0.7
    e2 = pt.in_E_n(g, w, 2).member
    e1 = pt.in_E_n(g, w, 1).member
    assert not e2 or e1


def test_en_not_monotone_in_n_on_c5():
    # omega(C5^{*3}) = 10 (networkx cross-check in test_thetabody), so
    # uniform 0.46 is in E^3 (10 * 0.46^3 < 1) but not in E^2 (5 * 0.46^2 > 1)
    g = eg.cycle_graph(5)
    w = np.full(5, 0.46)
    assert pt.in_E_n(g, w, 3).member
    assert not pt.in_E_n(g, w, 2).member


@given(graphs(4), st.integers(0, 10_000))
def test_en_monotone_along_divisors(g, seed):
    # a violating clique K of G^{*2} yields K x K in G^{*4}
    w = np.random.default_rng(seed).random(g.n) * 0.8
    if pt.in_E_n(g, w, 4).member:
        assert pt.in_E_n(g, w, 2).member


# -- STAB, local polytope -----------------------------------------------------

def test_independent_set_counts():
    assert len(pt.enumerate_independent_sets(eg.cycle_graph(5))) == 11
    assert len(pt.enumerate_independent_sets(eg.complete_graph(3))) == 4
    assert len(pt.enumerate_independent_sets(eg.empty_graph(3))) == 8
    with pytest.raises(eg.CapExceeded):
        pt.enumerate_independent_sets(eg.empty_graph(40))


def test_stab_examples():
    c5 = eg.cycle_graph(5)
    v = pt.in_stab(c5, np.full(5, 0.4))
    assert v.member and pt.verify_stab_certificate(c5, np.full(5, 0.4), v)
    v = pt.in_stab(c5, np.full(5, 0.45))
    assert not v.member and pt.verify_stab_certificate(c5, np.full(5, 0.45), v)
    for s in pt.enumerate_independent_sets(c5):
        chi = np.zeros(5)
        chi[list(s)] = 1
        assert pt.in_stab(c5, chi).member


def _stab_oracle(g, w):
    sets = pt.enumerate_independent_sets(g)
    X = np.zeros((g.n, len(sets)))
    for k, s in enumerate(sets):
        X[list(s), k] = 1
    # w <= X lam, sum lam = 1, lam >= 0  (down-monotone hull)
    res = linprog(np.zeros(len(sets)), A_ub=-X, b_ub=-np.asarray(w), A_eq=np.ones((1, len(sets))), b_eq=[1.0],
                  method="highs")
    return res.status == 0


@given(graphs(7), st.integers(0, 10_000))
def test_stab_agrees_with_scipy(g, seed):
    w = np.random.default_rng(seed).random(g.n) * 0.8
    v = pt.in_stab(g, w)
    assert v.member == _stab_oracle(g, w)
    assert pt.verify_stab_certificate(g, w, v)


@given(graphs(7), st.integers(0, 10_000))
def test_stab_subset_of_qstab(g, seed):
    w = np.random.default_rng(seed).random(g.n) * 0.8
    if pt.in_stab(g, w).member:
        assert pt.in_qstab(g, w).member
        assert pt.in_E_n(g, w, 2).member


def test_local_polytope():
    assert pt.in_local_polytope(catalog_get("deterministic_chsh")).member
    pr = catalog_get("pr_box")
    v = pt.in_local_polytope(pr)
    assert not v.member and pt.verify_local_certificate(pr, v)
    data = v.certificate["data"]
    assert data["bound"] == pytest.approx(2.0, abs=1e-9)
    assert data["value"] == pytest.approx(4.0, abs=1e-9)
    assert chsh_value(pr) == pytest.approx(4.0, abs=1e-12)
    assert pt.local_bound(Scenario.chsh(), pt.chsh_coefficients()) == pytest.approx(2.0, abs=1e-12)
    ts = catalog_get("tsirelson_chsh")
    assert not pt.in_local_polytope(ts).member
    assert chsh_value(ts) > 2


def test_local_mixture_certificate_for_mixed_point():
    s = Scenario.chsh()
    _, _, D = pt.local_vertices(s)
    lam = np.random.default_rng(0).dirichlet(np.ones(len(D)))
    vec = lam @ D
    b = Behaviour.from_rows(s, vec.reshape(4, 4))
    v = pt.in_local_polytope(b)
    assert v.member and pt.verify_local_certificate(b, v)


def test_deterministic_strategy_count():
    ctxs, strats, D = pt.local_vertices(Scenario.chsh())
    assert len(strats) == 16 and D.shape == (16, 16)
    assert np.allclose(D.sum(axis=1), 4)


# -- antiblocker ----------------------------------------------------------------

def test_antiblocker_examples():
    c5 = eg.cycle_graph(5)
    assert pt.antiblocker_max("stab", c5, np.full(5, 0.5)) == pytest.approx(1.0)
    assert pt.antiblocker_max("qstab", c5, np.zeros(5)) == 0.0
    assert pt.antiblocker_max("stab", c5, np.zeros(5)) == 0.0


def test_antiblocker_qstab_is_stab_of_complement():
    # abl(QSTAB(C5)) = STAB(co-C5): clique indicators are inside, a non-adjacent pair reaches 2
    c5 = eg.cycle_graph(5)
    for i in range(5):
        edge = np.zeros(5)
        edge[[i, (i + 1) % 5]] = 1
        assert pt.antiblocker_max("qstab", c5, edge) == pytest.approx(1.0, abs=1e-9)
        pair = np.zeros(5)
        pair[[i, (i + 2) % 5]] = 1
        assert pt.antiblocker_max("qstab", c5, pair) == pytest.approx(2.0, abs=1e-9)


@given(st.integers(0, 10_000))
def test_antiblocker_qstab_matches_stab_complement(seed):
    c5 = eg.cycle_graph(5)
    q = np.random.default_rng(seed).random(5)
    # max over QSTAB(G) of p.q <= 1  iff  q in STAB(co-G)
    inside = pt.antiblocker_max("qstab", c5, q) <= 1 + 1e-9
    assert inside == pt.in_stab(eg.complement(c5), q).member or \
        abs(pt.antiblocker_max("qstab", c5, q) - 1) < 1e-7


def test_max_uniform_in_stab():
    assert pt.max_uniform_in_stab(eg.cycle_graph(5)) == pytest.approx(0.4)
    assert pt.max_uniform_in_stab(eg.empty_graph(2)) == pytest.approx(1.0)
