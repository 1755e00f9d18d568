import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from exwb.scenario import Behaviour, Scenario, catalog_get, check_nondisturbance, check_normalization, chsh_value
from exwb import quantum as q

SQ2 = math.sqrt(2)


def _random_projective(seed, d=3, k=3):
    """Single measurement with k outcomes from a random unitary (QR of a Gaussian)."""
    rng = np.random.default_rng(seed)
    Z = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    U, _ = np.linalg.qr(Z)
    cuts = np.sort(rng.choice(np.arange(1, d), size=k - 1, replace=False)) if k > 1 else []
    parts = np.split(np.arange(d), cuts)
    s = Scenario.from_edges([("m", k)])
    projs = {("m", o): U[:, p] @ U[:, p].conj().T for o, p in enumerate(parts)}
    psi = rng.normal(size=d) + 1j * rng.normal(size=d)
    return s, q.Realization(d, psi / np.linalg.norm(psi), projs)


# -- realizations ------------------------------------------------------------

def test_tsirelson_realization_reaches_2sqrt2():
    s, r = q.tsirelson_realization()
    assert q.validate_realization(r, s).passed
    b = q.behaviour_from_realization(r, s)
    assert chsh_value(b) == pytest.approx(2 * SQ2, abs=1e-12)
    assert np.allclose(b.matrix(), catalog_get("tsirelson_chsh").matrix(), atol=1e-12)


def test_trivial_realization_is_deterministic():
    s = Scenario.chsh()
    b = q.behaviour_from_realization(q.trivial_realization(s), s)
    assert np.array_equal(b.matrix(), catalog_get("deterministic_chsh").matrix())


def test_noise_injection_detected():
    s, r = q.tsirelson_realization()
    projs = dict(r.projectors)
    projs[("x0", 0)] = projs[("x0", 0)] + 1e-4 * np.eye(4)
    bad = q.Realization(4, r.state, projs)
    rep = q.validate_realization(bad, s)
    assert not rep.passed
    assert rep.residuals["idempotence"] > 1e-8 and rep.residuals["completeness"] > 1e-8
    with pytest.raises(q.RealizationError):
        q.behaviour_from_realization(bad, s)


def test_commutation_failure_detected():
    # x0 = Z on the first qubit, y0 = X on the same qubit: compatible but not commuting
    s, r = q.tsirelson_realization()
    projs = dict(r.projectors)
    X = np.array([[0.0, 1.0], [1.0, 0.0]])
    for o, sg in ((0, 1.0), (1, -1.0)):
        projs[("y0", o)] = np.kron((np.eye(2) + sg * X) / 2, np.eye(2))
    rep = q.validate_realization(q.Realization(4, r.state, projs), s)
    assert rep.residuals["commutation"] > 0.1 and not rep.passed


def test_realization_shape_errors():
    with pytest.raises(q.RealizationError):
        q.Realization(2, np.ones(3), {})
    with pytest.raises(q.RealizationError):
        q.Realization(2, np.ones(2), {("a", 0): np.eye(3)})
    s = Scenario.from_edges([("a", 2)])
    with pytest.raises(q.RealizationError, match="a:1"):
        q.validate_realization(q.Realization(1, [1.0], {("a", 0): [[1.0]]}), s)


def test_realization_json_round_trip():
    s, r = q.tsirelson_realization()
    back = q.Realization.from_json(json.loads(json.dumps(r.to_json())))
    assert back.d == 4 and np.allclose(back.state, r.state)
    assert all(np.allclose(back.projectors[k], r.projectors[k]) for k in r.projectors)


def test_tensor_realizations_match_tensor_behaviours():
    from exwb.scenario import tensor_behaviours
    s, r = q.tsirelson_realization()
    s2, r2 = q.tensor_realizations(r, s, r, s)
    assert r2.d == 16 and q.validate_realization(r2, s2).passed
    b2 = q.behaviour_from_realization(r2, s2)
    ref = tensor_behaviours(catalog_get("tsirelson_chsh"), catalog_get("tsirelson_chsh"))
    assert b2.scenario == ref.scenario
    for c in ref.contexts:
        assert np.allclose(b2.table(c), ref.table(c), atol=1e-12)


@settings(max_examples=25)
@given(st.integers(0, 10_000))
def test_realized_behaviours_satisfy_axioms(seed):
    s, r = _random_projective(seed, d=4, k=3)
    b = q.behaviour_from_realization(r, s)
    assert check_normalization(b, 1e-9).passed
    assert check_nondisturbance(b, 1e-9).passed


def test_set_partitions_are_bell_numbers():
    assert [sum(1 for _ in q.set_partitions(range(n))) for n in range(6)] == [1, 1, 2, 5, 15, 52]


@settings(max_examples=25)
@given(st.integers(0, 10_000))
def test_coarse_graining_commutes(seed):
    # coarse-grain projectors then measure == measure then merge probabilities
    s, r = _random_projective(seed, d=4, k=3)
    b = q.behaviour_from_realization(r, s)
    parts = [p for p in q.set_partitions(range(3)) if len(p) >= 2]
    p = q.CoarseGrainingPartition("m", parts[seed % len(parts)])
    s_c, r_c = q.coarse_grain_projectors(r, s, p)
    assert q.validate_realization(r_c, s_c).passed
    lhs = q.behaviour_from_realization(r_c, s_c)
    rhs = q.coarse_grain_behaviour(b, p)
    assert np.allclose(lhs.matrix(), rhs.matrix(), atol=1e-12)


def test_coarse_graining_partition_validation():
    with pytest.raises(q.RealizationError):
        q.CoarseGrainingPartition("m", ((0,), ()))
    with pytest.raises(q.RealizationError, match="overlap"):
        q.CoarseGrainingPartition("m", ((0, 1), (1, 2))).validate(3)
    with pytest.raises(q.RealizationError, match="cover"):
        q.CoarseGrainingPartition("m", ((0,), (1,))).validate(3)


def test_added_coarse_grained_measurement_is_compatible():
    s, r = q.tsirelson_realization()
    s2, r2 = q.coarse_grain_projectors(r, s, q.CoarseGrainingPartition("x0", ((1,), (0,))), new_id="x0c")
    assert s2.are_compatible("x0", "x0c") and s2.are_compatible("y0", "x0c")
    assert q.validate_realization(r2, s2).passed
    # relabelling partition: new outcome 0 is old outcome 1
    assert np.allclose(r2.projector("x0c", 0), r.projector("x0", 1))


def test_check_ideal_on_projective_models():
    s, r = q.tsirelson_realization()
    rep = q.check_ideal(r, s)
    assert rep.passed and rep.partitions_checked > 0


def test_check_ideal_flags_non_projective_effects():
    # unsharp two-outcome effects are not repeatable
    s = Scenario.from_edges([("m", 2)])
    E = np.diag([0.8, 0.3])
    r = q.Realization(2, [1.0, 0.0], {("m", 0): E, ("m", 1): np.eye(2) - E})
    rep = q.check_ideal(r, s)
    assert not rep.passed and rep.repeatability > 0.1


def test_check_ideal_cap():
    s = Scenario.from_edges([("m", 9)])
    r = q.Realization(9, np.eye(9)[0], {("m", o): np.diag(np.eye(9)[o]) for o in range(9)})
    with pytest.raises(q.RealizationError, match="capped"):
        q.check_ideal(r, s)


# -- moment relaxation -------------------------------------------------------

def test_npa_pr_box_infeasible_at_level_one():
    pr = catalog_get("pr_box")
    res = q.npa_infeasibility(pr.scenario, pr, 1)
    assert res.status == "infeasible" and res.verify_certificate()
    assert res.to_json()["certificate"]["data"]["verified"]


@pytest.mark.parametrize("level", [1, "1+AB", 2])
def test_npa_tsirelson_feasible(level):
    ts = catalog_get("tsirelson_chsh")
    assert q.npa_infeasibility(ts.scenario, ts, level).status == "feasible"


def test_npa_almost_quantum_levels():
    # satisfies level 1+AB by construction, refuted at level 2
    aq = catalog_get("almost_quantum_chsh")
    assert q.npa_infeasibility(aq.scenario, aq, "1+AB").status == "feasible"
    res = q.npa_infeasibility(aq.scenario, aq, 2)
    assert res.status == "infeasible" and res.verify_certificate()


def test_npa_order_counts():
    s = Scenario.chsh()
    # identity plus one projector per measurement (last outcome dropped)
    assert q.MomentRelaxation.build(s, 1).order == 5
    assert q.MomentRelaxation.build(s, "1+AB").order == 9
    with pytest.raises(q.RelaxationError):
        q.MomentRelaxation.build(s, 7)


def test_npa_scenario_mismatch():
    with pytest.raises(q.RelaxationError):
        q.npa_infeasibility(Scenario.chsh(), catalog_get("specker_triangle"), 1)


@pytest.mark.parametrize("level", [1, 2])
def test_npa_chsh_bound_is_tsirelson(level):
    obj, const = q.chsh_objective()
    assert q.npa_max_linear(Scenario.chsh(), obj, level, const) == pytest.approx(2 * SQ2, abs=1e-5)


def _prob(b, ev):
    # marginal from the first context containing every measurement of ev
    for ctx in b.contexts:
        if set(ev) <= set(ctx.members):
            t = b.table(ctx).reshape(b.scenario.shape(ctx))
            idx = tuple(ev.get(m, slice(None)) for m in ctx.members)
            return float(np.sum(t[idx]))
    raise KeyError(ev)


def test_chsh_objective_reproduces_chsh_value():
    obj, const = q.chsh_objective()
    for name in ("pr_box", "tsirelson_chsh", "deterministic_chsh"):
        b = catalog_get(name)
        total = const + sum(c * _prob(b, ev) for ev, c in obj)
        assert total == pytest.approx(chsh_value(b), abs=1e-12)


# -- realization search ---------------------------------------------------------

def test_seesaw_deterministic_point_in_dimension_one():
    b = catalog_get("deterministic_chsh")
    res = q.seesaw_fit(b.scenario, b, 1, budget=10, restarts=2)
    assert res.distance < 1e-12
    assert q.validate_realization(res.realization, b.scenario).passed


def test_seesaw_tsirelson_in_dimension_four():
    b = catalog_get("tsirelson_chsh")
    res = q.seesaw_fit(b.scenario, b, 4, budget=60, restarts=6, seed=0)
    assert res.distance < 1e-6
    fit = q.behaviour_from_realization(res.realization, b.scenario)
    assert chsh_value(fit) == pytest.approx(2 * SQ2, abs=1e-5)


def test_seesaw_pr_box_stays_away():
    b = catalog_get("pr_box")
    res = q.seesaw_fit(b.scenario, b, 4, budget=30, restarts=4, seed=1)
    assert res.distance > 0.05


def test_seesaw_history_non_increasing_and_reproducible():
    b = catalog_get("tsirelson_chsh")
    r1 = q.seesaw_fit(b.scenario, b, 2, budget=20, restarts=3, seed=5)
    r2 = q.seesaw_fit(b.scenario, b, 2, budget=20, restarts=3, seed=5)
    assert all(y <= x + 1e-12 for x, y in itertools.pairwise(r1.history))
    assert r1.distance == r2.distance and r1.history == r2.history


def test_seesaw_rejects_bad_input():
    b = catalog_get("pr_box")
    with pytest.raises(ValueError):
        q.seesaw_fit(b.scenario, b, 0)
    with pytest.raises(q.RealizationError):
        q.seesaw_fit(Scenario.chsh(), catalog_get("specker_triangle"), 2)


@pytest.mark.slow
def test_seesaw_non_bell_scenario_validates():
    # Wright pentagon: compatibility is not a party split, so the penalty route is used
    b = catalog_get("wright_pentagon")
    res = q.seesaw_fit(b.scenario, b, 3, budget=20, restarts=2, seed=0)
    assert res.realization is not None
    assert q.validate_realization(res.realization, b.scenario).passed
    assert np.isfinite(res.distance)


@pytest.mark.slow
def test_constraint_c_pr_box_non_quantum():
    rep = q.constraintC_verdict(catalog_get("pr_box"), d_max=2, budget=20, restarts=2)
    assert rep.verdict == "non-quantum"
    assert rep.best_distance > 0.05
