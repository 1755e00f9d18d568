import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import linprog

from exwb.numerics import (LinearProgram, LPError, SDPError, SemidefiniteProgram, min_eigenvalue, solve_lp,
                           solve_sdp)


def test_lp_trivial_max():
    r = solve_lp(LinearProgram([1.0], A_ub=[[1.0]], b_ub=[1.0], maximize=True))
    assert r.status == "optimal"
    assert r.value == pytest.approx(1.0, abs=1e-12)
    assert r.dual_value == pytest.approx(1.0, abs=1e-12)


def test_lp_infeasible_with_farkas():
    r = solve_lp(LinearProgram([0.0], A_ub=[[1.0], [-1.0]], b_ub=[0.0, -1.0]))
    assert r.status == "infeasible"
    assert r.farkas is not None and r.farkas.verify()


def test_lp_unbounded():
    assert solve_lp(LinearProgram([1.0], maximize=True)).status == "unbounded"


def test_lp_dimension_mismatch():
    with pytest.raises(LPError):
        LinearProgram([1.0, 2.0], A_ub=[[1.0]], b_ub=[1.0])


def test_lp_stab_c5_uniform_direction():
    # max over independent sets of C5 of q.chi with q = 1/2: pairs give 1
    sets = [()] + [(i,) for i in range(5)] + [(i, (i + 2) % 5) for i in range(5)]
    X = np.zeros((len(sets), 5))
    for k, s in enumerate(sets):
        X[k, list(s)] = 1
    q = np.full(5, 0.5)
    r = solve_lp(LinearProgram(X @ q, A_eq=np.ones((1, len(sets))), b_eq=[1.0], maximize=True))
    assert r.value == pytest.approx(1.0, abs=1e-12)


def test_lp_degenerate_cycling_example():
    # Beale's example: cycles under the textbook largest-coefficient rule
    c = [-0.75, 150, -0.02, 6]
    A = [[0.25, -60, -0.04, 9], [0.5, -90, -0.02, 3], [0, 0, 1, 0]]
    b = [0, 0, 1]
    r = solve_lp(LinearProgram(c, A_ub=A, b_ub=b))
    assert r.status == "optimal"
    assert r.value == pytest.approx(-0.05, abs=1e-12)


@given(st.integers(0, 100_000))
def test_lp_matches_scipy_and_strong_duality(seed):
    rng = np.random.default_rng(seed)
    m, n = int(rng.integers(1, 6)), int(rng.integers(1, 6))
    A = rng.normal(size=(m, n))
    b = rng.uniform(0.1, 2.0, size=m)  # x = 0 feasible
    c = rng.normal(size=n)
    bounds = [(0, 3)] * n  # bounded, so an optimum exists
    ours = solve_lp(LinearProgram(c, A_ub=A, b_ub=b, bounds=bounds))
    ref = linprog(c, A_ub=A, b_ub=b, bounds=bounds, method="highs")
    assert ours.status == "optimal"
    assert ours.value == pytest.approx(ref.fun, abs=1e-8)
    assert abs(ours.value - ours.dual_value) <= 1e-9 * (1 + abs(ours.value))


def test_lp_deterministic():
    rng = np.random.default_rng(3)
    A, b, c = rng.normal(size=(4, 5)), rng.uniform(1, 2, 4), rng.normal(size=5)
    r1 = solve_lp(LinearProgram(c, A_ub=A, b_ub=b, bounds=[(0, 1)] * 5))
    r2 = solve_lp(LinearProgram(c, A_ub=A, b_ub=b, bounds=[(0, 1)] * 5))
    assert np.array_equal(r1.x, r2.x) and r1.value == r2.value


def _unit(m, i, j):
    a = np.zeros((m, m))
    a[i, j] += 0.5
    a[j, i] += 0.5
    return a


def test_sdp_feasible_point():
    r = solve_sdp(SemidefiniteProgram(3, [_unit(3, 0, 0)], [1.0]))
    assert r.status == "feasible"
    assert r.matrix[0, 0] == pytest.approx(1.0, abs=1e-7)
    assert min_eigenvalue(r.matrix) >= -1e-7


def test_sdp_infeasible_certificate():
    r = solve_sdp(SemidefiniteProgram(2, [_unit(2, 0, 0)], [-1.0]))
    assert r.status == "infeasible"
    assert r.certificate.verify()


def test_sdp_pentagon_theta():
    # Gram form: max sum M_ii, M_00 = 1, M_ii = M_0i, edge zeros
    m = 6
    A, b = [_unit(m, 0, 0)], [1.0]
    for i in range(1, 6):
        A.append(_unit(m, i, i) - _unit(m, 0, i))
        b.append(0.0)
    for i in range(5):
        A.append(_unit(m, 1 + i, 1 + (i + 1) % 5))
        b.append(0.0)
    C = np.diag([0.0] + [1.0] * 5)
    r = solve_sdp(SemidefiniteProgram(m, A, b, C))
    assert r.value == pytest.approx(math.sqrt(5), abs=1e-4)
    assert r.gap <= 1e-6 * (1 + abs(r.value))
    assert min_eigenvalue(r.matrix) >= -1e-7


def test_sdp_rejects_nonsymmetric():
    with pytest.raises(SDPError):
        SemidefiniteProgram(2, [np.array([[0.0, 1.0], [0.0, 0.0]])], [0.0])
    with pytest.raises(SDPError):
        SemidefiniteProgram(600, [], [])


def test_sdp_deterministic():
    A = [_unit(3, 0, 0), _unit(3, 0, 1)]
    r1 = solve_sdp(SemidefiniteProgram(3, A, [1.0, 0.3], np.eye(3)))
    r2 = solve_sdp(SemidefiniteProgram(3, A, [1.0, 0.3], np.eye(3)))
    assert np.array_equal(r1.matrix, r2.matrix)


@given(st.integers(0, 10_000))
def test_sdp_returned_matrices_psd(seed):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(2, 6))
    X = rng.normal(size=(m, m))
    M0 = X @ X.T  # a feasible point fixes the targets
    A = [_unit(m, i, j) for i in range(m) for j in range(i, m) if rng.random() < 0.4] or [_unit(m, 0, 0)]
    b = [float(np.sum(a * M0)) for a in A]
    r = solve_sdp(SemidefiniteProgram(m, A, b))
    assert r.status == "feasible"
    assert min_eigenvalue(r.matrix) >= -1e-7
    assert max(abs(np.sum(a * r.matrix) - t) for a, t in zip(A, b)) <= 1e-6 * (1 + np.abs(M0).max())


@pytest.mark.parametrize("seed", [1, 779])
def test_sdp_free_diagonal_regressions(seed):
    # constraints leave diagonal entries free: once non-convergent (779) or stopped early (1)
    rng = np.random.default_rng(seed)
    m = int(rng.integers(2, 6))
    X = rng.normal(size=(m, m))
    M0 = X @ X.T
    A = [_unit(m, i, j) for i in range(m) for j in range(i, m) if rng.random() < 0.4] or [_unit(m, 0, 0)]
    b = [float(np.sum(a * M0)) for a in A]
    r = solve_sdp(SemidefiniteProgram(m, A, b))
    assert r.status == "feasible" and r.info["solver_status"] == "optimal"
    assert r.info["constraint_residual"] <= 1e-9


def test_sdp_off_diagonal_only_infeasible():
    # |M_01| <= sqrt(M_00 M_11) with M_00 = M_11 = 1 forbids M_01 = 2
    A = [_unit(2, 0, 0), _unit(2, 1, 1), _unit(2, 0, 1)]
    r = solve_sdp(SemidefiniteProgram(2, A, [1.0, 1.0, 2.0]))
    assert r.status == "infeasible" and r.certificate.verify()
