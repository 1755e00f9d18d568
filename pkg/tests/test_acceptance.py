"""Acceptance criteria 1-11 at their stated tolerances and time limits.

Each test prints one ``criterion NN PASS/FAIL ...`` line straight to the
terminal (outside pytest's capture) so the run log carries the verdicts.
"""
import pytest

from exwb.polytope import warm_up
from exwb.suite import CRITERIA, SuiteConfig

CRITERION_11_REASON = ("literal reading is false: non-adjacent pairs of C5 reach 2 over QSTAB(C5); "
                       "the clique reading (abl(QSTAB) = STAB of the complement) is tested separately")


@pytest.fixture(scope="module", autouse=True)
def _compiled_kernels():
    # JIT compilation is not part of any criterion's time budget
    warm_up()


@pytest.fixture(scope="module")
def results():
    return {}


def _run(k, results, capsys):
    res = CRITERIA[k](SuiteConfig())
    results[k] = res
    with capsys.disabled():
        print("\n" + res.line())
        if not res.passed:
            print(f"    details: {res.details}")
    return res


@pytest.mark.parametrize("k", range(1, 11))
def test_criterion(k, results, capsys):
    res = _run(k, results, capsys)
    assert res.details.get("within_time_limit", True), f"runtime {res.seconds:.1f}s over {res.limit}s"
    assert res.passed, res.details


@pytest.mark.xfail(strict=True, reason=CRITERION_11_REASON)
def test_criterion_11_literal(results, capsys):
    res = _run(11, results, capsys)
    assert res.passed, res.details


def test_criterion_11_clique_reading(results, capsys):
    res = results.get(11) or _run(11, results, capsys)
    d = res.details
    assert d["literal_max"] == pytest.approx(2.0, abs=1e-9)
    assert sorted(d["literal_values"].values())[-1] == pytest.approx(2.0, abs=1e-9)
    # singletons and the empty set do satisfy the literal bound
    assert all(v <= 1 + 1e-9 for key, v in d["literal_values"].items() if key.count(",") == 0)
    assert d["clique_reading_holds"]
    assert max(d["clique_reading_values"].values()) == pytest.approx(1.0, abs=1e-9)
