import json
import subprocess
import sys

import pytest

from exwb import exgraph as eg
from exwb.cli import main
from exwb.scenario import catalog_get


def run(tmp_path, *argv, out="out"):
    return main([*argv, "--out", str(tmp_path / out), "--quiet"])


def load(tmp_path, name, out="out"):
    return json.loads((tmp_path / out / name).read_text())


@pytest.fixture
def c5_files(tmp_path):
    g = tmp_path / "c5.json"
    g.write_text(json.dumps(eg.cycle_graph(5).to_json()))
    w = tmp_path / "w.json"
    w.write_text(json.dumps([0.4] * 5))
    return g, w


def test_module_entry_point_help():
    r = subprocess.run([sys.executable, "-m", "exwb", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "paper-suite" in r.stdout


def test_scenario_list_and_check(tmp_path):
    assert run(tmp_path, "scenario", "list") == 0
    assert "pr_box" in load(tmp_path, "catalog.json")
    assert run(tmp_path, "scenario", "check", "--catalog", "pr_box") == 0
    assert load(tmp_path, "check.json")["nondisturbance"]["passed"]


def test_scenario_check_signalling_exits_2(tmp_path):
    path = tmp_path / "sig.json"
    path.write_text(json.dumps(_signalling_behaviour()))
    assert run(tmp_path, "scenario", "check", "--behaviour", str(path)) == 2


def _signalling_behaviour():
    from exwb.scenario import Behaviour, Scenario
    s = Scenario.chsh()
    return Behaviour.from_rows(s, [[1, 0, 0, 0], [0, 0, 0, 1], [0.25] * 4, [0.25] * 4]).to_json()


def test_exgraph_build_and_h_embed(tmp_path, c5_files):
    assert run(tmp_path, "exgraph", "build", "--catalog", "pr_box", "--dot") == 0
    g = load(tmp_path, "graph.json")
    assert g["n"] == 16 and len(g["edges"]) == 56
    assert (tmp_path / "out" / "graph.dot").read_text().startswith("graph G {")
    c7 = tmp_path / "c7.json"
    c7.write_text(json.dumps(eg.cycle_graph(7).to_json()))
    assert run(tmp_path, "exgraph", "h-embed", "--graph", str(c7), out="h") == 0
    assert load(tmp_path, "graph.json", "h")["n"] == 28
    assert load(tmp_path, "witness.json", "h")["verified"]
    assert run(tmp_path, "exgraph", "self-complementary", "--graph", str(c7), out="sc") == 2


def test_membership_exit_codes(tmp_path, c5_files):
    g, w = c5_files
    assert run(tmp_path, "membership", "--set", "stab", "--graph", str(g), "--weights", str(w)) == 0
    v = load(tmp_path, "verdict.json")
    assert v["member"] and v["certificate_reverified"]
    assert run(tmp_path, "membership", "--set", "qstab", "--copies", "2", "--catalog", "pr_box", out="pr") == 2
    assert load(tmp_path, "certificate.json", "pr")["type"] == "clique-violation"
    assert run(tmp_path, "membership", "--set", "local", "--catalog", "pr_box", out="loc") == 2
    assert run(tmp_path, "membership", "--set", "theta", "--catalog", "tsirelson_chsh", out="th") == 0


def test_theta_command(tmp_path, c5_files):
    g, _ = c5_files
    assert run(tmp_path, "theta", "--graph", str(g), "--sandwich", "2") == 0
    assert load(tmp_path, "theta.json")["value"] == pytest.approx(5 ** 0.5, abs=1e-4)
    sw = load(tmp_path, "sandwich.json")
    assert sw["passed"]


def test_malformed_json_reports_position(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"n": 3, "edges": [[0, 1],, ]}')
    assert run(tmp_path, "exgraph", "complement", "--graph", str(bad)) == 1
    err = capsys.readouterr().err
    assert f"{bad}:1:" in err and "malformed JSON" in err


def test_missing_input_and_bad_flags(tmp_path, capsys):
    assert run(tmp_path, "membership", "--set", "stab") == 1
    assert run(tmp_path, "exgraph", "complement", "--graph", str(tmp_path / "nope.json")) == 1
    assert main(["membership", "--set", "nonsense"]) == 1
    assert run(tmp_path, "paper-suite", "--override", "not_a_name=x.json") == 1


def test_manifest_and_replay(tmp_path, c5_files):
    g, w = c5_files
    assert run(tmp_path, "membership", "--set", "E", "--copies", "2", "--graph", str(g), "--weights", str(w)) == 0
    m = load(tmp_path, "manifest.json")
    assert set(m) >= {"command", "inputs", "seeds", "tolerances", "version", "exit_code", "artifacts", "threads"}
    assert "--out" not in m["command"]
    assert str(g.resolve()) in m["inputs"] and m["inputs"][str(g.resolve())]
    assert run(tmp_path, "replay", str(tmp_path / "out" / "manifest.json"), out="rp") == 0
    assert load(tmp_path, "replay.json", "rp")["identical"]


def test_replay_detects_changed_input(tmp_path, c5_files):
    g, w = c5_files
    run(tmp_path, "membership", "--set", "stab", "--graph", str(g), "--weights", str(w))
    w.write_text(json.dumps([0.45] * 5))
    assert run(tmp_path, "replay", str(tmp_path / "out" / "manifest.json"), out="rp") == 1


def _cli(*argv):
    return subprocess.run([sys.executable, "-m", "exwb", *argv, "--quiet"], capture_output=True).returncode


def test_artifacts_byte_identical_across_runs(tmp_path):
    # separate interpreters: BLAS low bits may vary with allocation state inside one process
    args = ("quantum", "--catalog", "tsirelson_chsh", "--dim", "4", "--restarts", "2", "--budget", "20")
    assert _cli(*args, "--out", str(tmp_path / "a")) == _cli(*args, "--out", str(tmp_path / "b")) == 0
    for name in ("verdict.json", "realization.json", "manifest.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_quantum_npa_only(tmp_path):
    assert run(tmp_path, "quantum", "--catalog", "pr_box", "--npa-only", "--level", "1") == 2
    assert load(tmp_path, "certificate.json")["data"]["verified"]
    assert run(tmp_path, "quantum", "--catalog", "tsirelson_chsh", "--npa-only", out="t") == 0


def test_paper_suite_fault_injection(tmp_path):
    # a signalling "PR box" must fail only the criterion that uses it
    bad = tmp_path / "pr.json"
    bad.write_text(json.dumps(_signalling_behaviour()))
    code = run(tmp_path, "paper-suite", "--only", "1", "4", "5", "--override", f"pr_box={bad}")
    assert code == 2
    summary = {r["number"]: r["passed"] for r in load(tmp_path, "summary.json")}
    assert summary == {1: True, 4: False, 5: True}


def test_paper_suite_tighter_tolerances(tmp_path):
    assert run(tmp_path, "paper-suite", "--only", "5", "6", "--tol-scale", "0.1") == 0
    assert all(r["passed"] for r in load(tmp_path, "summary.json"))
    assert load(tmp_path, "manifest.json")["tolerances"]["tol_scale"] == 0.1
