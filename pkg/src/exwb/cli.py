"""Command-line front end.

Every command writes its artifacts plus ``manifest.json`` into ``--out``.
Exit codes: 0 success, 2 negative verdict (certificate written), 1 usage or
I/O error.  ``exwb replay manifest.json`` re-runs a command and compares the
artifact hashes.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import subprocess
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import exgraph as eg
from . import polytope as pt
from . import thetabody as tb
from .scenario import CATALOG, Behaviour, Scenario, check_nondisturbance, check_normalization, enumerate_contexts

log = logging.getLogger("exwb")

EXIT_OK, EXIT_ERROR, EXIT_NEGATIVE = 0, 1, 2


class UsageError(Exception):
    pass


@dataclass
class Outcome:
    """What a subcommand produced: exit code, artifacts and reproducibility data."""

    code: int = EXIT_OK
    artifacts: dict = field(default_factory=dict)  # file name -> JSON-able object or str
    summary: str = ""
    seeds: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)


# -- input helpers -------------------------------------------------------------

def _load_json(path: str):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}:{exc.lineno}:{exc.colno}: malformed JSON: {exc.msg}") from exc


def _sha256(path: str) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _behaviour(args) -> Behaviour | None:
    if getattr(args, "catalog", None):
        if args.catalog not in CATALOG:
            raise UsageError(f"unknown catalog entry {args.catalog!r}; choose from {', '.join(sorted(CATALOG))}")
        return CATALOG[args.catalog]()
    if getattr(args, "behaviour", None):
        try:
            return Behaviour.from_json(_load_json(args.behaviour))
        except ValueError as exc:
            raise UsageError(f"{args.behaviour}: {exc}") from exc
    return None


def _need_behaviour(args) -> Behaviour:
    b = _behaviour(args)
    if b is None:
        raise UsageError("give --catalog NAME or --behaviour FILE")
    return b


def _graph(path: str) -> eg.ExclusivityGraph:
    try:
        return eg.ExclusivityGraph.from_json(_load_json(path))
    except ValueError as exc:
        raise UsageError(f"{path}: {exc}") from exc


def _graph_and_weights(args, need_weights: bool = True):
    """Graph and weights from --graph/--weights or from a behaviour."""
    b = _behaviour(args)
    if b is not None:
        g = eg.exclusivity_graph(b.scenario)
        return g, eg.behaviour_to_weights(b, g), b
    if not args.graph:
        raise UsageError("give --graph FILE (with --weights FILE), --catalog NAME or --behaviour FILE")
    g = _graph(args.graph)
    if args.weights is None:
        if need_weights:
            raise UsageError("--weights FILE is required with --graph")
        return g, None, None
    try:
        w = eg.VertexWeights.from_json(_load_json(args.weights))
    except ValueError as exc:
        raise UsageError(f"{args.weights}: {exc}") from exc
    if len(w) != g.n:
        raise UsageError(f"{len(w)} weights for a graph with {g.n} vertices")
    return g, w, None


def _add_source(p, graph: bool = True):
    src = p.add_argument_group("input")
    src.add_argument("--catalog", choices=sorted(CATALOG), help="built-in behaviour")
    src.add_argument("--behaviour", metavar="FILE", help="behaviour JSON")
    if graph:
        src.add_argument("--graph", metavar="FILE", help="graph JSON {n, edges, labels?}")
        src.add_argument("--weights", metavar="FILE", help="weights JSON: list or {weights: [...]}")


# -- subcommands --------------------------------------------------------------

def cmd_scenario(args) -> Outcome:
    if args.action == "list":
        names = sorted(CATALOG)
        return Outcome(artifacts={"catalog.json": names}, summary="\n".join(names))
    if args.scenario:
        try:
            s = Scenario.from_json(_load_json(args.scenario))
        except ValueError as exc:
            raise UsageError(f"{args.scenario}: {exc}") from exc
        b = None
    else:
        b = _need_behaviour(args)
        s = b.scenario
    ctxs = [list(c.members) for c in enumerate_contexts(s)]
    if args.action == "show":
        arts = {"scenario.json": s.to_json(), "contexts.json": ctxs}
        if b is not None:
            arts["behaviour.json"] = b.to_json()
        return Outcome(artifacts=arts, summary=f"{len(s.ids)} measurements, {len(ctxs)} maximal contexts")
    if b is None:
        raise UsageError("scenario check needs a behaviour")
    norm = check_normalization(b, args.tol)
    nd = check_nondisturbance(b, args.tol)
    report = {"normalization": {"passed": norm.passed, "worst_deviation": norm.worst_deviation,
                                "worst_context": None if norm.worst_context is None else norm.worst_context.key},
              "nondisturbance": {"passed": nd.passed, "max_mismatch": nd.max_mismatch,
                                 "pairs_checked": nd.pairs_checked,
                                 "witnesses": [list(map(_jsonish, w)) for w in nd.witnesses]}}
    ok = norm.passed and nd.passed
    return Outcome(EXIT_OK if ok else EXIT_NEGATIVE, {"check.json": report},
                   f"normalization {'ok' if norm.passed else 'FAILED'}, "
                   f"non-disturbance {'ok' if nd.passed else 'FAILED'} (max mismatch {nd.max_mismatch:.3g})",
                   tolerances={"tol": args.tol})


def _jsonish(x):
    if hasattr(x, "key"):
        return x.key
    if isinstance(x, (tuple, list)):
        return [_jsonish(v) for v in x]
    return x


def cmd_exgraph(args) -> Outcome:
    arts = {}
    if args.action == "build":
        b = _behaviour(args)
        if b is not None:
            g = eg.exclusivity_graph(b.scenario)
            arts["weights.json"] = eg.behaviour_to_weights(b, g).to_json()
        elif args.scenario:
            try:
                g = eg.exclusivity_graph(Scenario.from_json(_load_json(args.scenario)))
            except ValueError as exc:
                raise UsageError(f"{args.scenario}: {exc}") from exc
        elif args.cycle:
            g = eg.cycle_graph(args.cycle)
        else:
            raise UsageError("give --catalog, --behaviour, --scenario or --cycle")
        summary = f"{g.n} vertices, {g.edge_count} edges"
    elif args.action == "h-embed":
        g = eg.h_embedding(_graph(args.graph))
        ok, phi = eg.is_self_complementary(g)
        witness = eg.h_embedding_witness(g.n // 4)
        verified = eg.verify_isomorphism(g, eg.complement(g), witness)
        arts["witness.json"] = {"self_complementary": ok, "verified": verified,
                                "mapping": [witness[v] for v in range(g.n)],
                                "search_mapping": None if phi is None else [phi[v] for v in range(g.n)]}
        summary = f"{g.n} vertices, {g.edge_count} edges, self-complementary witness verified: {verified}"
    elif args.action == "complement":
        g = eg.complement(_graph(args.graph))
        summary = f"{g.n} vertices, {g.edge_count} edges"
    elif args.action == "power":
        g = eg.or_power(_graph(args.graph), args.copies)
        summary = f"{g.n} vertices, {g.edge_count} edges"
    else:  # self-complementary
        g0 = _graph(args.graph)
        ok, phi = eg.is_self_complementary(g0)
        arts["witness.json"] = {"self_complementary": ok,
                                "mapping": None if phi is None else [phi[v] for v in range(g0.n)]}
        return Outcome(EXIT_OK if ok else EXIT_NEGATIVE, arts, f"self-complementary: {ok}")
    arts["graph.json"] = g.to_json()
    if args.dot:
        arts["graph.dot"] = g.to_dot()
    return Outcome(artifacts=arts, summary=summary)


def cmd_membership(args) -> Outcome:
    tols = {"tol": args.tol}
    if args.set == "local":
        b = _need_behaviour(args)
        v = pt.in_local_polytope(b)
        ok = pt.verify_local_certificate(b, v)
    elif args.set == "theta":
        g, w, _ = _graph_and_weights(args)
        tv = tb.in_theta_body(g, w)
        tols = {"feasible_tol": tb.FEASIBLE_TOL, "infeasible_margin": tb.INFEASIBLE_MARGIN}
        out = tv.to_json()
        arts = {"verdict.json": {"set": "theta", **{k: v for k, v in out.items() if k != "certificate"}}}
        if "certificate" in out:
            arts["certificate.json"] = out["certificate"]
        code = EXIT_NEGATIVE if tv.status == "non-member" else EXIT_OK
        return Outcome(code, arts, f"theta body: {tv.status}", tolerances=tols)
    else:
        g, w, _ = _graph_and_weights(args)
        if args.set == "stab":
            v = pt.in_stab(g, w, args.tol)
        elif args.set == "qstab" and args.copies == 1:
            v = pt.in_qstab(g, w, args.tol)
        else:
            try:
                v = pt.in_E_n(g, w, args.copies, args.tol, exact=args.exact)
            except eg.CapExceeded as exc:
                raise UsageError(str(exc)) from exc
        ok = pt.verify_verdict("stab" if args.set == "stab" else "E_n", g, w, v, args.tol)
    out = v.to_json()
    verdict = {"set": args.set, "copies": args.copies, "member": v.member, "value": out["value"],
               "details": out["details"], "certificate_reverified": ok}
    name = "certificate.json"
    code = EXIT_OK if v.member else EXIT_NEGATIVE
    return Outcome(code, {"verdict.json": verdict, name: out["certificate"]},
                   f"{args.set}{'' if args.copies == 1 else f' ({args.copies} copies)'}: "
                   f"{'member' if v.member else 'non-member'}; certificate {out['certificate']['type']}",
                   tolerances=tols)


def cmd_theta(args) -> Outcome:
    g, w, _ = _graph_and_weights(args, need_weights=False)
    arts = {}
    lines = []
    code = EXIT_OK
    c = np.ones(g.n) if args.objective is None else np.asarray(_load_json(args.objective), dtype=float)
    opt = tb.max_linear_over_theta(g, c)
    arts["theta.json"] = {"value": opt.value, "weights": opt.weights, "gap": opt.gap, "status": opt.status,
                          "objective": c.tolist()}
    lines.append(f"max c.p over TH = {opt.value:.9f}")
    if w is not None:
        tv = tb.in_theta_body(g, w)
        arts["membership.json"] = tv.to_json()
        lines.append(f"weights: {tv.status}")
        if tv.status == "non-member":
            code = EXIT_NEGATIVE
    if args.sandwich:
        try:
            rep = tb.sandwich_report(g, args.sandwich)
        except eg.GraphError as exc:
            raise UsageError(str(exc)) from exc
        arts["sandwich.json"] = rep.to_json()
        lines.append(f"sandwich l1={rep.lower:.6g} t={rep.theta:.6g} "
                     + " ".join(f"u{k}={v:.6g}" for k, v in sorted(rep.upper.items())))
    if args.duality:
        try:
            rep = tb.antiblocker_duality_check(g, args.duality, args.seed)
        except eg.GraphError as exc:
            raise UsageError(str(exc)) from exc
        arts["duality.json"] = rep.to_json()
        lines.append(f"antiblocker duality max {rep.max_value:.6g} ({'ok' if rep.passed else 'FAILED'})")
    return Outcome(code, _plain(arts), "\n".join(lines), {"duality": args.seed},
                   {"feasible_tol": tb.FEASIBLE_TOL, "infeasible_margin": tb.INFEASIBLE_MARGIN})


def cmd_quantum(args) -> Outcome:
    from .quantum import npa, seesaw

    b = _need_behaviour(args)
    level = args.level if args.level == "1+AB" else int(args.level)
    if args.npa_only:
        r = npa.npa_infeasibility(b.scenario, b, level)
        out = r.to_json()
        code = EXIT_NEGATIVE if r.status == "infeasible" else EXIT_OK
        arts = {"npa.json": {k: v for k, v in out.items() if k != "certificate"}}
        if "certificate" in out:
            arts["certificate.json"] = out["certificate"]
        return Outcome(code, arts, f"moment relaxation level {level}: {r.status}",
                       tolerances={"feasible_tol": npa.FEASIBLE_TOL, "infeasible_margin": npa.INFEASIBLE_MARGIN})
    rep = seesaw.constraintC_verdict(b, d_max=args.dim, level=level, budget=args.budget, seed=args.seed,
                                     restarts=args.restarts)
    out = rep.to_json()
    arts = {"verdict.json": {"verdict": rep.verdict, "best_distance": rep.best_distance, "tol": rep.tol,
                             "npa": {k: {kk: vv for kk, vv in v.items() if kk != "certificate"}
                                     for k, v in out["npa"].items()},
                             "seesaw": {k: {kk: vv for kk, vv in v.items() if kk != "realization"}
                                        for k, v in out["seesaw"].items()}}}
    if rep.verdict == "non-quantum":
        arts["certificate.json"] = {str(k): v["certificate"] for k, v in out["npa"].items() if "certificate" in v}
    best = min(rep.seesaw.values(), key=lambda r: r.distance)
    if best.realization is not None:
        arts["realization.json"] = best.to_json()["realization"]
    code = EXIT_NEGATIVE if rep.verdict == "non-quantum" else EXIT_OK
    return Outcome(code, _plain(arts), f"constraint (C): {rep.verdict} (best see-saw distance {rep.best_distance:.3g})",
                   {"seesaw": args.seed}, {"quantum_tol": rep.tol, "npa_feasible_tol": npa.FEASIBLE_TOL,
                                           "npa_infeasible_margin": npa.INFEASIBLE_MARGIN})


def cmd_paper_suite(args) -> Outcome:
    from .suite import SuiteConfig, paper_suite

    overrides = {}
    for item in args.override or []:
        name, _, path = item.partition("=")
        if name not in CATALOG or not path:
            raise UsageError(f"--override expects NAME=FILE with NAME in the catalog, got {item!r}")
        data = _load_json(path)
        try:
            fixed = Behaviour.from_json(data)
        except ValueError as exc:
            raise UsageError(f"{path}: {exc}") from exc
        overrides[name] = lambda fixed=fixed: fixed
    cfg = SuiteConfig(tol_scale=args.tol_scale, catalog=overrides, seed=args.seed)
    results = paper_suite(None, cfg, args.only)
    arts = {f"criterion_{r.number:02d}.json": r.to_json(timing=False) for r in results}
    arts["summary.json"] = [{"number": r.number, "title": r.title, "passed": r.passed, "limit": r.limit}
                            for r in results]
    failed = [r.number for r in results if not r.passed]
    lines = [r.line() for r in results]
    lines.append(f"{len(results) - len(failed)}/{len(results)} criteria passed"
                 + (f"; failed: {failed}" if failed else ""))
    return Outcome(EXIT_NEGATIVE if failed else EXIT_OK, arts, "\n".join(lines), {"suite": args.seed},
                   {"tol_scale": args.tol_scale, "theta_feasible_tol": tb.FEASIBLE_TOL * args.tol_scale})


def _plain(obj):
    from .suite import _plain as plain
    return plain(obj)


# -- driver ---------------------------------------------------------------------

FILE_FLAGS = ("--behaviour", "--graph", "--weights", "--scenario", "--objective")


def _absolutize(argv: list[str]) -> tuple[list[str], dict]:
    """Input paths made absolute (for replay) and their hashes."""
    out, hashes = [], {}
    i = 0
    while i < len(argv):
        a = argv[i]
        flag, eq, val = a.partition("=")
        if flag in FILE_FLAGS and eq:
            p = str(Path(val).resolve())
            out.append(f"{flag}={p}")
            hashes[p] = _sha256(p) if Path(p).is_file() else None
        elif a in FILE_FLAGS and i + 1 < len(argv):
            p = str(Path(argv[i + 1]).resolve())
            out += [a, p]
            hashes[p] = _sha256(p) if Path(p).is_file() else None
            i += 1
        elif a == "--override" and i + 1 < len(argv):
            name, _, path = argv[i + 1].partition("=")
            p = str(Path(path).resolve())
            out += [a, f"{name}={p}"]
            hashes[p] = _sha256(p) if Path(p).is_file() else None
            i += 1
        else:
            out.append(a)
        i += 1
    return out, hashes


def _strip_out(argv: list[str]) -> list[str]:
    out, skip = [], False
    for a in argv:
        if skip:
            skip = False
            continue
        if a == "--out":
            skip = True
            continue
        if a.startswith("--out="):
            continue
        out.append(a)
    return out


ARTIFACT_DIGITS = 12


def _rounded(obj):
    """Floats cut to ``ARTIFACT_DIGITS`` significant digits.

    The last bits of BLAS kernels can depend on memory alignment, so repeated
    runs inside one process may differ in the final ulp.
    """
    if isinstance(obj, float):
        return float(f"{obj:.{ARTIFACT_DIGITS}g}")
    if isinstance(obj, dict):
        return {k: _rounded(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_rounded(v) for v in obj]
    return obj


def _write(out_dir: Path, outcome: Outcome, argv: list[str], hashes: dict) -> dict:
    out_dir.mkdir(parents=True, exist_ok=True)
    digests = {}
    for name, obj in sorted(outcome.artifacts.items()):
        text = obj if isinstance(obj, str) else json.dumps(_rounded(_plain(obj)), sort_keys=True, indent=1) + "\n"
        (out_dir / name).write_text(text)
        digests[name] = hashlib.sha256(text.encode()).hexdigest()
    manifest = {"command": argv, "inputs": hashes, "seeds": outcome.seeds, "tolerances": outcome.tolerances,
                "version": __version__, "exit_code": outcome.code, "artifacts": digests,
                "threads": os.environ.get("EXWB_THREADS", "1")}
    (out_dir / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=1) + "\n")
    return manifest


def cmd_replay(args) -> Outcome:
    m = _load_json(args.manifest)
    try:
        argv, want = list(m["command"]), dict(m["artifacts"])
    except (KeyError, TypeError) as exc:
        raise UsageError(f"{args.manifest}: not a run manifest") from exc
    for p, h in (m.get("inputs") or {}).items():
        if h is not None and (not Path(p).is_file() or _sha256(p) != h):
            raise UsageError(f"input {p} is missing or changed since the recorded run")
    with tempfile.TemporaryDirectory() as tmp:
        # a fresh interpreter, like the recorded run
        code = subprocess.run([sys.executable, "-m", "exwb", *argv, "--out", tmp, "--quiet"]).returncode
        got = json.loads((Path(tmp) / "manifest.json").read_text())["artifacts"] if code != EXIT_ERROR else {}
    diff = sorted(k for k in set(want) | set(got) if want.get(k) != got.get(k))
    report = {"manifest": str(Path(args.manifest).resolve()), "identical": not diff, "differing": diff,
              "exit_code": code, "recorded_exit_code": m.get("exit_code")}
    return Outcome(EXIT_OK if not diff else EXIT_NEGATIVE, {"replay.json": report},
                   "replay identical" if not diff else f"replay differs in {diff}")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="exwb", description="Exclusivity-graph correlation workbench.")
    ap.add_argument("--version", action="version", version=f"exwb {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", default="exwb-out", help="artifact directory (default: exwb-out)")
        p.add_argument("--quiet", action="store_true", help="suppress the summary on stdout")
        p.add_argument("-v", "--verbose", action="count", default=0)

    p = sub.add_parser("scenario", help="inspect or check scenarios and behaviours")
    p.add_argument("action", choices=["list", "show", "check"])
    _add_source(p, graph=False)
    p.add_argument("--scenario", metavar="FILE", help="scenario JSON")
    p.add_argument("--tol", type=float, default=1e-9)
    common(p)
    p.set_defaults(func=cmd_scenario)

    p = sub.add_parser("exgraph", help="build and transform exclusivity graphs")
    p.add_argument("action", choices=["build", "h-embed", "complement", "power", "self-complementary"])
    _add_source(p, graph=False)
    p.add_argument("--scenario", metavar="FILE")
    p.add_argument("--graph", metavar="FILE")
    p.add_argument("--cycle", type=int, metavar="N", help="cycle graph C_N")
    p.add_argument("--copies", type=int, default=2, help="OR power exponent")
    p.add_argument("--dot", action="store_true", help="also write graph.dot")
    common(p)
    p.set_defaults(func=cmd_exgraph)

    p = sub.add_parser("membership", help="decide membership in QSTAB, STAB, TH, the local polytope or E^n")
    p.add_argument("--set", required=True, choices=["qstab", "stab", "theta", "local", "E"])
    _add_source(p)
    p.add_argument("--copies", type=int, default=1)
    p.add_argument("--exact", action="store_true", help="report the exact max clique weight")
    p.add_argument("--tol", type=float, default=pt.EP_TOL)
    common(p)
    p.set_defaults(func=cmd_membership)

    p = sub.add_parser("theta", help="theta body optimum, membership, sandwich and duality checks")
    _add_source(p)
    p.add_argument("--objective", metavar="FILE", help="nonnegative objective vector (default all ones)")
    p.add_argument("--sandwich", type=int, metavar="N", help="uniform-ray sandwich up to N copies")
    p.add_argument("--duality", type=int, metavar="SAMPLES", help="antiblocker duality check")
    p.add_argument("--seed", type=int, default=0)
    common(p)
    p.set_defaults(func=cmd_theta)

    p = sub.add_parser("quantum", help="constraint (C): see-saw search plus moment relaxation")
    _add_source(p, graph=False)
    p.add_argument("--dim", type=int, default=6, help="largest Hilbert-space dimension tried")
    p.add_argument("--level", default="2", choices=["1", "2", "1+AB"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--budget", type=int, default=60, help="see-saw iterations per restart")
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--npa-only", action="store_true", help="only run the moment relaxation at --level")
    p.add_argument("--threads", type=int, help="sets EXWB_THREADS")
    common(p)
    p.set_defaults(func=cmd_quantum)

    p = sub.add_parser("paper-suite", help="run the acceptance criteria and write their artifacts")
    p.add_argument("--only", type=int, nargs="+", metavar="K")
    p.add_argument("--tol-scale", type=float, default=1.0, help="scale SDP tolerances (0.1 = ten times tighter)")
    p.add_argument("--override", action="append", metavar="NAME=FILE", help="replace a catalog behaviour")
    p.add_argument("--seed", type=int, default=0)
    common(p)
    p.set_defaults(func=cmd_paper_suite)

    p = sub.add_parser("replay", help="re-run a manifest and compare artifact hashes")
    p.add_argument("manifest")
    common(p)
    p.set_defaults(func=cmd_replay)
    return ap


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:  # argparse already printed the message
        return EXIT_OK if exc.code == 0 else EXIT_ERROR
    logging.basicConfig(level=[logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)],
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "threads", None):
        os.environ["EXWB_THREADS"] = str(args.threads)
    try:
        recorded, hashes = _absolutize(_strip_out(argv))
        outcome = args.func(args)
        _write(Path(args.out), outcome, recorded, hashes)
    except UsageError as exc:
        print(f"exwb: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"exwb: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if not args.quiet and outcome.summary:
        print(outcome.summary)
        print(f"artifacts: {args.out}")
    return outcome.code


if __name__ == "__main__":
    sys.exit(main())
