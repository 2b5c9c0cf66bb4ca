"""pps-lab command line.

    pps-lab abl SCENARIO...
    pps-lab verdict SCENARIO... [--max-closure N] [--jobs N]
    pps-lab weak SCENARIO [--op SPEC]...
    pps-lab decompose SPEC
    pps-lab model MODEL [SCENARIO] [--check NAME]

SCENARIO and MODEL are file paths or built-in fixture names. Exit codes for
``verdict``: 0 Consistent, 10 LogicalParadox, 11 AlgebraicViolationOnly,
2 error. Other commands exit 0 on success, 1 when a model check fails and
2 on error.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .channels import mixture_decomposition
from .errors import PostselectionImpossible, PPSLabError, ParseError
from .feasibility import VerdictKind, paradox_verdict, replay_witness
from .fileio import _operator_spec, parse_matrix, resolve_model, resolve_scenario
from .ontmodel import (
    check_coarse_graining,
    check_mixing,
    check_operator_consistency,
    check_outcome_determinism,
    check_possibilistic_disturbance,
    classify_violation,
    reproduces_born,
)
from .palgebra import DEFAULT_MAX_SIZE
from .pps import Scenario, abl, is_anomalous, round_binary, weak_value
from .qcore import Tolerances, basis_projector

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_ERROR = 2
CHECKS = ("all", "born", "coarse", "mix", "determinism", "disturbance", "classify")


def fmt(x: float) -> str:
    """12 significant digits; float noise below 1e-14 prints as 0."""
    if abs(x) < 1e-14:
        return "0"
    s = f"{x:.12g}"
    return "0" if s == "-0" else s


def _tolerances(args) -> Tolerances:
    if args.tol is not None:
        return Tolerances.uniform(args.tol)
    return Tolerances.from_env()


# --- abl -----------------------------------------------------------------------

def abl_report(s: Scenario, tol: Tolerances) -> dict:
    rows = []
    for label, p, ctx in zip(s.labels, s.generators, s.contexts):
        try:
            v = abl(s.pre, p, s.post, tol, measurement=ctx, label=label)
        except PostselectionImpossible as exc:
            rows.append({"label": label, "raw": None, "rounded": None, "binary": False, "error": str(exc)})
            continue
        r = round_binary(v, tol)
        rows.append({"label": label, "raw": v, "rounded": r, "binary": r is not None})
    return {"scenario": s.name, "abl": rows}


def _abl_lines(rep: dict) -> list[str]:
    out = [f"scenario: {rep['scenario'] or '(unnamed)'}"]
    width = max(len(r["label"]) for r in rep["abl"])
    for r in rep["abl"]:
        if r["raw"] is None:
            out.append(f"  {r['label']:<{width}}  undefined  PostselectionImpossible: {r['error']}")
        else:
            shown = str(r["rounded"]) if r["binary"] else fmt(r["raw"])
            out.append(f"  {r['label']:<{width}}  {shown:<14}  raw={fmt(r['raw'])}  binary={'yes' if r['binary'] else 'no'}")
    return out


def cmd_abl(args) -> int:
    tol = _tolerances(args)
    reports = [abl_report(resolve_scenario(f, tol), tol) for f in args.scenarios]
    _emit(args, reports, _abl_lines)
    undefined = any(r["raw"] is None for rep in reports for r in rep["abl"])
    return EXIT_ERROR if undefined else EXIT_OK


# --- verdict ---------------------------------------------------------------------

def verdict_report(s: Scenario, max_size: int, tol: Tolerances) -> dict:
    v = paradox_verdict(s, max_size, tol)
    rep = abl_report(s, tol)
    rep.update(
        verdict=v.kind.value,
        exit_code=v.kind.exit_code,
        proof_of_contextuality=v.is_proof_of_contextuality,
        closure_size=v.algebra.size,
        algebra=list(v.algebra.labels),
        constraint_count=len(v.constraints.nontrivial()),
        overlap=v.scenario_report.overlap,
        timing=v.timing,
    )
    if v.witness is not None:
        rep["witness"] = {
            "kind": v.witness.kind,
            "summary": v.witness.summary,
            "steps": [{"kind": st.kind, "text": st.text, "provenance": st.provenance} for st in v.witness.steps],
            "replays": replay_witness(v.constraints, v.witness),
        }
    if v.assignment is not None:
        rep["assignment"] = {lab: float(x) for lab, x in zip(v.algebra.labels, v.assignment)}
    if not v.scenario_report.orthogonal:
        rep["weak"] = [{"label": lab, "value": weak_value(s.pre, p, s.post, tol)}
                       for lab, p in zip(s.labels, s.generators)]
    return rep


def _verdict_job(arg: str, max_size: int, tol: Tolerances) -> dict:
    try:
        return verdict_report(resolve_scenario(arg, tol), max_size, tol)
    except (PPSLabError, OSError, ValueError) as exc:
        return {"scenario": arg, "error": f"{type(exc).__name__}: {exc}", "exit_code": EXIT_ERROR}


def _verdict_lines(rep: dict) -> list[str]:
    if "error" in rep:
        return [f"scenario: {rep['scenario']}", f"error: {rep['error']}"]
    out = _abl_lines(rep)
    out.append(f"verdict: {rep['verdict']} (exit {rep['exit_code']})")
    out.append(f"closure size: {rep['closure_size']}   constraints: {rep['constraint_count']}")
    w = rep.get("witness")
    if w:
        out.append(f"witness ({w['kind']}, replays={'yes' if w['replays'] else 'no'}):")
        if w["kind"] == "derivation":
            out += [f"  {n + 1}. {st['text']}  [{st['provenance']}]" for n, st in enumerate(w["steps"])]
        else:
            out.append(f"  {w['summary']}")
            out += [f"  {st['text']}  [{st['provenance']}]" for st in w["steps"]]
    if "weak" in rep:
        width = max(len(r["label"]) for r in rep["weak"])
        out.append("weak values:")
        out += [f"  {r['label']:<{width}}  {fmt(r['value'])}" for r in rep["weak"]]
    return out


def cmd_verdict(args) -> int:
    tol = _tolerances(args)
    if args.jobs > 1 and len(args.scenarios) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            reports = list(pool.map(_verdict_job, args.scenarios,
                                    [args.max_closure] * len(args.scenarios), [tol] * len(args.scenarios)))
    else:
        reports = [_verdict_job(f, args.max_closure, tol) for f in args.scenarios]
    _emit(args, reports, _verdict_lines)
    codes = [r["exit_code"] for r in reports]
    if EXIT_ERROR in codes:
        return EXIT_ERROR
    for kind in (VerdictKind.LOGICAL_PARADOX, VerdictKind.ALGEBRAIC_VIOLATION_ONLY):
        if kind.exit_code in codes:
            return kind.exit_code
    return EXIT_OK


# --- weak ------------------------------------------------------------------------

def parse_operator(spec: str, s: Scenario, tol: Tolerances) -> np.ndarray:
    """I | basis:i,j | generator label | label+label | matrix:<json>."""
    spec = spec.strip()
    if spec == "I":
        return np.eye(s.dim)
    if spec.startswith("basis:"):
        try:
            idx = [int(t) for t in spec[6:].split(",") if t.strip()]
        except ValueError:
            raise ParseError(f"bad basis index list in {spec!r}", "--op") from None
        return _operator_spec({"basis_projector": idx}, "--op", s.dim, tol).matrix
    if spec.startswith("matrix:"):
        try:
            data = json.loads(spec[7:])
        except json.JSONDecodeError as exc:
            raise ParseError(exc.msg, "--op") from None
        return parse_matrix(data, "--op", s.dim)
    total = np.zeros((s.dim, s.dim), dtype=complex)
    for t in _split_labels(spec.replace(" ", ""), s.labels):
        total = total + s.generator(t).matrix
    return total


def _split_labels(spec: str, labels) -> list[str]:
    """Split 'A+B+C' into labels, allowing '+' inside labels (longest match)."""
    if spec in labels:
        return [spec]
    for lab in sorted(labels, key=len, reverse=True):
        if spec.startswith(lab + "+"):
            try:
                return [lab] + _split_labels(spec[len(lab) + 1:], labels)
            except ParseError:
                continue
    raise ParseError(f"unknown operator {spec!r}; known labels: {', '.join(labels)}", "--op")


def weak_report(s: Scenario, ops: list[str], tol: Tolerances) -> dict:
    rows = []
    for spec in ops:
        m = parse_operator(spec, s, tol)
        w = weak_value(s.pre, m, s.post, tol)
        rows.append({"label": spec, "value": w, "anomalous": is_anomalous(w, m, tol)})
    for lab, p in zip(s.labels, s.generators):
        w = weak_value(s.pre, p, s.post, tol)
        rows.append({"label": lab, "value": w, "anomalous": is_anomalous(w, p.matrix, tol)})
    return {"scenario": s.name, "weak": rows}


def _weak_lines(rep: dict) -> list[str]:
    width = max(len(r["label"]) for r in rep["weak"])
    out = [f"scenario: {rep['scenario'] or '(unnamed)'}"]
    out += [f"  {r['label']:<{width}}  {fmt(r['value'])}{'  anomalous' if r['anomalous'] else ''}"
            for r in rep["weak"]]
    return out


def cmd_weak(args) -> int:
    tol = _tolerances(args)
    rep = weak_report(resolve_scenario(args.scenario, tol), args.op or [], tol)
    _emit(args, [rep], _weak_lines)
    return EXIT_OK


# --- decompose -------------------------------------------------------------------

def parse_measurement(spec: str, tol: Tolerances):
    """basis:N (rank-one computational basis), identity:N ({I}), or a JSON file
    with "dim" and "measurement": [projector specs]."""
    for prefix in ("basis:", "identity:"):
        if spec.startswith(prefix):
            try:
                n = int(spec[len(prefix):])
            except ValueError:
                raise ParseError(f"expected an integer dimension in {spec!r}", "measurement") from None
            if n < 1:
                raise ParseError("dimension must be positive", "measurement")
            if prefix == "identity:":
                return [basis_projector(n, range(n))]
            return [basis_projector(n, [i]) for i in range(n)]
    try:
        data = json.loads(Path(spec).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, f"line {exc.lineno}, column {exc.colno}") from None
    dim = data.get("dim") if isinstance(data, dict) else None
    if not isinstance(dim, int):
        raise ParseError("missing integer field 'dim'", "<root>")
    items = data.get("measurement")
    if not isinstance(items, list) or not items:
        raise ParseError("measurement must be a nonempty list", "measurement")
    return [_operator_spec(x, f"measurement[{i}]", dim, tol) for i, x in enumerate(items)]


def decompose_report(measurement, tol: Tolerances) -> dict:
    d = mixture_decomposition(measurement, tol)
    return {
        "outcomes": len(measurement),
        "dim": measurement[0].dim,
        "q": d.q,
        "sign_strings": [list(x) for x in d.sign_strings],
        "unitaries": [[[fmt(z.real) if abs(z.imag) < 1e-15 else f"{fmt(z.real)}{z.imag:+.12g}j" for z in row]
                       for row in u] for u in d.unitaries],
        "residual": d.identity_weight_check,
    }


def _decompose_lines(rep: dict) -> list[str]:
    out = [f"outcomes: {rep['outcomes']}   dim: {rep['dim']}",
           f"q = {fmt(rep['q'])}",
           f"reconstruction residual = {rep['residual']:.3e}",
           f"complement channel: {len(rep['sign_strings'])} unitaries"]
    for signs, u in zip(rep["sign_strings"], rep["unitaries"]):
        out.append(f"  x = ({', '.join(f'{x:+d}' for x in signs)})")
        out += [f"    [{' '.join(f'{z:>6}' for z in row)}]" for row in u]
    return out


def cmd_decompose(args) -> int:
    tol = _tolerances(args)
    rep = decompose_report(parse_measurement(args.measurement, tol), tol)
    _emit(args, [rep], _decompose_lines)
    return EXIT_OK


# --- model -----------------------------------------------------------------------

def model_report(model, s: Scenario | None, check: str, tol: Tolerances) -> dict:
    wanted = CHECKS[1:] if check == "all" else (check,)
    results = []

    def add(name, passed, failures=(), notes=()):
        results.append({"check": name, "passed": bool(passed), "failures": list(failures), "notes": list(notes)})

    if "born" in wanted:
        b = reproduces_born(model, tol=max(tol.tol_prob, 1e-12))
        add("born", b.passed, [f"{r.state}/{r.effect}: model {fmt(r.model)} vs quantum {fmt(r.quantum)}"
                               for r in b.failures], [f"{len(b.rows)} pairs"])
    if "coarse" in wanted:
        for cg in model.coarse_grainings.values():
            r = check_coarse_graining(model, cg.fine, cg.coarse, cg.grouping, tol)
            add(r.name, r.passed, r.failures)
    if "mix" in wanted:
        for m in model.mixtures.values():
            r = check_mixing(model, m.left, m.right, m.q, m.mixed, tol)
            add(r.name, r.passed, r.failures)
    if "determinism" in wanted:
        r = check_outcome_determinism(model, tol=tol)
        add(r.name, r.passed, r.failures, r.notes)
        r = check_operator_consistency(model, tol)
        add(r.name, r.passed, r.failures)
    if "disturbance" in wanted:
        post = _post_effect(model, s, tol)
        if post is not None:
            for name in model.instruments:
                r = check_possibilistic_disturbance(model, name, post, tol)
                add(f"possibilistic disturbance {name} -> {post}", r.passed,
                    [f"lambda={lam}" for lam in r.violations],
                    [f"branch loss lambda={lam} branch={b}" for lam, b in r.branch_losses])
    rep = {"model": model.name, "scenario": s.name if s else None, "checks": results}
    if "classify" in wanted and s is not None:
        c = classify_violation(model, s, tol)
        rep["classification"] = {"failed": sorted(c.failed), "details": {k: list(v) for k, v in c.details.items()},
                                 "checked_states": list(c.checked_states)}
    return rep


def _post_effect(model, s: Scenario | None, tol: Tolerances) -> str | None:
    if s is None:
        return None
    from .ontmodel import bind_scenario
    return bind_scenario(model, s, tol).post


def _model_lines(rep: dict) -> list[str]:
    out = [f"model: {rep['model']}" + (f"   scenario: {rep['scenario']}" if rep["scenario"] else "")]
    for r in rep["checks"]:
        out.append(f"  {'PASS' if r['passed'] else 'FAIL'}  {r['check']}")
        out += [f"        {f}" for f in r["failures"]]
        out += [f"        note: {n}" for n in r["notes"]]
    c = rep.get("classification")
    if c is not None:
        out.append(f"violated assumptions: {{{', '.join(c['failed'])}}}")
        for k, lines in c["details"].items():
            out += [f"  {k}: {line}" for line in lines]
    return out


def cmd_model(args) -> int:
    tol = _tolerances(args)
    model = resolve_model(args.model, tol)
    s = resolve_scenario(args.scenario, tol) if args.scenario else None
    if args.check in ("classify", "disturbance") and s is None:
        raise ParseError(f"--check {args.check} needs a scenario", "arguments")
    rep = model_report(model, s, args.check, tol)
    _emit(args, [rep], _model_lines)
    ok = all(r["passed"] for r in rep["checks"]) and not rep.get("classification", {}).get("failed")
    return EXIT_OK if ok else EXIT_FAIL


# --- plumbing --------------------------------------------------------------------

def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.bool_):
        return bool(x)
    raise TypeError(f"not serializable: {type(x).__name__}")


def _emit(args, reports: list[dict], text_lines) -> None:
    if args.format == "structured":
        doc = reports[0] if len(reports) == 1 else {"reports": reports}
        print(json.dumps(doc, indent=2, default=_jsonable))
    else:
        blocks = ["\n".join(text_lines(r)) for r in reports]
        print("\n\n".join(blocks))


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tol", type=float, default=None, help="numerical tolerance (overrides PPS_LAB_TOL)")
    p.add_argument("--max-closure", type=int, default=DEFAULT_MAX_SIZE, help="closure size budget")
    p.add_argument("--format", choices=("text", "structured"), default="text")
    p.add_argument("--jobs", type=int, default=1, help="parallel workers for several scenario files")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pps-lab", description="Pre- and post-selection paradox checker.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("abl", help="ABL probabilities of each generator")
    p.add_argument("scenarios", nargs="+", metavar="SCENARIO")
    _add_common(p)
    p.set_defaults(func=cmd_abl)

    p = sub.add_parser("verdict", help="full paradox pipeline")
    p.add_argument("scenarios", nargs="+", metavar="SCENARIO")
    _add_common(p)
    p.set_defaults(func=cmd_verdict)

    p = sub.add_parser("weak", help="weak values")
    p.add_argument("scenario", metavar="SCENARIO")
    p.add_argument("--op", action="append", help="I | basis:i,j | LABEL | LABEL+LABEL | matrix:<json>")
    _add_common(p)
    p.set_defaults(func=cmd_weak)

    p = sub.add_parser("decompose", help="identity-part mixture decomposition of a Lüders measurement")
    p.add_argument("measurement", metavar="SPEC", help="basis:N | identity:N | measurement file")
    _add_common(p)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("model", help="ontological model checks")
    p.add_argument("model", metavar="MODEL")
    p.add_argument("scenario", nargs="?", metavar="SCENARIO")
    p.add_argument("--check", choices=CHECKS, default="all")
    _add_common(p)
    p.set_defaults(func=cmd_model)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.jobs < 1:
        parser.error("--jobs must be at least 1")
    try:
        return args.func(args)
    except (PPSLabError, OSError, ValueError, KeyError) as exc:
        print(f"pps-lab: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
