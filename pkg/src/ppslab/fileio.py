"""JSON scenario and model files.

Numbers may be JSON numbers, [re, im] pairs, or expression strings such as
"1/3", "-1/sqrt(2)" or "sqrt(3)/3". Expressions are evaluated by a small
AST walker that accepts arithmetic, ``sqrt`` and ``i``/``j`` only.
"""

from __future__ import annotations

import ast
import json
import math
import operator
from pathlib import Path
from typing import Any

import numpy as np

from . import fixtures
from .channels import make_instrument
from .errors import ParseError, PPSLabError
from .ontmodel import CoarseGraining, FiniteOntModel, InstrumentModel, Mixture, make_model
from .pps import Scenario
from .qcore import (
    DEFAULT_TOLERANCES,
    Tolerances,
    basis_projector,
    make_state,
    validate_projector,
)

FORMAT_VERSION = "1"

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_UNOPS = {ast.UAdd: operator.pos, ast.USub: operator.neg}
_FUNCS = {"sqrt": lambda x: np.sqrt(complex(x)) if np.real(x) < 0 else math.sqrt(x)}
_NAMES = {"i": 1j, "j": 1j, "pi": math.pi}


def eval_expression(text: str, where: str = "") -> complex:
    """Evaluate a restricted arithmetic expression."""
    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError:
        raise ParseError(f"cannot parse number {text!r}", where) from None

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
            return node.value
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNOPS:
            return _UNOPS[type(node.op)](ev(node.operand))
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS \
                and len(node.args) == 1 and not node.keywords:
            return _FUNCS[node.func.id](ev(node.args[0]))
        if isinstance(node, ast.Name) and node.id in _NAMES:
            return _NAMES[node.id]
        raise ParseError(f"unsupported expression element in {text!r}", where)

    try:
        return complex(ev(tree))
    except ZeroDivisionError:
        raise ParseError(f"division by zero in {text!r}", where) from None
    except OverflowError:
        raise ParseError(f"overflow in {text!r}", where) from None


def parse_real(x: Any, where: str) -> float:
    z = parse_complex(x, where)
    if z.imag != 0:
        raise ParseError(f"expected a real number, got {x!r}", where)
    return z.real


def parse_complex(x: Any, where: str) -> complex:
    if isinstance(x, bool):
        raise ParseError(f"expected a number, got {x!r}", where)
    if isinstance(x, (int, float)):
        return complex(x)
    if isinstance(x, str):
        return eval_expression(x, where)
    if isinstance(x, list) and len(x) == 2 and not any(isinstance(v, list) for v in x):
        re = parse_complex(x[0], f"{where}[0]")
        im = parse_complex(x[1], f"{where}[1]")
        if re.imag or im.imag:
            raise ParseError("parts of a [re, im] pair must be real", where)
        return complex(re.real, im.real)
    raise ParseError(f"expected a number, expression string or [re, im] pair, got {x!r}", where)


def parse_vector(x: Any, where: str, dim: int | None = None) -> np.ndarray:
    if not isinstance(x, list) or not x:
        raise ParseError("expected a nonempty list of amplitudes", where)
    v = np.array([parse_complex(e, f"{where}[{i}]") for i, e in enumerate(x)])
    if dim is not None and v.shape[0] != dim:
        raise ParseError(f"expected {dim} entries, got {v.shape[0]}", where)
    return v


def parse_matrix(x: Any, where: str, dim: int | None = None) -> np.ndarray:
    if not isinstance(x, list) or not x or not all(isinstance(r, list) for r in x):
        raise ParseError("expected a list of rows", where)
    rows = [[parse_complex(e, f"{where}[{i}][{k}]") for k, e in enumerate(r)] for i, r in enumerate(x)]
    n = len(rows)
    if any(len(r) != n for r in rows):
        raise ParseError("matrix must be square", where)
    if dim is not None and n != dim:
        raise ParseError(f"expected a {dim}x{dim} matrix, got {n}x{n}", where)
    return np.array(rows, dtype=complex)


def _field(obj: dict, key: str, where: str):
    if not isinstance(obj, dict):
        raise ParseError("expected an object", where)
    if key not in obj:
        raise ParseError(f"missing field {key!r}", where)
    return obj[key]


def _operator_spec(obj: dict, where: str, dim: int, tol: Tolerances):
    """A projector given as 'matrix', 'basis_projector' or 'ket'."""
    try:
        if "basis_projector" in obj:
            idx = obj["basis_projector"]
            if not isinstance(idx, list) or not all(isinstance(i, int) and not isinstance(i, bool) for i in idx):
                raise ParseError("basis_projector must be a list of integer indices", f"{where}.basis_projector")
            if any(i < 0 or i >= dim for i in idx):
                raise ParseError(f"basis index out of range for dimension {dim}", f"{where}.basis_projector")
            return basis_projector(dim, idx)
        if "matrix" in obj:
            return validate_projector(parse_matrix(obj["matrix"], f"{where}.matrix", dim), tol)
        if "ket" in obj:
            v = parse_vector(obj["ket"], f"{where}.ket", dim)
            v = v / np.linalg.norm(v)
            return validate_projector(np.outer(v, v.conj()), tol)
    except ParseError:
        raise
    except PPSLabError as exc:
        raise ParseError(str(exc), where) from exc
    raise ParseError("expected one of 'matrix', 'basis_projector' or 'ket'", where)


def _load_json(source) -> Any:
    if isinstance(source, (dict, list)):
        return source
    text = Path(source).read_text() if isinstance(source, Path) or (
        isinstance(source, str) and not source.lstrip().startswith("{")) else source
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, f"line {exc.lineno}, column {exc.colno}") from None


def _check_version(data: dict, where: str = "format_version"):
    v = data.get("format_version", FORMAT_VERSION)
    if str(v) != FORMAT_VERSION:
        raise ParseError(f"unsupported format_version {v!r}", where)


# --- scenarios ---------------------------------------------------------------

def parse_scenario(source, tol: Tolerances = DEFAULT_TOLERANCES) -> Scenario:
    """Scenario from a path, JSON text, or an already-decoded object."""
    data = _load_json(source)
    if not isinstance(data, dict):
        raise ParseError("scenario file must hold a JSON object", "<root>")
    if "fixture" in data:
        try:
            return fixtures.scenario(data["fixture"])
        except KeyError as exc:
            raise ParseError(exc.args[0], "fixture") from None
    _check_version(data)
    dim = _field(data, "dim", "<root>")
    if not isinstance(dim, int) or isinstance(dim, bool) or dim < 1:
        raise ParseError("dim must be a positive integer", "dim")
    normalize = bool(data.get("normalize", False))
    try:
        pre = make_state(parse_vector(_field(data, "pre", "<root>"), "pre", dim), tol, normalize=normalize)
        post = make_state(parse_vector(_field(data, "post", "<root>"), "post", dim), tol, normalize=normalize)
    except ParseError:
        raise
    except PPSLabError as exc:
        raise ParseError(str(exc), "pre/post") from exc
    gens_raw = _field(data, "generators", "<root>")
    if not isinstance(gens_raw, list) or not gens_raw:
        raise ParseError("generators must be a nonempty list", "generators")
    gens, labels, contexts = [], [], []
    for i, g in enumerate(gens_raw):
        where = f"generators[{i}]"
        if not isinstance(g, dict):
            raise ParseError("expected an object", where)
        gens.append(_operator_spec(g, where, dim, tol))
        labels.append(str(g.get("label", f"G{i}")))
        ctx = g.get("context")
        if ctx is None:
            contexts.append(None)
        else:
            if not isinstance(ctx, list) or not ctx:
                raise ParseError("context must be a nonempty list of projectors", f"{where}.context")
            contexts.append(tuple(_operator_spec(c, f"{where}.context[{k}]", dim, tol) for k, c in enumerate(ctx)))
    try:
        return Scenario(dim, pre, post, tuple(gens), tuple(labels), tuple(contexts), str(data.get("name", "")))
    except PPSLabError as exc:
        raise ParseError(str(exc), "generators") from exc


def _num(z: complex):
    return [float(z.real), float(z.imag)]


def _mat(m: np.ndarray):
    return [[_num(z) for z in row] for row in np.asarray(m)]


def scenario_to_dict(s: Scenario) -> dict:
    gens = []
    for label, p, ctx in zip(s.labels, s.generators, s.contexts):
        g = {"label": label, "matrix": _mat(p.matrix)}
        if ctx is not None:
            g["context"] = [{"matrix": _mat(q.matrix)} for q in ctx]
        gens.append(g)
    return {
        "format_version": FORMAT_VERSION,
        "name": s.name,
        "dim": s.dim,
        "pre": [_num(z) for z in s.pre.amplitudes],
        "post": [_num(z) for z in s.post.amplitudes],
        "generators": gens,
    }


def dump_scenario(s: Scenario, path=None) -> str:
    text = json.dumps(scenario_to_dict(s), indent=2)
    if path is not None:
        Path(path).write_text(text)
    return text


# --- models ------------------------------------------------------------------

def _prob_vector(x: Any, where: str, n: int) -> np.ndarray:
    if not isinstance(x, list) or len(x) != n:
        raise ParseError(f"expected a list of {n} probabilities", where)
    return np.array([parse_real(e, f"{where}[{i}]") for i, e in enumerate(x)])


def _prob_matrix(x: Any, where: str, n: int) -> np.ndarray:
    if not isinstance(x, list) or len(x) != n:
        raise ParseError(f"expected {n} rows", where)
    return np.array([_prob_vector(r, f"{where}[{i}]", n) for i, r in enumerate(x)])


def _effect_operator(obj: dict, where: str, dim: int, tol: Tolerances) -> np.ndarray:
    if "operator" in obj:
        return parse_matrix(obj["operator"], f"{where}.operator", dim)
    return _operator_spec(obj, where, dim, tol).matrix


def parse_model(source, tol: Tolerances = DEFAULT_TOLERANCES) -> FiniteOntModel:
    data = _load_json(source)
    if not isinstance(data, dict):
        raise ParseError("model file must hold a JSON object", "<root>")
    if "fixture" in data:
        try:
            return fixtures.model(data["fixture"])
        except KeyError as exc:
            raise ParseError(exc.args[0], "fixture") from None
    _check_version(data)
    dim = _field(data, "dim", "<root>")
    if not isinstance(dim, int) or isinstance(dim, bool) or dim < 1:
        raise ParseError("dim must be a positive integer", "dim")
    ontic = _field(data, "ontic_states", "<root>")
    if not isinstance(ontic, list) or not ontic:
        raise ParseError("ontic_states must be a nonempty list", "ontic_states")
    ontic = [str(x) for x in ontic]
    n = len(ontic)

    preps, states = {}, {}
    for label, st in _field(data, "states", "<root>").items():
        where = f"states.{label}"
        try:
            states[label] = make_state(parse_vector(_field(st, "amplitudes", where), f"{where}.amplitudes", dim),
                                       tol, normalize=bool(st.get("normalize", False)))
        except PPSLabError as exc:
            if isinstance(exc, ParseError):
                raise
            raise ParseError(str(exc), where) from exc
        preps[label] = _prob_vector(_field(st, "distribution", where), f"{where}.distribution", n)

    responses, ops = {}, {}
    for label, eff in _field(data, "effects", "<root>").items():
        where = f"effects.{label}"
        ops[label] = _effect_operator(eff, where, dim, tol)
        responses[label] = _prob_vector(_field(eff, "response", where), f"{where}.response", n)

    instruments = {}
    for label, inst in data.get("instruments", {}).items():
        where = f"instruments.{label}"
        branches = _field(inst, "branches", where)
        kernels, effects, kraus = {}, {}, []
        for b, spec in branches.items():
            bw = f"{where}.branches.{b}"
            kernels[b] = _prob_matrix(_field(spec, "kernel", bw), f"{bw}.kernel", n)
            if "effect" in spec:
                effects[b] = str(spec["effect"])
            if "kraus" in spec:
                kraus.append((b, [parse_matrix(k, f"{bw}.kraus[{i}]", dim) for i, k in enumerate(spec["kraus"])]))
            elif inst.get("luders") and b in effects and effects[b] in ops:
                kraus.append((b, [ops[effects[b]]]))
        quantum = None
        if kraus:
            if len(kraus) != len(kernels):
                raise ParseError("either every branch or no branch must carry Kraus operators", where)
            try:
                quantum = make_instrument(kraus, tol)
            except PPSLabError as exc:
                raise ParseError(str(exc), where) from exc
        instruments[label] = InstrumentModel(kernels, effects, quantum)

    povms = {k: [str(e) for e in v] for k, v in data.get("povms", {}).items()}
    coarse = {}
    for k, v in data.get("coarse_grainings", {}).items():
        where = f"coarse_grainings.{k}"
        grouping = {str(t): tuple(str(e) for e in g) for t, g in _field(v, "grouping", where).items()}
        coarse[k] = CoarseGraining(str(_field(v, "fine", where)), str(_field(v, "coarse", where)), grouping)
    mixtures = {}
    for k, v in data.get("mixtures", {}).items():
        where = f"mixtures.{k}"
        mixtures[k] = Mixture(str(_field(v, "left", where)), str(_field(v, "right", where)),
                              parse_real(_field(v, "q", where), f"{where}.q"), str(_field(v, "mixed", where)))
    try:
        return make_model(ontic, preps, responses, states, ops, instruments, povms, coarse, mixtures,
                          name=str(data.get("name", "")), tol=tol)
    except ParseError:
        raise
    except PPSLabError as exc:
        raise ParseError(str(exc), "<model>") from exc


def model_to_dict(m: FiniteOntModel) -> dict:
    def probs(v):
        return [float(x) for x in v]

    out = {
        "format_version": FORMAT_VERSION,
        "name": m.name,
        "dim": m.dim,
        "ontic_states": list(m.ontic_states),
        "states": {k: {"amplitudes": [_num(z) for z in m.state_registry[k].amplitudes],
                       "distribution": probs(mu)} for k, mu in m.preparations.items()},
        "effects": {k: {"operator": _mat(m.operator(k)), "response": probs(r)} for k, r in m.responses.items()},
        "povms": {k: list(v) for k, v in m.povms.items()},
        "instruments": {},
        "coarse_grainings": {k: {"fine": c.fine, "coarse": c.coarse,
                                 "grouping": {t: list(g) for t, g in c.grouping.items()}}
                             for k, c in m.coarse_grainings.items()},
        "mixtures": {k: {"left": x.left, "right": x.right, "q": x.q, "mixed": x.mixed} for k, x in m.mixtures.items()},
    }
    for k, inst in m.instruments.items():
        branches = {}
        for b, kern in inst.kernels.items():
            spec = {"kernel": [probs(r) for r in kern]}
            if b in inst.branch_effects:
                spec["effect"] = inst.branch_effects[b]
            if inst.quantum is not None:
                spec["kraus"] = [_mat(op) for op in inst.quantum.branch(b).kraus_ops]
            branches[b] = spec
        out["instruments"][k] = {"branches": branches}
    return out


def dump_model(m: FiniteOntModel, path=None) -> str:
    text = json.dumps(model_to_dict(m), indent=2)
    if path is not None:
        Path(path).write_text(text)
    return text


def resolve_scenario(arg: str, tol: Tolerances = DEFAULT_TOLERANCES) -> Scenario:
    """A fixture name or a path to a scenario file."""
    if arg in fixtures.SCENARIOS:
        return fixtures.scenario(arg)
    return parse_scenario(Path(arg), tol)


def resolve_model(arg: str, tol: Tolerances = DEFAULT_TOLERANCES) -> FiniteOntModel:
    if arg in fixtures.MODELS:
        return fixtures.model(arg)
    return parse_model(Path(arg), tol)
