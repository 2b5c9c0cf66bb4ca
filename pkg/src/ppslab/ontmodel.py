"""Finite ontological models and noncontextuality checks.

A model has a finite ontic space. Preparations are probability vectors
over it, effects have response vectors Pr(E|lambda), and instruments are
joint outcome-and-transition kernels K_j[lambda, lambda'] giving the
probability of branch j together with the move lambda -> lambda'.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .channels import (
    Instrument,
    instruments_equal,
    luders_instrument,
    make_instrument,
    mixture_decomposition,
)
from .errors import (
    DimensionMismatch,
    ModelDoesNotReproduce,
    ModelError,
    OperatorMismatch,
    UnknownLabel,
)
from .feasibility import build_constraints, check_extension
from .palgebra import close
from .pps import Scenario
from .qcore import (
    DEFAULT_TOLERANCES,
    PureState,
    Tolerances,
    basis_projector,
    complement,
    dagger,
    is_projective_measurement,
    ket_projector,
    make_state,
    matrices_equal,
    max_abs,
    state_projector,
)

ALGEBRAIC = "algebraic_conditions"
DETERMINISM = "outcome_determinism"
MEASUREMENT_NC = "measurement_noncontextuality"


def _frozen(a, dtype=float) -> np.ndarray:
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class InstrumentModel:
    """Ontic representation of one instrument."""

    kernels: dict[str, np.ndarray]
    branch_effects: dict[str, str] = field(default_factory=dict)
    quantum: Instrument | None = None

    @property
    def branches(self) -> tuple[str, ...]:
        return tuple(self.kernels)


@dataclass(frozen=True)
class CoarseGraining:
    fine: str
    coarse: str
    grouping: dict[str, tuple[str, ...]]


@dataclass(frozen=True)
class Mixture:
    left: str
    right: str
    q: float
    mixed: str


@dataclass(frozen=True, eq=False)
class FiniteOntModel:
    ontic_states: tuple[str, ...]
    preparations: dict[str, np.ndarray]
    responses: dict[str, np.ndarray]
    instruments: dict[str, InstrumentModel]
    state_registry: dict[str, PureState]
    effect_registry: dict[str, np.ndarray]
    povms: dict[str, tuple[str, ...]] = field(default_factory=dict)
    coarse_grainings: dict[str, CoarseGraining] = field(default_factory=dict)
    mixtures: dict[str, Mixture] = field(default_factory=dict)
    name: str = ""

    @property
    def size(self) -> int:
        return len(self.ontic_states)

    @property
    def dim(self) -> int:
        for m in self.effect_registry.values():
            return m.shape[0]
        for s in self.state_registry.values():
            return s.dim
        raise ModelError("model registers no operators")

    @property
    def kernels(self) -> dict[tuple[str, str], np.ndarray]:
        return {(name, b): k for name, inst in self.instruments.items() for b, k in inst.kernels.items()}

    def preparation(self, label: str) -> np.ndarray:
        try:
            return self.preparations[label]
        except KeyError:
            raise UnknownLabel(f"unknown preparation {label!r}") from None

    def response(self, label: str) -> np.ndarray:
        try:
            return self.responses[label]
        except KeyError:
            raise UnknownLabel(f"unknown effect {label!r}") from None

    def operator(self, label: str) -> np.ndarray:
        try:
            return self.effect_registry[label]
        except KeyError:
            raise UnknownLabel(f"unknown effect {label!r}") from None

    def instrument(self, label: str) -> InstrumentModel:
        try:
            return self.instruments[label]
        except KeyError:
            raise UnknownLabel(f"unknown instrument {label!r}") from None

    def povm(self, label: str) -> tuple[str, ...]:
        try:
            return self.povms[label]
        except KeyError:
            raise UnknownLabel(f"unknown POVM {label!r}") from None

    def ontic_index(self, label: str) -> int:
        return self.ontic_states.index(label)


def make_model(ontic_states: Sequence[str], preparations: Mapping[str, Sequence[float]],
               responses: Mapping[str, Sequence[float]], state_registry: Mapping[str, PureState],
               effect_registry: Mapping[str, np.ndarray], instruments: Mapping[str, InstrumentModel] | None = None,
               povms: Mapping[str, Sequence[str]] | None = None,
               coarse_grainings: Mapping[str, CoarseGraining] | None = None,
               mixtures: Mapping[str, Mixture] | None = None, name: str = "",
               tol: Tolerances = DEFAULT_TOLERANCES) -> FiniteOntModel:
    """Validate and freeze a finite ontological model."""
    ontic = tuple(str(x) for x in ontic_states)
    if len(set(ontic)) != len(ontic) or not ontic:
        raise ModelError("ontic state labels must be nonempty and distinct")
    n = len(ontic)
    t = tol.tol_prob

    preps = {}
    for label, mu in preparations.items():
        mu = np.asarray(mu, dtype=float)
        if mu.shape != (n,):
            raise ModelError(f"preparation {label!r} has shape {mu.shape}, expected ({n},)")
        if np.any(mu < -t) or abs(mu.sum() - 1.0) > t:
            raise ModelError(f"preparation {label!r} is not a probability vector")
        if label not in state_registry:
            raise ModelError(f"preparation {label!r} has no registered quantum state")
        preps[label] = _frozen(np.clip(mu, 0.0, None))

    resp = {}
    for label, r in responses.items():
        r = np.asarray(r, dtype=float)
        if r.shape != (n,):
            raise ModelError(f"response {label!r} has shape {r.shape}, expected ({n},)")
        if np.any(r < -t) or np.any(r > 1 + t):
            raise ModelError(f"response {label!r} leaves [0, 1]")
        if label not in effect_registry:
            raise ModelError(f"response {label!r} has no registered operator")
        resp[label] = _frozen(np.clip(r, 0.0, 1.0))

    effects = {label: _frozen(m, complex) for label, m in effect_registry.items()}
    states = dict(state_registry)
    dims = {m.shape[0] for m in effects.values()} | {s.dim for s in states.values()}
    if len(dims) > 1:
        raise DimensionMismatch(f"model mixes operator dimensions {sorted(dims)}")

    povm_map = {k: tuple(v) for k, v in (povms or {}).items()}
    for label, members in povm_map.items():
        for e in members:
            if e not in resp:
                raise ModelError(f"POVM {label!r} references unknown effect {e!r}")
        total = sum(resp[e] for e in members)
        if np.any(np.abs(total - 1.0) > t):
            raise ModelError(f"responses of POVM {label!r} do not sum to 1 for every ontic state")
        d = effects[members[0]].shape[0]
        if max_abs(sum(effects[e] for e in members) - np.eye(d)) > tol.tol_op:
            raise ModelError(f"operators of POVM {label!r} do not sum to the identity")

    insts = {}
    for label, inst in (instruments or {}).items():
        kernels = {}
        for b, k in inst.kernels.items():
            k = np.asarray(k, dtype=float)
            if k.shape != (n, n):
                raise ModelError(f"kernel {label}/{b} has shape {k.shape}, expected ({n}, {n})")
            if np.any(k < -t):
                raise ModelError(f"kernel {label}/{b} has negative entries")
            kernels[b] = _frozen(np.clip(k, 0.0, None))
        total = sum(k.sum(axis=1) for k in kernels.values())
        if np.any(np.abs(total - 1.0) > t):
            raise ModelError(f"kernels of instrument {label!r} are not jointly stochastic")
        for b, e in inst.branch_effects.items():
            if b not in kernels:
                raise ModelError(f"instrument {label!r} names effect for unknown branch {b!r}")
            if e not in resp:
                raise ModelError(f"instrument {label!r} branch {b!r} induces unknown effect {e!r}")
            if np.any(np.abs(kernels[b].sum(axis=1) - resp[e]) > t):
                raise ModelError(f"kernel {label}/{b} marginal differs from the response of {e!r}")
        if inst.quantum is not None and set(inst.quantum.labels) != set(kernels):
            raise ModelError(f"instrument {label!r}: quantum branches {inst.quantum.labels} differ from kernels")
        insts[label] = InstrumentModel(kernels, dict(inst.branch_effects), inst.quantum)

    return FiniteOntModel(ontic, preps, resp, insts, states, effects, povm_map,
                          dict(coarse_grainings or {}), dict(mixtures or {}), name)


# --- derived quantities ------------------------------------------------------

def model_probability(model: FiniteOntModel, state: str, effect: str) -> float:
    return float(model.preparation(state) @ model.response(effect))


def sequential_response(model: FiniteOntModel, instrument: str, branch: str, effect: str) -> np.ndarray:
    """Pr(branch, then effect | lambda) = sum_lambda' K[lambda, lambda'] Pr(effect | lambda')."""
    inst = model.instrument(instrument)
    if branch not in inst.kernels:
        raise UnknownLabel(f"instrument {instrument!r} has no branch {branch!r}")
    return inst.kernels[branch] @ model.response(effect)


def nonselective_response(model: FiniteOntModel, instrument: str, effect: str) -> np.ndarray:
    """Model rendering of Pr(E^dagger(effect) | lambda) for the outcome-forgetting instrument."""
    inst = model.instrument(instrument)
    return sum(k @ model.response(effect) for k in inst.kernels.values())


def model_instrument_conditional(model: FiniteOntModel, state: str, instrument: str, effect: str,
                                 tol: Tolerances = DEFAULT_TOLERANCES) -> dict[str, float]:
    mu = model.preparation(state)
    inst = model.instrument(instrument)
    weights = {b: float(mu @ (k @ model.response(effect))) for b, k in inst.kernels.items()}
    total = sum(weights.values())
    if total <= tol.tol_prob:
        from .errors import PostselectionImpossible
        raise PostselectionImpossible(f"post-selection {effect!r} never succeeds in the model")
    return {b: w / total for b, w in weights.items()}


def support(model: FiniteOntModel, state: str, tol: Tolerances = DEFAULT_TOLERANCES) -> tuple[str, ...]:
    mu = model.preparation(state)
    return tuple(lab for lab, m in zip(model.ontic_states, mu) if m > tol.tol_prob)


def certain_set(model: FiniteOntModel, effect: str, tol: Tolerances = DEFAULT_TOLERANCES) -> tuple[str, ...]:
    """Ontic states on which the effect fires with certainty (Lambda^phi for a post-selection)."""
    r = model.response(effect)
    return tuple(lab for lab, x in zip(model.ontic_states, r) if x >= 1.0 - tol.tol_prob)


# --- checks ------------------------------------------------------------------

@dataclass(frozen=True)
class CheckReport:
    name: str
    passed: bool
    failures: tuple[str, ...] = ()
    notes: tuple[str, ...] = ()


@dataclass(frozen=True)
class BornRow:
    state: str
    effect: str
    model: float
    quantum: float

    @property
    def error(self) -> float:
        return abs(self.model - self.quantum)


@dataclass(frozen=True)
class BornReport:
    passed: bool
    rows: tuple[BornRow, ...]
    failures: tuple[BornRow, ...]


def reproduces_born(model: FiniteOntModel, pairs: Iterable[tuple[str, str]] | None = None,
                    tol: float = 1e-9) -> BornReport:
    """Compare sum_lambda Pr(E|lambda) mu(lambda) with <psi|E|psi> for each pair.

    ``pairs=None`` checks every registered (state, effect) combination.
    """
    if pairs is None:
        pairs = [(s, e) for s in model.preparations for e in model.responses]
    rows = []
    for s, e in pairs:
        mu = model.preparation(s)
        r = model.response(e)
        psi = model.state_registry[s]
        q = float(np.real(np.vdot(psi.amplitudes, model.operator(e) @ psi.amplitudes)))
        rows.append(BornRow(s, e, float(mu @ r), q))
    failures = tuple(row for row in rows if row.error > tol)
    return BornReport(not failures, tuple(rows), failures)


def check_coarse_graining(model: FiniteOntModel, fine: str, coarse: str,
                          grouping: Mapping[str, Sequence[str]],
                          tol: Tolerances = DEFAULT_TOLERANCES) -> CheckReport:
    """Pr(E_j|lambda) = sum_k Pr(E_jk|lambda) whenever E_j = sum_k E_jk."""
    fine_members = model.povm(fine)
    coarse_members = model.povm(coarse)
    used = [e for group in grouping.values() for e in group]
    if sorted(used) != sorted(fine_members) or set(grouping) != set(coarse_members):
        raise OperatorMismatch(f"grouping does not partition {fine!r} onto {coarse!r}")
    failures = []
    for target, group in grouping.items():
        op_sum = sum(model.operator(e) for e in group)
        if not matrices_equal(op_sum, model.operator(target), tol):
            raise OperatorMismatch(f"operators of {list(group)} do not sum to {target!r}")
        diff = model.response(target) - sum(model.response(e) for e in group)
        for lam, d in zip(model.ontic_states, diff):
            if abs(d) > tol.tol_prob:
                failures.append(f"lambda={lam}: Pr({target}) differs from the sum over {list(group)} by {d:+.6g}")
    return CheckReport(f"coarse-graining {fine} -> {coarse}", not failures, tuple(failures))


def check_mixing(model: FiniteOntModel, left: str, right: str, q: float, mixed: str,
                 tol: Tolerances = DEFAULT_TOLERANCES) -> CheckReport:
    """Pr(E_j|lambda) = q Pr(E'_j|lambda) + (1-q) Pr(E''_j|lambda) when E_j = q E'_j + (1-q) E''_j."""
    if not 0.0 <= q <= 1.0:
        raise ValueError("mixing weight must lie in [0, 1]")
    lm, rm, mm = model.povm(left), model.povm(right), model.povm(mixed)
    if not len(lm) == len(rm) == len(mm):
        raise OperatorMismatch("mixed POVMs must have the same number of outcomes")
    failures = []
    for a, b, c in zip(lm, rm, mm):
        op = q * model.operator(a) + (1 - q) * model.operator(b)
        if not matrices_equal(op, model.operator(c), tol):
            raise OperatorMismatch(f"{c!r} is not {q} {a!r} + {1 - q} {b!r} as an operator")
        diff = model.response(c) - (q * model.response(a) + (1 - q) * model.response(b))
        for lam, d in zip(model.ontic_states, diff):
            if abs(d) > tol.tol_prob:
                failures.append(f"lambda={lam}: Pr({c}) misses the mixture of {a}, {b} by {d:+.6g}")
    return CheckReport(f"mixing {left} / {right} -> {mixed}", not failures, tuple(failures))


def _is_projector(m: np.ndarray, tol: Tolerances) -> bool:
    return max_abs(m - dagger(m)) <= tol.tol_op and max_abs(m @ m - m) <= tol.tol_op


def check_outcome_determinism(model: FiniteOntModel, labels: Iterable[str] | None = None,
                              tol: Tolerances = DEFAULT_TOLERANCES) -> CheckReport:
    labels = list(model.responses) if labels is None else list(labels)
    failures, notes = [], []
    for e in labels:
        if not _is_projector(model.operator(e), tol):
            notes.append(f"{e}: not a projector, skipped")
            continue
        for lam, x in zip(model.ontic_states, model.response(e)):
            if min(x, 1.0 - x) > tol.tol_prob:
                failures.append(f"Pr({e}|{lam}) = {x:.6g} is not 0 or 1")
    return CheckReport("outcome determinism", not failures, tuple(failures), tuple(notes))


@dataclass(frozen=True)
class DisturbanceReport:
    passed: bool
    violations: tuple[str, ...]
    branch_losses: tuple[tuple[str, str], ...]
    instrument: str = ""
    effect: str = ""


def check_possibilistic_disturbance(model: FiniteOntModel, instrument: str, effect: str,
                                    tol: Tolerances = DEFAULT_TOLERANCES) -> DisturbanceReport:
    """If Pr(E|lambda) > 0 then the instrument followed by E must keep E possible.

    ``violations`` lists the ontic states breaking that implication.
    ``branch_losses`` lists (lambda, branch) pairs where lambda enters the
    branch with positive probability but the branch output can never reach
    E; these localize where a non-Lüders update destroys possibility even
    when the implication itself holds.
    """
    r = model.response(effect)
    after = nonselective_response(model, instrument, effect)
    violations = tuple(lam for lam, x, y in zip(model.ontic_states, r, after)
                       if x > tol.tol_prob and y <= tol.tol_prob)
    inst = model.instrument(instrument)
    losses = []
    for b, k in inst.kernels.items():
        reach = k @ r
        for lam, enter, x in zip(model.ontic_states, k.sum(axis=1), reach):
            if enter > tol.tol_prob and x <= tol.tol_prob:
                losses.append((lam, b))
    return DisturbanceReport(not violations, violations, tuple(losses), instrument, effect)


def check_operator_consistency(model: FiniteOntModel, tol: Tolerances = DEFAULT_TOLERANCES) -> CheckReport:
    """Effects registered under different labels but equal operators must respond identically."""
    labels = list(model.responses)
    failures = []
    for a_pos, a in enumerate(labels):
        for b in labels[a_pos + 1:]:
            if matrices_equal(model.operator(a), model.operator(b), tol):
                d = max_abs(model.response(a) - model.response(b))
                if d > tol.tol_prob:
                    failures.append(f"{a} and {b} are the same operator but responses differ by {d:.6g}")
    return CheckReport("operator-level noncontextuality", not failures, tuple(failures))


def check_registered(model: FiniteOntModel, tol: Tolerances = DEFAULT_TOLERANCES) -> list[CheckReport]:
    """Every registered decomposition plus determinism and operator consistency."""
    reports = [check_coarse_graining(model, cg.fine, cg.coarse, cg.grouping, tol)
               for cg in model.coarse_grainings.values()]
    reports += [check_mixing(model, m.left, m.right, m.q, m.mixed, tol) for m in model.mixtures.values()]
    reports.append(check_outcome_determinism(model, tol=tol))
    reports.append(check_operator_consistency(model, tol))
    return reports


# --- toy bit -----------------------------------------------------------------

_PLUS = np.array([1.0, 1.0]) / np.sqrt(2.0)
_MINUS = np.array([1.0, -1.0]) / np.sqrt(2.0)


def _indicator(n: int, members: Iterable[int]) -> np.ndarray:
    v = np.zeros(n)
    for m in members:
        v[m] = 1.0
    return v


def _kernel(n: int, moves: Mapping[int, Mapping[int, float]]) -> np.ndarray:
    k = np.zeros((n, n))
    for src, dests in moves.items():
        for dst, p in dests.items():
            k[src, dst] += p
    return k


def derived_sequential_effects(responses: Mapping[str, np.ndarray], operators: Mapping[str, np.ndarray],
                               inst_label: str, inst: InstrumentModel, post: Sequence[str]):
    """Effects 'instrument branch, then post effect' with operator E_j^dagger(E)
    and response K_j Pr(E|.). Returns {label: (operator, response)}."""
    out = {}
    for b, k in inst.kernels.items():
        ch = inst.quantum.branch(b)
        for e in post:
            op = sum(dagger(kk) @ operators[e] @ kk for kk in ch.kraus_ops)
            out[f"{inst_label}{b}|{e}"] = (op, k @ responses[e])
    return out


def build_toy_bit_model(tol: Tolerances = DEFAULT_TOLERANCES) -> FiniteOntModel:
    """Four-state toy bit with Lüders and reset-modified X-basis instruments.

    Ontic states 1..4. |0> ~ {1,2}, |1> ~ {3,4}, |+> ~ {1,3}, |-> ~ {2,4}.
    The Lüders X measurement reports + on {1,3} and - on {2,4}, then does
    nothing or swaps within the reported pair with probability 1/2 each.
    Instrument E swaps 1 and 2 instead of 2 and 4 on the - outcome; E'
    swaps 1 and 2 instead of 1 and 3 on the + outcome.
    """
    n = 4
    lam = ("1", "2", "3", "4")
    half = 0.5
    states = {
        "0": make_state([1.0, 0.0]),
        "1": make_state([0.0, 1.0]),
        "+": make_state(_PLUS),
        "-": make_state(_MINUS),
    }
    supports = {"0": (0, 1), "1": (2, 3), "+": (0, 2), "-": (1, 3)}
    preps = {k: _indicator(n, v) / 2 for k, v in supports.items()}
    responses = {k: _indicator(n, v) for k, v in supports.items()}
    operators = {k: state_projector(s).matrix for k, s in states.items()}

    p_plus, p_minus = ket_projector(_PLUS), ket_projector(_MINUS)
    p0, p1 = basis_projector(2, [0]), basis_projector(2, [1])

    def stay_or_swap(a, b):
        return {a: {a: half, b: half}, b: {b: half, a: half}}

    lx_plus = _kernel(n, stay_or_swap(0, 2))
    lx_minus = _kernel(n, stay_or_swap(1, 3))
    lz_zero = _kernel(n, stay_or_swap(0, 1))
    lz_one = _kernel(n, stay_or_swap(2, 3))
    e_minus = _kernel(n, {1: {1: half, 0: half}, 3: {3: 1.0}})
    eprime_plus = _kernel(n, {0: {0: half, 1: half}, 2: {2: 1.0}})

    ket0 = np.array([1.0, 0.0])
    instruments = {
        "LX": InstrumentModel({"+": lx_plus, "-": lx_minus}, {"+": "+", "-": "-"},
                              luders_instrument([p_plus, p_minus], ["+", "-"], tol)),
        "LZ": InstrumentModel({"0": lz_zero, "1": lz_one}, {"0": "0", "1": "1"},
                              luders_instrument([p0, p1], ["0", "1"], tol)),
        "E": InstrumentModel({"+": lx_plus, "-": e_minus}, {"+": "+", "-": "-"},
                             make_instrument([("+", [p_plus.matrix]), ("-", [np.outer(ket0, _MINUS)])], tol)),
        "Eprime": InstrumentModel({"+": eprime_plus, "-": lx_minus}, {"+": "+", "-": "-"},
                                  make_instrument([("+", [np.outer(ket0, _PLUS)]), ("-", [p_minus.matrix])], tol)),
    }

    # LX followed by the Z-basis measurement, as a four-outcome POVM
    seq = derived_sequential_effects(responses, operators, "LX", instruments["LX"], ["1", "0"])
    for label, (op, r) in seq.items():
        operators[label] = op
        responses[label] = r
    nonsel = {}
    for e in ("0", "1"):
        label = f"LX^dag({e})"
        operators[label] = sum(seq[f"LX{b}|{e}"][0] for b in ("+", "-"))
        responses[label] = sum(seq[f"LX{b}|{e}"][1] for b in ("+", "-"))
        nonsel[e] = label

    # Z swapped by the complement channel of the identity-part decomposition
    deco = mixture_decomposition([p_plus, p_minus], tol)
    swapped = []
    for e in ("0", "1"):
        image = deco.complement_channel.apply(operators[e])  # self-adjoint Kraus set
        match = next(k for k in ("0", "1") if matrices_equal(image, operators[k], tol))
        swapped.append(match)

    povms = {
        "Z": ("0", "1"),
        "X": ("+", "-"),
        "LX_then_Z": ("LX+|1", "LX+|0", "LX-|1", "LX-|0"),
        "LX_dagger_Z": (nonsel["0"], nonsel["1"]),
        "C_dagger_Z": tuple(swapped),
    }
    coarse = {
        "sequential_to_X": CoarseGraining("LX_then_Z", "X", {"+": ("LX+|1", "LX+|0"), "-": ("LX-|1", "LX-|0")}),
        "sequential_to_nonselective": CoarseGraining(
            "LX_then_Z", "LX_dagger_Z", {nonsel["1"]: ("LX+|1", "LX-|1"), nonsel["0"]: ("LX+|0", "LX-|0")}),
    }
    mixtures = {"identity_part_LX": Mixture("Z", "C_dagger_Z", deco.q, "LX_dagger_Z")}
    return make_model(lam, preps, responses, states, operators, instruments, povms, coarse, mixtures,
                      name="toy_bit", tol=tol)


# --- classification ----------------------------------------------------------

@dataclass(frozen=True)
class Classification:
    failed: frozenset[str]
    details: dict[str, tuple[str, ...]]
    checked_states: tuple[str, ...]

    @property
    def consistent(self) -> bool:
        return not self.failed


def _same_state(a: PureState, b: PureState, tol: Tolerances) -> bool:
    return abs(abs(np.vdot(a.amplitudes, b.amplitudes)) - 1.0) <= tol.tol_norm


def _find_effect(model: FiniteOntModel, m: np.ndarray, tol: Tolerances) -> str | None:
    for label in model.responses:
        if matrices_equal(model.operator(label), m, tol):
            return label
    return None


@dataclass(frozen=True)
class ScenarioBinding:
    pre: str
    post: str
    generators: tuple[str, ...]
    instruments: tuple[tuple[str, str, str], ...]  # (instrument, branch for P, branch for I-P)


def bind_scenario(model: FiniteOntModel, s: Scenario, tol: Tolerances = DEFAULT_TOLERANCES) -> ScenarioBinding:
    """Locate the scenario's states, effects and Lüders instruments in the model."""
    if model.dim != s.dim:
        raise ModelDoesNotReproduce(f"model acts on dimension {model.dim}, scenario on {s.dim}")
    pre = next((k for k, st in model.state_registry.items() if k in model.preparations and _same_state(st, s.pre, tol)), None)
    if pre is None:
        raise ModelDoesNotReproduce("model has no preparation for the pre-selected state")
    post = _find_effect(model, state_projector(s.post).matrix, tol)
    if post is None:
        raise ModelDoesNotReproduce("model has no effect for the post-selection projector")
    gens, insts = [], []
    for label, p in zip(s.labels, s.generators):
        e = _find_effect(model, p.matrix, tol)
        if e is None:
            raise ModelDoesNotReproduce(f"model has no effect for generator {label}")
        gens.append(e)
        target = luders_instrument([p, complement(p)], ["P", "notP"], tol)
        found = None
        for name, inst in model.instruments.items():
            if inst.quantum is None or len(inst.quantum.branches) != 2:
                continue
            b0, b1 = inst.quantum.labels
            if instruments_equal(inst.quantum, target, tol):
                found = (name, b0, b1)
            elif instruments_equal(luders_instrument([complement(p), p], tol=tol), inst.quantum, tol):
                found = (name, b1, b0)
            if found:
                break
        if found is None:
            raise ModelDoesNotReproduce(f"model has no Lüders instrument for generator {label}")
        insts.append(found)
    return ScenarioBinding(pre, post, tuple(gens), tuple(insts))


def classify_violation(model: FiniteOntModel, s: Scenario, tol: Tolerances = DEFAULT_TOLERANCES,
                       repro_tol: float = 1e-9) -> Classification:
    """Which noncontextuality assumption fails for a model of the scenario.

    Raises ModelDoesNotReproduce unless the model matches the quantum
    single-measurement and sequential (Lüders then post-selection)
    statistics of the scenario.
    """
    b = bind_scenario(model, s, tol)
    pairs = [(b.pre, e) for e in (*b.generators, b.post)]
    born = reproduces_born(model, pairs, repro_tol)
    problems = [f"Born({r.state}, {r.effect}): model {r.model:.6g} vs quantum {r.quantum:.6g}" for r in born.failures]
    mu = model.preparation(b.pre)
    phi_amp = s.post.amplitudes
    for label, p, (inst, bp, bq) in zip(s.labels, s.generators, b.instruments):
        for branch, proj in ((bp, p.matrix), (bq, np.eye(s.dim) - p.matrix)):
            quantum = abs(np.vdot(phi_amp, proj @ s.pre.amplitudes)) ** 2
            modelled = float(mu @ sequential_response(model, inst, branch, b.post))
            if abs(quantum - modelled) > repro_tol:
                problems.append(f"joint({label}: {inst}/{branch}, post): model {modelled:.6g} vs quantum {quantum:.6g}")
    if problems:
        raise ModelDoesNotReproduce("; ".join(problems))

    details: dict[str, tuple[str, ...]] = {}
    failed = set()

    # (a) algebraic conditions on Pr(.|lambda) over supp(mu) intersect Lambda^phi
    lam_phi = set(certain_set(model, b.post, tol))
    checked = tuple(lam for lam in support(model, b.pre, tol) if lam in lam_phi)
    alg = close(s.generators, tol=tol, labels=s.labels)
    bad = []
    for lam in checked:
        i = model.ontic_index(lam)
        fixes = {}
        for k, e in zip(alg.generator_indices, b.generators):
            fixes.setdefault(k, float(model.response(e)[i]))
        result = check_extension(build_constraints(alg, fixes, tol))
        if not result.feasible:
            bad.append(f"lambda={lam}: responses violate the algebraic conditions ({result.witness.summary})")
    if bad:
        failed.add(ALGEBRAIC)
        details[ALGEBRAIC] = tuple(bad)

    # (b) outcome determinism on the sharp effects involved
    det = check_outcome_determinism(model, [*b.generators, b.post], tol)
    if not det.passed:
        failed.add(DETERMINISM)
        details[DETERMINISM] = det.failures

    # (c) measurement noncontextuality: decompositions, operator consistency,
    # and the possibilistic consequence for each Lüders instrument
    nc = []
    for report in check_registered(model, tol):
        if report.name == "outcome determinism":
            continue
        nc.extend(f"{report.name}: {f}" for f in report.failures)
    for inst in dict.fromkeys(name for name, _, _ in b.instruments):
        dist = check_possibilistic_disturbance(model, inst, b.post, tol)
        nc.extend(f"{inst} makes {b.post} impossible from lambda={lam}" for lam in dist.violations)
    if nc:
        failed.add(MEASUREMENT_NC)
        details[MEASUREMENT_NC] = tuple(nc)
    return Classification(frozenset(failed), details, checked)
