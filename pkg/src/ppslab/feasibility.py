"""Extension of an assignment from generators to the generated algebra.

The algebraic conditions on f over the closed algebra are

* (i)   0 <= f(P) <= 1,
* (ii)  f(I) = 1 and f(0) = 0,
* (iii) f(P + Q - PQ) = f(P) + f(Q) - f(PQ) for commuting P, Q.

They form a linear feasibility problem over the reals. Infeasibility is
first searched for by exact rational propagation, which reproduces the
short derivations a human would write; when propagation is inconclusive a
phase-one LP decides the question and its duals give a Farkas certificate.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Mapping

import numpy as np
from scipy.optimize import linprog

from .errors import MissingElement, NumericallyIndeterminate, ScenarioError, TooLarge
from .palgebra import DEFAULT_MAX_SIZE, ProjectorAlgebra, close, wrap_label
from .pps import AblAssignment, Scenario, ScenarioReport, abl_assignment, validate_scenario
from .qcore import DEFAULT_TOLERANCES, Tolerances

RATIONAL_DENOMINATOR_LIMIT = 10**6
BRUTE_FORCE_MAX_VARIABLES = 12


def to_fraction(value, tol: Tolerances = DEFAULT_TOLERANCES) -> Fraction:
    """Exact rational for a probability: snap to 0/1, else to a small-denominator
    rational when one lies within tol_prob."""
    if isinstance(value, Fraction):
        return value
    v = float(value)
    if abs(v) <= tol.tol_prob:
        return Fraction(0)
    if abs(v - 1.0) <= tol.tol_prob:
        return Fraction(1)
    approx = Fraction(v).limit_denominator(RATIONAL_DENOMINATOR_LIMIT)
    if abs(float(approx) - v) <= tol.tol_prob:
        return approx
    return Fraction(v)


@dataclass(frozen=True)
class Constraint:
    """Sparse equality sum_k coeff_k f_{var_k} = rhs, tagged with its origin."""

    coeffs: tuple[tuple[int, int], ...]
    rhs: Fraction
    condition: str
    indices: tuple[int, ...]
    tag: str
    trivial: bool = False

    def variables(self) -> list[int]:
        return [v for v, _ in self.coeffs]


@dataclass(frozen=True, eq=False)
class ConstraintSystem:
    variable_count: int
    labels: tuple[str, ...]
    constraints: tuple[Constraint, ...]
    bounds: tuple[tuple[Fraction, Fraction], ...]
    fixed: dict[int, Fraction]
    generator_indices: tuple[int, ...]
    zero_index: int
    identity_index: int
    tol: Tolerances = DEFAULT_TOLERANCES

    def nontrivial(self) -> list[int]:
        return [k for k, c in enumerate(self.constraints) if not c.trivial]

    def residuals(self, f) -> np.ndarray:
        f = np.asarray(f, dtype=float)
        return np.array([sum(a * f[v] for v, a in c.coeffs) - float(c.rhs) for c in self.constraints])

    def satisfied_by(self, f, tol: float | None = None) -> bool:
        tol = self.tol.tol_prob if tol is None else tol
        f = np.asarray(f, dtype=float)
        if np.any(f < -tol) or np.any(f > 1 + tol):
            return False
        res = self.residuals(f)
        return bool(np.all(np.abs(res) <= tol)) if res.size else True


def _combine(terms) -> tuple[tuple[int, int], ...]:
    acc: dict[int, int] = {}
    for v, a in terms:
        acc[v] = acc.get(v, 0) + a
    return tuple(sorted((v, a) for v, a in acc.items() if a != 0))


def build_constraints(alg: ProjectorAlgebra, fixed: Mapping[int, float | Fraction] | None = None,
                      tol: Tolerances = DEFAULT_TOLERANCES) -> ConstraintSystem:
    fixed = dict(fixed or {})
    gens = set(alg.generator_indices)
    exact: dict[int, Fraction] = {}
    for k, value in fixed.items():
        if k not in gens:
            raise ValueError(f"index {k} ({alg.labels[k]}) is not a generator index")
        fv = to_fraction(value, tol)
        if fv < 0 or fv > 1:
            raise ValueError(f"fixed value {value!r} for {alg.labels[k]} is outside [0, 1]")
        exact[k] = fv
    labels = alg.labels
    cons = [
        Constraint(((alg.identity_index, 1),), Fraction(1), "ii", (alg.identity_index,), "(ii) f(I) = 1"),
        Constraint(((alg.zero_index, 1),), Fraction(0), "ii", (alg.zero_index,), "(ii) f(0) = 0"),
    ]
    for k in sorted(exact):
        cons.append(Constraint(((k, 1),), exact[k], "fixed", (k,), f"fixed f({labels[k]}) = {exact[k]}"))
    c = alg.complement_of
    for i, j in sorted(alg.commuting_pairs):
        try:
            k = alg.product(i, j)
            s = c[alg.product(c[i], c[j])]
        except KeyError as exc:
            raise MissingElement(f"algebra lacks the product or disjunction for ({labels[i]}, {labels[j]})") from exc
        coeffs = _combine([(s, 1), (i, -1), (j, -1), (k, 1)])
        cons.append(Constraint(coeffs, Fraction(0), "iii", (i, j, k, s),
                               f"(iii) on ({labels[i]}, {labels[j]})", trivial=not coeffs))
    bounds = tuple((Fraction(0), Fraction(1)) for _ in range(alg.size))
    return ConstraintSystem(alg.size, labels, tuple(cons), bounds, exact, alg.generator_indices,
                            alg.zero_index, alg.identity_index, tol)


# --- witnesses ---------------------------------------------------------------

@dataclass(frozen=True)
class WitnessStep:
    kind: str  # given | derive | bound | clash
    constraint: int | None
    target: int | None
    value: Fraction | None
    parents: tuple[int, ...]
    text: str
    provenance: str


@dataclass(frozen=True)
class Witness:
    kind: str  # derivation | farkas
    steps: tuple[WitnessStep, ...] = ()
    multipliers: tuple[tuple[int, Fraction], ...] = ()
    summary: str = ""

    def lines(self) -> list[str]:
        if self.kind == "derivation":
            return [f"{n + 1}. {s.text}  [{s.provenance}]" for n, s in enumerate(self.steps)]
        return [self.summary] + [f"  multiplier {m} on {tag}" for tag, m in self._tagged()]

    def _tagged(self):
        return [(step.provenance, step.value) for step in self.steps]


@dataclass(frozen=True, eq=False)
class ExtensionResult:
    feasible: bool
    assignment: np.ndarray | None = None
    witness: Witness | None = None
    margin: float = 0.0


def _fmt(x: Fraction) -> str:
    return str(x)


def _pair_expr(cs: ConstraintSystem, i: int, j: int, k: int) -> str:
    a, b = wrap_label(cs.labels[i]), wrap_label(cs.labels[j])
    if k == cs.zero_index:
        return f"{a} + {b}"
    return f"{a} + {b} - {a}*{b}"


def _describe_derivation(cs: ConstraintSystem, c: Constraint, target: int, value: Fraction,
                         known: Mapping[int, Fraction]) -> tuple[str, str]:
    """Human-readable text and display name of the derived variable."""
    L = cs.labels
    if c.condition == "ii":
        return f"f({L[target]}) = {_fmt(value)}", L[target]
    if c.condition == "fixed":
        return f"f({L[target]}) = {_fmt(value)}", L[target]
    i, j, k, s = c.indices
    names = {i: L[i], j: L[j], k: L[k], s: _pair_expr(cs, i, j, k)}

    def val(v):
        return value if v == target else known[v]

    if target == s:
        text = (f"f({names[s]}) = f({L[i]}) + f({L[j]}) - f({L[k]}) = "
                f"{_fmt(val(i))} + {_fmt(val(j))} - {_fmt(val(k))} = {_fmt(value)}")
        return text, names[s]
    relation = f"f({names[s]}) = f({L[i]}) + f({L[j]}) - f({L[k]})"
    others = ", ".join(f"f({names[v]}) = {_fmt(known[v])}" for v in (s, i, j, k)
                       if v != target and v in known)
    return f"{relation} with {others} gives f({L[target]}) = {_fmt(value)}", L[target]


def _provenance(c: Constraint) -> str:
    if c.condition == "ii":
        return "condition (ii)"
    if c.condition == "fixed":
        return "fixed value"
    return f"condition (iii), pair {c.tag[len('(iii) on '):]}"


def _propagate(cs: ConstraintSystem) -> tuple[list[WitnessStep], list[WitnessStep], float]:
    """Exact breadth-first propagation of single-unknown equations.

    Returns (steps, contradictions, smallest contradiction magnitude). Stops
    after the first round that yields a contradiction whose magnitude
    exceeds tol_prob.
    """
    tol = cs.tol.tol_prob
    steps: list[WitnessStep] = []
    known: dict[int, Fraction] = {}
    step_of: dict[int, int] = {}
    display: dict[int, str] = {}
    checked: set[int] = set()
    live = cs.nontrivial()
    while True:
        new: dict[int, tuple[Fraction, int]] = {}
        clashes: list[tuple[int, Fraction]] = []
        for ci in live:
            c = cs.constraints[ci]
            unknown = [v for v in c.variables() if v not in known]
            if not unknown:
                if ci not in checked:
                    checked.add(ci)
                    lhs = sum(a * known[v] for v, a in c.coeffs)
                    if lhs != c.rhs:
                        clashes.append((ci, lhs))
            elif len(unknown) == 1 and unknown[0] not in new:
                v = unknown[0]
                a = dict(c.coeffs)[v]
                rest = sum(b * known[u] for u, b in c.coeffs if u != v)
                new[v] = ((c.rhs - rest) / a, ci)
        contradictions: list[WitnessStep] = []
        worst = 0.0
        for ci, lhs in clashes:
            c = cs.constraints[ci]
            gap = abs(lhs - c.rhs)
            if gap <= tol:
                continue
            parents = tuple(step_of[v] for v in c.variables())
            if c.condition == "iii":
                i, j, k, s = c.indices
                text = (f"f({_pair_expr(cs, i, j, k)}) = {_fmt(known[s])} but f({cs.labels[i]}) + "
                        f"f({cs.labels[j]}) - f({cs.labels[k]}) = "
                        f"{_fmt(known[i] + known[j] - known[k])}: contradiction")
            else:
                text = f"{c.tag} contradicts derived value {_fmt(lhs)}"
            contradictions.append(WitnessStep("clash", ci, None, lhs, parents, text, _provenance(c)))
            worst = max(worst, float(gap))
        for v, (value, ci) in new.items():
            c = cs.constraints[ci]
            parents = tuple(step_of[u] for u in c.variables() if u != v)
            text, name = _describe_derivation(cs, c, v, value, known)
            kind = "derive" if c.condition == "iii" else "given"
            steps.append(WitnessStep(kind, ci, v, value, parents, text, _provenance(c)))
            step_of[v] = len(steps) - 1
            display[v] = name
        for v, (value, ci) in new.items():
            known[v] = value
            lo, hi = cs.bounds[v]
            if value < lo or value > hi:
                gap = float(lo - value if value < lo else value - hi)
                if gap <= tol:
                    continue
                rel = f"< {lo}" if value < lo else f"> {hi}"
                contradictions.append(WitnessStep(
                    "bound", None, v, value, (step_of[v],),
                    f"f({display[v]}) = {_fmt(value)} {rel}: violates 0 <= f <= 1", "condition (i)"))
                worst = max(worst, gap)
        if contradictions:
            return steps, contradictions, worst
        if not new:
            return steps, [], 0.0


def _ancestors(steps: list[WitnessStep], roots) -> list[int]:
    seen: set[int] = set()
    stack = list(roots)
    while stack:
        k = stack.pop()
        if k in seen:
            continue
        seen.add(k)
        stack.extend(steps[k].parents)
    return sorted(seen)


def _derivation_witness(cs: ConstraintSystem, steps, contradictions) -> Witness:
    roots = [p for c in contradictions for p in c.parents]
    chain = [steps[k] for k in _ancestors(steps, roots)]
    # re-index parents into the extracted chain
    old_ids = _ancestors(steps, roots)
    remap = {old: new for new, old in enumerate(old_ids)}
    fixed_chain = [WitnessStep(s.kind, s.constraint, s.target, s.value,
                               tuple(remap[p] for p in s.parents), s.text, s.provenance) for s in chain]
    tail = [WitnessStep(c.kind, c.constraint, c.target, c.value,
                        tuple(remap[p] for p in c.parents), c.text, c.provenance) for c in contradictions]
    summary = "; ".join(c.text for c in contradictions)
    return Witness("derivation", tuple(fixed_chain + tail), (), summary)


def _lp_phase_one(cs: ConstraintSystem):
    rows = cs.nontrivial()
    n = cs.variable_count
    m = len(rows)
    a = np.zeros((m, n))
    b = np.zeros(m)
    for r, ci in enumerate(rows):
        for v, coef in cs.constraints[ci].coeffs:
            a[r, v] = coef
        b[r] = float(cs.constraints[ci].rhs)
    a_eq = np.hstack([a, np.eye(m), -np.eye(m)])
    cost = np.concatenate([np.zeros(n), np.ones(2 * m)])
    bounds = [(float(lo), float(hi)) for lo, hi in cs.bounds] + [(0, None)] * (2 * m)
    res = linprog(cost, A_eq=a_eq, b_eq=b, bounds=bounds, method="highs",
                  options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10})
    if res.status != 0:
        raise RuntimeError(f"phase-one LP failed: {res.message}")
    duals = np.asarray(res.eqlin.marginals, dtype=float)
    return rows, float(res.fun), res.x[:n], duals


def farkas_gap(cs: ConstraintSystem, multipliers: Mapping[int, Fraction]) -> Fraction:
    """Exact amount by which the combined equality leaves its box range.

    For y over constraints, sum_k y_k (a_k . f) = sum_k y_k b_k must hold,
    but over the box 0 <= f <= 1 the left side ranges over
    [sum min(c_i, 0), sum max(c_i, 0)] with c = A^T y. A positive return
    value certifies infeasibility.
    """
    c: dict[int, Fraction] = {}
    beta = Fraction(0)
    for ci, y in multipliers.items():
        con = cs.constraints[ci]
        beta += y * con.rhs
        for v, a in con.coeffs:
            c[v] = c.get(v, Fraction(0)) + y * a
    upper = sum((max(x, Fraction(0)) * cs.bounds[v][1] + min(x, Fraction(0)) * cs.bounds[v][0]
                 for v, x in c.items()), Fraction(0))
    lower = sum((min(x, Fraction(0)) * cs.bounds[v][1] + max(x, Fraction(0)) * cs.bounds[v][0]
                 for v, x in c.items()), Fraction(0))
    return max(beta - upper, lower - beta)


def _farkas_witness(cs: ConstraintSystem, rows, duals) -> Witness | None:
    for scale in (1, -1):
        mult = {ci: Fraction(float(scale * y)).limit_denominator(RATIONAL_DENOMINATOR_LIMIT)
                for ci, y in zip(rows, duals) if abs(y) > 1e-12}
        mult = {ci: y for ci, y in mult.items() if y != 0}
        if mult and farkas_gap(cs, mult) > 0:
            steps = tuple(WitnessStep("multiplier", ci, None, y, (), cs.constraints[ci].tag,
                                      _provenance(cs.constraints[ci]))
                          for ci, y in sorted(mult.items()))
            gap = farkas_gap(cs, mult)
            summary = (f"Farkas certificate: the weighted sum of {len(mult)} equalities leaves the range "
                       f"allowed by 0 <= f <= 1 by {gap}")
            return Witness("farkas", steps, tuple(sorted(mult.items())), summary)
    return None


def check_extension(cs: ConstraintSystem) -> ExtensionResult:
    """Decide whether the system has a real solution; witness infeasibility."""
    tol = cs.tol.tol_prob
    steps, contradictions, worst = _propagate(cs)
    if contradictions:
        if worst < 10 * tol:
            raise NumericallyIndeterminate(worst)
        return ExtensionResult(False, None, _derivation_witness(cs, steps, contradictions), worst)
    rows, value, f, duals = _lp_phase_one(cs)
    if value <= tol:
        f = np.clip(f, 0.0, 1.0)
        exact = [Fraction(float(x)).limit_denominator(RATIONAL_DENOMINATOR_LIMIT) for x in f]
        if all(sum(a * exact[v] for v, a in c.coeffs) == c.rhs for c in cs.constraints):
            f = np.array([float(x) for x in exact])
        if not cs.satisfied_by(f):
            raise NumericallyIndeterminate(value, "LP solution does not satisfy the constraints within tol_prob")
        return ExtensionResult(True, f, None, value)
    if value < 10 * tol:
        raise NumericallyIndeterminate(value)
    witness = _farkas_witness(cs, rows, duals)
    if witness is None:
        witness = Witness("farkas", (), (), f"phase-one LP optimum {value:.6g} > 0 (no exact certificate recovered)")
    return ExtensionResult(False, None, witness, value)


def replay_witness(cs: ConstraintSystem, witness: Witness) -> bool:
    """Re-derive a witness from the constraint system with exact arithmetic.

    Returns True when the witness reproduces a contradiction; raises
    ValueError pointing at the first step that does not follow.
    """
    if witness.kind == "farkas":
        if not witness.multipliers:
            raise ValueError("certificate carries no multipliers")
        if farkas_gap(cs, dict(witness.multipliers)) <= 0:
            raise ValueError("multipliers do not yield a contradiction")
        return True
    values: dict[int, Fraction] = {}
    contradiction = False
    for n, step in enumerate(witness.steps):
        if step.kind in ("given", "derive"):
            c = cs.constraints[step.constraint]
            unknown = [v for v in c.variables() if v != step.target]
            if any(v not in values for v in unknown) or step.target not in c.variables():
                raise ValueError(f"step {n + 1} uses values not established earlier")
            a = dict(c.coeffs)[step.target]
            value = (c.rhs - sum(b * values[u] for u, b in c.coeffs if u != step.target)) / a
            if value != step.value:
                raise ValueError(f"step {n + 1} claims {step.value}, recomputed {value}")
            values[step.target] = value
        elif step.kind == "bound":
            lo, hi = cs.bounds[step.target]
            if values.get(step.target) != step.value or lo <= step.value <= hi:
                raise ValueError(f"step {n + 1} is not a bound violation")
            contradiction = True
        elif step.kind == "clash":
            c = cs.constraints[step.constraint]
            if any(v not in values for v in c.variables()):
                raise ValueError(f"step {n + 1} uses values not established earlier")
            if sum(a * values[v] for v, a in c.coeffs) == c.rhs:
                raise ValueError(f"step {n + 1} is not a clash")
            contradiction = True
        else:
            raise ValueError(f"unknown step kind {step.kind!r}")
    if not contradiction:
        raise ValueError("derivation ends without a contradiction")
    return True


# --- brute-force oracle ------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BruteForceResult:
    feasible: bool
    assignment: tuple[Fraction, ...] | None = None
    nodes: int = 0


def brute_force_feasibility(cs: ConstraintSystem, grid: int = 1) -> BruteForceResult:
    """Depth-first enumeration over values in {0, 1/grid, ..., 1}.

    Fixed variables only take their fixed value. All arithmetic is exact.
    Independent of the propagation and LP code paths.
    """
    n = cs.variable_count
    if n > BRUTE_FORCE_MAX_VARIABLES:
        raise TooLarge(f"{n} variables exceeds the brute-force limit of {BRUTE_FORCE_MAX_VARIABLES}")
    if grid < 1:
        raise ValueError("grid must be a positive integer")
    grid_values = [Fraction(k, grid) for k in range(grid + 1)]
    candidates = []
    for v in range(n):
        lo, hi = cs.bounds[v]
        pool = [cs.fixed[v]] if v in cs.fixed else grid_values
        candidates.append([x for x in pool if lo <= x <= hi])
    # every constraint is checked once its highest-numbered variable is assigned
    due: list[list[Constraint]] = [[] for _ in range(n)]
    for c in cs.constraints:
        vs = c.variables()
        if not vs:
            if c.rhs != 0:
                return BruteForceResult(False)
            continue
        due[max(vs)].append(c)
    assignment: list[Fraction] = [Fraction(0)] * n
    nodes = 0

    def search(depth: int) -> bool:
        nonlocal nodes
        if depth == n:
            return True
        for x in candidates[depth]:
            nodes += 1
            assignment[depth] = x
            if all(sum(a * assignment[v] for v, a in c.coeffs) == c.rhs for c in due[depth]):
                if search(depth + 1):
                    return True
        return False

    if search(0):
        return BruteForceResult(True, tuple(assignment), nodes)
    return BruteForceResult(False, None, nodes)


# --- verdict -----------------------------------------------------------------

class VerdictKind(str, Enum):
    LOGICAL_PARADOX = "LogicalParadox"
    ALGEBRAIC_VIOLATION_ONLY = "AlgebraicViolationOnly"
    CONSISTENT = "Consistent"
    NOT_BINARY_CONSISTENT = "NotBinary+Consistent"

    @property
    def exit_code(self) -> int:
        return {"LogicalParadox": 10, "AlgebraicViolationOnly": 11}.get(self.value, 0)


@dataclass(frozen=True, eq=False)
class Verdict:
    kind: VerdictKind
    abl: AblAssignment
    algebra: ProjectorAlgebra
    constraints: ConstraintSystem
    scenario_report: ScenarioReport
    assignment: np.ndarray | None = None
    witness: Witness | None = None
    timing: dict[str, float] = field(default_factory=dict)

    @property
    def is_proof_of_contextuality(self) -> bool:
        return self.kind is VerdictKind.LOGICAL_PARADOX


def generator_fixes(s: Scenario, alg: ProjectorAlgebra, assignment: AblAssignment,
                    tol: Tolerances = DEFAULT_TOLERANCES) -> dict[int, Fraction]:
    """Map algebra indices to ABL values, binary ones snapped to exact 0/1.

    Two generators landing on the same algebra element with different values
    are reported as a ScenarioError.
    """
    fixes: dict[int, Fraction] = {}
    for entry, k in zip(assignment.entries, alg.generator_indices):
        value = Fraction(entry.rounded) if entry.binary else to_fraction(entry.raw, tol)
        if k in fixes and abs(float(fixes[k] - value)) > tol.tol_prob:
            raise ScenarioError(f"generator {entry.label} repeats an earlier projector with a different ABL value")
        fixes.setdefault(k, value)
    return fixes


def paradox_verdict(s: Scenario, max_size: int = DEFAULT_MAX_SIZE,
                    tol: Tolerances = DEFAULT_TOLERANCES) -> Verdict:
    """ABL assignment -> closure -> constraints -> extension check."""
    timing = {}
    t0 = time.perf_counter()
    report = validate_scenario(s, tol)
    if report.missing_complements:
        raise ScenarioError(f"generator set is not closed under complements: missing I-P for "
                            f"{', '.join(report.missing_complements)}")
    if report.context_problems:
        raise ScenarioError("; ".join(report.context_problems))
    assignment = abl_assignment(s, tol)
    t1 = time.perf_counter()
    alg = close(s.generators, max_size, tol, labels=s.labels)
    t2 = time.perf_counter()
    cs = build_constraints(alg, generator_fixes(s, alg, assignment, tol), tol)
    result = check_extension(cs)
    t3 = time.perf_counter()
    timing.update(abl=t1 - t0, closure=t2 - t1, feasibility=t3 - t2, total=t3 - t0)
    binary = assignment.all_binary
    if result.feasible:
        kind = VerdictKind.CONSISTENT if binary else VerdictKind.NOT_BINARY_CONSISTENT
    else:
        kind = VerdictKind.LOGICAL_PARADOX if binary else VerdictKind.ALGEBRAIC_VIOLATION_ONLY
    return Verdict(kind, assignment, alg, cs, report, result.assignment, result.witness, timing)
