"""Pre- and post-selected statistics: ABL probabilities, weak values and
instrument-conditional probabilities."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .channels import Instrument
from .errors import (
    DimensionMismatch,
    NotAMeasurement,
    NotCoarseGraining,
    NotHermitian,
    OrthogonalPrePost,
    PostselectionImpossible,
    ScenarioError,
)
from .qcore import (
    DEFAULT_TOLERANCES,
    Projector,
    PureState,
    Tolerances,
    as_matrix,
    check_same_dim,
    clamp_probability,
    complement,
    hermitian_residual,
    is_projective_measurement,
    max_abs,
    projector_equal,
)


def _amplitude(psi: PureState, m: np.ndarray, phi: PureState) -> complex:
    """<phi|M|psi>."""
    return complex(np.vdot(phi.amplitudes, m @ psi.amplitudes))


def joint_probability(psi: PureState, p: Projector, phi: PureState, tol: Tolerances = DEFAULT_TOLERANCES) -> float:
    """Probability of outcome P followed by passing the post-selection."""
    check_same_dim(psi.dim, p.dim, phi.dim)
    return clamp_probability(abs(_amplitude(psi, p.matrix, phi)) ** 2, tol)


def postselection_probability(psi: PureState, measurement: Sequence[Projector], phi: PureState,
                              tol: Tolerances = DEFAULT_TOLERANCES) -> float:
    check_same_dim(psi.dim, phi.dim, *(p.dim for p in measurement))
    return clamp_probability(sum(abs(_amplitude(psi, p.matrix, phi)) ** 2 for p in measurement), tol)


def coarse_graining_indices(p: Projector, measurement: Sequence[Projector],
                            tol: Tolerances = DEFAULT_TOLERANCES) -> list[int]:
    """Indices j with sum_j P_j = p, for p a coarse-grained outcome of the measurement."""
    problem = is_projective_measurement(measurement, tol)
    if problem is not None:
        raise NotAMeasurement(problem)
    check_same_dim(p.dim, measurement[0].dim)
    chosen = [j for j, q in enumerate(measurement)
              if q.rank > 0 and max_abs(p.matrix @ q.matrix - q.matrix) <= tol.tol_op]
    total = sum((measurement[j].matrix for j in chosen), np.zeros_like(p.matrix))
    if max_abs(total - p.matrix) > tol.tol_op:
        raise NotCoarseGraining("projector is not a sum of outcomes of the given measurement")
    return chosen


def abl(psi: PureState, p: Projector, phi: PureState, tol: Tolerances = DEFAULT_TOLERANCES, *,
        measurement: Sequence[Projector] | None = None, label: str | None = None) -> float:
    """ABL probability of P given pre-selection psi and post-selection phi.

    With ``measurement=None`` the intermediate measurement is {P, I-P}.
    Otherwise P must be one outcome, or a union of outcomes, of the given
    projective measurement, and the ABL rule is taken for that measurement.
    """
    check_same_dim(psi.dim, p.dim, phi.dim)
    if measurement is None:
        measurement = [p, complement(p)]
        selected = [0]
    else:
        selected = coarse_graining_indices(p, measurement, tol)
    joints = [abs(_amplitude(psi, q.matrix, phi)) ** 2 for q in measurement]
    marginal = sum(joints)
    if marginal <= tol.tol_prob:
        name = f" for {label}" if label else ""
        raise PostselectionImpossible(
            f"post-selection probability {marginal:.3e} <= {tol.tol_prob:.1e}{name}: ABL probability undefined",
            label,
        )
    return clamp_probability(sum(joints[j] for j in selected) / marginal, tol)


def weak_value(psi: PureState, a, phi: PureState, tol: Tolerances = DEFAULT_TOLERANCES) -> float:
    """Re(<phi|A|psi> / <phi|psi>) for Hermitian A."""
    m = a.matrix if hasattr(a, "matrix") else as_matrix(a)
    check_same_dim(psi.dim, m.shape[0], phi.dim)
    res = hermitian_residual(m)
    if res > tol.tol_op:
        raise NotHermitian(res, tol.tol_op)
    overlap = complex(np.vdot(phi.amplitudes, psi.amplitudes))
    if abs(overlap) <= tol.tol_prob:
        raise OrthogonalPrePost(f"|<phi|psi>| = {abs(overlap):.3e}: weak value undefined")
    return float(np.real(_amplitude(psi, m, phi) / overlap))


def is_anomalous(value: float, a, tol: Tolerances = DEFAULT_TOLERANCES) -> bool:
    """True if a weak value lies outside the eigenvalue range of A."""
    m = a.matrix if hasattr(a, "matrix") else np.asarray(a)
    eig = np.linalg.eigvalsh(0.5 * (m + m.conj().T))
    return value < eig[0] - tol.tol_prob or value > eig[-1] + tol.tol_prob


def instrument_conditional(psi: PureState, inst: Instrument, phi: PureState,
                           tol: Tolerances = DEFAULT_TOLERANCES) -> dict[str, float]:
    """Probability of each instrument branch conditioned on pre- and post-selection."""
    check_same_dim(psi.dim, inst.dim, phi.dim)
    rho = psi.density()
    weights = {}
    for label, ch in inst.branches:
        out = ch.apply(rho)
        weights[label] = float(np.real(np.vdot(phi.amplitudes, out @ phi.amplitudes)))
    total = sum(weights.values())
    if total <= tol.tol_prob:
        raise PostselectionImpossible(f"post-selection probability {total:.3e} <= {tol.tol_prob:.1e}")
    return {label: clamp_probability(w / total, tol) for label, w in weights.items()}


@dataclass(frozen=True, eq=False)
class Scenario:
    """One pre- and post-selection experiment with a set of intermediate projectors.

    ``contexts[i]`` optionally names the projective measurement in which
    generator ``i`` is measured; ``None`` means the two-outcome measurement
    {P, I-P}.
    """

    dim: int
    pre: PureState
    post: PureState
    generators: tuple[Projector, ...]
    labels: tuple[str, ...] = ()
    contexts: tuple[tuple[Projector, ...] | None, ...] = ()
    name: str = ""

    def __post_init__(self):
        if not self.labels:
            object.__setattr__(self, "labels", tuple(f"G{i}" for i in range(len(self.generators))))
        if not self.contexts:
            object.__setattr__(self, "contexts", (None,) * len(self.generators))
        if len(self.labels) != len(self.generators) or len(self.contexts) != len(self.generators):
            raise ScenarioError("labels and contexts must match the generator list in length")
        if len(set(self.labels)) != len(self.labels):
            raise ScenarioError(f"duplicate generator labels: {list(self.labels)}")
        dims = [self.pre.dim, self.post.dim, *(g.dim for g in self.generators)]
        for ctx in self.contexts:
            if ctx is not None:
                dims.extend(q.dim for q in ctx)
        if any(d != self.dim for d in dims):
            raise DimensionMismatch(f"scenario of dimension {self.dim} has components of dimensions {sorted(set(dims))}")

    def generator(self, label: str) -> Projector:
        return self.generators[self.labels.index(label)]


@dataclass(frozen=True)
class AblEntry:
    label: str
    raw: float
    rounded: int | None

    @property
    def binary(self) -> bool:
        return self.rounded is not None


@dataclass(frozen=True, eq=False)
class AblAssignment:
    entries: tuple[AblEntry, ...]
    projectors: tuple[Projector, ...]

    @property
    def all_binary(self) -> bool:
        return all(e.binary for e in self.entries)

    def value(self, label: str) -> float:
        for e in self.entries:
            if e.label == label:
                return e.raw
        raise KeyError(label)

    def values(self) -> list[float]:
        return [e.raw for e in self.entries]


def round_binary(value: float, tol: Tolerances = DEFAULT_TOLERANCES) -> int | None:
    if value <= tol.tol_prob:
        return 0
    if 1.0 - value <= tol.tol_prob:
        return 1
    return None


def abl_assignment(s: Scenario, tol: Tolerances = DEFAULT_TOLERANCES) -> AblAssignment:
    entries = []
    for label, p, ctx in zip(s.labels, s.generators, s.contexts):
        v = abl(s.pre, p, s.post, tol, measurement=ctx, label=label)
        entries.append(AblEntry(label, v, round_binary(v, tol)))
    return AblAssignment(tuple(entries), s.generators)


@dataclass(frozen=True)
class ScenarioReport:
    overlap: float
    orthogonal: bool
    missing_complements: tuple[str, ...] = ()
    context_problems: tuple[str, ...] = field(default=())

    @property
    def ok(self) -> bool:
        return not self.orthogonal and not self.missing_complements and not self.context_problems


def validate_scenario(s: Scenario, tol: Tolerances = DEFAULT_TOLERANCES) -> ScenarioReport:
    """Report-style checks: pre/post overlap, complement closure, contexts."""
    overlap = abs(s.post.inner(s.pre)) ** 2
    orthogonal = overlap <= tol.tol_prob
    missing = []
    for label, p in zip(s.labels, s.generators):
        c = complement(p)
        if not any(projector_equal(c, q, tol) for q in s.generators):
            missing.append(label)
    problems = []
    for label, p, ctx in zip(s.labels, s.generators, s.contexts):
        if ctx is None:
            continue
        try:
            coarse_graining_indices(p, ctx, tol)
        except (NotAMeasurement, NotCoarseGraining) as exc:
            problems.append(f"{label}: {exc}")
    return ScenarioReport(float(overlap), bool(orthogonal), tuple(missing), tuple(problems))
