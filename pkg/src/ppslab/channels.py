"""Completely positive maps in Kraus form, quantum instruments, and the
identity-part decomposition of a non-selective projective measurement."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, NotAMeasurement, NotTracePreservingTotal
from .qcore import (
    DEFAULT_TOLERANCES,
    PovmEffect,
    Projector,
    PureState,
    Tolerances,
    as_matrix,
    check_same_dim,
    dagger,
    is_projective_measurement,
    max_abs,
    state_projector,
    validate_effect,
)


def _freeze_ops(ops) -> tuple[np.ndarray, ...]:
    frozen = []
    for k in ops:
        a = np.array(k, dtype=complex, copy=True)
        a.setflags(write=False)
        frozen.append(a)
    return tuple(frozen)


@dataclass(frozen=True, eq=False)
class Channel:
    """CP map rho -> sum_k K rho K^dagger.

    ``trace_preserving`` records whether sum_k K^dagger K = I. Adjoints of
    non-unital channels are CP but not trace preserving, so the flag is
    informational rather than enforced.
    """

    dim: int
    kraus_ops: tuple[np.ndarray, ...]
    trace_preserving: bool

    def apply(self, rho) -> np.ndarray:
        rho = np.asarray(rho, dtype=complex)
        out = np.zeros((self.dim, self.dim), dtype=complex)
        for k in self.kraus_ops:
            out += k @ rho @ dagger(k)
        return out

    __call__ = apply

    def effect_sum(self) -> np.ndarray:
        """sum_k K^dagger K, i.e. the Heisenberg image of the identity."""
        out = np.zeros((self.dim, self.dim), dtype=complex)
        for k in self.kraus_ops:
            out += dagger(k) @ k
        return out

    def __repr__(self):
        return f"Channel(dim={self.dim}, kraus={len(self.kraus_ops)}, tp={self.trace_preserving})"


def make_channel(kraus_ops: Sequence, tol: Tolerances = DEFAULT_TOLERANCES, *, dim: int | None = None) -> Channel:
    ops = [as_matrix(k) for k in kraus_ops]
    if not ops and dim is None:
        raise ValueError("an empty Kraus list needs an explicit dimension")
    d = dim if dim is not None else ops[0].shape[0]
    for k in ops:
        if k.shape != (d, d):
            raise DimensionMismatch(f"Kraus operator of shape {k.shape} in a dimension-{d} channel")
    s = sum((dagger(k) @ k for k in ops), np.zeros((d, d), dtype=complex))
    tp = max_abs(s - np.eye(d)) <= tol.tol_op
    return Channel(d, _freeze_ops(ops), tp)


def unitary_channel(u, tol: Tolerances = DEFAULT_TOLERANCES) -> Channel:
    return make_channel([u], tol)


def luders_channel(measurement: Sequence[Projector], tol: Tolerances = DEFAULT_TOLERANCES) -> Channel:
    """Non-selective Lüders channel rho -> sum_j P_j rho P_j."""
    problem = is_projective_measurement(measurement, tol)
    if problem is not None:
        raise NotAMeasurement(problem)
    return make_channel([p.matrix for p in measurement], tol)


def adjoint_channel(c: Channel, tol: Tolerances = DEFAULT_TOLERANCES) -> Channel:
    return make_channel([dagger(k) for k in c.kraus_ops], tol, dim=c.dim)


def matrix_units(dim: int):
    for i in range(dim):
        for j in range(dim):
            e = np.zeros((dim, dim), dtype=complex)
            e[i, j] = 1.0
            yield e


def channels_equal(a: Channel, b: Channel, tol: Tolerances = DEFAULT_TOLERANCES) -> bool:
    """Extensional equality on the matrix-unit basis."""
    if a.dim != b.dim:
        return False
    return all(max_abs(a.apply(e) - b.apply(e)) <= tol.tol_op for e in matrix_units(a.dim))


@dataclass(frozen=True, eq=False)
class MixtureDecomposition:
    """sum_j P_j rho P_j = q rho + (1 - q) C(rho), with q = 2^(1-n)."""

    q: float
    identity_weight_check: float
    complement_channel: Channel
    unitaries: tuple[np.ndarray, ...]
    sign_strings: tuple[tuple[int, ...], ...]

    def reconstruct(self, rho) -> np.ndarray:
        rho = np.asarray(rho, dtype=complex)
        return self.q * rho + (1.0 - self.q) * self.complement_channel.apply(rho)


def reconstruction_residual(measurement: Sequence[Projector], decomposition: MixtureDecomposition) -> float:
    """Max-norm residual of the decomposition identity over all matrix units."""
    dim = measurement[0].dim
    worst = 0.0
    for e in matrix_units(dim):
        lhs = sum(p.matrix @ e @ p.matrix for p in measurement)
        worst = max(worst, max_abs(lhs - decomposition.reconstruct(e)))
    return worst


def mixture_decomposition(measurement: Sequence[Projector], tol: Tolerances = DEFAULT_TOLERANCES) -> MixtureDecomposition:
    problem = is_projective_measurement(measurement, tol)
    if problem is not None:
        raise NotAMeasurement(problem)
    n = len(measurement)
    dim = measurement[0].dim
    q = math.ldexp(1.0, 1 - n)
    all_ones = (1,) * n
    all_minus = (-1,) * n
    signs = tuple(x for x in itertools.product((1, -1), repeat=n) if x not in (all_ones, all_minus))
    unitaries = tuple(sum(xj * p.matrix for xj, p in zip(x, measurement)) for x in signs)
    if signs:
        scale = 1.0 / math.sqrt(len(signs))
        complement = make_channel([scale * u for u in unitaries], tol)
    else:
        complement = make_channel([], tol, dim=dim)
    frozen_u = _freeze_ops(unitaries)
    partial = MixtureDecomposition(q, 0.0, complement, frozen_u, signs)
    residual = reconstruction_residual(measurement, partial)
    return MixtureDecomposition(q, residual, complement, frozen_u, signs)


@dataclass(frozen=True, eq=False)
class Instrument:
    dim: int
    branches: tuple[tuple[str, Channel], ...]

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(label for label, _ in self.branches)

    def branch(self, label: str) -> Channel:
        for name, ch in self.branches:
            if name == label:
                return ch
        raise KeyError(label)

    def povm(self, tol: Tolerances = DEFAULT_TOLERANCES) -> dict[str, PovmEffect]:
        """Induced POVM {E_j^dagger(I)}."""
        return {label: validate_effect(ch.effect_sum(), tol) for label, ch in self.branches}

    def __repr__(self):
        return f"Instrument(dim={self.dim}, branches={list(self.labels)})"


def make_instrument(branches: Sequence[tuple[str, Sequence]], tol: Tolerances = DEFAULT_TOLERANCES) -> Instrument:
    """Build an instrument from (label, Kraus list) pairs."""
    if not branches:
        raise ValueError("an instrument needs at least one branch")
    labels = [label for label, _ in branches]
    if len(set(labels)) != len(labels):
        raise ValueError(f"duplicate branch labels in {labels}")
    dim = None
    built = []
    for label, kraus in branches:
        ops = [as_matrix(k) for k in kraus]
        if not ops:
            raise ValueError(f"branch {label!r} has no Kraus operators")
        for k in ops:
            if k.shape[0] != k.shape[1]:
                raise DimensionMismatch(f"branch {label!r}: Kraus operator is not square")
            if dim is None:
                dim = k.shape[0]
            check_same_dim(dim, k.shape[0])
        built.append((str(label), make_channel(ops, tol)))
    total = sum(ch.effect_sum() for _, ch in built)
    res = max_abs(total - np.eye(dim))
    if res > tol.tol_op:
        raise NotTracePreservingTotal(f"sum of branch effects differs from I by {res:.3e}")
    inst = Instrument(dim, tuple(built))
    inst.povm(tol)
    return inst


def luders_instrument(measurement: Sequence[Projector], labels: Sequence[str] | None = None,
                      tol: Tolerances = DEFAULT_TOLERANCES) -> Instrument:
    problem = is_projective_measurement(measurement, tol)
    if problem is not None:
        raise NotAMeasurement(problem)
    labels = list(labels) if labels is not None else [str(i) for i in range(len(measurement))]
    return make_instrument([(label, [p.matrix]) for label, p in zip(labels, measurement)], tol)


def instruments_equal(a: Instrument, b: Instrument, tol: Tolerances = DEFAULT_TOLERANCES) -> bool:
    """Branchwise extensional equality, ignoring labels but respecting order."""
    if a.dim != b.dim or len(a.branches) != len(b.branches):
        return False
    return all(channels_equal(x, y, tol) for (_, x), (_, y) in zip(a.branches, b.branches))


@dataclass(frozen=True, eq=False)
class SequentialPovm:
    """Lüders {P, I-P} followed by {|phi><phi|, I-|phi><phi|}."""

    p_phi: PovmEffect
    p_not_phi: PovmEffect
    notp_phi: PovmEffect
    notp_not_phi: PovmEffect

    def as_tuple(self) -> tuple[PovmEffect, PovmEffect, PovmEffect, PovmEffect]:
        return (self.p_phi, self.p_not_phi, self.notp_phi, self.notp_not_phi)


def sequential_effect(p: Projector, post: PureState, tol: Tolerances = DEFAULT_TOLERANCES) -> SequentialPovm:
    check_same_dim(p.dim, post.dim)
    eye = np.eye(p.dim)
    phi = state_projector(post).matrix
    q = eye - p.matrix
    return SequentialPovm(
        validate_effect(p.matrix @ phi @ p.matrix, tol),
        validate_effect(p.matrix @ (eye - phi) @ p.matrix, tol),
        validate_effect(q @ phi @ q, tol),
        validate_effect(q @ (eye - phi) @ q, tol),
    )
