"""Dense complex linear algebra primitives: states, projectors and effects.

Everything here is an immutable value. Arrays handed out by the types are
marked read-only so they can be shared freely.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DimensionCapExceeded,
    DimensionMismatch,
    NonIntegerTrace,
    NotAnEffect,
    NotHermitian,
    NotIdempotent,
    NotNormalized,
)

DEFAULT_TOL = 1e-9
DEFAULT_MAX_DIM = 16
TOL_ENV_VAR = "PPS_LAB_TOL"


@dataclass(frozen=True)
class Tolerances:
    tol_norm: float = DEFAULT_TOL
    tol_op: float = DEFAULT_TOL
    tol_prob: float = DEFAULT_TOL

    def __post_init__(self):
        for name in ("tol_norm", "tol_op", "tol_prob"):
            value = getattr(self, name)
            if not (0.0 < value <= 1e-4):
                raise ValueError(f"{name} must lie in (0, 1e-4], got {value!r}")

    @classmethod
    def uniform(cls, tol: float) -> "Tolerances":
        return cls(tol, tol, tol)

    @classmethod
    def from_env(cls) -> "Tolerances":
        """Defaults, overridden by ``PPS_LAB_TOL`` when it is set."""
        raw = os.environ.get(TOL_ENV_VAR)
        if not raw:
            return cls()
        return cls.uniform(float(raw))


DEFAULT_TOLERANCES = Tolerances()


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex, copy=True)
    a.setflags(write=False)
    return a


def as_matrix(m, *, max_dim: int = DEFAULT_MAX_DIM) -> np.ndarray:
    """Coerce to a finite complex 2-D array."""
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2:
        raise DimensionMismatch(f"expected a matrix, got an array of shape {a.shape}")
    if a.shape[0] == 0 or a.shape[1] == 0:
        raise DimensionMismatch("matrix must have positive dimensions")
    if max(a.shape) > max_dim:
        raise DimensionCapExceeded(f"dimension {max(a.shape)} exceeds the cap {max_dim}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix entries must be finite")
    return a


def max_abs(a: np.ndarray) -> float:
    return float(np.max(np.abs(a))) if a.size else 0.0


def dagger(a: np.ndarray) -> np.ndarray:
    return np.conj(np.transpose(a))


@dataclass(frozen=True, eq=False)
class PureState:
    amplitudes: np.ndarray

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    @property
    def ket(self) -> np.ndarray:
        return self.amplitudes

    def density(self) -> np.ndarray:
        return np.outer(self.amplitudes, np.conj(self.amplitudes))

    def inner(self, other: "PureState") -> complex:
        """<self|other>."""
        check_same_dim(self.dim, other.dim)
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def __repr__(self):
        return f"PureState(dim={self.dim})"


def make_state(amplitudes, tol: Tolerances = DEFAULT_TOLERANCES, *, normalize: bool = False,
               max_dim: int = DEFAULT_MAX_DIM) -> PureState:
    v = np.asarray(amplitudes, dtype=complex).reshape(-1)
    if v.size == 0:
        raise DimensionMismatch("state must have positive dimension")
    if v.size > max_dim:
        raise DimensionCapExceeded(f"dimension {v.size} exceeds the cap {max_dim}")
    if not np.all(np.isfinite(v)):
        raise ValueError("state amplitudes must be finite")
    norm = float(np.linalg.norm(v))
    if normalize:
        if norm == 0.0:
            raise NotNormalized("cannot normalize the zero vector")
        v = v / norm
    elif abs(norm - 1.0) > tol.tol_norm:
        raise NotNormalized(f"state norm is {norm!r}, not 1 within {tol.tol_norm:.1e}")
    return PureState(_frozen(v))


def basis_state(dim: int, index: int) -> PureState:
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return PureState(_frozen(v))


@dataclass(frozen=True, eq=False)
class Projector:
    matrix: np.ndarray
    rank: int

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __repr__(self):
        return f"Projector(dim={self.dim}, rank={self.rank})"


@dataclass(frozen=True, eq=False)
class PovmEffect:
    matrix: np.ndarray

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __repr__(self):
        return f"PovmEffect(dim={self.dim})"


def check_same_dim(*dims: int) -> None:
    if len(set(dims)) > 1:
        raise DimensionMismatch(f"dimensions differ: {sorted(set(dims))}")


def hermitian_residual(a: np.ndarray) -> float:
    return max_abs(a - dagger(a))


def validate_projector(matrix, tol: Tolerances = DEFAULT_TOLERANCES, *,
                       max_dim: int = DEFAULT_MAX_DIM) -> Projector:
    """Check that ``matrix`` is a Hermitian idempotent and wrap it.

    The stored matrix is the Hermitian part of the input so that
    round-off in the anti-Hermitian direction does not accumulate through
    products.
    """
    m = as_matrix(matrix, max_dim=max_dim)
    if m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"projector must be square, got shape {m.shape}")
    res = hermitian_residual(m)
    if res > tol.tol_op:
        raise NotHermitian(res, tol.tol_op)
    m = 0.5 * (m + dagger(m))
    res = max_abs(m @ m - m)
    if res > tol.tol_op:
        raise NotIdempotent(res, tol.tol_op)
    trace = float(np.real(np.trace(m)))
    rank = int(round(trace))
    if abs(trace - rank) > tol.tol_op:
        raise NonIntegerTrace(f"projector trace {trace!r} is not within {tol.tol_op:.1e} of an integer")
    return Projector(_frozen(m), rank)


def validate_effect(matrix, tol: Tolerances = DEFAULT_TOLERANCES, *,
                    max_dim: int = DEFAULT_MAX_DIM) -> PovmEffect:
    m = as_matrix(matrix, max_dim=max_dim)
    if m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"effect must be square, got shape {m.shape}")
    res = hermitian_residual(m)
    if res > tol.tol_op:
        raise NotHermitian(res, tol.tol_op)
    m = 0.5 * (m + dagger(m))
    eig = np.linalg.eigvalsh(m)
    if eig[0] < -tol.tol_op or eig[-1] > 1.0 + tol.tol_op:
        raise NotAnEffect(f"effect eigenvalues span [{eig[0]:.6g}, {eig[-1]:.6g}], outside [0, 1]")
    return PovmEffect(_frozen(m))


def identity(dim: int) -> Projector:
    return Projector(_frozen(np.eye(dim)), dim)


def zero(dim: int) -> Projector:
    return Projector(_frozen(np.zeros((dim, dim))), 0)


def basis_projector(dim: int, indices: Iterable[int]) -> Projector:
    """Diagonal projector onto the span of the listed computational basis vectors."""
    idx = sorted(set(int(i) for i in indices))
    for i in idx:
        if not 0 <= i < dim:
            raise IndexError(f"basis index {i} out of range for dimension {dim}")
    d = np.zeros(dim)
    d[idx] = 1.0
    return Projector(_frozen(np.diag(d)), len(idx))


def ket_projector(vector, *, normalize: bool = True) -> Projector:
    """|v><v| for a (by default normalized) vector."""
    v = np.asarray(vector, dtype=complex).reshape(-1)
    if normalize:
        v = v / np.linalg.norm(v)
    return Projector(_frozen(np.outer(v, np.conj(v))), 1)


def state_projector(state: PureState) -> Projector:
    return Projector(_frozen(state.density()), 1)


def complement(p: Projector) -> Projector:
    return Projector(_frozen(np.eye(p.dim) - p.matrix), p.dim - p.rank)


def commutator_norm(p: Projector, q: Projector) -> float:
    check_same_dim(p.dim, q.dim)
    return max_abs(p.matrix @ q.matrix - q.matrix @ p.matrix)


def commutes(p: Projector, q: Projector, tol: Tolerances = DEFAULT_TOLERANCES) -> bool:
    return commutator_norm(p, q) <= tol.tol_op


def projector_equal(p: Projector, q: Projector, tol: Tolerances = DEFAULT_TOLERANCES) -> bool:
    check_same_dim(p.dim, q.dim)
    if p.rank != q.rank:
        return False
    return max_abs(p.matrix - q.matrix) <= tol.tol_op


def matrices_equal(a, b, tol: Tolerances = DEFAULT_TOLERANCES) -> bool:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        return False
    return max_abs(a - b) <= tol.tol_op


def product(p: Projector, q: Projector, tol: Tolerances = DEFAULT_TOLERANCES) -> Projector:
    """PQ for commuting projectors, symmetrized and re-validated."""
    check_same_dim(p.dim, q.dim)
    pq = p.matrix @ q.matrix
    return validate_projector(0.5 * (pq + dagger(pq)), tol)


def projector_sum(projectors: Sequence[Projector], tol: Tolerances = DEFAULT_TOLERANCES) -> Projector:
    """Sum of mutually orthogonal projectors."""
    if not projectors:
        raise ValueError("empty projector sum")
    check_same_dim(*(p.dim for p in projectors))
    return validate_projector(sum(p.matrix for p in projectors), tol)


def born(state: PureState, operator, tol: Tolerances = DEFAULT_TOLERANCES) -> float:
    """<psi|E|psi>, clamped to [0, 1] after a sanity check against tol_prob."""
    m = operator.matrix if hasattr(operator, "matrix") else np.asarray(operator)
    check_same_dim(state.dim, m.shape[0])
    value = float(np.real(np.vdot(state.amplitudes, m @ state.amplitudes)))
    return clamp_probability(value, tol)


def clamp_probability(value: float, tol: Tolerances = DEFAULT_TOLERANCES) -> float:
    if value < -tol.tol_prob or value > 1.0 + tol.tol_prob:
        raise ValueError(f"probability {value!r} outside [0, 1] beyond tolerance")
    return min(1.0, max(0.0, value))


def is_projective_measurement(projectors: Sequence[Projector], tol: Tolerances = DEFAULT_TOLERANCES) -> str | None:
    """Return None for a valid projective measurement, else the reason it fails."""
    if not projectors:
        return "empty measurement"
    dims = {p.dim for p in projectors}
    if len(dims) > 1:
        return f"mixed dimensions {sorted(dims)}"
    dim = dims.pop()
    total = sum(p.matrix for p in projectors)
    res = max_abs(total - np.eye(dim))
    if res > tol.tol_op:
        return f"projectors do not sum to the identity (residual {res:.3e})"
    for i in range(len(projectors)):
        for j in range(i + 1, len(projectors)):
            overlap = max_abs(projectors[i].matrix @ projectors[j].matrix)
            if overlap > tol.tol_op:
                return f"projectors {i} and {j} are not orthogonal (max|PiPj| = {overlap:.3e})"
    return None


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR of a complex Ginibre matrix."""
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_state(dim: int, rng: np.random.Generator) -> PureState:
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return make_state(v, normalize=True)


def random_projector(dim: int, rank: int, rng: np.random.Generator) -> Projector:
    u = random_unitary(dim, rng)[:, :rank]
    return validate_projector(u @ dagger(u))


def random_measurement(dim: int, n: int, rng: np.random.Generator) -> list[Projector]:
    """Random rank-partitioned projective measurement with n nonzero outcomes."""
    if not 1 <= n <= dim:
        raise ValueError("need 1 <= n <= dim")
    cuts = np.sort(rng.choice(np.arange(1, dim), size=n - 1, replace=False)) if n > 1 else np.array([], int)
    bounds = [0, *cuts.tolist(), dim]
    u = random_unitary(dim, rng)
    out = []
    for a, b in zip(bounds[:-1], bounds[1:]):
        cols = u[:, a:b]
        out.append(validate_projector(cols @ dagger(cols)))
    return out
