import numpy as np
import pytest

from ppslab.errors import (
    DimensionCapExceeded,
    DimensionMismatch,
    NonIntegerTrace,
    NotAnEffect,
    NotHermitian,
    NotIdempotent,
    NotNormalized,
)
from ppslab.qcore import (
    DEFAULT_TOLERANCES,
    TOL_ENV_VAR,
    Tolerances,
    basis_projector,
    basis_state,
    born,
    commutes,
    complement,
    identity,
    is_projective_measurement,
    ket_projector,
    make_state,
    product,
    projector_equal,
    projector_sum,
    random_measurement,
    random_projector,
    random_state,
    random_unitary,
    validate_effect,
    validate_projector,
    zero,
)


def test_make_state_requires_unit_norm():
    with pytest.raises(NotNormalized):
        make_state([1.0, 1.0])
    s = make_state([1.0, 1.0], normalize=True)
    assert np.isclose(np.linalg.norm(s.amplitudes), 1.0)


def test_make_state_rejects_zero_vector_and_large_dim():
    with pytest.raises(NotNormalized):
        make_state([0.0, 0.0], normalize=True)
    with pytest.raises(DimensionCapExceeded):
        make_state(np.ones(17), normalize=True)


def test_state_is_immutable():
    s = basis_state(3, 1)
    with pytest.raises(ValueError):
        s.amplitudes[0] = 1.0


def test_inner_is_conjugate_linear_in_first_slot():
    a = make_state([1.0, 1.0j], normalize=True)
    b = basis_state(2, 1)
    assert np.isclose(a.inner(b), -1j / np.sqrt(2))


def test_validate_projector_checks_in_order():
    with pytest.raises(NotHermitian):
        validate_projector([[0, 1], [0, 0]])
    with pytest.raises(NotIdempotent):
        validate_projector([[0.5, 0], [0, 0]])
    p = validate_projector([[1, 0], [0, 0]])
    assert p.rank == 1


def test_validate_projector_symmetrizes_small_noise():
    m = np.diag([1.0, 0.0]).astype(complex)
    m[0, 1] = 1e-12j
    p = validate_projector(m)
    assert np.allclose(p.matrix, p.matrix.conj().T, atol=0)


def test_non_integer_trace_is_reported():
    # idempotent within a loose tolerance but with a fractional trace
    loose = Tolerances.uniform(1e-4)
    with pytest.raises(NonIntegerTrace):
        validate_projector(np.diag([1.0, 9e-5, 9e-5]), loose)


def test_validate_effect():
    validate_effect(np.diag([0.3, 1.0]))
    with pytest.raises(NotAnEffect):
        validate_effect(np.diag([1.2, 0.0]))


def test_identity_zero_complement():
    p = basis_projector(3, [0, 2])
    assert p.rank == 2
    assert projector_equal(complement(p), basis_projector(3, [1]))
    assert projector_equal(complement(identity(3)), zero(3))


def test_basis_projector_index_check():
    with pytest.raises(IndexError):
        basis_projector(2, [2])


def test_ket_projector_normalizes():
    p = ket_projector([1.0, 1.0])
    assert np.allclose(p.matrix, 0.5 * np.ones((2, 2)))


def test_commutes_and_product():
    p = basis_projector(3, [0, 1])
    q = basis_projector(3, [1, 2])
    assert commutes(p, q)
    assert projector_equal(product(p, q), basis_projector(3, [1]))
    plus = ket_projector([1.0, 1.0])
    assert not commutes(plus, basis_projector(2, [0]))


def test_projector_equal_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        projector_equal(identity(2), identity(3))


def test_projector_sum_of_orthogonal():
    s = projector_sum([basis_projector(3, [0]), basis_projector(3, [2])])
    assert projector_equal(s, basis_projector(3, [0, 2]))


def test_born_rule():
    s = make_state([1.0, 1.0, 1.0], normalize=True)
    assert born(s, basis_projector(3, [0])) == pytest.approx(1 / 3, abs=1e-15)


def test_is_projective_measurement_reasons():
    assert is_projective_measurement([basis_projector(2, [0]), basis_projector(2, [1])]) is None
    assert "sum" in is_projective_measurement([basis_projector(2, [0])])
    overlapping = [basis_projector(2, [0]), basis_projector(2, [0, 1]), zero(2)]
    assert is_projective_measurement(overlapping) is not None


def test_tolerance_bounds_and_env(monkeypatch):
    with pytest.raises(ValueError):
        Tolerances.uniform(0.0)
    with pytest.raises(ValueError):
        Tolerances.uniform(1e-3)
    monkeypatch.setenv(TOL_ENV_VAR, "1e-7")
    assert Tolerances.from_env().tol_prob == 1e-7
    monkeypatch.delenv(TOL_ENV_VAR)
    assert Tolerances.from_env() == DEFAULT_TOLERANCES


def test_random_generators(rng):
    for _ in range(20):
        d = int(rng.integers(2, 7))
        u = random_unitary(d, rng)
        assert np.allclose(u.conj().T @ u, np.eye(d), atol=1e-12)
        s = random_state(d, rng)
        assert np.isclose(np.linalg.norm(s.amplitudes), 1.0)
        r = int(rng.integers(0, d + 1))
        assert random_projector(d, r, rng).rank == r
        n = int(rng.integers(1, d + 1))
        m = random_measurement(d, n, rng)
        assert len(m) == n and is_projective_measurement(m) is None
        assert all(p.rank >= 1 for p in m)
