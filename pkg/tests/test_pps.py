import numpy as np
import pytest
import sympy as sp

from oracles import exact_abl, exact_weak, ket, proj
from ppslab import fixtures
from ppslab.channels import make_instrument
from ppslab.errors import (
    DimensionMismatch,
    NotCoarseGraining,
    NotHermitian,
    OrthogonalPrePost,
    PostselectionImpossible,
    ScenarioError,
)
from ppslab.pps import (
    Scenario,
    abl,
    abl_assignment,
    coarse_graining_indices,
    instrument_conditional,
    is_anomalous,
    joint_probability,
    postselection_probability,
    round_binary,
    validate_scenario,
    weak_value,
)
from ppslab.qcore import basis_projector, basis_state, complement, ket_projector, make_state

# exact three-box data
S_PSI = ket(1, 1, 1)
S_PHI = ket(1, 1, -1)
S_P = [proj(sp.Matrix([1 if k == i else 0 for k in range(3)])) for i in range(3)]


@pytest.fixture
def tb():
    return fixtures.three_box()


@pytest.mark.parametrize("i", [0, 1, 2])
def test_three_box_abl_matches_exact_oracle(tb, i):
    expected = float(exact_abl(S_PSI, S_P[i], S_PHI))
    assert abl(tb.pre, basis_projector(3, [i]), tb.post) == pytest.approx(expected, abs=1e-12)


def test_three_box_abl_oracle_values():
    assert exact_abl(S_PSI, S_P[0], S_PHI) == 1
    assert exact_abl(S_PSI, S_P[2], S_PHI) == sp.Rational(1, 5)


def test_three_box_joint_and_postselection(tb):
    p1 = basis_projector(3, [0])
    assert joint_probability(tb.pre, p1, tb.post) == pytest.approx(1 / 9, abs=1e-15)
    assert postselection_probability(tb.pre, [p1, complement(p1)], tb.post) == pytest.approx(1 / 9, abs=1e-15)


def test_three_box_weak_values(tb):
    p12 = basis_projector(3, [0, 1])
    p3 = basis_projector(3, [2])
    assert exact_weak(S_PSI, S_P[0] + S_P[1], S_PHI) == 2
    assert weak_value(tb.pre, p12, tb.post) == pytest.approx(2.0, abs=1e-12)
    assert weak_value(tb.pre, p3, tb.post) == pytest.approx(-1.0, abs=1e-12)
    assert is_anomalous(2.0, p12.matrix)
    assert not is_anomalous(0.5, p12.matrix)


def test_cheshire_contextual_abl():
    s = fixtures.cheshire_cat()
    oracle_ops = {
        "P0xI": sp.diag(1, 1, 0, 0),
        "P1xP+": sp.Matrix(4, 4, lambda i, j: sp.Rational(1, 2) if i >= 2 and j >= 2 else 0),
        "P1xP-": sp.Matrix(4, 4, lambda i, j: (sp.Rational(1, 2) if i == j else -sp.Rational(1, 2))
                           if i >= 2 and j >= 2 else 0),
    }
    psi = ket(1, 0, 1, 0)
    phi = ket(1, 0, 0, 1)
    pol = list(oracle_ops.values())
    assert exact_abl(psi, oracle_ops["P1xP+"], phi, pol) == sp.Rational(1, 6)
    for label in ("P1xP+", "P1xP-"):
        got = abl(s.pre, s.generator(label), s.post, measurement=s.contexts[s.labels.index(label)])
        assert got == pytest.approx(1 / 6, abs=1e-12)
    assert abl(s.pre, s.generator("P1xI"), s.post) == pytest.approx(0.0, abs=1e-12)


def test_cheshire_two_outcome_abl_differs_from_contextual():
    s = fixtures.cheshire_cat()
    psi = ket(1, 0, 1, 0)
    phi = ket(1, 0, 0, 1)
    p_plus = sp.Matrix(4, 4, lambda i, j: sp.Rational(1, 2) if i >= 2 and j >= 2 else 0)
    p_minus = sp.Matrix(4, 4, lambda i, j: (sp.Rational(1, 2) if i == j else -sp.Rational(1, 2))
                        if i >= 2 and j >= 2 else 0)
    assert exact_abl(psi, p_plus, phi) == sp.Rational(1, 2)
    assert exact_abl(psi, p_minus, phi) == sp.Rational(1, 10)
    assert abl(s.pre, s.generator("P1xP+"), s.post) == pytest.approx(0.5, abs=1e-12)
    assert abl(s.pre, s.generator("P1xP-"), s.post) == pytest.approx(0.1, abs=1e-12)


def test_cheshire_weak_values():
    s = fixtures.cheshire_cat()
    expected = {"P1xI": 0.0, "P1xP+": 0.5, "P1xP-": -0.5}
    for label, w in expected.items():
        assert weak_value(s.pre, s.generator(label), s.post) == pytest.approx(w, abs=1e-12)


def test_postselection_impossible_names_projector():
    s = fixtures.qubit_orthogonal()
    with pytest.raises(PostselectionImpossible) as exc:
        abl(s.pre, s.generator("P0"), s.post, label="P0")
    assert exc.value.projector_label == "P0"
    assert abl(s.pre, s.generator("P+"), s.post) == pytest.approx(0.5, abs=1e-12)


def test_weak_value_errors():
    s = fixtures.qubit_orthogonal()
    with pytest.raises(OrthogonalPrePost):
        weak_value(s.pre, np.eye(2), s.post)
    tb = fixtures.three_box()
    with pytest.raises(NotHermitian):
        weak_value(tb.pre, np.triu(np.ones((3, 3))), tb.post)


def test_coarse_graining_indices():
    m = [basis_projector(3, [i]) for i in range(3)]
    assert coarse_graining_indices(basis_projector(3, [0, 2]), m) == [0, 2]
    with pytest.raises(NotCoarseGraining):
        coarse_graining_indices(ket_projector([1.0, 1.0, 0.0]), m)


def test_instrument_conditional_reset_instruments():
    plus = np.array([1.0, 1.0]) / np.sqrt(2)
    minus = np.array([1.0, -1.0]) / np.sqrt(2)
    ket0 = np.array([1.0, 0.0])
    e = make_instrument([("+", [np.outer(plus, plus)]), ("-", [np.outer(ket0, minus)])])
    e_prime = make_instrument([("+", [np.outer(ket0, plus)]), ("-", [np.outer(minus, minus)])])
    psi, phi = basis_state(2, 0), basis_state(2, 1)
    got = instrument_conditional(psi, e, phi)
    assert got["+"] == pytest.approx(1.0, abs=1e-12) and got["-"] == pytest.approx(0.0, abs=1e-12)
    got = instrument_conditional(psi, e_prime, phi)
    assert got["+"] == pytest.approx(0.0, abs=1e-12) and got["-"] == pytest.approx(1.0, abs=1e-12)


def test_scenario_defaults_and_validation():
    psi = make_state([1.0, 0.0])
    p = basis_projector(2, [0])
    s = Scenario(2, psi, psi, (p, complement(p)))
    assert s.labels == ("G0", "G1") and s.contexts == (None, None)
    with pytest.raises(ScenarioError):
        Scenario(2, psi, psi, (p, p), ("a", "a"))
    with pytest.raises(DimensionMismatch):
        Scenario(3, psi, psi, (p,))
    rep = validate_scenario(Scenario(2, psi, psi, (p,)))
    assert rep.missing_complements == ("G0",) and not rep.ok


def test_abl_assignment_rounding(tb):
    a = abl_assignment(tb)
    assert a.all_binary
    assert [e.rounded for e in a.entries] == [1, 0, 1, 0]
    assert round_binary(0.5) is None
    assert round_binary(1 - 1e-12) == 1
