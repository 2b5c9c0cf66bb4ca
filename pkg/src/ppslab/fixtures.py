"""Named scenarios shipped with the package."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .qcore import Projector, basis_projector, complement, ket_projector, make_state, validate_projector
from .pps import Scenario

SQRT2 = np.sqrt(2.0)
SQRT3 = np.sqrt(3.0)

KET_PLUS = np.array([1.0, 1.0]) / SQRT2
KET_MINUS = np.array([1.0, -1.0]) / SQRT2


def three_box() -> Scenario:
    """Ball in one of three boxes; pre (1,1,1)/sqrt3, post (1,1,-1)/sqrt3.

    P1 and P2 project onto boxes 1 and 2 (basis indices 0 and 1).
    """
    psi = make_state(np.array([1, 1, 1]) / SQRT3)
    phi = make_state(np.array([1, 1, -1]) / SQRT3)
    p1 = basis_projector(3, [0])
    p2 = basis_projector(3, [1])
    gens = (p1, complement(p1), p2, complement(p2))
    return Scenario(3, psi, phi, gens, ("P1", "I-P1", "P2", "I-P2"), name="three_box")


def cheshire_cat_operators() -> dict[str, Projector]:
    """Two-qubit projectors, first factor = which path, second = polarization."""
    p0 = np.diag([1.0, 0.0])
    p1 = np.diag([0.0, 1.0])
    pp = np.outer(KET_PLUS, KET_PLUS)
    pm = np.outer(KET_MINUS, KET_MINUS)
    eye = np.eye(2)
    return {
        "P0xI": validate_projector(np.kron(p0, eye)),
        "P1xI": validate_projector(np.kron(p1, eye)),
        "P1xP+": validate_projector(np.kron(p1, pp)),
        "P1xP-": validate_projector(np.kron(p1, pm)),
    }


def cheshire_cat() -> Scenario:
    """Quantum cheshire cat.

    Path is measured with {P0xI, P1xI}; polarization in path 1 with the
    three-outcome measurement {P0xI, P1xP+, P1xP-}. Each generator carries
    the measurement it belongs to.
    """
    ops = cheshire_cat_operators()
    psi = make_state(np.kron(KET_PLUS, [1.0, 0.0]))
    phi = make_state(np.array([1.0, 0.0, 0.0, 1.0]) / SQRT2)
    path = (ops["P0xI"], ops["P1xI"])
    pol = (ops["P0xI"], ops["P1xP+"], ops["P1xP-"])
    gens = (ops["P1xI"], ops["P0xI"],
            ops["P1xP+"], complement(ops["P1xP+"]),
            ops["P1xP-"], complement(ops["P1xP-"]))
    labels = ("P1xI", "I-P1xI", "P1xP+", "I-P1xP+", "P1xP-", "I-P1xP-")
    contexts = (path, path, pol, pol, pol, pol)
    return Scenario(4, psi, phi, gens, labels, contexts, name="cheshire_cat")


def qubit_orthogonal() -> Scenario:
    """Pre |0>, post |1>, intermediate X- and Z-basis projectors.

    With Lüders updates the X-basis ABL values are 1/2; the Z-basis ones are
    undefined because the post-selection can never succeed.
    """
    psi = make_state([1.0, 0.0])
    phi = make_state([0.0, 1.0])
    gens = (ket_projector(KET_PLUS), ket_projector(KET_MINUS), basis_projector(2, [0]), basis_projector(2, [1]))
    return Scenario(2, psi, phi, gens, ("P+", "P-", "P0", "P1"), name="qubit_orthogonal")


def identity_only() -> Scenario:
    """Generators {I, 0} with nonorthogonal pre |0> and post |+>."""
    psi = make_state([1.0, 0.0])
    phi = make_state(KET_PLUS)
    gens = (basis_projector(2, [0, 1]), basis_projector(2, []))
    return Scenario(2, psi, phi, gens, ("I", "0"), name="identity_only")


SCENARIOS: dict[str, Callable[[], Scenario]] = {
    "three_box": three_box,
    "cheshire_cat": cheshire_cat,
    "qubit_orthogonal": qubit_orthogonal,
    "identity_only": identity_only,
}


def scenario(name: str) -> Scenario:
    try:
        return SCENARIOS[name]()
    except KeyError:
        raise KeyError(f"unknown scenario fixture {name!r}; known: {', '.join(SCENARIOS)}") from None


# --- candidate ontological models for the three-box scenario ----------------
#
# Each reproduces the Born and Lüders-sequential statistics of three_box()
# and breaks exactly one noncontextuality assumption.

def _three_box_model(name, ontic, mu, resp, lp1, lp2):
    from .channels import luders_instrument
    from .ontmodel import InstrumentModel, make_model
    from .qcore import state_projector

    s = three_box()
    eye = np.eye(3)
    p1, p2 = s.generator("P1"), s.generator("P2")
    phi = state_projector(s.post).matrix
    ops = {"P1": p1.matrix, "I-P1": eye - p1.matrix, "P2": p2.matrix, "I-P2": eye - p2.matrix,
           "phi": phi, "I-phi": eye - phi}
    resp = dict(resp)
    resp["I-P1"] = 1 - np.asarray(resp["P1"], dtype=float)
    resp["I-P2"] = 1 - np.asarray(resp["P2"], dtype=float)
    resp["I-phi"] = 1 - np.asarray(resp["phi"], dtype=float)
    insts = {
        "L1": InstrumentModel({"P1": lp1[0], "I-P1": lp1[1]}, {"P1": "P1", "I-P1": "I-P1"},
                              luders_instrument([p1, complement(p1)], ["P1", "I-P1"])),
        "L2": InstrumentModel({"P2": lp2[0], "I-P2": lp2[1]}, {"P2": "P2", "I-P2": "I-P2"},
                              luders_instrument([p2, complement(p2)], ["P2", "I-P2"])),
    }
    povms = {"M1": ("P1", "I-P1"), "M2": ("P2", "I-P2"), "Post": ("phi", "I-phi")}
    return make_model(ontic, {"psi": mu}, resp, {"psi": s.pre}, ops, insts, povms, name=name)


def _moves(ontic, table):
    n = len(ontic)
    k = np.zeros((n, n))
    for src, dests in table.items():
        for dst, p in dests.items():
            k[ontic.index(src), ontic.index(dst)] += p
    return k


def three_box_disturbing_model():
    """Box location is definite and the algebra holds at every ontic state,
    but measuring one box can destroy a successful post-selection."""
    ontic = ("a1", "a0", "b1", "b0", "c0")  # box, then whether phi would pass
    mu = [1 / 18, 5 / 18, 1 / 18, 5 / 18, 1 / 3]
    resp = {"P1": [1, 1, 0, 0, 0], "P2": [0, 0, 1, 1, 0], "phi": [1, 0, 1, 0, 0]}
    third = {"a1": 1 / 3, "a0": 2 / 3}
    lp1 = (_moves(ontic, {"a1": third, "a0": third}),
           _moves(ontic, {"b1": {"b0": 1}, "b0": {"b0": 1}, "c0": {"c0": 1}}))
    third = {"b1": 1 / 3, "b0": 2 / 3}
    lp2 = (_moves(ontic, {"b1": third, "b0": third}),
           _moves(ontic, {"a1": {"a0": 1}, "a0": {"a0": 1}, "c0": {"c0": 1}}))
    return _three_box_model("three_box_disturbing", ontic, mu, resp, lp1, lp2)


def three_box_two_boxes_model():
    """The post-selected ontic state answers yes to both boxes at once."""
    ontic = ("ab", "a", "b", "c")
    mu = [1 / 9, 2 / 9, 2 / 9, 4 / 9]
    resp = {"P1": [1, 1, 0, 0], "P2": [1, 0, 1, 0], "phi": [1, 0, 0, 0]}
    third = {"ab": 1 / 3, "a": 2 / 3}
    lp1 = (_moves(ontic, {"ab": third, "a": third}), _moves(ontic, {"b": {"b": 1}, "c": {"c": 1}}))
    third = {"ab": 1 / 3, "b": 2 / 3}
    lp2 = (_moves(ontic, {"ab": third, "b": third}), _moves(ontic, {"a": {"a": 1}, "c": {"c": 1}}))
    return _three_box_model("three_box_two_boxes", ontic, mu, resp, lp1, lp2)


def three_box_stochastic_model():
    """Box responses are probabilistic even on the post-selected ontic state."""
    ontic = ("s", "f")  # post-selection passes / fails
    mu = [1 / 9, 8 / 9]
    resp = {"P1": [1 / 3, 1 / 3], "P2": [1 / 3, 1 / 3], "phi": [1, 0]}
    yes = _moves(ontic, {"s": {"s": 1 / 3}, "f": {"s": 1 / 12, "f": 1 / 4}})
    no = _moves(ontic, {"s": {"f": 2 / 3}, "f": {"f": 2 / 3}})
    return _three_box_model("three_box_stochastic", ontic, mu, resp, (yes, no), (yes, no))


def _toy_bit():
    from .ontmodel import build_toy_bit_model
    return build_toy_bit_model()


MODELS: dict[str, Callable] = {
    "toy_bit": _toy_bit,
    "three_box_disturbing": three_box_disturbing_model,
    "three_box_two_boxes": three_box_two_boxes_model,
    "three_box_stochastic": three_box_stochastic_model,
}


def model(name: str):
    try:
        return MODELS[name]()
    except KeyError:
        raise KeyError(f"unknown model fixture {name!r}; known: {', '.join(MODELS)}") from None
