"""Independent reference computations used by the tests.

Nothing here imports ppslab. Exact values come from sympy; closures and
feasibility of diagonal algebras are computed on sets of basis indices.
"""

from __future__ import annotations

import itertools
from fractions import Fraction

import sympy as sp


def ket(*entries):
    v = sp.Matrix(entries)
    return v / sp.sqrt((v.H * v)[0])


def proj(v):
    return v * v.H


def exact_abl(psi, p, phi, measurement=None):
    """ABL probability with sympy matrices; measurement defaults to {P, I-P}."""
    n = p.shape[0]
    if measurement is None:
        measurement = [p, sp.eye(n) - p]
    joints = [sp.Abs((phi.H * q * psi)[0]) ** 2 for q in measurement]
    selected = sum(sp.Abs((phi.H * q * psi)[0]) ** 2 for q in measurement if sp.simplify(p * q - q) == sp.zeros(n))
    return sp.nsimplify(sp.simplify(selected / sum(joints)))


def exact_weak(psi, a, phi):
    return sp.nsimplify(sp.simplify(sp.re((phi.H * a * psi)[0] / (phi.H * psi)[0])))


# --- diagonal algebras as set systems -----------------------------------------

def set_closure(dim: int, generators):
    """Closure of subsets of range(dim) under complement and intersection."""
    full = frozenset(range(dim))
    elems = {frozenset(), full, *map(frozenset, generators)}
    while True:
        new = {full - a for a in elems} | {a & b for a in elems for b in elems}
        if new <= elems:
            return elems
        elems |= new


def atoms(elems):
    """Minimal nonempty members of a finite Boolean set algebra."""
    nonempty = [a for a in elems if a]
    return [a for a in nonempty if not any(b < a for b in nonempty)]


def set_feasible(dim: int, generators, fixes) -> bool:
    """Whether some finitely additive probability on the generated algebra
    takes the given 0/1 values. Binary fixes only: a solution exists iff some
    atom is inside every generator fixed to 1 and outside every one fixed to 0."""
    elems = set_closure(dim, generators)
    for at in atoms(elems):
        if all((at <= frozenset(g)) == bool(v) for g, v in zip(generators, fixes) if v is not None):
            return True
    return False


def hand_fixpoint_three_box():
    """Closure of {P1, I-P1, P2, I-P2} for three boxes, as index sets."""
    return set_closure(3, [{0}, {1, 2}, {1}, {0, 2}])


def all_binary_functions(n):
    return itertools.product((Fraction(0), Fraction(1)), repeat=n)
