"""Partial boolean algebra generated by a set of projectors.

The closure is a worklist fixpoint over two rules: complement, and product
of commuting pairs. Elements are deduplicated by a linear scan with
:func:`projector_equal`; floating matrices are never hashed.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Sequence

from .errors import ClosureBudgetExceeded, DimensionMismatch
from .qcore import (
    DEFAULT_TOLERANCES,
    Projector,
    Tolerances,
    commutes,
    complement,
    identity,
    max_abs,
    product,
    projector_equal,
    validate_projector,
    zero,
)

DEFAULT_MAX_SIZE = 4096


@dataclass(frozen=True, eq=False)
class ProjectorAlgebra:
    dim: int
    elements: tuple[Projector, ...]
    labels: tuple[str, ...]
    zero_index: int
    identity_index: int
    complement_of: tuple[int, ...]
    commuting_pairs: frozenset[tuple[int, int]]
    product_of: dict[tuple[int, int], int]
    generator_indices: tuple[int, ...]
    tol: Tolerances = DEFAULT_TOLERANCES

    def __len__(self):
        return len(self.elements)

    @property
    def size(self) -> int:
        return len(self.elements)

    def index_of(self, p: Projector) -> int | None:
        return _find(self.elements, p, self.tol)

    def product(self, i: int, j: int) -> int:
        """Index of P_i P_j for a commuting pair (either order, or i == j)."""
        if i == j:
            return i
        return self.product_of[(min(i, j), max(i, j))]

    def disjunction(self, i: int, j: int) -> int:
        """Index of P_i + P_j - P_i P_j, i.e. I - (I - P_i)(I - P_j)."""
        c = self.complement_of
        return c[self.product(c[i], c[j])]

    def commute(self, i: int, j: int) -> bool:
        return i == j or (min(i, j), max(i, j)) in self.commuting_pairs


def _find(elements: Sequence[Projector], p: Projector, tol: Tolerances) -> int | None:
    for k, q in enumerate(elements):
        if projector_equal(q, p, tol):
            return k
    return None


def wrap_label(label: str) -> str:
    """Parenthesize composite labels before using them as operands."""
    composite = " " in label or "*" in label or label.startswith("I-")
    return f"({label})" if composite else label


def _readable_names(elements: Sequence[Projector], names: list[str], fixed: set[int],
                    tol: Tolerances) -> list[str]:
    """Rename derived elements that equal an orthogonal sum of two named ones."""
    out = list(names)
    base = sorted(fixed)
    for k, p in enumerate(elements):
        if k in fixed:
            continue
        for a_pos, a in enumerate(base):
            for b in base[a_pos + 1:]:
                pa, pb = elements[a], elements[b]
                if pa.rank == 0 or pb.rank == 0 or pa.rank + pb.rank != p.rank:
                    continue
                if max_abs(pa.matrix @ pb.matrix) <= tol.tol_op and \
                        max_abs(pa.matrix + pb.matrix - p.matrix) <= tol.tol_op:
                    out[k] = f"{wrap_label(names[a])} + {wrap_label(names[b])}"
                    break
            else:
                continue
            break
    return out


def close(generators: Sequence[Projector], max_size: int = DEFAULT_MAX_SIZE,
          tol: Tolerances = DEFAULT_TOLERANCES, labels: Sequence[str] | None = None) -> ProjectorAlgebra:
    """Smallest set containing the generators, 0 and I that is closed under
    complements and products of commuting pairs."""
    if max_size < 2:
        raise ValueError("max_size must be at least 2")
    if not generators:
        raise ValueError("at least one generator is required to fix the dimension")
    dim = generators[0].dim
    for g in generators:
        if g.dim != dim:
            raise DimensionMismatch(f"generators of dimensions {dim} and {g.dim}")
    labels = list(labels) if labels is not None else [f"G{i}" for i in range(len(generators))]

    elements: list[Projector] = [zero(dim), identity(dim)]
    names: list[str] = ["0", "I"]
    generator_indices = []
    for g, name in zip(generators, labels):
        g = validate_projector(g.matrix, tol)
        k = _find(elements, g, tol)
        if k is None:
            elements.append(g)
            names.append(name)
            k = len(elements) - 1
        generator_indices.append(k)

    def add(p: Projector, name: str) -> int:
        k = _find(elements, p, tol)
        if k is not None:
            return k
        if len(elements) >= max_size:
            raise ClosureBudgetExceeded(len(elements) + 1, max_size)
        elements.append(p)
        names.append(name)
        worklist.append(len(elements) - 1)
        return len(elements) - 1

    worklist = deque(range(len(elements)))
    processed: list[int] = []
    while worklist:
        x = worklist.popleft()
        add(complement(elements[x]), f"I-{wrap_label(names[x])}")
        for y in processed:
            if commutes(elements[x], elements[y], tol):
                add(product(elements[y], elements[x], tol), f"{wrap_label(names[y])}*{wrap_label(names[x])}")
        processed.append(x)

    final = tuple(validate_projector(p.matrix, tol) for p in elements)
    names = _readable_names(final, names, {0, 1, *generator_indices}, tol)
    m = len(final)
    comp = []
    for i in range(m):
        k = _find(final, complement(final[i]), tol)
        assert k is not None, "closure lost a complement"
        comp.append(k)
    pairs = set()
    products = {}
    for i in range(m):
        for j in range(i + 1, m):
            if commutes(final[i], final[j], tol):
                pairs.add((i, j))
                k = _find(final, product(final[i], final[j], tol), tol)
                assert k is not None, "closure lost a product"
                products[(i, j)] = k
    return ProjectorAlgebra(
        dim=dim,
        elements=final,
        labels=tuple(names),
        zero_index=0,
        identity_index=1,
        complement_of=tuple(comp),
        commuting_pairs=frozenset(pairs),
        product_of=products,
        generator_indices=tuple(generator_indices),
        tol=tol,
    )


def commuting_pairs_of(alg: ProjectorAlgebra) -> list[tuple[int, int]]:
    return sorted(alg.commuting_pairs)
