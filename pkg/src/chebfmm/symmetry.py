"""Reduction of transfer vectors to the fundamental cone via reflections.

Any transfer vector t maps onto its cone representative
t_sym = sort(|t1|,|t2|,|t3|) descending (so t1 >= t2 >= t3 >= 0) through a
sequence of axial reflections (component sign flips) followed by one
diagonal reflection (axis reordering).  The same reflections act on the
multi-indices of the interpolation nodes, so every M2L operator equals a
row/column gather of its representative's operator:

    K_t[i, j] = K_rep[table[i], table[j]]

with ``table`` the flat-index permutation induced by the reflections.
Applying K_t to a vector therefore costs one scatter, one multiply by the
representative operator, and one gather; operators are never permuted in
memory.

Composition order matters: axial flips come first, then the axis
reordering.  The reordering sorts by descending |t| and is stable, so tied
axes keep their relative order.
"""

from __future__ import annotations

from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .interp import _component_indices
from .octree import TransferVector

__all__ = [
    "PermutationSpec",
    "SymmetryMap",
    "IDENTITY_SPEC",
    "canonicalize",
    "permute_index",
    "permutation_index_table",
    "inverse_permutation_table",
    "reduce_interaction_list",
]


class PermutationSpec(NamedTuple):
    """Axial flips plus an axis reordering, applied in that order.

    ``axial_flips[i]`` inverts component i+1 of a multi-index
    (a -> l+1-a); ``axis_order`` gives, per output slot, the 1-based input
    axis it reads, sorted so the slots carry descending |t|.
    """

    axial_flips: tuple[bool, bool, bool]
    axis_order: tuple[int, int, int]

    @property
    def is_identity(self) -> bool:
        return not any(self.axial_flips) and self.axis_order == (1, 2, 3)


IDENTITY_SPEC = PermutationSpec((False, False, False), (1, 2, 3))


def canonicalize(t: TransferVector) -> tuple[TransferVector, PermutationSpec]:
    """Cone representative of t and the reflections that reach it.

    The representative is sort(|t|) descending; the spec records which
    components were negated and the stable descending sort of the axes.
    """
    flips = tuple(c < 0 for c in t)
    abs_t = [abs(c) for c in t]
    order = tuple(
        int(i) + 1 for i in sorted(range(3), key=lambda i: (-abs_t[i], i))
    )
    t_sym = tuple(abs_t[i - 1] for i in order)
    return t_sym, PermutationSpec(flips, order)


def permute_index(spec: PermutationSpec, alpha, order: int) -> tuple[int, int, int]:
    """Apply a spec to a 1-based multi-index: flips first, then reordering."""
    flipped = tuple(
        order + 1 - int(a) if f else int(a) for a, f in zip(alpha, spec.axial_flips)
    )
    return tuple(flipped[i - 1] for i in spec.axis_order)


@lru_cache(maxsize=None)
def permutation_index_table(spec: PermutationSpec, order: int) -> np.ndarray:
    """Flat-index permutation realizing a spec, as 0-based gather positions.

    ``table[j]`` is the flat position of the permuted multi-index at flat
    position j, so permuting a vector is ``x[table]`` on the way out and
    ``x[inverse]`` on the way in.  The table is a permutation of
    0..order^3-1.
    """
    comp = _component_indices(order).copy()  # (3, order^3), 0-based components
    for axis in range(3):
        if spec.axial_flips[axis]:
            comp[axis] = order - 1 - comp[axis]
    comp = comp[[i - 1 for i in spec.axis_order]]
    table = comp[0] + comp[1] * order + comp[2] * order**2
    table.setflags(write=False)
    return table


@lru_cache(maxsize=None)
def inverse_permutation_table(spec: PermutationSpec, order: int) -> np.ndarray:
    table = permutation_index_table(spec, order)
    inv = np.empty_like(table)
    inv[table] = np.arange(table.size)
    inv.setflags(write=False)
    return inv


class SymmetryMap:
    """Cone representatives for an interaction list and the total assignment.

    ``cone`` lists the distinct representatives in sorted order;
    ``assignment[t]`` gives (index into cone, PermutationSpec) for every t
    of the input list.  For reflection-closed lists (such as the full
    316-vector far field) the cone members are exactly the list members
    lying in the cone; for partial lists they are the canonical images, so
    the assignment stays total.
    """

    def __init__(self, vectors):
        assignment: dict[TransferVector, tuple[TransferVector, PermutationSpec]] = {}
        reps = set()
        for t in vectors:
            t = tuple(int(c) for c in t)
            rep, spec = canonicalize(t)
            reps.add(rep)
            assignment[t] = (rep, spec)
        self.cone: list[TransferVector] = sorted(reps)
        self._index = {rep: i for i, rep in enumerate(self.cone)}
        self.assignment: dict[TransferVector, tuple[int, PermutationSpec]] = {
            t: (self._index[rep], spec) for t, (rep, spec) in assignment.items()
        }

    def __len__(self) -> int:
        return len(self.cone)

    def lookup(self, t: TransferVector) -> tuple[TransferVector, PermutationSpec]:
        idx, spec = self.assignment[t]
        return self.cone[idx], spec


def reduce_interaction_list(vectors) -> SymmetryMap:
    """Build the cone list and assignment for a set of transfer vectors."""
    return SymmetryMap(vectors)
