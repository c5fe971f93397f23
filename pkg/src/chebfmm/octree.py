"""Uniform octree over a bounding cube and near/far interaction lists.

Cells are addressed by (level, ijk) with ijk in [0, 2^level)^3.  A particle
is binned with half-open cells per axis (the last cell is closed), so
points on interior boundaries deterministically go to the neighbor with
the larger index.  Only occupied cells are stored; interaction lists refer
to occupied cells exclusively.

With integer transfer vectors t = (c_x - c_y)/w, the near field is
|t| <= sqrt(3) (at most 27 cells including self) and the far field is
|t| > sqrt(3) within the children of the parent's neighbors (at most 189
per cell, at most 316 distinct vectors per level).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .interp import AffineMap

__all__ = [
    "CellId",
    "TransferVector",
    "Octree",
    "InteractionLists",
    "build_tree",
    "transfer_vector",
    "build_interaction_lists",
    "unique_transfer_vectors",
    "full_far_field_vectors",
]

TransferVector = tuple[int, int, int]


class CellId(NamedTuple):
    level: int
    ijk: tuple[int, int, int]

    @property
    def parent(self) -> "CellId":
        if self.level == 0:
            raise ValueError("root cell has no parent")
        return CellId(self.level - 1, tuple(c // 2 for c in self.ijk))


def transfer_vector(target: CellId, source: CellId) -> TransferVector:
    """Integer transfer vector (c_x - c_y)/w between two same-level cells.

    On a uniform grid the centers differ by an exact integer multiple of
    the cell width, so the vector is computed directly from grid indices.
    """
    if target.level != source.level:
        raise ValueError(
            f"transfer vector needs same-level cells, got levels "
            f"{target.level} and {source.level}"
        )
    return tuple(a - b for a, b in zip(target.ijk, source.ijk))


def _is_near(t: TransferVector) -> bool:
    return t[0] ** 2 + t[1] ** 2 + t[2] ** 2 <= 3


@dataclass
class Octree:
    """Uniform octree with per-leaf particle index lists."""

    bbox: AffineMap
    depth: int
    particles: np.ndarray
    leaf_particles: dict[CellId, np.ndarray]
    occupied: dict[int, list[CellId]]  # level -> sorted occupied cells

    def cell_width(self, level: int) -> float:
        return 2.0 * self.bbox.half_width / (1 << level)

    def cell_map(self, cell: CellId) -> AffineMap:
        """Affine map of a cell's cube."""
        w = self.cell_width(cell.level)
        low = self.bbox.low
        center = tuple(low[i] + (cell.ijk[i] + 0.5) * w for i in range(3))
        return AffineMap(center, 0.5 * w)

    @property
    def leaves(self) -> list[CellId]:
        return self.occupied[self.depth]


def build_tree(particles, bbox: AffineMap, depth: int) -> Octree:
    """Bin particles into the leaves of a uniform octree of the given depth.

    All particles must lie inside ``bbox``.  Points exactly on the upper
    boundary are kept in the last cell along that axis.
    """
    if depth < 2:
        raise ValueError(f"octree depth must be >= 2, got {depth}")
    pts = np.atleast_2d(np.asarray(particles, dtype=float))
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError("particles must have shape (n, 3)")
    low = bbox.low
    width = 2.0 * bbox.half_width
    ref = (pts - low) / width
    if np.any(ref < 0.0) or np.any(ref > 1.0):
        raise ValueError("particle outside bounding box")
    n_side = 1 << depth
    ijk = np.minimum((ref * n_side).astype(np.int64), n_side - 1)

    leaf_particles: dict[CellId, np.ndarray] = {}
    keys = [CellId(depth, tuple(row)) for row in ijk.tolist()]
    order = sorted(range(len(keys)), key=lambda i: keys[i].ijk)
    start = 0
    while start < len(order):
        stop = start
        cell = keys[order[start]]
        while stop < len(order) and keys[order[stop]] == cell:
            stop += 1
        leaf_particles[cell] = np.asarray(sorted(order[start:stop]), dtype=np.int64)
        start = stop

    occupied: dict[int, list[CellId]] = {depth: sorted(leaf_particles)}
    for level in range(depth - 1, -1, -1):
        occupied[level] = sorted({c.parent for c in occupied[level + 1]})
    return Octree(bbox, depth, pts, leaf_particles, occupied)


@dataclass
class InteractionLists:
    """Near lists for leaves and per-level far lists.

    ``far[level][cell]`` holds (source cell, transfer vector) pairs of
    occupied well-separated cells whose parents are neighbors of the
    cell's parent; ``near[leaf]`` holds adjacent occupied leaves including
    the leaf itself.
    """

    near: dict[CellId, list[CellId]]
    far: dict[int, dict[CellId, list[tuple[CellId, TransferVector]]]]

    def far_levels(self) -> list[int]:
        """Levels that have at least one far interaction."""
        return sorted(lvl for lvl, cells in self.far.items() if cells)


def build_interaction_lists(tree: Octree) -> InteractionLists:
    """Near/far separation over the occupied cells of a uniform octree."""
    far: dict[int, dict[CellId, list[tuple[CellId, TransferVector]]]] = {}
    for level in range(2, tree.depth + 1):
        occupied = set(tree.occupied[level])
        parent_set = set(tree.occupied[level - 1])
        level_far: dict[CellId, list[tuple[CellId, TransferVector]]] = {}
        for cell in tree.occupied[level]:
            entries = []
            px, py, pz = cell.parent.ijk
            for dx in (-1, 0, 1):
                for dy in (-1, 0, 1):
                    for dz in (-1, 0, 1):
                        parent = CellId(level - 1, (px + dx, py + dy, pz + dz))
                        if parent not in parent_set:
                            continue
                        base = tuple(2 * c for c in parent.ijk)
                        for cx in (0, 1):
                            for cy in (0, 1):
                                for cz in (0, 1):
                                    src = CellId(
                                        level, (base[0] + cx, base[1] + cy, base[2] + cz)
                                    )
                                    if src not in occupied:
                                        continue
                                    t = transfer_vector(cell, src)
                                    if not _is_near(t):
                                        entries.append((src, t))
            entries.sort(key=lambda e: e[0].ijk)
            level_far[cell] = entries
        far[level] = level_far

    near: dict[CellId, list[CellId]] = {}
    leaf_set = set(tree.leaves)
    for leaf in tree.leaves:
        lx, ly, lz = leaf.ijk
        neighbors = []
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                for dz in (-1, 0, 1):
                    cand = CellId(tree.depth, (lx + dx, ly + dy, lz + dz))
                    if cand in leaf_set:
                        neighbors.append(cand)
        near[leaf] = sorted(neighbors, key=lambda c: c.ijk)
    return InteractionLists(near, far)


def unique_transfer_vectors(lists: InteractionLists, level: int) -> list[TransferVector]:
    """Sorted set of distinct far transfer vectors at a level."""
    seen = {t for entries in lists.far.get(level, {}).values() for _, t in entries}
    return sorted(seen)


def full_far_field_vectors() -> list[TransferVector]:
    """All 316 admissible far-field transfer vectors (|t|_inf <= 3, |t| > sqrt(3))."""
    out = []
    rng = range(-3, 4)
    for t1 in rng:
        for t2 in rng:
            for t3 in rng:
                t = (t1, t2, t3)
                if not _is_near(t):
                    out.append(t)
    return out
