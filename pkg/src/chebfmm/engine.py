"""Multilevel fast summation pipeline over the octree.

The evaluation runs in three phases:

1. upward: particle weights are anterpolated onto leaf nodes (P2M) and
   child moments re-interpolated onto parent nodes (M2M) up to level 2,
2. moment-to-local at every level with far interactions (delegated to the
   configured M2L handler),
3. downward: local expansions pass to children (L2L, the transpose of
   M2M), are interpolated at the particles (L2P), and the near field is
   added by direct summation (P2P), skipping coincident points.

Everything is generic in the scalar type: a complex kernel runs the same
code paths with complex expansions.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .interp import ChebyshevGrid, weight_matrix_1d
from .kernels import Kernel
from .m2l import M2LHandler, make_handler
from .octree import (
    CellId,
    InteractionLists,
    Octree,
    build_interaction_lists,
    build_tree,
    unique_transfer_vectors,
)

__all__ = ["FmmPlan", "build_plan", "child_shift_matrix"]


@lru_cache(maxsize=None)
def _shift_matrix_cached(order: int, octant: tuple[int, int, int]) -> np.ndarray:
    grid = ChebyshevGrid(order)
    axes = []
    for i in range(3):
        shift = 0.5 if octant[i] else -0.5
        # rows: child nodes seen in the parent frame, cols: parent roots
        axes.append(weight_matrix_1d(shift + 0.5 * grid.roots1d, order))
    mat = np.kron(axes[2], np.kron(axes[1], axes[0])).T.copy()
    mat.setflags(write=False)
    return mat


def child_shift_matrix(order: int, octant) -> np.ndarray:
    """Moment transfer matrix from a child octant to its parent.

    Entry (m(beta), m(alpha)) interpolates the parent's node beta at the
    child's node alpha, treating child nodes as pseudo-particles of the
    parent; the local-to-local transfer is its transpose.  The matrix
    depends only on the octant (child offset +-1/2 in the parent frame),
    not on the absolute cell size.
    """
    return _shift_matrix_cached(int(order), tuple(int(c) % 2 for c in octant))


@dataclass
class _LevelData:
    cells: list[CellId]
    index: dict[CellId, int]
    mpoles: np.ndarray
    locals_: np.ndarray
    batch: list  # [(target_row, [(source_row, transfer), ...]), ...]


@dataclass
class FmmPlan:
    """Precomputed state for repeated fast summations over fixed particles."""

    tree: Octree
    lists: InteractionLists
    grid: ChebyshevGrid
    kernel: Kernel
    handler: M2LHandler
    epsilon: float
    threads: int = 1
    m2l_seconds: float = field(default=0.0, init=False)

    @property
    def order(self) -> int:
        return self.grid.order

    @property
    def depth(self) -> int:
        return self.tree.depth

    # ------------------------------------------------------------------

    def _level_data(self, weights: np.ndarray) -> dict[int, _LevelData]:
        dtype = np.result_type(self.kernel.dtype, weights.dtype)
        levels: dict[int, _LevelData] = {}
        for lvl in range(2, self.depth + 1):
            cells = self.tree.occupied[lvl]
            index = {c: i for i, c in enumerate(cells)}
            n = len(cells)
            levels[lvl] = _LevelData(
                cells,
                index,
                np.zeros((n, self.grid.size), dtype=dtype),
                np.zeros((n, self.grid.size), dtype=dtype),
                [],
            )
        for lvl, data in levels.items():
            far = self.lists.far.get(lvl, {})
            for cell in data.cells:
                entries = far.get(cell, [])
                if entries:
                    data.batch.append(
                        (data.index[cell], [(data.index[src], t) for src, t in entries])
                    )
        return levels

    def _p2m(self, weights: np.ndarray, leaf_level: _LevelData) -> None:
        for leaf, part_idx in self.tree.leaf_particles.items():
            cell_map = self.tree.cell_map(leaf)
            ref = cell_map.inverse(self.tree.particles[part_idx])
            smat = self.grid.weights_at(ref)
            leaf_level.mpoles[leaf_level.index[leaf]] = smat.T @ weights[part_idx]

    def _m2m(self, levels: dict[int, _LevelData]) -> None:
        for lvl in range(self.depth, 2, -1):
            child_data = levels[lvl]
            parent_data = levels[lvl - 1]
            for cell in child_data.cells:
                mat = child_shift_matrix(self.order, cell.ijk)
                parent_row = parent_data.index[cell.parent]
                parent_data.mpoles[parent_row] += (
                    mat @ child_data.mpoles[child_data.index[cell]]
                )

    def _m2l(self, levels: dict[int, _LevelData]) -> None:
        for lvl in sorted(levels):
            data = levels[lvl]
            if not data.batch:
                continue
            if self.threads > 1:
                chunks = _split(data.batch, self.threads)
                with ThreadPoolExecutor(max_workers=self.threads) as pool:
                    futures = [
                        pool.submit(
                            self.handler.apply_level, lvl, chunk, data.mpoles, data.locals_
                        )
                        for chunk in chunks
                    ]
                    for f in futures:
                        f.result()
            else:
                self.handler.apply_level(lvl, data.batch, data.mpoles, data.locals_)

    def _l2l(self, levels: dict[int, _LevelData]) -> None:
        for lvl in range(2, self.depth):
            parent_data = levels[lvl]
            child_data = levels[lvl + 1]
            for cell in child_data.cells:
                mat = child_shift_matrix(self.order, cell.ijk)
                parent_row = parent_data.index[cell.parent]
                child_data.locals_[child_data.index[cell]] += (
                    mat.T @ parent_data.locals_[parent_row]
                )

    def _l2p(self, leaf_level: _LevelData, out: np.ndarray) -> None:
        for leaf, part_idx in self.tree.leaf_particles.items():
            cell_map = self.tree.cell_map(leaf)
            ref = cell_map.inverse(self.tree.particles[part_idx])
            smat = self.grid.weights_at(ref)
            out[part_idx] += smat @ leaf_level.locals_[leaf_level.index[leaf]]

    def _p2p_leaf(self, leaf: CellId, weights: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        targets = self.tree.leaf_particles[leaf]
        contrib = np.zeros(
            len(targets), dtype=np.result_type(self.kernel.dtype, weights.dtype)
        )
        tpts = self.tree.particles[targets]
        for src_leaf in self.lists.near[leaf]:
            sources = self.tree.leaf_particles[src_leaf]
            mat = self.kernel.matrix(
                tpts, self.tree.particles[sources], skip_singular=True
            )
            contrib += mat @ weights[sources]
        return targets, contrib

    def _p2p(self, weights: np.ndarray, out: np.ndarray) -> None:
        leaves = self.tree.leaves
        if self.threads > 1:
            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                results = list(pool.map(lambda lf: self._p2p_leaf(lf, weights), leaves))
        else:
            results = [self._p2p_leaf(lf, weights) for lf in leaves]
        for targets, contrib in results:
            out[targets] += contrib

    def run(self, weights) -> np.ndarray:
        """Potentials at every particle for the given source weights."""
        weights = np.asarray(weights)
        if weights.shape != (len(self.tree.particles),):
            raise ValueError(
                f"weights must have shape ({len(self.tree.particles)},), got {weights.shape}"
            )
        levels = self._level_data(weights)
        leaf_level = levels[self.depth]
        self._p2m(weights, leaf_level)
        self._m2m(levels)
        tic = time.perf_counter()
        self._m2l(levels)
        self.m2l_seconds = time.perf_counter() - tic
        self._l2l(levels)
        out = np.zeros(
            len(self.tree.particles),
            dtype=np.result_type(self.kernel.dtype, weights.dtype),
        )
        self._l2p(leaf_level, out)
        self._p2p(weights, out)
        return out

    # ------------------------------------------------------------------

    def direct_reference(self, weights, target_indices=None) -> np.ndarray:
        """O(N^2) direct summation oracle (all sources, selected targets)."""
        weights = np.asarray(weights)
        pts = self.tree.particles
        idx = np.arange(len(pts)) if target_indices is None else np.asarray(target_indices)
        mat = self.kernel.matrix(pts[idx], pts, skip_singular=True)
        return mat @ weights


def _split(batch: list, n: int) -> list[list]:
    size = (len(batch) + n - 1) // n
    return [batch[i:i + size] for i in range(0, len(batch), size)]


def build_plan(
    particles,
    bbox,
    depth: int,
    kernel: Kernel,
    order: int,
    epsilon: float,
    variant: str = "iablk",
    compression: str = "svd",
    block_size: int = 128,
    budget_bytes: int | None = None,
    threads: int = 1,
    handler: M2LHandler | None = None,
) -> FmmPlan:
    """Build the octree, interaction lists and a precomputed M2L handler."""
    from .m2l import DEFAULT_BUDGET_BYTES

    tree = build_tree(particles, bbox, depth)
    lists = build_interaction_lists(tree)
    grid = ChebyshevGrid(order)
    if handler is None:
        handler = make_handler(
            variant,
            kernel,
            grid,
            epsilon,
            compression=compression,
            block_size=block_size,
            budget_bytes=DEFAULT_BUDGET_BYTES if budget_bytes is None else budget_bytes,
        )
        level_transfers = {
            lvl: unique_transfer_vectors(lists, lvl) for lvl in range(2, depth + 1)
        }
        level_widths = {lvl: tree.cell_width(lvl) for lvl in range(2, depth + 1)}
        handler.precompute(level_transfers, level_widths)
    return FmmPlan(tree, lists, grid, kernel, handler, float(epsilon), int(threads))
