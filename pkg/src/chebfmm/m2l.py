"""The eight M2L operator representations behind one handler interface.

Variant tags (also the CLI names):

* ``na``     — every transfer vector gets its dense operator.
* ``nasym``  — dense operators only for the cone representatives; all
  others are applied through index permutations.
* ``nablk``  — nasym plus blocking: permuted expansion vectors sharing a
  representative are gathered into matrices so the per-vector products
  become a few matrix-matrix products (capacity ``block_size`` columns).
* ``sa``     — one shared basis pair (U, B) per level from truncated SVDs
  of the row/column concatenations of all operators, plus a small core
  C_t per transfer vector.
* ``sarcmp`` — sa plus individual recompression of each core; a factored
  core is kept only when it is cheaper to apply than the dense core.
* ``ia``     — individual low-rank factorization per transfer vector.
* ``iasym``  — ia restricted to cone representatives, applied through
  permutations.
* ``iablk``  — iasym plus blocking.

Handlers precompute per far-active level; homogeneous kernels precompute
once for the union of all levels' transfer vectors at a reference width
and scale per level at apply time.  Flop counters follow the model
2mn per dense m x n matrix-vector product and 2mnk per matrix-matrix
product; permutations and per-level scale factors are data movement and
count zero.
"""

from __future__ import annotations

import numpy as np

from .interp import AffineMap, ChebyshevGrid
from .kernels import Kernel, assemble_for_transfer
from .lowrank import LowRankFactors, aca_plus_svd, truncated_svd
from .octree import TransferVector
from .symmetry import (
    SymmetryMap,
    inverse_permutation_table,
    permutation_index_table,
)

__all__ = [
    "VARIANTS",
    "BudgetExceededError",
    "PrecomputeIncompleteError",
    "M2LHandler",
    "make_handler",
]

VARIANTS = ("na", "nasym", "nablk", "sa", "sarcmp", "ia", "iasym", "iablk")

DEFAULT_BUDGET_BYTES = 2_000_000_000


class BudgetExceededError(RuntimeError):
    """Raised when a variant's estimated precompute memory exceeds the budget."""


class PrecomputeIncompleteError(KeyError):
    """Raised when apply meets a transfer vector with no precomputed operator."""


def _node_evaluator(kernel, x_nodes, y_nodes):
    """Entry evaluator (i, j) -> K(x_nodes[i], y_nodes[j]) for ACA sampling."""

    def evaluate(i, j):
        xi = x_nodes[np.asarray(i)]
        yj = y_nodes[np.asarray(j)]
        r = np.sqrt(np.sum((xi - yj) ** 2, axis=-1))
        return kernel.profile(r)

    return evaluate


class _Group:
    """One precompute unit: a transfer-vector list at a concrete cell width.

    Non-homogeneous kernels get one group per far-active level; homogeneous
    kernels share a single group (union list, reference width) across all
    levels with per-level scale factors.
    """

    def __init__(self, transfers: list[TransferVector], width: float):
        self.transfers = sorted(transfers)
        self.width = float(width)
        self.symmetry = SymmetryMap(self.transfers)


class M2LHandler:
    """Precompute/apply/account interface shared by all eight variants."""

    def __init__(
        self,
        variant: str,
        kernel: Kernel,
        grid: ChebyshevGrid,
        epsilon: float,
        compression: str = "svd",
        block_size: int = 128,
        budget_bytes: int = DEFAULT_BUDGET_BYTES,
    ):
        if variant not in VARIANTS:
            raise ValueError(f"unknown M2L variant {variant!r}; expected one of {VARIANTS}")
        if compression not in ("svd", "aca"):
            raise ValueError(f"unknown compression {compression!r}; expected svd or aca")
        self.variant = variant
        self.kernel = kernel
        self.grid = grid
        self.epsilon = float(epsilon)
        self.compression = compression
        self.block_size = int(block_size)
        self.budget_bytes = int(budget_bytes)

        self.uses_symmetry = variant in ("nasym", "nablk", "iasym", "iablk")
        self.uses_blocking = variant in ("nablk", "iablk")
        self.is_dense = variant in ("na", "nasym", "nablk")
        self.is_shared_basis = variant in ("sa", "sarcmp")

        self._groups: dict[object, _Group] = {}
        self._level_group: dict[int, object] = {}
        self._level_scale: dict[int, float] = {}
        self._dense: dict[object, dict[TransferVector, np.ndarray]] = {}
        self._lowrank: dict[object, dict[TransferVector, LowRankFactors]] = {}
        self._sa: dict[object, dict] = {}

        self.factorization_calls = 0
        self.flops: dict[int, int] = {}
        self.block_stats: dict[int, dict] = {}
        self._precomputed = False

    # ------------------------------------------------------------------
    # precompute
    # ------------------------------------------------------------------

    def precompute(self, level_transfers: dict[int, list[TransferVector]],
                   level_widths: dict[int, float]) -> "M2LHandler":
        """Build the operator cache for every level with far interactions."""
        levels = sorted(lvl for lvl, ts in level_transfers.items() if ts)
        if not levels:
            self._precomputed = True
            return self
        degree = self.kernel.homogeneity_degree
        if degree is not None:
            union: set[TransferVector] = set()
            for lvl in levels:
                union.update(level_transfers[lvl])
            ref_level = levels[0]
            ref_width = level_widths[ref_level]
            group = _Group(sorted(union), ref_width)
            self._groups["ref"] = group
            for lvl in levels:
                self._level_group[lvl] = "ref"
                self._level_scale[lvl] = (level_widths[lvl] / ref_width) ** degree
            self._check_budget([group])
            self._build_group("ref", group)
        else:
            groups = []
            for lvl in levels:
                group = _Group(level_transfers[lvl], level_widths[lvl])
                self._groups[lvl] = group
                self._level_group[lvl] = lvl
                self._level_scale[lvl] = 1.0
                groups.append(group)
            self._check_budget(groups)
            for lvl in levels:
                self._build_group(lvl, self._groups[lvl])
        self._precomputed = True
        return self

    def _check_budget(self, groups) -> None:
        size = self.grid.size
        itemsize = self.kernel.dtype.itemsize
        estimate = 0
        for g in groups:
            n_ops = len(g.symmetry.cone) if self.uses_symmetry else len(g.transfers)
            if self.is_shared_basis:
                # row + column concatenations are assembled densely
                estimate += 2 * len(g.transfers) * size * size * itemsize
            else:
                estimate += n_ops * size * size * itemsize
        if estimate > self.budget_bytes:
            raise BudgetExceededError(
                f"variant {self.variant}: estimated precompute memory "
                f"{estimate} B exceeds budget {self.budget_bytes} B"
            )

    def _build_group(self, key, group: _Group) -> None:
        if self.is_dense:
            vectors = group.symmetry.cone if self.uses_symmetry else group.transfers
            self._dense[key] = {
                t: assemble_for_transfer(self.kernel, t, group.width, self.grid)
                for t in vectors
            }
        elif self.is_shared_basis:
            self._sa[key] = self._build_shared_basis(group)
        else:
            vectors = group.symmetry.cone if self.uses_symmetry else group.transfers
            self._lowrank[key] = {t: self._factorize(t, group.width) for t in vectors}

    def _factorize(self, t: TransferVector, width: float) -> LowRankFactors:
        self.factorization_calls += 1
        if self.compression == "svd":
            dense = assemble_for_transfer(self.kernel, t, width, self.grid)
            return truncated_svd(dense, self.epsilon)
        size = self.grid.size
        half = 0.5 * width
        x_nodes = self.grid.nodes_in_cell(
            AffineMap((width * t[0], width * t[1], width * t[2]), half)
        )
        y_nodes = self.grid.nodes_in_cell(AffineMap((0.0, 0.0, 0.0), half))
        return aca_plus_svd(
            _node_evaluator(self.kernel, x_nodes, y_nodes), size, size, self.epsilon
        )

    def _build_shared_basis(self, group: _Group) -> dict:
        """Shared bases U, B plus one core per transfer vector (Eq. forms).

        The row concatenation [K_1, ..., K_|T|] yields U (and sigma, V^H);
        the column concatenation yields B as its right singular basis.  The
        shared rank is the larger of the two accuracy ranks and the cores
        are C_t = diag(sigma) V_t^H B, which equals U^H K_t B exactly.
        """
        size = self.grid.size
        transfers = group.transfers
        blocks = {
            t: assemble_for_transfer(self.kernel, t, group.width, self.grid)
            for t in transfers
        }
        row = np.hstack([blocks[t] for t in transfers])
        col = np.vstack([blocks[t] for t in transfers])
        if self.compression == "svd":
            u_row, s_row, vh_row = np.linalg.svd(row, full_matrices=False)
            _, s_col, vh_col = np.linalg.svd(col, full_matrices=False)
            r = max(_eps_rank(s_row, self.epsilon), _eps_rank(s_col, self.epsilon))
            self.factorization_calls += 2
            u = u_row[:, :r]
            sigma = s_row[:r]
            vh = vh_row[:r]
            b = vh_col[:r].conj().T
        else:
            row_fac = aca_plus_svd(
                lambda i, j: row[np.asarray(i), np.asarray(j)], size, row.shape[1],
                self.epsilon,
            )
            col_fac = aca_plus_svd(
                lambda i, j: col[np.asarray(i), np.asarray(j)], col.shape[0], size,
                self.epsilon,
            )
            self.factorization_calls += 2
            sigma = np.linalg.norm(row_fac.left, axis=0)
            u = row_fac.left / sigma
            vh = row_fac.right.conj().T
            b = col_fac.right

        cores: dict[TransferVector, tuple] = {}
        for k, t in enumerate(transfers):
            v_t_h = vh[:, k * size:(k + 1) * size]
            core = (sigma[:, None] * v_t_h) @ b
            cores[t] = ("dense", core)
        sa = {"u": u, "b": b, "rank": max(u.shape[1], b.shape[1]), "cores": cores}

        if self.variant == "sarcmp":
            r_u = u.shape[1]
            r_b = b.shape[1]
            for t, (_, core) in list(cores.items()):
                fac = truncated_svd(core, self.epsilon)
                self.factorization_calls += 1
                # keep the factored core only when applying it is cheaper
                # than the dense core (r_t < r/2 for square cores)
                if fac.rank * (r_u + r_b) < r_u * r_b:
                    cores[t] = ("factored", fac)
        return sa

    # ------------------------------------------------------------------
    # apply
    # ------------------------------------------------------------------

    def apply_level(self, level: int, batch, mpoles: np.ndarray,
                    locals_out: np.ndarray) -> int:
        """Apply the level's M2L interactions for a batch of target cells.

        ``batch`` is a list of (target_row, [(source_row, transfer), ...])
        with rows indexing the level's expansion arrays.  Contributions are
        accumulated into ``locals_out``; the number of counted flops is
        added to the per-level counter and returned.
        """
        if not self._precomputed:
            raise PrecomputeIncompleteError("handler has not been precomputed")
        if not batch:
            return 0
        key = self._level_group.get(level)
        if key is None:
            raise PrecomputeIncompleteError(f"no operators precomputed for level {level}")
        scale = self._level_scale[level]
        if self.is_shared_basis:
            flops = self._apply_shared(key, scale, batch, mpoles, locals_out)
        elif self.uses_blocking:
            flops = self._apply_blocked(level, key, scale, batch, mpoles, locals_out)
        elif self.uses_symmetry:
            flops = self._apply_sym(key, scale, batch, mpoles, locals_out)
        else:
            flops = self._apply_plain(key, scale, batch, mpoles, locals_out)
        self.flops[level] = self.flops.get(level, 0) + flops
        return flops

    def apply_to_target(self, level: int, target_row: int, far_list,
                        mpoles: np.ndarray, locals_out: np.ndarray) -> int:
        """Single-target convenience wrapper around :meth:`apply_level`."""
        return self.apply_level(level, [(target_row, far_list)], mpoles, locals_out)

    def _op_for(self, cache: dict, t: TransferVector):
        try:
            return cache[t]
        except KeyError:
            raise PrecomputeIncompleteError(
                f"variant {self.variant}: no operator for transfer vector {t}"
            ) from None

    def _apply_plain(self, key, scale, batch, mpoles, locals_out) -> int:
        cache = self._dense[key] if self.is_dense else self._lowrank[key]
        size = self.grid.size
        flops = 0
        for target_row, far_list in batch:
            if not far_list:
                continue
            acc = np.zeros(size, dtype=np.result_type(self.kernel.dtype, mpoles.dtype))
            for source_row, t in far_list:
                op = self._op_for(cache, t)
                w = mpoles[source_row]
                if self.is_dense:
                    acc += op @ w
                    flops += 2 * size * size
                else:
                    acc += op.apply(w)
                    flops += 4 * size * op.rank
            locals_out[target_row] += scale * acc
        return flops

    def _apply_sym(self, key, scale, batch, mpoles, locals_out) -> int:
        cache = self._dense[key] if self.is_dense else self._lowrank[key]
        symmetry = self._groups[key].symmetry
        order = self.grid.order
        size = self.grid.size
        flops = 0
        for target_row, far_list in batch:
            if not far_list:
                continue
            acc = np.zeros(size, dtype=np.result_type(self.kernel.dtype, mpoles.dtype))
            for source_row, t in far_list:
                rep, spec = symmetry.lookup(t)
                op = self._op_for(cache, rep)
                table = permutation_index_table(spec, order)
                inv = inverse_permutation_table(spec, order)
                u = mpoles[source_row][inv]
                if self.is_dense:
                    out = op @ u
                    flops += 2 * size * size
                else:
                    out = op.apply(u)
                    flops += 4 * size * op.rank
                acc += out[table]
            locals_out[target_row] += scale * acc
        return flops

    def _apply_shared(self, key, scale, batch, mpoles, locals_out) -> int:
        sa = self._sa[key]
        u, b, cores = sa["u"], sa["b"], sa["cores"]
        size = self.grid.size
        r_u = u.shape[1]
        r_b = b.shape[1]
        flops = 0
        source_rows = sorted({src for _, far in batch for src, _ in far})
        if not source_rows:
            return 0
        row_pos = {row: i for i, row in enumerate(source_rows)}
        # per-source transform, shared by every interaction of the batch
        w_tilde = b.conj().T @ mpoles[source_rows].T
        flops += 2 * size * r_b * len(source_rows)
        for target_row, far_list in batch:
            if not far_list:
                continue
            acc = np.zeros(r_u, dtype=np.result_type(self.kernel.dtype, mpoles.dtype))
            for source_row, t in far_list:
                kind, core = self._op_for(cores, t)
                wt = w_tilde[:, row_pos[source_row]]
                if kind == "dense":
                    acc += core @ wt
                    flops += 2 * r_u * r_b
                else:
                    acc += core.apply(wt)
                    flops += 2 * core.rank * (r_u + r_b)
            locals_out[target_row] += scale * (u @ acc)
            flops += 2 * size * r_u
        return flops

    def _apply_blocked(self, level, key, scale, batch, mpoles, locals_out) -> int:
        cache = self._dense.get(key) or self._lowrank.get(key)
        group = self._groups[key]
        symmetry = group.symmetry
        order = self.grid.order
        size = self.grid.size
        n_cap = self.block_size
        dtype = np.result_type(self.kernel.dtype, mpoles.dtype)
        stats = self.block_stats.setdefault(
            level, {"columns": 0, "products": 0, "reps_used": set(), "flushes": []}
        )
        buffers: dict[int, np.ndarray] = {}
        pending: dict[int, list] = {}
        counts: dict[int, int] = {}
        flops = 0

        def flush(rep_idx: int) -> None:
            nonlocal flops
            c = counts[rep_idx]
            if c == 0:
                return
            rep = symmetry.cone[rep_idx]
            op = self._op_for(cache, rep)
            w_block = buffers[rep_idx][:, :c]
            if self.is_dense:
                f_block = op @ w_block
                flops += 2 * size * size * c
            else:
                f_block = op.left @ (op.right.conj().T @ w_block)
                flops += 4 * size * op.rank * c
            stats["products"] += 1
            stats["reps_used"].add(rep)
            stats["flushes"].append((rep, c))
            for col, (target_row, table) in enumerate(pending[rep_idx]):
                locals_out[target_row] += scale * f_block[table, col]
            counts[rep_idx] = 0
            pending[rep_idx] = []

        for target_row, far_list in batch:
            for source_row, t in far_list:
                rep_idx, spec = symmetry.assignment[t]
                if rep_idx not in buffers:
                    buffers[rep_idx] = np.empty((size, n_cap), dtype=dtype)
                    pending[rep_idx] = []
                    counts[rep_idx] = 0
                inv = inverse_permutation_table(spec, order)
                table = permutation_index_table(spec, order)
                buffers[rep_idx][:, counts[rep_idx]] = mpoles[source_row][inv]
                pending[rep_idx].append((target_row, table))
                counts[rep_idx] += 1
                stats["columns"] += 1
                if counts[rep_idx] == n_cap:
                    flush(rep_idx)
        for rep_idx in sorted(buffers):
            flush(rep_idx)
        return flops

    # ------------------------------------------------------------------
    # accounting
    # ------------------------------------------------------------------

    def operator_count(self) -> int:
        """Total number of per-transfer operators held in the cache."""
        count = 0
        for cache in self._dense.values():
            count += len(cache)
        for cache in self._lowrank.values():
            count += len(cache)
        for sa in self._sa.values():
            count += len(sa["cores"])
        return count

    def stored_bytes(self) -> int:
        """Bytes of stored operator scalars (cache only, no transients)."""
        total = 0
        for cache in self._dense.values():
            total += sum(m.nbytes for m in cache.values())
        for cache in self._lowrank.values():
            total += sum(f.left.nbytes + f.right.nbytes for f in cache.values())
        for sa in self._sa.values():
            total += sa["u"].nbytes + sa["b"].nbytes
            for kind, core in sa["cores"].values():
                if kind == "dense":
                    total += core.nbytes
                else:
                    total += core.left.nbytes + core.right.nbytes
        return total

    def level_ranks(self, level: int) -> list[int]:
        """Effective per-operator apply ranks for the level's transfers."""
        key = self._level_group.get(level)
        if key is None:
            return []
        group = self._groups[key]
        if self.is_dense:
            return [self.grid.size for _ in group.transfers]
        if self.is_shared_basis:
            sa = self._sa[key]
            out = []
            for t in group.transfers:
                kind, core = sa["cores"][t]
                out.append(sa["rank"] if kind == "dense" else core.rank)
            return out
        cache = self._lowrank[key]
        if self.uses_symmetry:
            return [cache[group.symmetry.lookup(t)[0]].rank for t in group.transfers]
        return [cache[t].rank for t in group.transfers]

    def shared_rank(self, level: int) -> int | None:
        """The SA shared rank for the level (None for other variants)."""
        key = self._level_group.get(level)
        if key is None or not self.is_shared_basis:
            return None
        return self._sa[key]["rank"]

    def recompression_table(self, level: int):
        """(transfer, kept_rank or None) pairs for inspecting the keep rule."""
        key = self._level_group.get(level)
        if key is None or key not in self._sa:
            return []
        sa = self._sa[key]
        out = []
        for t in self._groups[key].transfers:
            kind, core = sa["cores"][t]
            out.append((t, core.rank if kind == "factored" else None))
        return out

    def flop_report(self) -> list[dict]:
        """Per-level flop/byte rows from the accounting model."""
        if not self.flops:
            raise RuntimeError("flop report requires at least one apply")
        stored = self.stored_bytes()
        return [
            {"level": lvl, "variant": self.variant, "flops": n, "bytes": stored}
            for lvl, n in sorted(self.flops.items())
        ]

    def reset_counters(self) -> None:
        self.flops = {}
        self.block_stats = {}


def make_handler(variant: str, kernel: Kernel, grid: ChebyshevGrid, epsilon: float,
                 **kwargs) -> M2LHandler:
    """Construct an (unprecomputed) handler for a variant tag."""
    return M2LHandler(variant, kernel, grid, epsilon, **kwargs)


def _eps_rank(s: np.ndarray, eps: float) -> int:
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > eps * s[0]))
