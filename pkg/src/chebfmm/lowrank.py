"""Low-rank factorization of dense operators to a target accuracy.

Two routes produce the same kind of factorization: a truncated SVD of the
assembled matrix, and adaptive cross approximation (ACA) on a sampled
matrix followed by orthogonalization and a truncated SVD of the small
core.  Both truncate with the rule

    r = smallest rank with sigma_{r+1} <= eps * sigma_1,

and fold the singular values into the left factor, so A is approximated by
``left @ right.conj().T`` with an orthonormal ``right``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["LowRankFactors", "truncated_svd", "aca", "aca_plus_svd"]


@dataclass
class LowRankFactors:
    """Factors of A ~ left @ right^H.

    ``left`` has shape (rows, r) with the singular values folded in;
    ``right`` has shape (cols, r) and orthonormal columns.  ``via_fallback``
    flags factorizations where ACA stagnated and the dense route was used.
    """

    left: np.ndarray
    right: np.ndarray
    via_fallback: bool = False

    @property
    def rank(self) -> int:
        return self.left.shape[1]

    def reconstruct(self) -> np.ndarray:
        return self.left @ self.right.conj().T

    def apply(self, vec: np.ndarray) -> np.ndarray:
        return self.left @ (self.right.conj().T @ vec)


def _rank_from_singular_values(s: np.ndarray, eps: float) -> int:
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > eps * s[0]))


def truncated_svd(matrix: np.ndarray, eps: float) -> LowRankFactors:
    """Truncated SVD keeping all singular values above eps * sigma_1."""
    a = np.asarray(matrix)
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    if not 0.0 < eps < 1.0:
        raise ValueError(f"accuracy must lie in (0, 1), got {eps}")
    u, s, vh = np.linalg.svd(a, full_matrices=False)
    r = _rank_from_singular_values(s, eps)
    return LowRankFactors(u[:, :r] * s[:r], vh[:r].conj().T)


def aca(evaluator, n_rows: int, n_cols: int, eps: float, max_rank: int | None = None):
    """Partially pivoted adaptive cross approximation.

    Parameters
    ----------
    evaluator : callable
        ``evaluator(i, j)`` with integer or integer-array arguments,
        broadcasting like numpy indexing, returning matrix entries.
    n_rows, n_cols : int
        Matrix dimensions.
    eps : float
        Stop once ||u_k|| * ||v_k|| <= eps * ||S_k||_F, where S_k is the
        running approximation.
    max_rank : int, optional
        Hard cap on the number of crosses.

    Returns
    -------
    (U, V, converged)
        ``U`` (n_rows, k) and ``V`` (n_cols, k) with A ~ U V^H, and a flag
        that is False when a zero pivot stopped the iteration before the
        tolerance was met (stagnation).
    """
    if max_rank is None:
        max_rank = min(n_rows, n_cols)
    all_cols = np.arange(n_cols)
    all_rows = np.arange(n_rows)
    us: list[np.ndarray] = []
    vs: list[np.ndarray] = []
    used_rows: set[int] = set()
    used_cols: set[int] = set()
    norm_sq = 0.0
    next_row = 0
    converged = False

    for _ in range(max_rank):
        row = None
        # The preferred pivot row may have a zero residual; probe a few
        # other unused rows before giving up.
        for candidate in [next_row] + [r for r in range(n_rows) if r not in used_rows][:4]:
            if candidate in used_rows:
                continue
            trial = np.asarray(evaluator(candidate, all_cols), dtype=None).copy()
            for u, v in zip(us, vs):
                trial -= u[candidate] * v
            if np.max(np.abs(trial)) > 0.0:
                next_row = candidate
                row = trial
                break
        if row is None:
            # Every sampled residual row is exactly zero: either the matrix
            # is reproduced already (converged) or ACA stagnated.
            converged = bool(us)
            break
        used_rows.add(next_row)
        masked = row.copy()
        if used_cols:
            masked[sorted(used_cols)] = 0.0
        j = int(np.argmax(np.abs(masked)))
        pivot = row[j]
        if pivot == 0.0:
            converged = False
            break
        used_cols.add(j)
        v_new = row / pivot
        col = np.asarray(evaluator(all_rows, j), dtype=None).copy()
        for u, v in zip(us, vs):
            col -= v[j] * u
        u_new = col

        cross = sum(np.vdot(u, u_new) * np.vdot(v, v_new) for u, v in zip(us, vs))
        inc_sq = float(np.real(np.vdot(u_new, u_new)) * np.real(np.vdot(v_new, v_new)))
        norm_sq = max(norm_sq + 2.0 * float(np.real(cross)) + inc_sq, 0.0)
        us.append(u_new)
        vs.append(v_new)

        if inc_sq <= (eps**2) * norm_sq:
            converged = True
            break

        col_masked = np.abs(col)
        col_masked[sorted(used_rows)] = 0.0
        next_row = int(np.argmax(col_masked))
    else:
        converged = True  # full rank reached

    if not us:
        dtype = np.asarray(evaluator(0, 0)).dtype
        return (
            np.zeros((n_rows, 0), dtype=dtype),
            np.zeros((n_cols, 0), dtype=dtype),
            converged,
        )
    u_mat = np.column_stack(us)
    v_mat = np.column_stack([v.conj() for v in vs])
    return u_mat, v_mat, converged


def aca_plus_svd(
    evaluator, n_rows: int, n_cols: int, eps: float, max_rank: int | None = None
) -> LowRankFactors:
    """ACA followed by QR orthogonalization and a truncated SVD of the core.

    The final rank never exceeds the ACA rank.  If ACA stagnates (zero
    pivot before convergence) the matrix is assembled densely and factored
    with :func:`truncated_svd`; the result carries ``via_fallback=True``.
    """
    u_mat, v_mat, converged = aca(evaluator, n_rows, n_cols, eps, max_rank)
    if not converged:
        dense = np.asarray(evaluator(np.arange(n_rows)[:, None], np.arange(n_cols)[None, :]))
        out = truncated_svd(dense, eps)
        out.via_fallback = True
        return out
    if u_mat.shape[1] == 0:
        return LowRankFactors(u_mat, v_mat)
    qu, ru = np.linalg.qr(u_mat)
    qv, rv = np.linalg.qr(v_mat)
    uc, s, vch = np.linalg.svd(ru @ rv.conj().T)
    r = _rank_from_singular_values(s, eps)
    return LowRankFactors(qu @ (uc[:, :r] * s[:r]), qv @ vch[:r].conj().T)
