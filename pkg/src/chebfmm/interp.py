"""Chebyshev interpolation primitives.

Everything downstream (expansion operators, moment-to-local matrices,
permutation tables) is built on the objects defined here: the roots of the
degree-l Chebyshev polynomial of the first kind, the interpolation weights

    S_l(x, xbar) = 1/l + (2/l) * sum_{k=1}^{l-1} T_k(x) T_k(xbar),

the tensorized 3-D node set, the flattening of 3-D multi-indices, and the
affine map between the reference cube [-1,1]^3 and an axis-aligned cell.

Conventions fixed here and relied on elsewhere:

* ``cheb_roots`` returns the roots in descending order (index 1 holds the
  largest root) and the array is exactly symmetric under negation: the
  second half is the mirrored first half, and the middle root of an odd
  order is exactly 0.  Axial permutation identities hold to round-off only
  because of this.
* Multi-indices are 1-based triples (a1, a2, a3) with a_i in 1..l, and the
  flat index is m(a) = (a1-1) + (a2-1)*l + (a3-1)*l^2 + 1 in 1..l^3, i.e.
  the first component varies fastest.  Internal node arrays use the same
  ordering with 0-based positions.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "AffineMap",
    "ChebyshevGrid",
    "cheb_roots",
    "flat_index",
    "unflat_index",
    "s_weight_1d",
    "s_weight_3d",
    "weight_matrix_1d",
    "weight_matrix_3d",
]


def cheb_roots(order: int) -> np.ndarray:
    """Roots of the Chebyshev polynomial T_order, in descending order.

    Parameters
    ----------
    order : int
        Interpolation order l >= 2.

    Returns
    -------
    ndarray
        The l roots cos((2i-1)pi/(2l)), i = 1..l, largest first.  Only the
        first half is evaluated through ``cos``; the rest is mirrored so
        that roots[i] == -roots[l+1-i] holds bitwise (middle root of an odd
        order is exactly 0).
    """
    if order < 2:
        raise ValueError(f"interpolation order must be >= 2, got {order}")
    roots = np.empty(order)
    half = order // 2
    i = np.arange(1, half + 1)
    roots[:half] = np.cos((2 * i - 1) * np.pi / (2 * order))
    if order % 2:
        roots[half] = 0.0
    roots[order - half:] = -roots[half - 1::-1]
    return roots


@lru_cache(maxsize=None)
def _roots_cached(order: int) -> np.ndarray:
    r = cheb_roots(order)
    r.setflags(write=False)
    return r


@lru_cache(maxsize=None)
def _cheb_polys_at_roots(order: int) -> np.ndarray:
    """T_k at the roots, shape (order, order-1), k = 1..order-1."""
    t = _cheb_polys(_roots_cached(order), order)
    t.setflags(write=False)
    return t


def _cheb_polys(x: np.ndarray, order: int) -> np.ndarray:
    """T_k(x) for k = 1..order-1 via the three-term recurrence, shape (n, order-1).

    The recurrence (rather than cos(k arccos x)) keeps the evaluation total
    for arguments that fall a few ulp outside [-1, 1].
    """
    x = np.asarray(x, dtype=float)
    t = np.empty(x.shape + (order - 1,))
    if order >= 2:
        t[..., 0] = x
    for k in range(1, order - 1):
        if k == 1:
            t[..., 1] = 2.0 * x * x - 1.0
        else:
            t[..., k] = 2.0 * x * t[..., k - 1] - t[..., k - 2]
    return t


def weight_matrix_1d(x, order: int) -> np.ndarray:
    """Interpolation weights S_l(x_m, root_i) as a matrix of shape (n, order)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    tx = _cheb_polys(x, order)
    troots = _cheb_polys_at_roots(order)
    return 1.0 / order + (2.0 / order) * (tx @ troots.T)


def s_weight_1d(x: float, node_index: int, order: int) -> float:
    """Weight S_l(x, root_{node_index}); 1-based node index.

    Evaluating at x = root_j returns the Kronecker delta (to round-off),
    so interpolation through these weights is exact at the nodes.
    """
    if not 1 <= node_index <= order:
        raise ValueError(f"node index {node_index} outside 1..{order}")
    return float(weight_matrix_1d(x, order)[0, node_index - 1])


def s_weight_3d(x, alpha, order: int) -> float:
    """Tensor-product weight S_l(x1, r_a1) S_l(x2, r_a2) S_l(x3, r_a3)."""
    x = np.asarray(x, dtype=float)
    w = 1.0
    for i in range(3):
        w *= s_weight_1d(float(x[i]), int(alpha[i]), order)
    return w


def flat_index(alpha, order: int) -> int:
    """Flatten a 1-based multi-index to the 1-based position m(alpha).

    m(alpha) = (a1-1) + (a2-1)*l + (a3-1)*l^2 + 1; the first component
    varies fastest.
    """
    a1, a2, a3 = (int(a) for a in alpha)
    for a in (a1, a2, a3):
        if not 1 <= a <= order:
            raise ValueError(f"multi-index {alpha!r} outside 1..{order}")
    return (a1 - 1) + (a2 - 1) * order + (a3 - 1) * order**2 + 1


def unflat_index(m: int, order: int) -> tuple[int, int, int]:
    """Inverse of :func:`flat_index`."""
    if not 1 <= m <= order**3:
        raise ValueError(f"flat index {m} outside 1..{order**3}")
    j = m - 1
    return (j % order + 1, (j // order) % order + 1, j // order**2 + 1)


@lru_cache(maxsize=None)
def _component_indices(order: int) -> np.ndarray:
    """0-based components of every flat position, shape (3, order^3)."""
    j = np.arange(order**3)
    comp = np.stack([j % order, (j // order) % order, j // order**2])
    comp.setflags(write=False)
    return comp


@dataclass(frozen=True)
class AffineMap:
    """Affine map from the reference cube [-1,1]^3 onto an axis-aligned cell."""

    center: tuple[float, float, float]
    half_width: float

    def __post_init__(self):
        if not self.half_width > 0:
            raise ValueError(f"half_width must be positive, got {self.half_width}")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    def forward(self, ref_points) -> np.ndarray:
        """Map reference coordinates into the cell."""
        ref = np.asarray(ref_points, dtype=float)
        return np.asarray(self.center) + self.half_width * ref

    def inverse(self, points) -> np.ndarray:
        """Pull cell coordinates back to [-1,1]^3; raises if a point lies outside."""
        pts = np.asarray(points, dtype=float)
        ref = (pts - np.asarray(self.center)) / self.half_width
        if np.any(np.abs(ref) > 1.0 + 1e-12):
            raise ValueError("point outside cell (beyond inverse-map tolerance)")
        return ref

    @property
    def low(self) -> np.ndarray:
        return np.asarray(self.center) - self.half_width

    @property
    def high(self) -> np.ndarray:
        return np.asarray(self.center) + self.half_width


class ChebyshevGrid:
    """Tensor grid of Chebyshev roots on the reference cube.

    The grid is cell-independent; :meth:`nodes_in_cell` maps the reference
    nodes into a concrete cell.  ``nodes3d[m-1]`` holds the node of the
    multi-index with flat position m.
    """

    def __init__(self, order: int):
        self.order = int(order)
        self.roots1d = _roots_cached(self.order)
        comp = _component_indices(self.order)
        self.nodes3d = self.roots1d[comp].T.copy()  # (order^3, 3)
        self.nodes3d.setflags(write=False)

    def __repr__(self):
        return f"ChebyshevGrid(order={self.order})"

    @property
    def size(self) -> int:
        return self.order**3

    def nodes_in_cell(self, cell: AffineMap) -> np.ndarray:
        """The l^3 interpolation nodes mapped into ``cell``, shape (l^3, 3)."""
        return cell.forward(self.nodes3d)

    def weights_at(self, ref_points) -> np.ndarray:
        """3-D interpolation weights for reference points, shape (n, l^3).

        Row p holds S_l(x_p, node_q) for every grid node q, so values at
        the points are ``weights @ f_nodes`` and anterpolated node weights
        are ``weights.T @ w_points``.
        """
        ref = np.atleast_2d(np.asarray(ref_points, dtype=float))
        comp = _component_indices(self.order)
        w1 = weight_matrix_1d(ref[:, 0], self.order)
        w2 = weight_matrix_1d(ref[:, 1], self.order)
        w3 = weight_matrix_1d(ref[:, 2], self.order)
        return w1[:, comp[0]] * w2[:, comp[1]] * w3[:, comp[2]]
