"""Kernel functions and dense moment-to-local (M2L) matrix assembly.

Two kernels are shipped: the Laplace kernel 1/(4 pi |x-y|), which is real
and homogeneous of degree -1, and the Helmholtz kernel
exp(i k |x-y|)/(4 pi |x-y|), which is complex and not homogeneous.  Both
are radial, so M2L matrices between cells obey the axial/diagonal
reflection identities exploited by :mod:`chebfmm.symmetry`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .interp import AffineMap, ChebyshevGrid

__all__ = [
    "Kernel",
    "M2LMatrix",
    "laplace_kernel",
    "helmholtz_kernel",
    "laplace_eval",
    "helmholtz_eval",
    "assemble_m2l",
    "assemble_for_transfer",
    "scale_homogeneous",
]

FOUR_PI = 4.0 * np.pi


@dataclass(frozen=True)
class Kernel:
    """A radial kernel K(x, y) = profile(|x - y|).

    Attributes
    ----------
    name : str
        Identifier used in reports and error messages.
    profile : callable
        Maps an array of distances r > 0 to kernel values.
    dtype : numpy dtype
        float64 for real kernels, complex128 for complex ones.
    homogeneity_degree : float or None
        n such that K(a*r) = a^n K(r), or None if not homogeneous.
    wavenumber : float or None
        Set for oscillatory kernels.
    """

    name: str
    profile: Callable[[np.ndarray], np.ndarray]
    dtype: np.dtype = field(default=np.dtype(np.float64))
    homogeneity_degree: float | None = None
    wavenumber: float | None = None

    @property
    def scalar_kind(self) -> str:
        return "complex" if np.issubdtype(self.dtype, np.complexfloating) else "real"

    def evaluate(self, x, y):
        """K(x, y) for single points or broadcastable arrays of points.

        Raises for coincident points, where the kernel is singular.
        """
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        r = np.sqrt(np.sum((x - y) ** 2, axis=-1))
        if np.any(r == 0.0):
            raise ValueError(f"{self.name} kernel is singular at x == y")
        values = self.profile(r)
        return values if values.ndim else values[()]

    def matrix(self, targets, sources, skip_singular: bool = False) -> np.ndarray:
        """Dense matrix K(targets[i], sources[j]).

        With ``skip_singular`` coincident pairs contribute 0 (used by the
        direct near-field sum, where a particle must not act on itself);
        otherwise coincident pairs raise.
        """
        t = np.asarray(targets, dtype=float)
        s = np.asarray(sources, dtype=float)
        r = np.sqrt(np.sum((t[:, None, :] - s[None, :, :]) ** 2, axis=-1))
        singular = r == 0.0
        if np.any(singular):
            if not skip_singular:
                raise ValueError(f"{self.name} kernel is singular at x == y")
            r[singular] = 1.0
            values = self.profile(r)
            values[singular] = 0.0
            return values
        return self.profile(r)


def _laplace_profile(r: np.ndarray) -> np.ndarray:
    return 1.0 / (FOUR_PI * r)


def laplace_kernel() -> Kernel:
    """1/(4 pi r); homogeneous of degree -1."""
    return Kernel("laplace", _laplace_profile, np.dtype(np.float64), homogeneity_degree=-1.0)


def helmholtz_kernel(wavenumber: float = 1.0) -> Kernel:
    """exp(i k r)/(4 pi r); complex, not homogeneous."""
    k = float(wavenumber)

    def profile(r: np.ndarray) -> np.ndarray:
        return np.exp(1j * k * r) / (FOUR_PI * r)

    return Kernel("helmholtz", profile, np.dtype(np.complex128), wavenumber=k)


def laplace_eval(x, y) -> float:
    """Laplace kernel at a single pair of points."""
    return laplace_kernel().evaluate(x, y)


def helmholtz_eval(x, y, wavenumber: float) -> complex:
    """Helmholtz kernel at a single pair of points."""
    return helmholtz_kernel(wavenumber).evaluate(x, y)


@dataclass
class M2LMatrix:
    """Dense M2L operator for one cell pair.

    ``entries[m(alpha)-1, n(beta)-1] = K(target node alpha, source node beta)``;
    rows index target nodes, columns source nodes.
    """

    entries: np.ndarray
    transfer: tuple[int, int, int]
    level_width: float

    @property
    def shape(self):
        return self.entries.shape


def assemble_m2l(
    kernel: Kernel,
    target_cell: AffineMap,
    source_cell: AffineMap,
    grid: ChebyshevGrid,
) -> M2LMatrix:
    """Assemble the dense l^3 x l^3 M2L matrix between two same-width cells.

    The cells must be well separated (|t| > sqrt(3) for the transfer vector
    t = (c_x - c_y)/w); touching or overlapping cells raise.
    """
    if not np.isclose(target_cell.half_width, source_cell.half_width):
        raise ValueError("M2L assembly requires same-width cells")
    width = 2.0 * target_cell.half_width
    diff = (np.asarray(target_cell.center) - np.asarray(source_cell.center)) / width
    transfer = tuple(int(round(d)) for d in diff)
    if float(np.dot(diff, diff)) <= 3.0:
        raise ValueError(
            f"cells with transfer vector {transfer} are not admissible (|t| <= sqrt(3))"
        )
    x_nodes = grid.nodes_in_cell(target_cell)
    y_nodes = grid.nodes_in_cell(source_cell)
    return M2LMatrix(kernel.matrix(x_nodes, y_nodes), transfer, width)


def assemble_for_transfer(
    kernel: Kernel, transfer, width: float, grid: ChebyshevGrid
) -> np.ndarray:
    """Canonical M2L entries for a transfer vector at a given cell width.

    The source cell sits at the origin and the target at width * t, which
    is the configuration of every cell pair sharing t up to a translation.
    """
    t = tuple(int(c) for c in transfer)
    half = 0.5 * width
    target = AffineMap((width * t[0], width * t[1], width * t[2]), half)
    source = AffineMap((0.0, 0.0, 0.0), half)
    return assemble_m2l(kernel, target, source, grid).entries


def scale_homogeneous(
    op: M2LMatrix, from_width: float, to_width: float, degree: float | None
) -> M2LMatrix:
    """Rescale a homogeneous kernel's M2L operator to another cell width.

    Entries are multiplied by (to_width/from_width)^degree; this matches a
    fresh assembly at the target width because the node geometry scales
    uniformly with the cell.
    """
    if degree is None:
        raise ValueError("kernel has no homogeneity degree; cannot scale across levels")
    if from_width <= 0 or to_width <= 0:
        raise ValueError("cell widths must be positive")
    factor = (to_width / from_width) ** degree
    return M2LMatrix(op.entries * factor, op.transfer, to_width)
