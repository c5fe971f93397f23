"""Scikit-learn style front end for the fast summation operator.

``fit(X)`` takes particle positions and precomputes the octree, the
interaction lists and the selected M2L operator cache; ``transform(W)``
applies the implied N x N kernel matrix to one or more weight vectors in
O(N) instead of O(N^2).  The class follows the estimator protocol
(``get_params``/``set_params``/``clone``) so it composes with pipelines
and model-selection tooling.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError
from sklearn.utils.validation import check_array

from .engine import build_plan
from .geometry import bounding_cube
from .interp import AffineMap
from .kernels import helmholtz_kernel, laplace_kernel
from .m2l import DEFAULT_BUDGET_BYTES, VARIANTS

__all__ = ["ChebyshevFmm"]


class ChebyshevFmm(BaseEstimator, TransformerMixin):
    """Fast kernel summation f_i = sum_j K(x_i, x_j) w_j.

    Parameters
    ----------
    kernel : {"laplace", "helmholtz"}
        Kernel function; helmholtz runs the identical pipeline in complex
        arithmetic.
    wavenumber : float
        Helmholtz wavenumber (ignored for laplace).
    order : int
        Chebyshev interpolation order per axis (l^3 expansion terms).
    epsilon : float
        Target accuracy of the low-rank operator compression.
    variant : str
        M2L strategy, one of na, nasym, nablk, sa, sarcmp, ia, iasym,
        iablk.
    compression : {"svd", "aca"}
        Low-rank factorization route.
    depth : int
        Octree depth (>= 2).
    block_size : int
        Buffer capacity of the blocked variants.
    bbox : AffineMap, optional
        Root cube; inferred from the points when omitted.
    budget_bytes : int, optional
        Precompute memory guard.
    threads : int
        Worker threads for the apply phase (1 = reproducible reference).

    Examples
    --------
    >>> fmm = ChebyshevFmm(order=4, epsilon=1e-4).fit(points)
    >>> potentials = fmm.transform(weights)
    """

    def __init__(
        self,
        kernel: str = "laplace",
        wavenumber: float = 1.0,
        order: int = 4,
        epsilon: float = 1e-4,
        variant: str = "iablk",
        compression: str = "svd",
        depth: int = 3,
        block_size: int = 128,
        bbox: AffineMap | None = None,
        budget_bytes: int | None = None,
        threads: int = 1,
    ):
        self.kernel = kernel
        self.wavenumber = wavenumber
        self.order = order
        self.epsilon = epsilon
        self.variant = variant
        self.compression = compression
        self.depth = depth
        self.block_size = block_size
        self.bbox = bbox
        self.budget_bytes = budget_bytes
        self.threads = threads

    def _make_kernel(self):
        if self.kernel == "laplace":
            return laplace_kernel()
        if self.kernel == "helmholtz":
            return helmholtz_kernel(self.wavenumber)
        raise ValueError(f"unknown kernel {self.kernel!r}")

    def fit(self, X, y=None):
        """Precompute the evaluation plan for particle positions X (n, 3)."""
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != 3:
            raise ValueError(f"positions must have shape (n, 3), got {X.shape}")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        bbox = self.bbox if self.bbox is not None else bounding_cube(X)
        self.plan_ = build_plan(
            X,
            bbox,
            self.depth,
            self._make_kernel(),
            order=self.order,
            epsilon=self.epsilon,
            variant=self.variant,
            compression=self.compression,
            block_size=self.block_size,
            budget_bytes=(
                DEFAULT_BUDGET_BYTES if self.budget_bytes is None else self.budget_bytes
            ),
            threads=self.threads,
        )
        self.n_points_ = X.shape[0]
        return self

    def transform(self, W) -> np.ndarray:
        """Potentials for weight vector(s) W of shape (n,) or (n, k)."""
        if not hasattr(self, "plan_"):
            raise NotFittedError("ChebyshevFmm must be fitted before transform")
        W = np.asarray(W)
        squeeze = W.ndim == 1
        W2 = check_array(
            W.reshape(-1, 1) if squeeze else W,
            dtype=(np.float64, np.complex128),
        )
        if W2.shape[0] != self.n_points_:
            raise ValueError(
                f"weights have {W2.shape[0]} rows but the estimator was fitted "
                f"on {self.n_points_} points"
            )
        cols = [self.plan_.run(W2[:, j]) for j in range(W2.shape[1])]
        out = np.stack(cols, axis=1)
        return out[:, 0] if squeeze else out

    def direct_reference(self, W, target_indices=None) -> np.ndarray:
        """O(N^2) direct summation for validation."""
        if not hasattr(self, "plan_"):
            raise NotFittedError("ChebyshevFmm must be fitted first")
        return self.plan_.direct_reference(np.asarray(W), target_indices)
