"""Kernel-independent fast multipole summation on Chebyshev interpolation.

The package evaluates f_i = sum_j K(x_i, y_j) w_j in O(N) via Chebyshev
expansions on a uniform octree, with eight interchangeable strategies for
the dominant moment-to-local operator: dense, symmetry-permuted, blocked,
shared-basis low rank (with optional recompression) and individually
low-rank forms.
"""

from .bench import ExperimentConfig, RunReport, measure_error, run_experiment
from .engine import FmmPlan, build_plan
from .estimator import ChebyshevFmm
from .geometry import bounding_cube, gen_geometry, read_particle_file
from .interp import AffineMap, ChebyshevGrid
from .kernels import (
    Kernel,
    assemble_m2l,
    helmholtz_kernel,
    laplace_kernel,
    scale_homogeneous,
)
from .lowrank import LowRankFactors, aca_plus_svd, truncated_svd
from .m2l import VARIANTS, BudgetExceededError, M2LHandler, make_handler
from .octree import (
    CellId,
    InteractionLists,
    Octree,
    build_interaction_lists,
    build_tree,
    full_far_field_vectors,
    transfer_vector,
    unique_transfer_vectors,
)
from .symmetry import (
    PermutationSpec,
    SymmetryMap,
    canonicalize,
    permutation_index_table,
    permute_index,
    reduce_interaction_list,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "AffineMap",
    "BudgetExceededError",
    "CellId",
    "ChebyshevFmm",
    "ChebyshevGrid",
    "ExperimentConfig",
    "FmmPlan",
    "InteractionLists",
    "Kernel",
    "LowRankFactors",
    "M2LHandler",
    "Octree",
    "PermutationSpec",
    "RunReport",
    "SymmetryMap",
    "VARIANTS",
    "aca_plus_svd",
    "assemble_m2l",
    "bounding_cube",
    "build_interaction_lists",
    "build_plan",
    "build_tree",
    "canonicalize",
    "full_far_field_vectors",
    "gen_geometry",
    "helmholtz_kernel",
    "laplace_kernel",
    "make_handler",
    "measure_error",
    "permutation_index_table",
    "permute_index",
    "read_particle_file",
    "reduce_interaction_list",
    "run_experiment",
    "scale_homogeneous",
    "transfer_vector",
    "truncated_svd",
    "unique_transfer_vectors",
]
