"""
Adaptive RBF-FD: polyharmonic-spline finite-difference weights on scattered
2-D nodes, with the augmenting polynomial degree chosen per node so that a
requested global order of convergence is kept on non-uniform node sets.
"""
from .assembly import assemble_pde_system, build_diff_matrix
from .geometry import (NodeSet, Rectangle, SpatialIndex, effective_fill_distance,
                       fill_distance, generate_nodes, knn, local_fill_distance, mesh_ratio,
                       separation_distance)
from .kernels import (DX, DY, IDENTITY, LAPLACIAN, MonomialBasis, OperatorSpec, PhsKernel,
                      basis_count, monomial_apply, phs_apply, phs_eval)
from .problems import ProblemSpec, problem_nist_peak, problem_section4
from .solver import SolveReport, error_norms, solve
from .weights import (AdaptivityConfig, StencilWeights, compute_weights, select_degree,
                      stencil_size, weights_for_node)

__version__ = "0.1.0"
