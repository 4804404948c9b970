"""
RBF-FD stencil weights from polyharmonic splines with polynomial
augmentation, and per-node polynomial degree selection.

For a center ``x_c`` with stencil ``x_1 .. x_n`` (``x_1 = x_c``) the weights
``w`` solve the saddle-point system::

    [ A   P ] [ w  ]   [ L phi |x_c ]
    [ P^T 0 ] [ w_e] = [ L p   |x_c ]

with ``A[i, j] = phi(|x_i - x_j|)`` and ``P[i, j] = p_j(x_i)``. The degree
``p`` of the augmenting polynomials is chosen per node from the ratio of the
local fill distance to the effective fill distance of the whole node set,
so that the requested global order of convergence is kept on non-uniform
nodes with stencils no larger than needed.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .geometry import GeometryError, NodeSet, SpatialIndex, local_fill_distance
from .kernels import MonomialBasis, OperatorSpec, PhsKernel, basis_count, phs_apply

PIVOT_RTOL = 1e-14


class StencilError(RuntimeError):
    """Raised when a stencil system cannot be solved."""


class SingularStencil(StencilError):
    pass


class IllConditionedStencil(StencilError):
    pass


@dataclass
class StencilWeights:
    center_index: int
    stencil_indices: np.ndarray
    weights: np.ndarray
    degree: int
    multipliers: np.ndarray

    @property
    def size(self) -> int:
        return len(self.weights)


@dataclass
class AdaptivityConfig:
    """
    Parameters
    ----------
    g : int
        Requested global order of convergence.
    k : int
        Order of the differential operator.
    p_min, p_max : int
        Clamp range for the selected polynomial degree.
    n_m : int, optional
        Neighbors fetched per node for the local fill-distance estimate.
        Defaults to the stencil size of `p_max`.
    """
    g: int
    k: int = 2
    p_min: int = 2
    p_max: int = 10
    n_m: int | None = None
    fixed_degree: int = field(init=False)

    def __post_init__(self):
        if self.g < 1:
            raise ValueError("global order must be positive")
        if self.p_min < self.k:
            raise ValueError("p_min must be at least the operator order")
        if self.p_max < self.p_min:
            raise ValueError("p_max must be >= p_min")
        need = stencil_size(self.p_max)
        if self.n_m is None:
            self.n_m = need
        elif self.n_m < need:
            raise ValueError(f"n_m must be at least {need} for p_max={self.p_max}")
        self.fixed_degree = self.g + self.k - 1

    def with_order(self, k: int) -> "AdaptivityConfig":
        """Same settings for an operator of order `k`."""
        return AdaptivityConfig(self.g, k, max(self.p_min, k), self.p_max, self.n_m)


def _round_half_away(x: float) -> int:
    return int(math.copysign(math.floor(abs(x) + 0.5), x))


def select_degree(h_local: float, h_e: float, cfg: AdaptivityConfig) -> int:
    """
    Polynomial degree ``g + k - 1 + log10(h_local / h_e)`` rounded to the
    nearest integer and clamped to ``[p_min, p_max]``.
    """
    if h_local <= 0 or h_e <= 0:
        raise ValueError("fill distances must be positive")
    p = _round_half_away(cfg.g + cfg.k - 1 + math.log10(h_local / h_e))
    return min(max(p, cfg.p_min), cfg.p_max)


def stencil_size(p: int, d: int = 2) -> int:
    """Stencil size ``2 n_p + 1`` for augmenting degree `p`."""
    return 2 * basis_count(p, d) + 1


def compute_weights(center, stencil_points, op: OperatorSpec, p: int,
                    kernel: PhsKernel = PhsKernel(), *, center_index: int = -1,
                    stencil_indices=None) -> StencilWeights:
    """
    Solve the augmented PHS system for the weights of `op` at `center`.

    The system is assembled in local coordinates ``(x - center) / s`` where
    ``s`` is the largest center-to-stencil distance; weights are scaled back
    by ``s**-k``.

    Raises
    ------
    SingularStencil
        Coincident stencil points or too few points for the polynomial space.
    IllConditionedStencil
        A pivot of the LU factorization is below ``1e-14 * ||M||_inf``, or a
        monomial that is degenerate on the stencil is not reproduced.
    """
    center = np.asarray(center, dtype=float)
    X = np.asarray(stencil_points, dtype=float)
    n = len(X)
    basis = MonomialBasis(p)

    X = X - center
    s = float(np.linalg.norm(X, axis=1).max()) if n else 0.0
    if s == 0.0:
        raise SingularStencil("singular stencil")
    X /= s
    R = np.linalg.norm(X[:, None, :] - X[None, :, :], axis=-1)
    if n > 1 and R[~np.eye(n, dtype=bool)].min() == 0.0:
        raise SingularStencil("singular stencil")

    m = kernel.m
    P_full = basis.vandermonde(X)
    origin = np.zeros(2)
    Lp_full = basis.apply(op, origin)
    keep = _independent_columns(P_full)
    if len(keep) > n:
        raise SingularStencil("singular stencil: fewer points than polynomial terms")
    P, Lp = P_full[:, keep], Lp_full[keep]
    n_p = len(keep)

    M = np.zeros((n + n_p, n + n_p))
    M[:n, :n] = R ** m
    M[:n, n:] = P
    M[n:, :n] = P.T
    rhs = np.concatenate([phs_apply(op, origin, X, m), Lp])

    with warnings.catch_warnings():
        # exact zero pivots are reported below as IllConditionedStencil
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(M, check_finite=False)
    pivots = np.abs(np.diag(lu))
    if pivots.min() < PIVOT_RTOL * np.abs(M).sum(axis=1).max():
        raise IllConditionedStencil("ill-conditioned stencil")
    sol = scipy.linalg.lu_solve((lu, piv), rhs, check_finite=False)
    w = sol[:n]
    if n_p < basis.count:
        # monomials dropped as dependent on this stencil must still be reproduced
        resid = np.abs(P_full.T @ w - Lp_full)
        if resid.max() > 1e-8 * max(1.0, np.abs(w).max()):
            if n < basis.count:
                raise SingularStencil("singular stencil: fewer points than polynomial terms")
            raise IllConditionedStencil("ill-conditioned stencil")
    multipliers = np.zeros(basis.count)
    multipliers[keep] = sol[n:]

    scale = s ** (-op.order)
    if stencil_indices is None:
        stencil_indices = np.arange(n)
    return StencilWeights(center_index=center_index,
                          stencil_indices=np.asarray(stencil_indices, dtype=int),
                          weights=w * scale,
                          degree=p,
                          multipliers=multipliers * scale)


def _independent_columns(P: np.ndarray, rtol: float = 1e-10) -> np.ndarray:
    """
    Indices of a maximal set of linearly independent columns of `P`, in
    their original order. Columns that are exactly dependent (e.g. ``x*y`` on
    a cross-shaped stencil) are dropped.
    """
    _, r, perm = scipy.linalg.qr(P, mode="economic", pivoting=True)
    d = np.abs(np.diag(r))
    rank = int(np.sum(d > rtol * d[0])) if len(d) else 0
    if rank == P.shape[1]:
        return np.arange(P.shape[1])
    return np.sort(perm[:rank])


def _stencil(index: SpatialIndex, i: int, n: int) -> np.ndarray:
    nbr = index.knn(index.points[i], n)[0]
    # the center always leads its own stencil
    return np.concatenate([[i], nbr[nbr != i][: n - 1]])


def weights_for_node(i: int, nodes: NodeSet, index: SpatialIndex | None,
                     op: OperatorSpec, cfg: AdaptivityConfig, h_e: float,
                     adaptive: bool = True, kernel: PhsKernel = PhsKernel()) -> StencilWeights:
    """
    Weights of `op` at node `i` with a degree chosen from the local node
    density (or the fixed degree ``g + k - 1`` when not `adaptive`).

    An ill-conditioned stencil is retried with ``ceil(n_p / 2)`` more
    neighbors at a time, up to ``max(n_m, 2 n_s)`` nodes.
    """
    index = index if index is not None else nodes.index
    N = len(nodes)
    if adaptive:
        near = _stencil(index, i, min(cfg.n_m, N))
        p = select_degree(local_fill_distance(nodes.points[near]), h_e, cfg)
    else:
        p = cfg.fixed_degree
    n_p = basis_count(p)
    n_s = stencil_size(p)
    if n_s > N:
        raise GeometryError("stencil larger than node set")
    limit = min(N, max(cfg.n_m, 2 * n_s))
    step = math.ceil(n_p / 2)
    size = n_s
    while True:
        idx = _stencil(index, i, size)
        try:
            return compute_weights(nodes.points[i], nodes.points[idx], op, p, kernel,
                                   center_index=i, stencil_indices=idx)
        except IllConditionedStencil:
            if size >= limit:
                raise IllConditionedStencil(f"ill-conditioned stencil at node {i}") from None
            size = min(limit, size + step)
