"""
Global differentiation matrices and the assembled Poisson system.
"""
from __future__ import annotations

import csv
from collections import Counter

import numpy as np
import scipy.sparse as sp

from .geometry import NodeSet, effective_fill_distance
from .kernels import LAPLACIAN, OperatorSpec, PhsKernel
from .problems import ProblemSpec
from .weights import AdaptivityConfig, StencilError, weights_for_node

DegreeHistogram = Counter


class AssemblyError(RuntimeError):
    def __init__(self, message, node=None):
        super().__init__(message if node is None else f"{message} (node {node})")
        self.node = node


def _collect(nodes, rows, op, cfg, adaptive, kernel, h_e, triplets, hist):
    index = nodes.index
    for i in rows:
        try:
            sw = weights_for_node(int(i), nodes, index, op, cfg, h_e, adaptive, kernel)
        except (StencilError, ValueError) as exc:
            raise AssemblyError(str(exc), node=int(i)) from exc
        triplets[0].append(np.full(sw.size, i))
        triplets[1].append(sw.stencil_indices)
        triplets[2].append(sw.weights)
        hist[sw.degree] += 1


def _finalize(triplets, shape) -> sp.csr_matrix:
    if triplets[0]:
        r, c, v = (np.concatenate(t) for t in triplets)
    else:
        r = c = np.empty(0, dtype=int)
        v = np.empty(0)
    A = sp.coo_matrix((v, (r, c)), shape=shape).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return A


def build_diff_matrix(nodes: NodeSet, op: OperatorSpec = LAPLACIAN,
                      cfg: AdaptivityConfig | None = None, adaptive: bool = True,
                      rows=None, kernel: PhsKernel = PhsKernel(),
                      h_e: float | None = None) -> tuple[sp.csr_matrix, DegreeHistogram]:
    """
    N x N sparse matrix whose row ``i`` holds the RBF-FD weights of `op` at
    node ``i`` for every node in `rows` (default: interior nodes). Other rows
    are empty.

    Returns the matrix and a histogram of the selected polynomial degrees.
    """
    cfg = cfg if cfg is not None else AdaptivityConfig(g=4, k=op.order)
    if cfg.k != op.order:
        cfg = cfg.with_order(op.order)
    rows = nodes.interior if rows is None else np.asarray(rows, dtype=int)
    if h_e is None:
        h_e = effective_fill_distance(nodes.domain.volume, len(nodes), 2)
    triplets = ([], [], [])
    hist = DegreeHistogram()
    _collect(nodes, rows, op, cfg, adaptive, kernel, h_e, triplets, hist)
    N = len(nodes)
    return _finalize(triplets, (N, N)), hist


def assemble_pde_system(nodes: NodeSet, problem: ProblemSpec, cfg: AdaptivityConfig,
                        adaptive: bool = True, kernel: PhsKernel = PhsKernel()
                        ) -> tuple[sp.csr_matrix, np.ndarray, DegreeHistogram]:
    """
    Square system for ``laplacian(u) = f`` with the problem's boundary
    conditions.

    Interior rows hold Laplacian weights, Dirichlet rows a unit diagonal, and
    Neumann rows the weights of the outward normal derivative over the
    boundary node's own (one-sided) stencil.
    """
    N = len(nodes)
    P = nodes.points
    h_e = effective_fill_distance(nodes.domain.volume, N, 2)
    rhs = np.empty(N)
    triplets = ([], [], [])
    hist = DegreeHistogram()

    interior = nodes.interior
    rhs[interior] = problem.rhs_f(P[interior])
    _collect(nodes, interior, LAPLACIAN, cfg.with_order(2), adaptive, kernel, h_e,
             triplets, hist)

    for seg in np.unique(nodes.segments[nodes.boundary]):
        rows = np.flatnonzero(nodes.segments == seg)
        bc = problem.boundary_conditions.get(int(seg))
        if bc is None:
            raise AssemblyError(f"no boundary condition for segment {seg}", node=int(rows[0]))
        rhs[rows] = bc.value(P[rows])
        if bc.kind == "dirichlet":
            triplets[0].append(rows)
            triplets[1].append(rows)
            triplets[2].append(np.ones(len(rows)))
        else:
            op = OperatorSpec.normal(nodes.domain.outward_normal(int(seg)))
            _collect(nodes, rows, op, cfg.with_order(1), adaptive, kernel, h_e,
                     triplets, hist)
    return _finalize(triplets, (N, N)), rhs, hist


def write_pattern_csv(A: sp.spmatrix, path) -> None:
    A = sp.csr_matrix(A)
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["row", "col"])
        for i in range(A.shape[0]):
            for j in A.indices[A.indptr[i]:A.indptr[i + 1]]:
                w.writerow([i, int(j)])


def write_degrees_csv(hist: DegreeHistogram, path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["degree", "count"])
        for p in sorted(hist):
            w.writerow([p, hist[p]])
