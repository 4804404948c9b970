"""
Acceptance criteria 1-9. Each test records a single PASS/FAIL line, shown in
the "acceptance criteria" section of the pytest summary.
"""
import time

import numpy as np
import pytest
from scipy.spatial import Voronoi

from adaptive_rbffd.assembly import assemble_pde_system, build_diff_matrix
from adaptive_rbffd.experiments import RunConfig, run_convergence
from adaptive_rbffd.geometry import (
    UNIT_SQUARE, NodeSet, SpatialIndex, effective_fill_distance, fill_distance,
    generate_nodes, knn, mesh_ratio, separation_distance)
from adaptive_rbffd.kernels import (
    DX, DY, IDENTITY, LAPLACIAN, OperatorSpec, PhsKernel, basis_count, monomial_apply,
    monomial_exponents)
from adaptive_rbffd.problems import problem_nist_peak, problem_section4
from adaptive_rbffd.solver import error_norms, solve
from adaptive_rbffd.weights import (
    AdaptivityConfig, compute_weights, select_degree, stencil_size)

OPS = [IDENTITY, DX, DY, LAPLACIAN]
SQUASH_G = 5  # fixed degree 6, the middle of the 4..8 range


def random_stencil(rng, p, center=None, radius=None):
    n = stencil_size(p)
    c = rng.uniform(-1, 1, 2) if center is None else np.asarray(center, dtype=float)
    r = rng.uniform(0.01, 1.0) if radius is None else radius
    t = rng.uniform(0, 2 * np.pi, n - 1)
    rho = r * np.sqrt(rng.uniform(0.01, 1.0, n - 1))
    return c, np.vstack([c, c + np.c_[rho * np.cos(t), rho * np.sin(t)]])


def test_criterion_1_polynomial_reproduction(acceptance_report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(200):
        p = int(rng.integers(2, 7))
        m = int(rng.choice([3, 5]))
        c, X = random_stencil(rng, p)
        for op in OPS:
            w = compute_weights(c, X, op, p, PhsKernel(m)).weights
            for e in monomial_exponents(p):
                q = np.prod(X ** np.array(e), axis=1)
                bound = max(1.0, np.abs(w).max() * np.abs(q).max())
                worst = max(worst, abs(w @ q - monomial_apply(op, e, c)) / bound)
    secs = time.perf_counter() - t0
    ok = worst <= 1e-8 and secs < 10
    acceptance_report(1, ok, f"worst relative reproduction error {worst:.2e}, {secs:.1f}s")
    assert ok


def test_criterion_2_classical_stencils(acceptance_report):
    t0 = time.perf_counter()
    offsets = np.array([[0, 0], [1, 0], [-1, 0], [0, 1], [0, -1]], dtype=float)
    worst = 0.0
    for h in (0.1, 0.01):
        X = h * offsets
        lap = compute_weights((0, 0), X, LAPLACIAN, 2).weights
        ref = np.array([-4, 1, 1, 1, 1]) / h ** 2
        worst = max(worst, np.abs(lap - ref).max() / np.abs(ref).max())
        dx = compute_weights((0, 0), X, DX, 2).weights
        ref = np.array([0, 1, -1, 0, 0]) / (2 * h)
        worst = max(worst, np.abs(dx - ref).max() / np.abs(ref).max())
    secs = time.perf_counter() - t0
    ok = worst <= 1e-9 and secs < 1
    acceptance_report(2, ok, f"worst relative deviation {worst:.2e}, {secs:.2f}s")
    assert ok


@pytest.mark.slow
def test_criterion_3_quasi_uniform_convergence(acceptance_report, tmp_path):
    t0 = time.perf_counter()
    cfg = RunConfig(problem="section4", generator={"kind": "tensor-grid"},
                    N=[400, 900, 1600, 2500, 3600], g=4, adaptive=False,
                    out_dir=str(tmp_path))
    records, slope = run_convergence(cfg)
    secs = time.perf_counter() - t0
    ok = 3.0 <= slope <= 5.5 and secs < 180
    errs = ", ".join(f"{r.max_error:.2e}" for r in records)
    acceptance_report(3, ok, f"slope {slope:.2f} (band [3, 5.5]), errors {errs}, {secs:.0f}s")
    assert ok


def _solve_section4(nodes, adaptive):
    A, rhs, hist = assemble_pde_system(nodes, problem_section4(), AdaptivityConfig(SQUASH_G),
                                       adaptive)
    u = solve(A, rhs).solution
    return A.nnz, error_norms(u, problem_section4().exact_u(nodes.points))[0]


@pytest.fixture(scope="module")
def squash_nodes():
    return generate_nodes("sine-squash", 2500)


@pytest.mark.slow
def test_criterion_4_adaptive_vs_standard(acceptance_report, squash_nodes):
    t0 = time.perf_counter()
    nnz_std, err_std = _solve_section4(squash_nodes, adaptive=False)
    nnz_ad, err_ad = _solve_section4(squash_nodes, adaptive=True)
    secs = time.perf_counter() - t0
    ratio = nnz_ad / nnz_std
    ok = ratio <= 0.92 and err_ad <= 3 * err_std and secs < 120
    acceptance_report(4, ok, f"g={SQUASH_G} nnz {nnz_ad} vs {nnz_std} (ratio {ratio:.3f}, "
                             f"need <= 0.92), max error {err_ad:.2e} vs {err_std:.2e}, "
                             f"{secs:.0f}s")
    assert ok


@pytest.mark.slow
def test_criterion_5_degree_histogram(acceptance_report, squash_nodes):
    t0 = time.perf_counter()
    cfg = AdaptivityConfig(SQUASH_G)
    _, hist = build_diff_matrix(squash_nodes, LAPLACIAN, cfg, adaptive=True)
    degrees = sorted(hist)
    contiguous = degrees == list(range(degrees[0], degrees[-1] + 1))
    width = degrees[-1] - degrees[0] + 1
    grid = generate_nodes("tensor-grid", 2500)
    _, flat = build_diff_matrix(grid, LAPLACIAN, cfg, adaptive=True)
    single = set(flat) == {cfg.fixed_degree}
    secs = time.perf_counter() - t0
    ok = contiguous and width >= 3 and single and secs < 120
    acceptance_report(5, ok, f"sine-squash degrees {dict(sorted(hist.items()))} (width {width}, "
                             f"need >= 3), quasi-uniform {dict(flat)}, {secs:.0f}s")
    assert ok


@pytest.mark.slow
def test_criterion_6_nist_peak(acceptance_report):
    t0 = time.perf_counter()
    prob = problem_nist_peak(1000.0, (0.5, 0.5))
    cfg = AdaptivityConfig(8)
    peak = generate_nodes("peak-adapted", 2470, UNIT_SQUARE, params=dict(
        x_peak=[0.5, 0.5], r_min=0.005, r_max=0.1, R=0.3), seed=0)
    uniform = generate_nodes("halton", len(peak), UNIT_SQUARE, seed=0)

    def run(nodes, adaptive):
        A, rhs, _ = assemble_pde_system(nodes, prob, cfg, adaptive)
        u = solve(A, rhs).solution
        return A.nnz, error_norms(u, prob.exact_u(nodes.points))[0]

    nnz_ad, err_ad = run(peak, True)
    nnz_qu, err_qu = run(uniform, False)
    secs = time.perf_counter() - t0
    ok = (len(peak) == len(uniform) and err_ad < err_qu and nnz_ad < nnz_qu and secs < 180)
    acceptance_report(6, ok, f"N={len(peak)}: adaptive max error {err_ad:.2e} nnz {nnz_ad}, "
                             f"quasi-uniform max error {err_qu:.2e} nnz {nnz_qu}, {secs:.0f}s")
    assert ok


def test_criterion_7_degree_rule_and_counts(acceptance_report):
    t0 = time.perf_counter()
    cfg = AdaptivityConfig(g=4, k=2)
    he = 0.04
    got = [select_degree(f * he, he, cfg) for f in (1.0, 10.0, 0.1)]
    counts = [basis_count(p, 2) for p in range(6)]
    secs = time.perf_counter() - t0
    ok = got == [5, 6, 4] and counts == [1, 3, 6, 10, 15, 21] and secs < 1
    acceptance_report(7, ok, f"degrees {got}, n_p(0..5) {counts}")
    assert ok


def _brute_knn(points, q, n):
    d = np.linalg.norm(points - q, axis=1)
    return np.lexsort((np.arange(len(points)), d))[:n]


def _brute_fill(points):
    # the largest empty disk is centered at a Voronoi vertex or on the boundary
    t = np.linspace(0, 1, 4001)
    zero, one = np.zeros_like(t), np.ones_like(t)
    cand = np.vstack([np.c_[t, zero], np.c_[t, one], np.c_[zero, t], np.c_[one, t]])
    if len(points) >= 4:
        v = Voronoi(points).vertices
        cand = np.vstack([cand, v[np.all((v >= 0) & (v <= 1), axis=1)]])
    d2 = ((cand[:, None, :] - points[None]) ** 2).sum(-1).min(axis=1)
    return float(d2.max()) ** 0.5


def _brute_sep(points):
    d = np.linalg.norm(points[:, None] - points[None], axis=-1)
    np.fill_diagonal(d, np.inf)
    return 0.5 * d.min()


@pytest.mark.slow
def test_criterion_8_geometry_oracles(acceptance_report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(8)
    knn_ok = sep_ok = True
    worst_fill = worst_ratio = 0.0
    for _ in range(100):
        n = int(rng.integers(10, 501))
        pts = rng.uniform(0, 1, (n, 2))
        nodes = NodeSet(pts, np.full(n, -1), UNIT_SQUARE)
        index = SpatialIndex(pts)
        for q in rng.uniform(0, 1, (5, 2)):
            k = int(rng.integers(1, n + 1))
            knn_ok &= np.array_equal(knn(index, q, k), _brute_knn(pts, q, k))
        sep = _brute_sep(pts)
        sep_ok &= separation_distance(nodes) == sep
        fill = _brute_fill(pts)
        h = fill_distance(nodes)
        worst_fill = max(worst_fill, abs(h - fill) / fill)
        worst_ratio = max(worst_ratio, abs(mesh_ratio(nodes) - fill / sep) / (fill / sep))
    secs = time.perf_counter() - t0
    ok = knn_ok and sep_ok and worst_fill <= 0.05 and worst_ratio <= 0.05 and secs < 30
    acceptance_report(8, ok, f"knn exact {knn_ok}, separation exact {sep_ok}, fill within "
                             f"{worst_fill:.2%}, mesh ratio within {worst_ratio:.2%}, {secs:.1f}s")
    assert ok


def test_criterion_9_property_suite(acceptance_report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(9)
    ops = OPS + [OperatorSpec.normal((0.6, -0.8))]
    worst = dict(scaling=0.0, translation=0.0, row_sum=0.0, constraint=0.0)
    for i in range(100):
        p = int(rng.integers(2, 7))
        op = ops[i % len(ops)]
        c, X = random_stencil(rng, p)
        sw = compute_weights(c, X, op, p)
        w = sw.weights
        wmax = np.abs(w).max()

        s = 10 ** rng.uniform(-3, 3)
        ws = compute_weights(c * s, X * s, op, p).weights
        worst["scaling"] = max(worst["scaling"],
                               np.abs(ws * s ** op.order - w).max() / wmax / 1e-9)
        d = rng.uniform(-100, 100, 2)
        wt = compute_weights(c + d, X + d, op, p).weights
        worst["translation"] = max(worst["translation"], np.abs(wt - w).max() / wmax / 1e-10)

        # constraint block in the local coordinates the system is solved in
        r = np.linalg.norm(X - c, axis=1).max()
        loc = (X - c) / r
        wl = w * r ** op.order
        resid = max(abs(wl @ np.prod(loc ** np.array(e), axis=1) - monomial_apply(op, e, (0, 0)))
                    for e in monomial_exponents(p))
        worst["constraint"] = max(worst["constraint"],
                                  resid / (1e-9 * (1 + np.abs(wl).max())))

        nodes = generate_nodes("halton", int(rng.integers(150, 400)), seed=i)
        rows = rng.choice(nodes.interior, 5, replace=False)
        A, _ = build_diff_matrix(nodes, LAPLACIAN, AdaptivityConfig(int(rng.integers(1, 5))),
                                 rows=rows)
        for j in rows:
            data = A.getrow(int(j)).data
            worst["row_sum"] = max(worst["row_sum"],
                                   abs(data.sum()) / (1e-8 * np.abs(data).max()))
    secs = time.perf_counter() - t0
    ok = all(v <= 1.0 for v in worst.values()) and secs < 30
    usage = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    acceptance_report(9, ok, f"worst fraction of bound used: {usage}, {secs:.1f}s")
    assert ok
