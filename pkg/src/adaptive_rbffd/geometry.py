"""
Node sets, nearest-neighbor search and the distance measures that drive
stencil adaptivity.

All generators work on axis-aligned rectangles in two dimensions. Boundary
nodes carry a segment id::

    0 : y = ymin        1 : x = xmax
    2 : y = ymax        3 : x = xmin

Corner nodes are assigned to the vertical edges (segments 1 and 3).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree
from scipy.stats import qmc

INTERIOR = -1
BOUNDARY_TOL = 1e-12


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class Rectangle:
    xmin: float
    xmax: float
    ymin: float
    ymax: float

    def __post_init__(self):
        if not (self.xmax > self.xmin and self.ymax > self.ymin):
            raise GeometryError("degenerate rectangle")

    @property
    def volume(self) -> float:
        return (self.xmax - self.xmin) * (self.ymax - self.ymin)

    @property
    def bounds(self) -> np.ndarray:
        return np.array([[self.xmin, self.xmax], [self.ymin, self.ymax]])

    def segment_of(self, point) -> int:
        """Boundary segment id of `point`, or ``INTERIOR``."""
        x, y = point
        if abs(x - self.xmin) <= BOUNDARY_TOL:
            return 3
        if abs(x - self.xmax) <= BOUNDARY_TOL:
            return 1
        if abs(y - self.ymin) <= BOUNDARY_TOL:
            return 0
        if abs(y - self.ymax) <= BOUNDARY_TOL:
            return 2
        return INTERIOR

    def outward_normal(self, segment: int) -> np.ndarray:
        return {
            0: np.array([0.0, -1.0]),
            1: np.array([1.0, 0.0]),
            2: np.array([0.0, 1.0]),
            3: np.array([-1.0, 0.0]),
        }[segment]


UNIT_SQUARE = Rectangle(0.0, 1.0, 0.0, 1.0)
BI_UNIT_SQUARE = Rectangle(-1.0, 1.0, -1.0, 1.0)


@dataclass
class NodeSet:
    """
    Ordered scattered nodes in a rectangle.

    Parameters
    ----------
    points : (N, 2) float array
    segments : (N,) int array
        Boundary segment id per node, ``-1`` for interior nodes.
    domain : Rectangle
    """
    points: np.ndarray
    segments: np.ndarray
    domain: Rectangle
    _tree: SpatialIndex | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.points = np.ascontiguousarray(self.points, dtype=float)
        self.segments = np.asarray(self.segments, dtype=int)
        if self.points.ndim != 2 or self.points.shape[1] != 2:
            raise GeometryError("points must have shape (N, 2)")
        if self.segments.shape != (len(self.points),):
            raise GeometryError("segments must have one entry per point")

    def __len__(self) -> int:
        return len(self.points)

    @property
    def interior(self) -> np.ndarray:
        return np.flatnonzero(self.segments == INTERIOR)

    @property
    def boundary(self) -> np.ndarray:
        return np.flatnonzero(self.segments != INTERIOR)

    @property
    def index(self) -> "SpatialIndex":
        if self._tree is None:
            self._tree = SpatialIndex(self.points)
        return self._tree

    def validate(self) -> None:
        """Raise `GeometryError` if any NodeSet invariant is violated."""
        d = self.domain
        p = self.points
        inside = ((p[:, 0] >= d.xmin - BOUNDARY_TOL) & (p[:, 0] <= d.xmax + BOUNDARY_TOL)
                  & (p[:, 1] >= d.ymin - BOUNDARY_TOL) & (p[:, 1] <= d.ymax + BOUNDARY_TOL))
        if not inside.all():
            raise GeometryError("node outside the domain")
        for i in self.boundary:
            if d.segment_of(p[i]) == INTERIOR:
                raise GeometryError(f"boundary node {i} is not on the boundary")
        if len(p) > 1 and separation_distance(self) <= 0.0:
            raise GeometryError("coincident nodes")


class SpatialIndex:
    """
    Exact k-nearest-neighbor queries over a fixed point cloud.

    Ties in distance are broken by ascending node index so that stencils are
    reproducible regardless of the tree layout.
    """

    def __init__(self, points):
        self.points = np.ascontiguousarray(points, dtype=float)
        self._tree = cKDTree(self.points)

    def __len__(self) -> int:
        return len(self.points)

    def knn(self, query, n: int) -> tuple[np.ndarray, np.ndarray]:
        """
        Return ``(indices, distances)`` of the `n` nearest nodes to `query`,
        sorted by distance then index.
        """
        N = len(self.points)
        if n > N:
            raise GeometryError("stencil larger than node set")
        if n < 1:
            raise GeometryError("n must be positive")
        query = np.asarray(query, dtype=float)
        _, idx = self._tree.query(query, k=n)
        idx = np.atleast_1d(idx)
        # the tree may pick an arbitrary subset among nodes tied at the
        # cutoff distance, so gather every node up to the cutoff and re-sort
        cutoff = np.linalg.norm(self.points[idx[-1]] - query)
        cand = np.asarray(self._tree.query_ball_point(query, cutoff * (1 + 1e-12) + 1e-300),
                          dtype=int)
        dist = np.linalg.norm(self.points[cand] - query, axis=1)
        order = np.lexsort((cand, dist))[:n]
        return cand[order], dist[order]

    def nearest_distance(self, queries) -> np.ndarray:
        d, _ = self._tree.query(np.asarray(queries, dtype=float), k=1)
        return d


def knn(index: SpatialIndex, query, n: int) -> np.ndarray:
    """Indices of the `n` nearest nodes to `query` (ties by node index)."""
    return index.knn(query, n)[0]


def _eval_grid(domain: Rectangle, resolution: int) -> np.ndarray:
    gx = np.linspace(domain.xmin, domain.xmax, resolution)
    gy = np.linspace(domain.ymin, domain.ymax, resolution)
    X, Y = np.meshgrid(gx, gy, indexing="ij")
    return np.column_stack([X.ravel(), Y.ravel()])


def fill_distance(nodes: NodeSet, eval_resolution: int = 201) -> float:
    """
    Radius of the largest node-free disk in the domain, approximated by the
    max over an ``eval_resolution x eval_resolution`` grid of the distance
    to the nearest node.
    """
    if len(nodes) == 0:
        raise GeometryError("empty node set")
    if eval_resolution < 2:
        raise GeometryError("eval_resolution must be at least 2")
    grid = _eval_grid(nodes.domain, eval_resolution)
    return float(nodes.index.nearest_distance(grid).max())


def separation_distance(nodes: NodeSet | np.ndarray) -> float:
    """Half the minimum pairwise distance between nodes."""
    points = nodes.points if isinstance(nodes, NodeSet) else np.asarray(nodes, dtype=float)
    if len(points) < 2:
        raise GeometryError("separation distance needs at least 2 nodes")
    d, _ = cKDTree(points).query(points, k=2)
    return 0.5 * float(d[:, 1].min())


def mesh_ratio(nodes: NodeSet, eval_resolution: int = 201) -> float:
    return fill_distance(nodes, eval_resolution) / separation_distance(nodes)


def effective_fill_distance(volume: float, n: int, d: int = 2) -> float:
    """Spacing ``(volume / n) ** (1 / d)`` of an `n`-point uniform set."""
    if volume <= 0 or n < 1:
        raise GeometryError("volume and node count must be positive")
    if d not in (1, 2, 3):
        raise GeometryError("dimension must be 1, 2 or 3")
    return (volume / n) ** (1.0 / d)


def local_fill_distance(stencil_points) -> float:
    """
    Local fill-distance proxy for a stencil: the largest distance from a
    stencil member to its nearest other member.
    """
    pts = np.asarray(stencil_points, dtype=float)
    if len(pts) < 2:
        raise GeometryError("local fill distance needs at least 2 points")
    d, _ = cKDTree(pts).query(pts, k=2)
    h = float(d[:, 1].max())
    if h <= 0.0:
        raise GeometryError("coincident stencil points")
    return h


# --------------------------------------------------------------------------
# node generators
# --------------------------------------------------------------------------
def sine_squash(z):
    """Coordinate map ``z -> sin(pi z / 2)`` on [-1, 1]; clusters near +-1."""
    return np.sin(0.5 * np.pi * np.asarray(z, dtype=float))


def _tag(points: np.ndarray, domain: Rectangle) -> np.ndarray:
    return np.array([domain.segment_of(p) for p in points], dtype=int)


def _grid_side(n_target: int) -> int:
    return max(2, int(round(math.sqrt(n_target))))


def tensor_grid(n_target: int, domain: Rectangle = BI_UNIT_SQUARE) -> NodeSet:
    m = _grid_side(n_target)
    gx = np.linspace(domain.xmin, domain.xmax, m)
    gy = np.linspace(domain.ymin, domain.ymax, m)
    # pin the ends so boundary nodes sit exactly on the edges
    gx[[0, -1]] = domain.xmin, domain.xmax
    gy[[0, -1]] = domain.ymin, domain.ymax
    X, Y = np.meshgrid(gx, gy, indexing="ij")
    pts = np.column_stack([X.ravel(), Y.ravel()])
    return NodeSet(pts, _tag(pts, domain), domain)


def sine_squashed_grid(n_target: int, domain: Rectangle = BI_UNIT_SQUARE) -> NodeSet:
    grid = tensor_grid(n_target, domain)
    b = domain.bounds
    mid = b.mean(axis=1)
    half = 0.5 * (b[:, 1] - b[:, 0])
    z = (grid.points - mid) / half
    z = np.clip(z, -1.0, 1.0)
    pts = mid + half * sine_squash(z)
    # boundary coordinates are fixed points of the map; restore them exactly
    on_edge = np.isclose(np.abs(z), 1.0, rtol=0, atol=1e-14)
    pts[on_edge] = grid.points[on_edge]
    return NodeSet(pts, grid.segments.copy(), domain)


def _edge_nodes(domain: Rectangle, spacing) -> np.ndarray:
    """
    Nodes on the four edges, walked counter-clockwise from (xmin, ymin),
    with local step ``spacing(point)``. Each edge is split into a whole
    number of steps; corners appear once.
    """
    corners = np.array([[domain.xmin, domain.ymin], [domain.xmax, domain.ymin],
                        [domain.xmax, domain.ymax], [domain.xmin, domain.ymax]])
    out = []
    for a, b in zip(corners, np.roll(corners, -1, axis=0)):
        length = np.linalg.norm(b - a)
        ts = [0.0]
        while True:
            t = ts[-1] + float(spacing((a + (b - a) * ts[-1])[None, :])[0]) / length
            if t >= 1.0:
                break
            ts.append(t)
        ts = np.array(ts)
        # rescale so the final step lands on the far corner
        step_end = float(spacing(b[None, :])[0]) / length
        if len(ts) > 1 and (1.0 - ts[-1]) < 0.5 * step_end:
            ts = ts[:-1]
        ts = ts / (ts[-1] + step_end)
        out.append(a + np.outer(ts, b - a))
    pts = np.vstack(out)
    return _snap(pts, domain)


def _snap(pts: np.ndarray, domain: Rectangle) -> np.ndarray:
    pts = pts.copy()
    for col, lo, hi in ((0, domain.xmin, domain.xmax), (1, domain.ymin, domain.ymax)):
        pts[np.isclose(pts[:, col], lo, rtol=0, atol=1e-10), col] = lo
        pts[np.isclose(pts[:, col], hi, rtol=0, atol=1e-10), col] = hi
    return pts


def halton_nodes(n_target: int, domain: Rectangle = BI_UNIT_SQUARE, seed: int = 0) -> NodeSet:
    """Scrambled Halton interior with evenly spaced boundary nodes."""
    h = math.sqrt(domain.volume / n_target)
    bnd = _edge_nodes(domain, lambda p: np.full(len(p), h))
    n_int = n_target - len(bnd)
    if n_int < 1:
        raise GeometryError("n_target too small for the boundary")
    sampler = qmc.Halton(d=2, scramble=True, seed=seed)
    lo = domain.bounds[:, 0]
    hi = domain.bounds[:, 1]
    accepted = np.empty((0, 2))
    while len(accepted) < n_int:
        cand = qmc.scale(sampler.random(2 * n_int), lo, hi)
        gap = np.minimum(np.minimum(cand[:, 0] - lo[0], hi[0] - cand[:, 0]),
                         np.minimum(cand[:, 1] - lo[1], hi[1] - cand[:, 1]))
        accepted = np.vstack([accepted, cand[gap > 0.5 * h]])
    pts = np.vstack([bnd, accepted[:n_int]])
    return NodeSet(pts, _tag(pts, domain), domain)


def peak_spacing(x_peak, r_min: float, r_max: float, R: float):
    """Spacing ``r_min + (r_max - r_min) * min(1, |x - x_peak| / R)``."""
    x_peak = np.asarray(x_peak, dtype=float)

    def r(points):
        d = np.linalg.norm(np.atleast_2d(points) - x_peak, axis=1)
        return r_min + (r_max - r_min) * np.minimum(1.0, d / R)
    return r


def poisson_disk(spacing, domain: Rectangle, seed: int = 0,
                 oversample: float = 6.0) -> NodeSet:
    """
    Variable-radius Poisson-disk sampling by dart throwing.

    Darts are drawn uniformly and accepted in order when their distance to
    every accepted node is at least the mean of the two spacing values.
    Boundary nodes are placed first along the edges with the same spacing.
    """
    rng = np.random.default_rng(seed)
    bnd = _edge_nodes(domain, spacing)
    probe = rng.uniform(domain.bounds[:, 0], domain.bounds[:, 1], size=(4096, 2))
    r_lo = float(spacing(probe).min())
    r_lo = min(r_lo, float(spacing(bnd).min()))
    n_darts = int(oversample * domain.volume / r_lo ** 2)
    darts = rng.uniform(domain.bounds[:, 0], domain.bounds[:, 1], size=(n_darts, 2))
    r_darts = spacing(darts)
    r_bnd = spacing(bnd)
    r_hi = float(max(r_darts.max(), r_bnd.max()))

    tree = cKDTree(darts)
    alive = np.ones(n_darts, dtype=bool)

    def kill_near(p, rp):
        near = np.asarray(tree.query_ball_point(p, 0.5 * (rp + r_hi)), dtype=int)
        if len(near):
            d = np.linalg.norm(darts[near] - p, axis=1)
            alive[near[d < 0.5 * (rp + r_darts[near])]] = False

    for p, rp in zip(bnd, r_bnd):
        kill_near(p, rp)
    accepted = []
    for i in range(n_darts):
        if alive[i]:
            accepted.append(i)
            kill_near(darts[i], r_darts[i])
            alive[i] = False
    pts = np.vstack([bnd, darts[accepted]])
    return NodeSet(pts, _tag(pts, domain), domain)


def peak_adapted(n_target: int, domain: Rectangle = UNIT_SQUARE, *, x_peak, r_min: float,
                 r_max: float, R: float, seed: int = 0, fit_count: bool = True,
                 max_rounds: int = 12) -> NodeSet:
    """
    Peak-refined node set from variable-radius Poisson-disk sampling.

    With `fit_count` the spacing function is rescaled by a common factor
    until the node count is within 5% of `n_target`; the factor actually
    used is stored as ``nodes.spacing_scale``.
    """
    scale = 1.0
    best = None
    for _ in range(max_rounds if fit_count else 1):
        spacing = peak_spacing(x_peak, scale * r_min, scale * r_max, R)
        nodes = poisson_disk(spacing, domain, seed=seed)
        if best is None or abs(len(nodes) - n_target) < abs(len(best[0]) - n_target):
            best = (nodes, scale)
        if abs(len(nodes) - n_target) <= 0.05 * n_target:
            break
        scale *= math.sqrt(len(nodes) / n_target)
    nodes, scale = best
    nodes.spacing_scale = scale
    nodes.spacing = peak_spacing(x_peak, scale * r_min, scale * r_max, R)
    return nodes


GENERATORS = ("tensor-grid", "halton", "sine-squash", "peak-adapted")
_PEAK_PARAMS = ("x_peak", "r_min", "r_max", "R")


def generate_nodes(kind: str, n_target: int, domain: Rectangle = BI_UNIT_SQUARE,
                   params: dict | None = None, seed: int = 0) -> NodeSet:
    """
    Build a node set of roughly `n_target` nodes.

    Parameters
    ----------
    kind : {'tensor-grid', 'halton', 'sine-squash', 'peak-adapted'}
    n_target : int
        Requested size; exact (to the nearest square) for the grid kinds and
        within 15% for the sampling kinds.
    domain : Rectangle
    params : dict, optional
        ``x_peak, r_min, r_max, R`` for 'peak-adapted'.
    seed : int
    """
    params = dict(params or {})
    if n_target < 9:
        raise GeometryError("n_target must be at least 9")
    if kind == "tensor-grid":
        nodes = tensor_grid(n_target, domain)
    elif kind == "halton":
        nodes = halton_nodes(n_target, domain, seed=seed)
    elif kind == "sine-squash":
        nodes = sine_squashed_grid(n_target, domain)
    elif kind == "peak-adapted":
        missing = [k for k in _PEAK_PARAMS if k not in params]
        if missing:
            raise GeometryError(f"peak-adapted generator needs params {missing}")
        nodes = peak_adapted(n_target, domain, seed=seed,
                             **{k: params[k] for k in _PEAK_PARAMS})
    else:
        raise GeometryError(f"unknown generator kind {kind!r}")
    nodes.validate()
    return nodes


# --------------------------------------------------------------------------
# CSV
# --------------------------------------------------------------------------
NODE_HEADER = ("x", "y", "role", "segment")


def write_nodes_csv(nodes: NodeSet, path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(NODE_HEADER)
        for (x, y), s in zip(nodes.points, nodes.segments):
            w.writerow([repr(float(x)), repr(float(y)),
                        "interior" if s == INTERIOR else "boundary", int(s)])


def read_nodes_csv(path, domain: Rectangle | None = None) -> NodeSet:
    """
    Read a node CSV. Without `domain` the bounding box of the nodes is used.
    """
    with open(Path(path), newline="") as f:
        rows = list(csv.DictReader(f))
    if not rows or tuple(rows[0].keys()) != NODE_HEADER:
        raise GeometryError(f"node CSV must have header {','.join(NODE_HEADER)}")
    pts = np.array([[float(r["x"]), float(r["y"])] for r in rows])
    seg = np.array([int(r["segment"]) for r in rows])
    for r, s in zip(rows, seg):
        if (r["role"] == "interior") != (s == INTERIOR):
            raise GeometryError("role and segment disagree")
    if domain is None:
        domain = Rectangle(pts[:, 0].min(), pts[:, 0].max(), pts[:, 1].min(), pts[:, 1].max())
    nodes = NodeSet(pts, seg, domain)
    nodes.validate()
    return nodes
