"""Hexagonal lattice triangulation of a chart rectangle and its measures.

Vertices live on the lattice origin + eps*(i*a + j*b); each lattice cell is
split into an upward triangle (p, p+eps*a, p+eps*a+eps*b) and a downward one.
Orientation tags follow the sign of the chart wedge of the traversal
(q-p) wedge (r-q).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    Chart,
    GeometryError,
    LatticeFrame,
    MetricField,
    polyline_distances,
    segment_length,
    wedge2,
)

__all__ = [
    "MeshError",
    "Triangulation",
    "TriangleMeasures",
    "build_lattice",
    "compute_measures",
    "triangle_area",
    "closest_edge_fractions",
    "edge_weight",
    "rescaled_distances",
    "coverage_defect",
    "chart_volume",
]

AXES = ("a", "b", "c")


class MeshError(ValueError):
    pass


# Dunavant degree-6 rule on the reference triangle, 12 points, weights sum to 1.
_DUNAVANT6 = []
for w, (l1, l2, l3) in [
    (0.116786275726379, (0.501426509658179, 0.249286745170910, 0.249286745170910)),
    (0.050844906370207, (0.873821971016996, 0.063089014491502, 0.063089014491502)),
]:
    for perm in {(l1, l2, l3), (l2, l3, l1), (l3, l1, l2)}:
        _DUNAVANT6.append((w,) + perm)
for w, (l1, l2, l3) in [
    (0.082851075618374, (0.053145049844817, 0.310352451033784, 0.636502499121399)),
]:
    import itertools as _it

    for perm in set(_it.permutations((l1, l2, l3))):
        _DUNAVANT6.append((w,) + perm)
_DUNAVANT6.sort()
_TRI_W = np.array([r[0] for r in _DUNAVANT6])
_TRI_L = np.array([r[1:] for r in _DUNAVANT6])
del _DUNAVANT6


@dataclass
class Triangulation:
    """Vertex/edge/triangle tables of one hexagonal lattice at scale epsilon.

    edges: (E, 2) int array of vertex indices plus a parallel axis tag array.
    triangles: (T, 3) int array; ``tri_orient`` is +1/-1; ``tri_axes`` gives,
    per triangle, the axis tag of sides (v0,v1), (v1,v2), (v2,v0).
    """

    epsilon: float
    frame: LatticeFrame
    vertices: np.ndarray
    edges: np.ndarray
    edge_axis: np.ndarray
    triangles: np.ndarray
    tri_orient: np.ndarray
    tri_axes: np.ndarray
    boundary_vertex: np.ndarray
    tri_edges: np.ndarray = field(default=None)  # (T, 3) edge index per side

    def __post_init__(self):
        if self.tri_edges is None:
            lookup = {}
            for ei, (i, j) in enumerate(self.edges):
                lookup[(min(i, j), max(i, j))] = ei
            te = np.empty((len(self.triangles), 3), dtype=np.int64)
            for ti, (i, j, k) in enumerate(self.triangles):
                te[ti] = [
                    lookup[(min(i, j), max(i, j))],
                    lookup[(min(j, k), max(j, k))],
                    lookup[(min(k, i), max(k, i))],
                ]
            self.tri_edges = te

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_edges(self):
        return len(self.edges)

    @property
    def n_triangles(self):
        return len(self.triangles)

    def vertex_neighbors(self):
        nbrs = [[] for _ in range(self.n_vertices)]
        for i, j in self.edges:
            nbrs[i].append(j)
            nbrs[j].append(i)
        return nbrs

    def triangle_coords(self):
        """(T, 3, 2) chart coordinates of triangle vertices."""
        return self.vertices[self.triangles]

    def centroids(self):
        return self.triangle_coords().mean(axis=1)

    # -- serialization -------------------------------------------------------

    def to_json_dict(self):
        return {
            "epsilon": self.epsilon,
            "frame": {"a": list(self.frame.a), "b": list(self.frame.b)},
            "vertices": self.vertices.tolist(),
            "edges": [
                [int(i), int(j), AXES[ax]]
                for (i, j), ax in zip(self.edges, self.edge_axis)
            ],
            "triangles": [
                [int(i), int(j), int(k), "+" if o > 0 else "-"]
                for (i, j, k), o in zip(self.triangles, self.tri_orient)
            ],
            "tri_axes": [[AXES[a] for a in row] for row in self.tri_axes],
            "boundary_vertex": self.boundary_vertex.astype(int).tolist(),
        }

    def to_json(self, **kw):
        return json.dumps(self.to_json_dict(), **kw)

    @classmethod
    def from_json_dict(cls, d):
        edges = np.array([[e[0], e[1]] for e in d["edges"]], dtype=np.int64)
        edge_axis = np.array([AXES.index(e[2]) for e in d["edges"]], dtype=np.int64)
        tris = np.array([[t[0], t[1], t[2]] for t in d["triangles"]], dtype=np.int64)
        orient = np.array(
            [1 if t[3] == "+" else -1 for t in d["triangles"]], dtype=np.int64
        )
        return cls(
            epsilon=float(d["epsilon"]),
            frame=LatticeFrame(tuple(d["frame"]["a"]), tuple(d["frame"]["b"])),
            vertices=np.array(d["vertices"], dtype=float),
            edges=edges,
            edge_axis=edge_axis,
            triangles=tris,
            tri_orient=orient,
            tri_axes=np.array(
                [[AXES.index(a) for a in row] for row in d["tri_axes"]], dtype=np.int64
            ),
            boundary_vertex=np.array(d["boundary_vertex"], dtype=bool),
        )

    @classmethod
    def from_json(cls, s):
        return cls.from_json_dict(json.loads(s))


def build_lattice(
    chart: Chart, frame: LatticeFrame, g: MetricField, epsilon: float
) -> Triangulation:
    """Maximal lattice triangulation fully contained in the chart rectangle.

    The origin is the lower-left corner plus (eps/2, eps/2); lattice points are
    origin + eps*(i*a + j*b) and triangles are kept only when their closed
    chart hull lies inside the rectangle.
    """
    if epsilon <= 0:
        raise MeshError("epsilon must be positive")
    a = frame.a_vec * epsilon
    b = frame.b_vec * epsilon
    origin = np.array([chart.x0 + epsilon / 2.0, chart.y0 + epsilon / 2.0])

    # index range: solve origin + i*a + j*b in rectangle with margin
    p_inv = np.linalg.inv(np.column_stack([a, b]))
    corners = np.array(
        [[chart.x0, chart.y0], [chart.x1, chart.y0], [chart.x0, chart.y1], [chart.x1, chart.y1]]
    )
    ij = (corners - origin) @ p_inv.T
    i_lo, j_lo = np.floor(ij.min(axis=0)).astype(int) - 1
    i_hi, j_hi = np.ceil(ij.max(axis=0)).astype(int) + 1

    ii, jj = np.meshgrid(
        np.arange(i_lo, i_hi + 1), np.arange(j_lo, j_hi + 1), indexing="ij"
    )
    pts = origin + ii[..., None] * a + jj[..., None] * b
    inside = chart.contains(pts)

    index = -np.ones(pts.shape[:2], dtype=np.int64)

    def at(i, j):
        return index[i - i_lo, j - j_lo]

    # Candidate triangles per cell (i, j):
    #   up:   (i,j), (i+1,j), (i+1,j+1)   -- sides a, b, c
    #   down: (i,j+1), (i+1,j+1), (i,j)   -- sides a, c, b
    up_ok = (
        inside[:-1, :-1] & inside[1:, :-1] & inside[1:, 1:]
    )
    dn_ok = inside[:-1, 1:] & inside[1:, 1:] & inside[:-1, :-1]

    used = np.zeros_like(inside)
    for di, dj, mask in [
        ((0, 1, 1), (0, 0, 1), up_ok),
        ((0, 1, 0), (1, 1, 0), dn_ok),
    ]:
        cells = np.argwhere(mask)
        for ci, cj in cells:
            for k in range(3):
                used[ci + di[k], cj + dj[k]] = True
    used &= inside

    order = np.argwhere(used)
    if len(order) == 0:
        raise MeshError("domain too small for the requested epsilon")
    # deterministic row-major scan in (i, j)
    for n, (ci, cj) in enumerate(order):
        index[ci, cj] = n
    vertices = pts[used]

    tri_list, orient_list, axes_list = [], [], []
    for ci, cj in np.argwhere(up_ok):
        i, j = ci + i_lo, cj + j_lo
        tri_list.append((at(i, j), at(i + 1, j), at(i + 1, j + 1)))
        axes_list.append((0, 1, 2))  # a, b, c
    for ci, cj in np.argwhere(dn_ok):
        i, j = ci + i_lo, cj + j_lo
        tri_list.append((at(i, j + 1), at(i + 1, j + 1), at(i, j)))
        axes_list.append((0, 2, 1))  # a, c, b
    triangles = np.array(tri_list, dtype=np.int64)
    tri_axes = np.array(axes_list, dtype=np.int64)
    if len(triangles) == 0:
        raise MeshError("domain too small for the requested epsilon")

    P = vertices[triangles]
    wedge = wedge2(P[:, 1] - P[:, 0], P[:, 2] - P[:, 1])
    orient = np.where(wedge > 0, 1, -1).astype(np.int64)

    edge_set = {}
    for (v0, v1, v2), (ax01, ax12, ax20) in zip(triangles, tri_axes):
        for (i, j), ax in [((v0, v1), ax01), ((v1, v2), ax12), ((v2, v0), ax20)]:
            key = (min(i, j), max(i, j))
            prev = edge_set.setdefault(key, ax)
            if prev != ax:
                raise MeshError("inconsistent axis tags on a shared edge")
    keys = sorted(edge_set)
    edges = np.array(keys, dtype=np.int64)
    edge_axis = np.array([edge_set[k] for k in keys], dtype=np.int64)

    # boundary vertices: not fully surrounded by 6 incident triangles
    tdeg = np.zeros(len(vertices), dtype=np.int64)
    np.add.at(tdeg, triangles.ravel(), 1)
    boundary = tdeg < 6

    return Triangulation(
        epsilon=float(epsilon),
        frame=frame,
        vertices=vertices,
        edges=edges,
        edge_axis=edge_axis,
        triangles=triangles,
        tri_orient=orient,
        tri_axes=tri_axes,
        boundary_vertex=boundary,
    )


@dataclass
class TriangleMeasures:
    """Per-triangle and per-edge metric measures of a triangulation."""

    mu: np.ndarray  # (T,) g-areas
    nu_centroid: np.ndarray  # (T,) |a wedge b|_g at centroids
    rho: np.ndarray  # (T, 3) closest-edge fractions ordered (a, b, c)
    D: np.ndarray  # (T, 3) eps-rescaled vertex distances ordered (a, b, c)
    mu_edge: np.ndarray  # (E,)
    edge_dist: np.ndarray  # (E,) geodesic d(p, q)
    edge_converged: np.ndarray  # (E,) bool

    def total_area(self):
        return float(self.mu.sum())


def triangle_area(g: MetricField, coords, n_quad: int = None) -> float:
    """g-area of the chart triangle(s); coords shaped (..., 3, 2)."""
    coords = np.asarray(coords, dtype=float)
    pts = np.einsum("ql,...lk->...qk", _TRI_L, coords)
    w = g.sqrt_det(pts)
    chart_area = 0.5 * np.abs(
        wedge2(coords[..., 1, :] - coords[..., 0, :], coords[..., 2, :] - coords[..., 0, :])
    )
    val = chart_area * (w @ _TRI_W)
    return float(val) if np.ndim(val) == 0 else val


def chart_volume(chart: Chart, g: MetricField, n: int = 96) -> float:
    """Vol_g of the whole rectangle by tensor-product Gauss-Legendre quadrature."""
    from numpy.polynomial.legendre import leggauss

    x, wx = leggauss(n)
    xs = chart.x0 + (x + 1) * (chart.x1 - chart.x0) / 2
    ys = chart.y0 + (x + 1) * (chart.y1 - chart.y0) / 2
    xx, yy = np.meshgrid(xs, ys, indexing="ij")
    w = g.sqrt_det(np.stack([xx, yy], axis=-1))
    scale = (chart.x1 - chart.x0) * (chart.y1 - chart.y0) / 4.0
    return float(scale * np.einsum("i,ij,j->", wx, w, wx))


def _stratified_bary(n_sample: int):
    """Deterministic stratified barycentric samples: centroids of a k^2 split."""
    k = max(1, int(np.ceil(np.sqrt(n_sample))))
    pts = []
    for i in range(k):
        for j in range(k - i):
            # up sub-triangle centroid
            pts.append(((i + 1 / 3) / k, (j + 1 / 3) / k))
            if i + j < k - 1:
                pts.append(((i + 2 / 3) / k, (j + 2 / 3) / k))
    uv = np.array(pts)
    l1 = 1.0 - uv[:, 0] - uv[:, 1]
    bary = np.column_stack([l1, uv[:, 0], uv[:, 1]])
    # symmetrize under cyclic permutation so symmetric triangles are unbiased
    return np.concatenate([bary, bary[:, [1, 2, 0]], bary[:, [2, 0, 1]]])


def closest_edge_fractions(
    g: MetricField, coords, tri_axes=None, n_sample: int = 2048
):
    """Closest-edge relative areas (rho^a, rho^b, rho^c) per triangle.

    coords: (T, 3, 2). Point-to-edge distance uses the metric frozen at each
    triangle's centroid; samples are weighted by sqrt(det G) at the sample.
    Returns (T, 3) fractions in axis order (a, b, c).
    """
    coords = np.asarray(coords, dtype=float)
    single = coords.ndim == 2
    if single:
        coords = coords[None]
    T = coords.shape[0]
    if tri_axes is None:
        tri_axes = np.tile(np.array([0, 1, 2]), (T, 1))
    bary = _stratified_bary(n_sample)  # (S, 3)
    S = len(bary)
    pts = np.einsum("sl,tlk->tsk", bary, coords)  # (T, S, 2)
    weights = g.sqrt_det(pts)  # (T, S)
    Gc = g.matrices(coords.mean(axis=1))  # (T, 2, 2)
    # distance in frozen metric == Euclidean distance after mapping by G^{1/2}
    from .geometry import sqrtm_spd2

    Rt = sqrtm_spd2(Gc)
    mpts = np.einsum("tij,tsj->tsi", Rt, pts)
    mcoords = np.einsum("tij,tlj->tli", Rt, coords)

    d_sides = np.empty((T, S, 3))
    for s_idx, (i0, i1) in enumerate([(0, 1), (1, 2), (2, 0)]):
        A = mcoords[:, i0][:, None, :]  # (T,1,2)
        Bv = (mcoords[:, i1] - mcoords[:, i0])[:, None, :]
        t = np.einsum("tsk,tsk->ts", mpts - A, Bv) / np.einsum("tsk,tsk->ts", Bv, Bv)
        t = np.clip(t, 0.0, 1.0)
        proj = A + t[..., None] * Bv
        d_sides[:, :, s_idx] = np.linalg.norm(mpts - proj, axis=-1)
    # split ties (samples on a bisector) evenly so symmetric triangles are unbiased
    dmin = d_sides.min(axis=2, keepdims=True)
    scale = d_sides.max(axis=2, keepdims=True)
    near = d_sides <= dmin + 1e-9 * scale  # (T, S, 3)
    share = near / near.sum(axis=2, keepdims=True)

    rho = np.zeros((T, 3))
    axis_of_side = tri_axes  # (T, 3): axis tag of side s
    for s_idx in range(3):
        wsum = (weights * share[:, :, s_idx]).sum(axis=1)
        np.add.at(rho, (np.arange(T), axis_of_side[:, s_idx]), wsum)
    rho /= weights.sum(axis=1)[:, None]
    return rho[0] if single else rho


def rescaled_distances(
    g: MetricField,
    tri: Triangulation,
    chart: Chart = None,
    mode: str = "polyline",
    m: int = 17,
    tol: float = 1e-10,
    max_iters: int = 500,
):
    """Geodesic edge distances and per-triangle (D^a, D^b, D^c) = d/epsilon."""
    P = tri.vertices[tri.edges[:, 0]]
    Q = tri.vertices[tri.edges[:, 1]]
    if mode == "fast" or g.is_constant:
        V = Q - P
        d = segment_length(g, P, V, n_quad=8)
        conv = np.ones(len(d), dtype=bool)
    else:
        d, conv = polyline_distances(
            g, P, Q, chart=chart, m=m, tol=tol, max_iters=max_iters
        )
    if np.any(d <= 0):
        raise MeshError("degenerate edge distance")
    D = np.empty((tri.n_triangles, 3))
    side_axis = tri.tri_axes
    de = d[tri.tri_edges] / tri.epsilon  # (T, 3) per side
    rows = np.repeat(np.arange(tri.n_triangles), 3)
    D[rows, side_axis.ravel()] = de.ravel()
    return d, D, conv


def compute_measures(
    tri: Triangulation,
    g: MetricField,
    chart: Chart = None,
    n_sample: int = 2048,
    distance_mode: str = "polyline",
    distance_m: int = 17,
) -> TriangleMeasures:
    coords = tri.triangle_coords()
    mu = triangle_area(g, coords)
    nu = g.nu(tri.centroids(), tri.frame)
    rho = closest_edge_fractions(g, coords, tri.tri_axes, n_sample=n_sample)
    edge_dist, D, conv = rescaled_distances(
        g, tri, chart=chart, mode=distance_mode, m=distance_m
    )
    # mu_edge: sum over incident triangles of rho^axis(edge) * mu(triangle)
    mu_edge = np.zeros(tri.n_edges)
    contrib = rho[np.arange(tri.n_triangles)[:, None], tri.tri_axes] * mu[:, None]
    np.add.at(mu_edge, tri.tri_edges.ravel(), contrib.ravel())
    return TriangleMeasures(
        mu=np.atleast_1d(mu),
        nu_centroid=np.atleast_1d(nu),
        rho=rho,
        D=D,
        mu_edge=mu_edge,
        edge_dist=edge_dist,
        edge_converged=conv,
    )


def edge_weight(measures: TriangleMeasures, edge_index: int) -> float:
    return float(measures.mu_edge[edge_index])


def coverage_defect(chart: Chart, tri: Triangulation, g: MetricField) -> float:
    """Vol_g(M) minus the summed g-areas of the kept triangles."""
    return chart_volume(chart, g) - float(
        np.sum(triangle_area(g, tri.triangle_coords()))
    )
