"""Planar chart realizing a flat symmetric connection, metric fields and fiber algebra.

The flat symmetric connection is the trivial connection of the chart
(Christoffel symbols vanish identically), so the exponential map is
point + vector and parallel transport is the identity.  The metric is an
independent SPD coefficient field over the chart.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss

from .expressions import ScalarFieldExpr, as_field, const_field

__all__ = [
    "Chart",
    "LatticeFrame",
    "MetricField",
    "FiberMap",
    "GeometryError",
    "exp_connection",
    "parallel_transport",
    "conformal_transport",
    "segment_length",
    "riemannian_distance",
    "polyline_distances",
    "gauss_curvature",
    "sqrtm_spd2",
    "inv_sqrtm_spd2",
    "singular_values_2x2",
    "fiber_norm",
    "singular_values_g",
    "dist_to_O",
    "dist_to_SO",
    "wedge2",
]


class GeometryError(ValueError):
    pass


def wedge2(u, v):
    """Scalar wedge product u_x v_y - u_y v_x of planar vectors (broadcasts)."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    return u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]


@dataclass(frozen=True)
class Chart:
    """Axis-aligned rectangular chart domain [x0,x1] x [y0,y1]."""

    x0: float
    x1: float
    y0: float
    y1: float

    def __post_init__(self):
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise GeometryError("chart rectangle must satisfy x0 < x1 and y0 < y1")

    def contains(self, points, tol: float = 1e-12):
        p = np.asarray(points, dtype=float)
        return (
            (p[..., 0] >= self.x0 - tol)
            & (p[..., 0] <= self.x1 + tol)
            & (p[..., 1] >= self.y0 - tol)
            & (p[..., 1] <= self.y1 + tol)
        )

    def clip(self, points):
        p = np.array(points, dtype=float)
        p[..., 0] = np.clip(p[..., 0], self.x0, self.x1)
        p[..., 1] = np.clip(p[..., 1], self.y0, self.y1)
        return p

    @property
    def area(self):
        return (self.x1 - self.x0) * (self.y1 - self.y0)


@dataclass(frozen=True)
class LatticeFrame:
    """Constant crystallographic axes a, b in chart coordinates; c = -a-b."""

    a: tuple
    b: tuple

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        b = np.asarray(self.b, dtype=float)
        if abs(wedge2(a, b)) <= 1e-14:
            raise GeometryError("frame vectors a, b must be linearly independent")
        object.__setattr__(self, "a", tuple(a))
        object.__setattr__(self, "b", tuple(b))

    @property
    def a_vec(self):
        return np.asarray(self.a, dtype=float)

    @property
    def b_vec(self):
        return np.asarray(self.b, dtype=float)

    @property
    def c_vec(self):
        return -(self.a_vec + self.b_vec)

    @property
    def axes(self):
        """(3,2) array of the axes a, b, c."""
        return np.stack([self.a_vec, self.b_vec, self.c_vec])

    @property
    def chart_wedge(self):
        """a wedge b in chart coordinates (signed)."""
        return float(wedge2(self.a_vec, self.b_vec))

    @classmethod
    def hexagonal(cls, scale: float = 1.0):
        return cls(a=(scale, 0.0), b=(-scale / 2.0, scale * np.sqrt(3.0) / 2.0))


def _sym_mat(g11, g12, g22):
    g11, g12, g22 = np.broadcast_arrays(
        np.asarray(g11, dtype=float), np.asarray(g12, dtype=float), np.asarray(g22, dtype=float)
    )
    return np.stack(
        [np.stack([g11, g12], axis=-1), np.stack([g12, g22], axis=-1)], axis=-2
    )


@dataclass(frozen=True)
class MetricField:
    """2x2 SPD coefficient field over the chart, stored in the chart basis.

    ``conformal_phi`` is set when the field was built as phi^2 * G0 with a
    constant G0 (conformal with respect to the trivial connection).
    """

    g11: ScalarFieldExpr
    g12: ScalarFieldExpr
    g22: ScalarFieldExpr
    conformal_phi: ScalarFieldExpr | None = None
    conformal_g0: tuple | None = None

    # -- constructors -------------------------------------------------------

    @classmethod
    def euclidean(cls):
        return cls.constant(np.eye(2))

    @classmethod
    def constant(cls, mat):
        m = np.asarray(mat, dtype=float)
        return cls(
            g11=const_field(m[0, 0]),
            g12=const_field(m[0, 1]),
            g22=const_field(m[1, 1]),
            conformal_phi=const_field(1.0),
            conformal_g0=tuple(map(tuple, m)),
        )

    @classmethod
    def conformal(cls, phi, g0=None):
        """phi^2 * g0 with g0 a constant SPD matrix (default identity)."""
        phi = as_field(phi)
        g0 = np.eye(2) if g0 is None else np.asarray(g0, dtype=float)
        phi2 = phi * phi
        return cls(
            g11=phi2 * g0[0, 0],
            g12=phi2 * g0[0, 1],
            g22=phi2 * g0[1, 1],
            conformal_phi=phi,
            conformal_g0=tuple(map(tuple, g0)),
        )

    @classmethod
    def from_frame_coeffs(cls, frame: LatticeFrame, g_aa, g_ab, g_bb):
        """Build the chart-basis field from coefficients in the frame {a, b}.

        If P = [a b] (columns), the chart matrix is P^{-T} G_frame P^{-1};
        entries are fixed linear combinations of the three coefficient fields.
        """
        g_aa, g_ab, g_bb = as_field(g_aa), as_field(g_ab), as_field(g_bb)
        p = np.column_stack([frame.a_vec, frame.b_vec])
        q = np.linalg.inv(p)  # rows express chart coords in frame coords

        def entry(i, j):
            # (P^{-T} Gf P^{-1})_{ij} = sum_{k,l} q_{ki} Gf_{kl} q_{lj}
            return (
                g_aa * (q[0, i] * q[0, j])
                + g_ab * (q[0, i] * q[1, j] + q[1, i] * q[0, j])
                + g_bb * (q[1, i] * q[1, j])
            )

        return cls(g11=entry(0, 0), g12=entry(0, 1), g22=entry(1, 1))

    # -- evaluation ---------------------------------------------------------

    @property
    def is_constant(self):
        return self.g11.is_constant and self.g12.is_constant and self.g22.is_constant

    def matrices(self, points):
        p = np.asarray(points, dtype=float)
        x, y = p[..., 0], p[..., 1]
        return _sym_mat(
            np.broadcast_to(self.g11(x, y), x.shape),
            np.broadcast_to(self.g12(x, y), x.shape),
            np.broadcast_to(self.g22(x, y), x.shape),
        )

    def matrix(self, point):
        return self.matrices(np.asarray(point, dtype=float))

    def derivative_matrices(self, points):
        """dG/dx and dG/dy stacked on the last axis: shape (..., 2, 2, 2)."""
        p = np.asarray(points, dtype=float)
        x, y = p[..., 0], p[..., 1]
        shape = x.shape
        dx = _sym_mat(
            np.broadcast_to(self.g11.dx(x, y), shape),
            np.broadcast_to(self.g12.dx(x, y), shape),
            np.broadcast_to(self.g22.dx(x, y), shape),
        )
        dy = _sym_mat(
            np.broadcast_to(self.g11.dy(x, y), shape),
            np.broadcast_to(self.g12.dy(x, y), shape),
            np.broadcast_to(self.g22.dy(x, y), shape),
        )
        return np.stack([dx, dy], axis=-1)

    def sqrt_det(self, points):
        g = self.matrices(points)
        det = g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] ** 2
        if np.any(det <= 0):
            raise GeometryError("metric is degenerate at a sampled point")
        return np.sqrt(det)

    def norm(self, points, vectors):
        """|v|_g pointwise; broadcasts over leading axes."""
        g = self.matrices(points)
        v = np.asarray(vectors, dtype=float)
        q = np.einsum("...i,...ij,...j->...", v, g, v)
        return np.sqrt(q)

    def check_spd(self, chart: Chart, n: int = 64, eig_tol: float = 1e-12):
        xs = np.linspace(chart.x0, chart.x1, n)
        ys = np.linspace(chart.y0, chart.y1, n)
        xx, yy = np.meshgrid(xs, ys)
        g = self.matrices(np.stack([xx, yy], axis=-1))
        tr = g[..., 0, 0] + g[..., 1, 1]
        det = g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] ** 2
        disc = np.sqrt(np.maximum((tr / 2) ** 2 - det, 0.0))
        lam_min = tr / 2 - disc
        if np.any(lam_min <= eig_tol):
            raise GeometryError("metric is not SPD on the validation grid")
        return float(lam_min.min())

    def nu(self, points, frame: LatticeFrame):
        """|a wedge b|_g = sqrt(det G) * |a wedge b|_chart at the given points."""
        return self.sqrt_det(points) * abs(frame.chart_wedge)


@dataclass(frozen=True)
class FiberMap:
    """A linear map T_pM -> R^2 in chart coordinates, anchored at p."""

    point: tuple
    matrix: tuple

    def __post_init__(self):
        p = np.asarray(self.point, dtype=float).reshape(2)
        a = np.asarray(self.matrix, dtype=float).reshape(2, 2)
        object.__setattr__(self, "point", tuple(p))
        object.__setattr__(self, "matrix", tuple(map(tuple, a)))

    @property
    def p(self):
        return np.asarray(self.point, dtype=float)

    @property
    def A(self):
        return np.asarray(self.matrix, dtype=float)


# ---------------------------------------------------------------------------
# Connection operations (trivial in the chart)
# ---------------------------------------------------------------------------


def exp_connection(chart: Chart, p, v):
    """Exponential map of the trivial connection: p + v, with an in-domain flag."""
    q = np.asarray(p, dtype=float) + np.asarray(v, dtype=float)
    return q, bool(np.all(chart.contains(q)))


def parallel_transport(p, q, v):
    """Path-independent transport of the trivial connection: the identity."""
    return np.array(v, dtype=float)


def conformal_transport(p, q, v, phi: ScalarFieldExpr):
    """Transport whose parallel frame is (a/phi, b/phi): v * phi(p)/phi(q)."""
    phi = as_field(phi)
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    fp = float(phi(p[0], p[1]))
    fq = float(phi(q[0], q[1]))
    if fp <= 0 or fq <= 0:
        raise GeometryError("conformal factor must be positive at both endpoints")
    return np.asarray(v, dtype=float) * (fp / fq)


# ---------------------------------------------------------------------------
# Lengths and distances
# ---------------------------------------------------------------------------


def _gl_nodes_01(n):
    x, w = leggauss(n)
    return (x + 1.0) / 2.0, w / 2.0


def segment_length(g: MetricField, p, v, n_quad: int = 16, chart: Chart | None = None):
    """Gauss-Legendre quadrature of int_0^1 sqrt(v^T G(p+tv) v) dt."""
    if n_quad < 2:
        raise GeometryError("n_quad must be >= 2")
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    if chart is not None and not (
        np.all(chart.contains(p)) and np.all(chart.contains(p + v))
    ):
        raise GeometryError("segment exits the chart domain")
    t, w = _gl_nodes_01(n_quad)
    pts = p[..., None, :] + t[:, None] * v[..., None, :]
    gm = g.matrices(pts)
    q = np.einsum("...i,...tij,...j->...t", v, gm, v)
    return np.sqrt(q) @ w


def _polyline_lengths_and_grads(g: MetricField, X, t, w, want_grad=True):
    """Lengths and gradients for a batch of polylines X: (B, m, 2)."""
    P = X[:, :-1, :]  # (B, S, 2) segment starts
    V = X[:, 1:, :] - X[:, :-1, :]  # (B, S, 2)
    Y = P[:, :, None, :] + t[None, None, :, None] * V[:, :, None, :]  # (B,S,Q,2)
    G = g.matrices(Y)
    S = np.einsum("bsi,bsqij,bsj->bsq", V, G, V)
    S = np.maximum(S, 1e-300)
    f = np.sqrt(S)
    seg_len = f @ w  # (B, S)
    lengths = seg_len.sum(axis=1)
    if not want_grad:
        return lengths, None
    dG = g.derivative_matrices(Y)  # (B,S,Q,2,2,2)
    Gv = np.einsum("bsqij,bsj->bsqi", G, V)
    h = np.einsum("bsi,bsqijk,bsj->bsqk", V, dG, V)
    inv2f = 1.0 / (2.0 * f)
    # d(seg)/d(start) and d(seg)/d(end), quadrature-summed
    g_start = np.einsum(
        "bsq,bsqi,q->bsi", inv2f, -2.0 * Gv + (1.0 - t)[None, None, :, None] * h, w
    )
    g_end = np.einsum(
        "bsq,bsqi,q->bsi", inv2f, 2.0 * Gv + t[None, None, :, None] * h, w
    )
    grad = np.zeros_like(X)
    np.add.at(grad, (slice(None), slice(0, X.shape[1] - 1)), g_start)
    np.add.at(grad, (slice(None), slice(1, X.shape[1])), g_end)
    return lengths, grad


def polyline_distances(
    g: MetricField,
    P,
    Q,
    chart: Chart | None = None,
    m: int = 33,
    tol: float = 1e-10,
    max_iters: int = 500,
    n_quad: int = 4,
):
    """Batched geodesic-distance approximation by polyline relaxation.

    Returns (distances, converged) for endpoint arrays P, Q of shape (B, 2).
    Interior nodes are relaxed by projected gradient descent (projection onto
    the chart rectangle); the returned length never exceeds the straight-chord
    length and is monotone nonincreasing along the iteration.
    """
    P = np.atleast_2d(np.asarray(P, dtype=float))
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    B = P.shape[0]
    t, w = _gl_nodes_01(n_quad)
    s = np.linspace(0.0, 1.0, m)
    X = P[:, None, :] + s[None, :, None] * (Q - P)[:, None, :]
    if g.is_constant or m < 3:
        # straight chords are exact geodesics of a constant metric
        L, _ = _polyline_lengths_and_grads(g, X, *_gl_nodes_01(max(n_quad, 8)), want_grad=False)
        return L, np.ones(B, dtype=bool)

    L, Gr = _polyline_lengths_and_grads(g, X, t, w)
    # step scale: node spacing over gradient scale
    gnorm = np.sqrt((Gr[:, 1:-1] ** 2).sum(axis=(1, 2)))
    step = np.where(gnorm > 0, 0.05 * (L / (m - 1)) / np.maximum(gnorm, 1e-30), 1.0)
    converged = np.zeros(B, dtype=bool)
    for _ in range(max_iters):
        active = ~converged
        if not active.any():
            break
        Xc = X.copy()
        Xc[:, 1:-1, :] -= (step * active)[:, None, None] * Gr[:, 1:-1, :]
        if chart is not None:
            Xc[:, 1:-1, :] = chart.clip(Xc[:, 1:-1, :])
        Lc, Grc = _polyline_lengths_and_grads(g, Xc, t, w)
        accept = active & (Lc <= L)
        rel_dec = np.where(L > 0, (L - Lc) / np.maximum(L, 1e-300), 0.0)
        newly_conv = accept & (rel_dec < tol)
        X[accept] = Xc[accept]
        Gr[accept] = Grc[accept]
        L_old = L.copy()
        L = np.where(accept, Lc, L)
        step = np.where(accept, step * 1.25, step * 0.5)
        converged |= newly_conv
        converged |= active & (step < 1e-18)
        del L_old
    return L, converged


def riemannian_distance(
    g: MetricField,
    p,
    q,
    chart: Chart | None = None,
    m: int = 33,
    tol: float = 1e-10,
    max_iters: int = 500,
    n_quad: int = 4,
    mode: str = "polyline",
    full_output: bool = False,
):
    """Approximate geodesic distance between p and q.

    mode="fast" returns the chord length (error O(d^3)); mode="polyline"
    relaxes an m-node polyline.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if mode == "fast":
        d = float(segment_length(g, p, q - p, n_quad=max(n_quad, 8), chart=chart))
        return (d, True) if full_output else d
    d, conv = polyline_distances(
        g, p[None, :], q[None, :], chart=chart, m=m, tol=tol, max_iters=max_iters, n_quad=n_quad
    )
    return (float(d[0]), bool(conv[0])) if full_output else float(d[0])


# ---------------------------------------------------------------------------
# Curvature
# ---------------------------------------------------------------------------


def gauss_curvature(g: MetricField, point):
    """Brioschi formula from the chart coefficients and their symbolic derivatives."""
    pt = np.asarray(point, dtype=float)
    x, y = pt[..., 0], pt[..., 1]

    E, F, G = g.g11, g.g12, g.g22
    Ev, Gu = E.dy(x, y), G.dx(x, y)
    Eu, Gv = E.dx(x, y), G.dy(x, y)
    Fu, Fv = F.dx(x, y), F.dy(x, y)
    Evv = E.dy.dy(x, y)
    Fuv = F.dx.dy(x, y)
    Guu = G.dx.dx(x, y)
    e, f, gg = E(x, y), F(x, y), G(x, y)

    det = e * gg - f**2
    if np.any(det <= 0):
        raise GeometryError("metric is degenerate at the evaluation point")

    m1 = _sym3(
        -0.5 * Evv + Fuv - 0.5 * Guu, 0.5 * Eu, Fu - 0.5 * Ev,
        Fv - 0.5 * Gu, e, f,
        0.5 * Gv, f, gg,
    )
    m2 = _sym3(
        0.0 * np.asarray(e), 0.5 * Ev, 0.5 * Gu,
        0.5 * Ev, e, f,
        0.5 * Gu, f, gg,
    )
    k = (_det3(m1) - _det3(m2)) / det**2
    return float(k) if np.ndim(k) == 0 else k


def _sym3(a11, a12, a13, a21, a22, a23, a31, a32, a33):
    rows = [
        np.stack(np.broadcast_arrays(np.asarray(a11, dtype=float), np.asarray(a12, dtype=float), np.asarray(a13, dtype=float)), axis=-1),
        np.stack(np.broadcast_arrays(np.asarray(a21, dtype=float), np.asarray(a22, dtype=float), np.asarray(a23, dtype=float)), axis=-1),
        np.stack(np.broadcast_arrays(np.asarray(a31, dtype=float), np.asarray(a32, dtype=float), np.asarray(a33, dtype=float)), axis=-1),
    ]
    return np.stack(rows, axis=-2)


def _det3(m):
    return (
        m[..., 0, 0] * (m[..., 1, 1] * m[..., 2, 2] - m[..., 1, 2] * m[..., 2, 1])
        - m[..., 0, 1] * (m[..., 1, 0] * m[..., 2, 2] - m[..., 1, 2] * m[..., 2, 0])
        + m[..., 0, 2] * (m[..., 1, 0] * m[..., 2, 1] - m[..., 1, 1] * m[..., 2, 0])
    )


# ---------------------------------------------------------------------------
# Fiber algebra: norms, singular values, distances to O / SO
# ---------------------------------------------------------------------------


def sqrtm_spd2(M, eig_tol: float = 1e-12):
    """Closed-form square root of a batch of 2x2 SPD matrices."""
    M = np.asarray(M, dtype=float)
    det = M[..., 0, 0] * M[..., 1, 1] - M[..., 0, 1] * M[..., 1, 0]
    tr = M[..., 0, 0] + M[..., 1, 1]
    if np.any(det <= eig_tol) or np.any(tr <= 0):
        raise GeometryError("matrix is not SPD")
    s = np.sqrt(det)
    t = np.sqrt(tr + 2.0 * s)
    out = (M + s[..., None, None] * np.eye(2)) / t[..., None, None]
    return out


def inv_sqrtm_spd2(M, eig_tol: float = 1e-12):
    R = sqrtm_spd2(M, eig_tol)
    det = R[..., 0, 0] * R[..., 1, 1] - R[..., 0, 1] * R[..., 1, 0]
    inv = np.empty_like(R)
    inv[..., 0, 0] = R[..., 1, 1]
    inv[..., 1, 1] = R[..., 0, 0]
    inv[..., 0, 1] = -R[..., 0, 1]
    inv[..., 1, 0] = -R[..., 1, 0]
    return inv / det[..., None, None]


def singular_values_2x2(B):
    """Closed-form singular values (s1 >= s2 >= 0) and sign(det) of 2x2 batches."""
    B = np.asarray(B, dtype=float)
    e = (B[..., 0, 0] + B[..., 1, 1]) / 2.0
    f = (B[..., 0, 0] - B[..., 1, 1]) / 2.0
    gq = (B[..., 1, 0] + B[..., 0, 1]) / 2.0
    h = (B[..., 1, 0] - B[..., 0, 1]) / 2.0
    q = np.sqrt(e**2 + h**2)
    r = np.sqrt(f**2 + gq**2)
    s1 = q + r
    s2 = np.abs(q - r)
    det = B[..., 0, 0] * B[..., 1, 1] - B[..., 0, 1] * B[..., 1, 0]
    return s1, s2, np.sign(det)


def _fiber_B(A: FiberMap | np.ndarray, g: MetricField, point=None):
    if isinstance(A, FiberMap):
        mat, pt = A.A, A.p
    else:
        mat = np.asarray(A, dtype=float)
        pt = np.asarray(point, dtype=float)
    G = g.matrices(pt)
    return mat @ inv_sqrtm_spd2(G)


def fiber_norm(A, g: MetricField, point=None):
    """Frobenius norm of A relative to the g / Euclidean fiber metric."""
    B = _fiber_B(A, g, point)
    return float(np.sqrt((B**2).sum()))


def singular_values_g(A, g: MetricField, point=None):
    """Singular values of A w.r.t. (g, e), largest first, plus the det sign."""
    B = _fiber_B(A, g, point)
    s1, s2, sgn = singular_values_2x2(B)
    return float(s1), float(s2), float(sgn)


def dist_to_O(A, g: MetricField, point=None):
    """Distance from A to the isometries O(g,e): sqrt(sum (sigma_i - 1)^2)."""
    s1, s2, _ = singular_values_g(A, g, point)
    return float(np.sqrt((s1 - 1.0) ** 2 + (s2 - 1.0) ** 2))


def dist_to_SO(A, g: MetricField, point=None):
    """Distance to orientation-preserving isometries SO(g,e)."""
    s1, s2, sgn = singular_values_g(A, g, point)
    if sgn >= 0:
        return float(np.sqrt((s1 - 1.0) ** 2 + (s2 - 1.0) ** 2))
    return float(np.sqrt((s1 - 1.0) ** 2 + (s2 + 1.0) ** 2))
