"""Piecewise-affine extensions, continuum energy densities, and envelope bounds.

The density W takes a fiber map A at a base point p; its epsilon-scale
counterpart replaces the limiting weights by per-triangle mesh measures.  The
quasiconvex-envelope estimate minimizes the mean of W(A + d(phi)) over
piecewise-affine perturbations phi vanishing on the boundary of a disc mesh.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .energy import BondLaw, VolumeLaw
from .geometry import (
    Chart,
    FiberMap,
    GeometryError,
    LatticeFrame,
    MetricField,
    dist_to_SO,
    sqrtm_spd2,
    inv_sqrtm_spd2,
    wedge2,
)
from .mesh import TriangleMeasures, Triangulation

__all__ = [
    "ContinuumError",
    "DeformationField",
    "ContinuumDensity",
    "affine_extend",
    "det_fiber",
    "density_W",
    "density_W_eps",
    "integral_energy",
    "disc_mesh",
    "qw_upper_estimate",
    "rigidity_lower_check",
    "conformal_symmetry_check",
]


class ContinuumError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Piecewise-affine extension
# ---------------------------------------------------------------------------


@dataclass
class DeformationField:
    """Piecewise-affine extension of vertex values over a triangulation."""

    tri: Triangulation
    vertex_values: np.ndarray  # (V, 2)
    dF: np.ndarray  # (T, 2, 2), constant differential per triangle

    def evaluate(self, points):
        """Evaluate the extension; points outside the mesh use the affine map
        of the triangle whose centroid is nearest (the mesh-exterior rule)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        coords = self.tri.triangle_coords()
        v0 = coords[:, 0]
        # barycentric membership test, vectorized over (queries, triangles)
        M = np.stack([coords[:, 1] - v0, coords[:, 2] - v0], axis=-1)  # (T,2,2)
        Minv = np.linalg.inv(M)
        rel = pts[:, None, :] - v0[None, :, :]  # (Q,T,2)
        lam = np.einsum("tij,qtj->qti", Minv, rel)
        inside = (
            (lam[..., 0] >= -1e-12)
            & (lam[..., 1] >= -1e-12)
            & (lam.sum(axis=-1) <= 1 + 1e-12)
        )
        tri_idx = np.where(
            inside.any(axis=1),
            inside.argmax(axis=1),
            np.linalg.norm(
                pts[:, None, :] - self.tri.centroids()[None, :, :], axis=-1
            ).argmin(axis=1),
        )
        base = self.vertex_values[self.tri.triangles[tri_idx, 0]]
        rel0 = pts - v0[tri_idx]
        out = base + np.einsum("qij,qj->qi", self.dF[tri_idx], rel0)
        return out[0] if np.asarray(points).ndim == 1 else out


def affine_extend(tri: Triangulation, f) -> DeformationField:
    """Solve the constant per-triangle differential from the vertex values."""
    f = np.asarray(f, dtype=float)
    coords = tri.triangle_coords()
    X = np.stack(
        [coords[:, 1] - coords[:, 0], coords[:, 2] - coords[:, 0]], axis=-1
    )  # (T, 2, 2) columns are edge vectors
    det = X[:, 0, 0] * X[:, 1, 1] - X[:, 0, 1] * X[:, 1, 0]
    if np.any(np.abs(det) < 1e-15):
        raise ContinuumError("degenerate triangle in affine extension")
    Fv = f[tri.triangles]
    Y = np.stack([Fv[:, 1] - Fv[:, 0], Fv[:, 2] - Fv[:, 0]], axis=-1)
    dF = Y @ np.linalg.inv(X)
    return DeformationField(tri=tri, vertex_values=f, dF=dF)


# ---------------------------------------------------------------------------
# Densities
# ---------------------------------------------------------------------------


def det_fiber(A, g: MetricField, frame: LatticeFrame, point) -> float:
    """Intrinsic determinant: A(a) wedge A(b) divided by nu(p)."""
    A = A.A if isinstance(A, FiberMap) else np.asarray(A, dtype=float)
    nu = float(g.nu(np.asarray(point, dtype=float), frame))
    if nu <= 0:
        raise ContinuumError("nu is not positive")
    Aa = A @ frame.a_vec
    Ab = A @ frame.b_vec
    return float(wedge2(Aa, Ab)) / nu


@dataclass(frozen=True)
class ContinuumDensity:
    """Limit density W and its epsilon-scale counterpart over one metric."""

    g: MetricField
    frame: LatticeFrame
    bond_law: BondLaw
    volume_law: VolumeLaw

    def weights_at(self, point):
        """(rho^a, rho^b, rho^c), (D^a, D^b, D^c) = axis g-norms, and nu at p."""
        p = np.asarray(point, dtype=float)
        lens = np.array([float(self.g.norm(p, u)) for u in self.frame.axes])
        rho = lens / lens.sum()
        nu = float(self.g.nu(p, self.frame))
        return rho, lens, nu

    def w(self, A, point) -> float:
        A = A.A if isinstance(A, FiberMap) else np.asarray(A, dtype=float)
        rho, D, nu = self.weights_at(point)
        val = 0.0
        for u, r, d in zip(self.frame.axes, rho, D):
            val += r * float(self.bond_law.phi(np.linalg.norm(A @ u) / d))
        wedge = float(wedge2(A @ self.frame.a_vec, A @ self.frame.b_vec))
        val += float(self.volume_law.psi(wedge / nu))
        return val

    def w_eps(self, A, rho, D, nu_ratio_det_scale) -> float:
        """Epsilon-scale density from stored per-triangle measures.

        nu_ratio_det_scale is 1/nu_eps for the triangle: the volume argument is
        A(a) wedge A(b) / nu_eps.
        """
        A = A.A if isinstance(A, FiberMap) else np.asarray(A, dtype=float)
        val = 0.0
        for u, r, d in zip(self.frame.axes, rho, D):
            val += r * float(self.bond_law.phi(np.linalg.norm(A @ u) / d))
        wedge = float(wedge2(A @ self.frame.a_vec, A @ self.frame.b_vec))
        val += float(self.volume_law.psi(wedge * nu_ratio_det_scale))
        return val

    # vectorized forms over (..., 2, 2) stacks, frozen weights
    def w_many(self, A, rho, D, nu) -> np.ndarray:
        A = np.asarray(A, dtype=float)
        val = 0.0
        for u, r, d in zip(self.frame.axes, rho, D):
            Au = A @ u
            val = val + r * self.bond_law.phi(np.linalg.norm(Au, axis=-1) / d)
        Aa = A @ self.frame.a_vec
        Ab = A @ self.frame.b_vec
        wedge = Aa[..., 0] * Ab[..., 1] - Aa[..., 1] * Ab[..., 0]
        return val + self.volume_law.psi(wedge / nu)

    def w_and_dw_many(self, A, rho, D, nu):
        """Fused density values and fiber gradients over a stack of fibers."""
        A = np.asarray(A, dtype=float)
        val = 0.0
        grad = np.zeros_like(A)
        for u, r, d in zip(self.frame.axes, rho, D):
            Au = A @ u
            n = np.maximum(np.linalg.norm(Au, axis=-1), 1e-300)
            val = val + r * self.bond_law.phi(n / d)
            coef = r * self.bond_law.dphi(n / d) / (d * n)
            grad += coef[..., None, None] * (Au[..., :, None] * u[None, :])
        Aa = A @ self.frame.a_vec
        Ab = A @ self.frame.b_vec
        wedge = Aa[..., 0] * Ab[..., 1] - Aa[..., 1] * Ab[..., 0]
        ab = self.frame.chart_wedge
        cof = np.empty_like(A)
        cof[..., 0, 0] = A[..., 1, 1]
        cof[..., 0, 1] = -A[..., 1, 0]
        cof[..., 1, 0] = -A[..., 0, 1]
        cof[..., 1, 1] = A[..., 0, 0]
        val = val + self.volume_law.psi(wedge / nu)
        grad += (self.volume_law.dpsi(wedge / nu) * ab / nu)[..., None, None] * cof
        return val, grad

    def dw_many(self, A, rho, D, nu) -> np.ndarray:
        """d w / d A for stacks of fibers with frozen weights; (..., 2, 2)."""
        A = np.asarray(A, dtype=float)
        grad = np.zeros_like(A)
        for u, r, d in zip(self.frame.axes, rho, D):
            Au = A @ u  # (..., 2)
            n = np.linalg.norm(Au, axis=-1)
            n = np.maximum(n, 1e-300)
            coef = r * self.bond_law.dphi(n / d) / (d * n)
            grad += coef[..., None, None] * (Au[..., :, None] * u[None, :])
        Aa = A @ self.frame.a_vec
        Ab = A @ self.frame.b_vec
        wedge = Aa[..., 0] * Ab[..., 1] - Aa[..., 1] * Ab[..., 0]
        ab = self.frame.chart_wedge
        # d(det A)/dA = cofactor matrix; wedge = det(A) * (a^b in chart)
        cof = np.empty_like(A)
        cof[..., 0, 0] = A[..., 1, 1]
        cof[..., 0, 1] = -A[..., 1, 0]
        cof[..., 1, 0] = -A[..., 0, 1]
        cof[..., 1, 1] = A[..., 0, 0]
        coefv = self.volume_law.dpsi(wedge / nu) * ab / nu
        grad += coefv[..., None, None] * cof
        return grad


def density_W(A, density: ContinuumDensity, point) -> float:
    return density.w(A, point)


def density_W_eps(
    A, density: ContinuumDensity, measures: TriangleMeasures, tri_index: int
) -> float:
    return density.w_eps(
        A,
        measures.rho[tri_index],
        measures.D[tri_index],
        1.0 / measures.nu_centroid[tri_index],
    )


def integral_energy(
    field_or_dF,
    density: ContinuumDensity,
    tri: Triangulation = None,
    measures: TriangleMeasures = None,
    mode: str = "eps",
) -> float:
    """Sum over triangles of density(dF) * mu.

    mode="eps" uses the stored per-triangle measures (exactly reproducing the
    discrete energy); mode="limit" evaluates W with limiting weights at each
    triangle centroid.
    """
    if isinstance(field_or_dF, DeformationField):
        tri = field_or_dF.tri
        dF = field_or_dF.dF
    else:
        dF = np.asarray(field_or_dF, dtype=float)
    if measures is None:
        raise ContinuumError("integral_energy needs triangle measures")
    total = 0.0
    if mode == "eps":
        for t in range(tri.n_triangles):
            total += measures.mu[t] * density.w_eps(
                dF[t], measures.rho[t], measures.D[t], 1.0 / measures.nu_centroid[t]
            )
    elif mode == "limit":
        cents = tri.centroids()
        for t in range(tri.n_triangles):
            total += measures.mu[t] * density.w(dF[t], cents[t])
    else:
        raise ContinuumError(f"unknown mode {mode!r}")
    return float(total)


# ---------------------------------------------------------------------------
# Disc meshes and the quasiconvex-envelope upper estimate
# ---------------------------------------------------------------------------


@lru_cache(maxsize=8)
def disc_mesh(level: int):
    """Uniform triangulation of the regular hexagon inscribed in the unit disc,
    with 6*(2^level)^2 triangles.

    The test-field infimum is independent of the (open, bounded) domain, so
    the hexagon stands in for the disc; successive levels are exactly nested
    (each triangle splits into four), which makes the estimate monotone under
    refinement.  Returns (vertices (V,2), triangles (T,3), boundary mask (V,)).
    """
    if level < 1:
        raise ContinuumError("mesh_level must be >= 1")
    n = 2**level
    a0 = np.array([1.0, 0.0])
    b0 = np.array([0.5, np.sqrt(3.0) / 2.0])
    verts = {}
    order = []
    for i in range(-n, n + 1):
        for j in range(-n, n + 1):
            if abs(i + j) > n:
                continue
            verts[(i, j)] = len(order)
            order.append((i, j))
    vertices = np.array([i * a0 + j * b0 for i, j in order]) / n
    tris = []
    for i in range(-n - 1, n + 1):
        for j in range(-n - 1, n + 1):
            for tri_ij in (
                [(i, j), (i + 1, j), (i, j + 1)],
                [(i + 1, j), (i + 1, j + 1), (i, j + 1)],
            ):
                if all(k in verts for k in tri_ij):
                    tris.append([verts[k] for k in tri_ij])
    triangles = np.array(tris, dtype=np.int64)
    boundary = np.array(
        [max(abs(i), abs(j), abs(i + j)) == n for i, j in order]
    )
    return vertices, triangles, boundary


def _disc_operator(level: int):
    """Shape-gradient tensors of the disc mesh: per triangle the three vectors
    s_i with d(phi) = sum_i phi_i s_i^T, plus normalized areas."""
    vertices, triangles, boundary = disc_mesh(level)
    coords = vertices[triangles]
    X = np.stack([coords[:, 1] - coords[:, 0], coords[:, 2] - coords[:, 0]], axis=-1)
    Xinv = np.linalg.inv(X)
    s2 = Xinv[:, 0, :]  # row for the (v1 - v0) coefficient
    s3 = Xinv[:, 1, :]
    s1 = -(s2 + s3)
    S = np.stack([s1, s2, s3], axis=1)  # (T, 3, 2)
    area = 0.5 * np.abs(X[:, 0, 0] * X[:, 1, 1] - X[:, 0, 1] * X[:, 1, 0])
    w = area / area.sum()
    return vertices, triangles, boundary, S, w


def _canonical_fiber(A):
    """Rotation-canonical representative: W(R B + d(R phi)) = W(B + d phi) for
    any R in SO(2), so the estimate may be computed on S = (A^T A)^(1/2),
    prefixed by a fixed reflection when det A < 0.  Makes the estimate exactly
    invariant under left rotations of A."""
    S2 = A.T @ A
    if np.linalg.det(S2) < 1e-28:
        return A  # nearly rank-deficient: skip canonicalization
    S = sqrtm_spd2(S2)
    if np.linalg.det(A) < 0:
        return np.array([[1.0, 0.0], [0.0, -1.0]]) @ S
    return S


def qw_upper_estimate(
    A,
    density: ContinuumDensity,
    point,
    mesh_level: int = 3,
    n_starts: int = 8,
    seed: int = 0,
    grad_tol: float = 1e-10,
    max_iters: int = 2000,
    warm_start=None,
    canonicalize: bool = True,
    full_output: bool = False,
):
    """Upper bound for the quasiconvex envelope of W at (A, point).

    Minimizes mean_T W(A + d(phi)_T) over piecewise-affine phi vanishing on
    the disc boundary; always at most W(A) since phi = 0 is a candidate.
    """
    A = A.A if isinstance(A, FiberMap) else np.asarray(A, dtype=float)
    if canonicalize:
        A = _canonical_fiber(A)
    rho, D, nu = density.weights_at(point)
    vertices, triangles, boundary, S, w = _disc_operator(mesh_level)
    free = ~boundary
    nfree = int(free.sum())
    free_idx = np.where(free)[0]

    def unpack(x):
        phi = np.zeros((len(vertices), 2))
        phi[free_idx] = x.reshape(nfree, 2)
        return phi

    tflat = triangles.ravel()
    nv = len(vertices)

    def fun_grad(x):
        phi = unpack(x)
        pv = phi[triangles]  # (T, 3, 2)
        dphi = np.einsum("tvi,tvj->tij", pv, S)  # (T, 2, 2)
        At = A[None, :, :] + dphi
        vals, dW = density.w_and_dw_many(At, rho, D, nu)
        f = float(vals @ w)
        gv = np.einsum("tij,tvj->tvi", dW * w[:, None, None], S).reshape(-1, 2)
        gphi = np.stack(
            [
                np.bincount(tflat, weights=gv[:, 0], minlength=nv),
                np.bincount(tflat, weights=gv[:, 1], minlength=nv),
            ],
            axis=1,
        )
        return f, gphi[free_idx].ravel()

    w_A = float(density.w_many(A[None], rho, D, nu)[0])
    rng = np.random.default_rng(seed)
    scale = max(np.linalg.norm(A), 1.0)

    starts = [np.zeros(nfree * 2)]
    if warm_start is not None:
        # prolong a coarser solution by evaluating its affine interpolant
        starts.append(_prolong_disc(warm_start, mesh_level)[free_idx].ravel())
    for _ in range(n_starts):
        starts.append(0.3 * scale * rng.standard_normal(nfree * 2))

    from scipy.optimize import minimize as _scipy_minimize

    best = None
    best_gn = np.inf
    warned = False
    for x0 in starts:
        res = _scipy_minimize(
            fun_grad,
            x0,
            jac=True,
            method="L-BFGS-B",
            options={
                "maxiter": max_iters,
                "ftol": 1e-16,
                "gtol": grad_tol,
                "maxcor": 20,
            },
        )
        if not np.isfinite(res.fun):
            warned = True
            continue
        if best is None or res.fun < best.fun:
            best = res
            best_gn = float(np.linalg.norm(res.jac))
    if best is None:
        if full_output:
            return w_A, {"warning": "optimizer failure", "phi": None, "w": w_A}
        return w_A
    est = min(best.fun, w_A)
    est = max(est, 0.0)
    if full_output:
        return est, {
            "w": w_A,
            "phi": unpack(best.x),
            "level": mesh_level,
            "warning": "optimizer failure" if warned else None,
            "grad_norm": best_gn,
        }
    return est


def qw_estimate_chain(
    A,
    density: ContinuumDensity,
    point,
    levels=(1, 2, 3),
    n_starts: int = 4,
    seed: int = 0,
    grad_tol: float = 1e-10,
    max_iters: int = 2000,
):
    """QW estimates across refinement levels, warm-starting each level with
    the prolonged solution of the previous one.  Returns {level: estimate}."""
    out = {}
    warm = None
    prev = None
    for lvl in levels:
        est, info = qw_upper_estimate(
            A,
            density,
            point,
            mesh_level=lvl,
            n_starts=n_starts,
            seed=seed,
            grad_tol=grad_tol,
            max_iters=max_iters,
            warm_start=warm,
            full_output=True,
        )
        out[lvl] = est
        prev = est
        warm = (info["phi"], lvl) if info.get("phi") is not None else None
    return out


def _prolong_disc(coarse, fine_level: int):
    """Interpolate a coarse disc-mesh field (full vertex array) to a finer level."""
    phi_c, level_c = coarse
    vc, tc, _ = disc_mesh(level_c)
    vf, _, bf = disc_mesh(fine_level)
    coords = vc[tc]
    v0 = coords[:, 0]
    M = np.stack([coords[:, 1] - v0, coords[:, 2] - v0], axis=-1)
    Minv = np.linalg.inv(M)
    rel = vf[:, None, :] - v0[None, :, :]
    lam = np.einsum("tij,qtj->qti", Minv, rel)
    l0 = 1.0 - lam.sum(axis=-1)
    bary = np.concatenate([l0[..., None], lam], axis=-1)  # (Q, T, 3)
    # pick the least-violating triangle; points just outside the coarse mesh
    # (curved boundary) are clipped onto the nearest simplex
    t_idx = bary.min(axis=-1).argmax(axis=1)
    rows = np.arange(len(vf))
    b_sel = np.clip(bary[rows, t_idx], 0.0, 1.0)
    b_sel /= b_sel.sum(axis=-1, keepdims=True)
    vals = np.einsum("qv,qvk->qk", b_sel, phi_c[tc[t_idx]])
    vals[bf] = 0.0
    return vals


# ---------------------------------------------------------------------------
# Property reports
# ---------------------------------------------------------------------------


def rigidity_lower_check(
    density: ContinuumDensity,
    point,
    n_fibers: int = 50,
    mesh_levels=(2, 3),
    seed: int = 0,
    dist_floor: float = 0.1,
):
    """Ratio qw_estimate / dist^2(A, SO(g, e)) over sampled fibers.

    Reports the empirical coercivity constant (minimum ratio) per mesh level
    and its stability across levels.
    """
    rng = np.random.default_rng(seed)
    G = density.g.matrix(np.asarray(point, dtype=float))
    Rt = sqrtm_spd2(G)
    fibers = []
    while len(fibers) < n_fibers:
        A = rng.standard_normal((2, 2))
        # bias toward moderate fibers around the identity of the fiber metric
        A = (np.eye(2) + 0.8 * A) @ Rt
        d2 = dist_to_SO(A, density.g, point) ** 2
        if d2 >= dist_floor:
            fibers.append((A, d2))
    per_level = {}
    for lvl in mesh_levels:
        ratios = []
        for A, d2 in fibers:
            est = qw_upper_estimate(A, density, point, mesh_level=lvl, seed=seed)
            ratios.append(est / d2)
        ratios = np.array(ratios)
        per_level[lvl] = {
            "min_ratio": float(ratios.min()),
            "max_ratio": float(ratios.max()),
            "n_zero": int((ratios < 1e-9).sum()),
        }
    levels = sorted(per_level)
    stable = True
    if len(levels) >= 2:
        r0 = per_level[levels[0]]["min_ratio"]
        r1 = per_level[levels[-1]]["min_ratio"]
        stable = abs(r1 - r0) <= 0.5 * max(abs(r0), abs(r1))
    return {
        "point": list(np.asarray(point, dtype=float)),
        "n_fibers": n_fibers,
        "per_level": per_level,
        "alpha_hat": float(min(per_level[l]["min_ratio"] for l in levels)),
        "stable": bool(stable),
        "all_positive": bool(
            all(per_level[l]["n_zero"] == 0 for l in levels)
        ),
    }


def conformality_residual(g: MetricField, chart: Chart, n: int = 24) -> float:
    """How far g is from phi^2 * G0 with constant G0: max relative deviation
    of G(x)/sqrt(det G(x)) from its mean over a grid."""
    xs = np.linspace(chart.x0, chart.x1, n)
    ys = np.linspace(chart.y0, chart.y1, n)
    xx, yy = np.meshgrid(xs, ys)
    G = g.matrices(np.stack([xx, yy], axis=-1))
    det = G[..., 0, 0] * G[..., 1, 1] - G[..., 0, 1] ** 2
    shape = G / np.sqrt(det)[..., None, None]
    mean = shape.reshape(-1, 2, 2).mean(axis=0)
    return float(np.abs(shape - mean).max())


def conformal_symmetry_check(
    density: ContinuumDensity,
    chart: Chart,
    n_samples: int = 1000,
    seed: int = 0,
    tol_conformal: float = 1e-8,
):
    """Transport invariance of W under the conformal material connection, and
    pi/3 rotation invariance when the frame is hexagonally symmetric for g."""
    g = density.g
    res = conformality_residual(g, chart)
    if res > tol_conformal:
        return {
            "conformal": False,
            "conformality_residual": res,
            "skipped": True,
        }
    rng = np.random.default_rng(seed)

    def sample_pts(k):
        return np.column_stack(
            [
                rng.uniform(chart.x0, chart.x1, k),
                rng.uniform(chart.y0, chart.y1, k),
            ]
        )

    # scalar factor from the metric itself: phi = (det G)^(1/4) / (det G0)^(1/4)
    def phi_ratio(p, q):
        dp = float(g.sqrt_det(p))
        dq = float(g.sqrt_det(q))
        return (dp / dq) ** 0.5

    P = sample_pts(n_samples)
    Q = sample_pts(n_samples)
    max_err_transport = 0.0
    for k in range(n_samples):
        A = rng.standard_normal((2, 2))
        r = phi_ratio(P[k], Q[k])  # transported vector scales by phi(p)/phi(q)
        w_p = density.w(A @ (r * np.eye(2)), P[k])
        w_q = density.w(A, Q[k])
        max_err_transport = max(max_err_transport, abs(w_p - w_q))

    # hexagonal symmetry of the frame under g at a reference point
    p0 = np.array([(chart.x0 + chart.x1) / 2, (chart.y0 + chart.y1) / 2])
    G0 = g.matrix(p0)
    la = float(np.sqrt(density.frame.a_vec @ G0 @ density.frame.a_vec))
    lb = float(np.sqrt(density.frame.b_vec @ G0 @ density.frame.b_vec))
    cosang = float(density.frame.a_vec @ G0 @ density.frame.b_vec) / (la * lb)
    hexsym = abs(la - lb) < 1e-9 * la and abs(cosang + 0.5) < 1e-9

    max_err_rot = None
    if hexsym:
        Rt = sqrtm_spd2(G0)
        Rti = inv_sqrtm_spd2(G0)
        c, s = np.cos(np.pi / 3), np.sin(np.pi / 3)
        Re = np.array([[c, -s], [s, c]])
        Rg = Rti @ Re @ Rt  # g_p-rotation by pi/3 in chart coordinates
        max_err_rot = 0.0
        for _ in range(n_samples):
            A = rng.standard_normal((2, 2))
            w0 = density.w(A, p0)
            w1 = density.w(A @ Rg, p0)
            max_err_rot = max(max_err_rot, abs(w1 - w0))

    return {
        "conformal": True,
        "conformality_residual": res,
        "skipped": False,
        "transport_max_err": max_err_transport,
        "hexagonal_frame": bool(hexsym),
        "rotation_max_err": max_err_rot,
        "n_samples": n_samples,
    }
