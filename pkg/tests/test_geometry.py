import numpy as np
import pytest

from hexelastic.expressions import parse_field
from hexelastic.geometry import (
    Chart,
    GeometryError,
    LatticeFrame,
    MetricField,
    conformal_transport,
    dist_to_O,
    dist_to_SO,
    exp_connection,
    fiber_norm,
    gauss_curvature,
    inv_sqrtm_spd2,
    parallel_transport,
    riemannian_distance,
    segment_length,
    singular_values_g,
    sqrtm_spd2,
)

EUCLID = MetricField.euclidean()
CHART = Chart(0.0, 1.0, 0.0, 1.0)


def rot(th):
    return np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])


class TestChartAndFrame:
    def test_chart_validation(self):
        with pytest.raises(GeometryError):
            Chart(1.0, 0.0, 0.0, 1.0)

    def test_frame_closure(self):
        fr = LatticeFrame.hexagonal()
        assert np.allclose(fr.a_vec + fr.b_vec + fr.c_vec, 0.0)

    def test_frame_requires_independence(self):
        with pytest.raises(GeometryError):
            LatticeFrame(a=(1.0, 0.0), b=(2.0, 0.0))


class TestConnection:
    def test_exp_is_translation(self):
        q, inside = exp_connection(CHART, (0.2, 0.3), (0.1, 0.0))
        assert np.allclose(q, (0.3, 0.3)) and inside

    def test_exp_at_zero(self):
        q, _ = exp_connection(CHART, (0.0, 0.0), (0.0, 0.0))
        assert np.allclose(q, (0.0, 0.0))

    def test_exp_additivity(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            p = rng.uniform(0, 1, 2)
            v, w = rng.uniform(-0.2, 0.2, 2), rng.uniform(-0.2, 0.2, 2)
            q1, _ = exp_connection(CHART, p, v)
            q2, _ = exp_connection(CHART, q1, w)
            q3, _ = exp_connection(CHART, p, v + w)
            assert np.allclose(q2, q3, atol=1e-15)

    def test_exp_flags_exit(self):
        _, inside = exp_connection(CHART, (0.9, 0.9), (0.5, 0.0))
        assert not inside

    def test_parallel_transport_identity(self):
        assert np.allclose(parallel_transport((0, 0), (1, 1), (2, 3)), (2, 3))

    def test_transport_roundtrip(self):
        v = np.array([0.4, -0.3])
        assert np.allclose(
            parallel_transport((1, 1), (0, 0), parallel_transport((0, 0), (1, 1), v)), v
        )


class TestConformalTransport:
    def test_phi_one_is_identity(self):
        v = conformal_transport((0.1, 0.2), (0.7, 0.9), (1.0, 2.0), parse_field("1"))
        assert np.allclose(v, (1.0, 2.0))

    def test_scaling_ratio(self):
        # phi(p)=2 at p=(0,0), phi(q)=1 at q=(1,0) for phi = 2 - x
        v = conformal_transport((0.0, 0.0), (1.0, 0.0), (1.0, 0.0), parse_field("2 - x"))
        assert np.allclose(v, (2.0, 0.0))

    def test_preserves_g_length(self):
        phi = parse_field("exp((x^2+y^2)/2)")
        g = MetricField.conformal(phi)
        rng = np.random.default_rng(1)
        for _ in range(100):
            p, q = rng.uniform(0, 1, 2), rng.uniform(0, 1, 2)
            v = rng.standard_normal(2)
            tv = conformal_transport(q, p, v, phi)
            assert float(g.norm(p, tv)) == pytest.approx(float(g.norm(q, v)), rel=1e-12)

    def test_rejects_nonpositive_phi(self):
        with pytest.raises(GeometryError):
            conformal_transport((0, 0), (1, 0), (1, 0), parse_field("x - 5"))


class TestSegmentLength:
    def test_euclidean_345(self):
        assert segment_length(EUCLID, (0, 0), (3, 4)) == pytest.approx(5.0, abs=1e-14)

    def test_constant_scaling(self):
        g = MetricField.constant(4 * np.eye(2))
        assert segment_length(g, (0, 0), (1, 0)) == pytest.approx(2.0, abs=1e-14)

    def test_conformal_against_dense_quadrature(self):
        g = MetricField.conformal(parse_field("exp((x^2+y^2)/2)"))
        p, v = np.array([0.0, 0.0]), np.array([0.1, 0.0])
        got = segment_length(g, p, v, n_quad=16)
        # dense-trapezoid oracle
        t = np.linspace(0, 1, 20001)
        pts = p + t[:, None] * v
        integrand = g.norm(pts, np.broadcast_to(v, pts.shape))
        oracle = np.trapezoid(integrand, t)
        assert got == pytest.approx(oracle, abs=1e-10)

    def test_rejects_exit(self):
        with pytest.raises(GeometryError):
            segment_length(EUCLID, (0.5, 0.5), (2.0, 0.0), chart=CHART)


class TestRiemannianDistance:
    def test_euclidean_diagonal(self):
        d = riemannian_distance(EUCLID, (0, 0), (1, 1))
        assert d == pytest.approx(np.sqrt(2), abs=1e-8)

    def test_constant_anisotropic(self):
        g = MetricField.constant(np.diag([4.0, 1.0]))
        assert riemannian_distance(g, (0, 0), (1, 0)) == pytest.approx(2.0, abs=1e-8)

    def test_never_exceeds_chord(self):
        g = MetricField.conformal(parse_field("exp((x^2+y^2)/2)"))
        rng = np.random.default_rng(2)
        for _ in range(10):
            p, q = rng.uniform(0.1, 0.9, 2), rng.uniform(0.1, 0.9, 2)
            d = riemannian_distance(g, p, q, chart=CHART)
            chord = segment_length(g, p, q - p, n_quad=16)
            assert d <= chord + 1e-10

    def test_fast_mode_matches_for_constant(self):
        g = MetricField.constant([[2.0, 0.3], [0.3, 1.0]])
        d1 = riemannian_distance(g, (0.1, 0.1), (0.8, 0.5))
        d2 = riemannian_distance(g, (0.1, 0.1), (0.8, 0.5), mode="fast")
        assert d1 == pytest.approx(d2, abs=1e-8)

    def test_quadratic_order_small_vectors(self):
        g = MetricField.conformal(parse_field("exp((x^2+y^2)/2)"))
        p = np.array([0.45, 0.55])
        sizes = np.geomspace(1e-2, 1e-1, 6)
        errs = []
        for s in sizes:
            v = s * np.array([np.cos(0.7), np.sin(0.7)])
            d = riemannian_distance(g, p, p + v, chart=CHART)
            errs.append(abs(d - float(g.norm(p, v))))
        slope = np.polyfit(np.log(sizes), np.log(np.maximum(errs, 1e-300)), 1)[0]
        assert slope >= 1.9


class TestGaussCurvature:
    def test_flat_euclidean(self):
        assert gauss_curvature(EUCLID, (0.3, 0.4)) == pytest.approx(0.0, abs=1e-14)

    def test_flat_constant_scale(self):
        g = MetricField.constant(3.7 * np.eye(2))
        assert gauss_curvature(g, (0.3, 0.4)) == pytest.approx(0.0, abs=1e-14)

    def test_conformal_closed_form(self):
        # g = e^(2*lambda) I with lambda = (x^2+y^2)/2 has K = -2 e^(-2*lambda)
        g = MetricField.conformal(parse_field("exp((x^2+y^2)/2)"))
        for p in [(0.0, 0.0), (0.3, -0.2), (0.7, 0.6)]:
            lam = (p[0] ** 2 + p[1] ** 2) / 2
            assert gauss_curvature(g, p) == pytest.approx(-2 * np.exp(-2 * lam), rel=1e-10)


class TestFiberAlgebra:
    def test_sqrtm_roundtrip(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            B = rng.standard_normal((2, 2))
            M = B @ B.T + 0.1 * np.eye(2)
            R = sqrtm_spd2(M)
            assert np.allclose(R @ R, M, atol=1e-12)
            assert np.allclose(inv_sqrtm_spd2(M) @ R, np.eye(2), atol=1e-12)

    def test_norm_and_singular_values_identity(self):
        assert fiber_norm(np.eye(2), EUCLID, (0, 0)) == pytest.approx(np.sqrt(2))
        s1, s2, sgn = singular_values_g(np.eye(2), EUCLID, (0, 0))
        assert (s1, s2, sgn) == pytest.approx((1, 1, 1))

    def test_singular_values_diag(self):
        s1, s2, _ = singular_values_g(np.diag([2.0, 1.0]), EUCLID, (0, 0))
        assert (s1, s2) == pytest.approx((2, 1))

    def test_metric_weighted_singular_values(self):
        g = MetricField.constant(np.diag([4.0, 1.0]))
        s1, s2, _ = singular_values_g(np.eye(2), g, (0, 0))
        assert (s1, s2) == pytest.approx((1.0, 0.5))
        # SVD oracle
        B = np.eye(2) @ inv_sqrtm_spd2(g.matrix((0, 0)))
        sv = np.linalg.svd(B, compute_uv=False)
        assert (s1, s2) == pytest.approx(tuple(sv), abs=1e-14)

    def test_dist_zero_on_so_g(self):
        g = MetricField.constant([[2.0, 0.4], [0.4, 1.5]])
        rng = np.random.default_rng(4)
        for _ in range(50):
            A = rot(rng.uniform(0, 2 * np.pi)) @ sqrtm_spd2(g.matrix((0, 0)))
            assert dist_to_SO(A, g, (0, 0)) < 1e-12

    def test_dist_so_stretch(self):
        assert dist_to_SO(np.diag([2.0, 1.0]), EUCLID, (0, 0)) ** 2 == pytest.approx(1.0)
        # oracle: minimize |A - R|^2 over sampled rotations
        A = np.diag([2.0, 1.0])
        ths = np.linspace(0, 2 * np.pi, 20001)
        dists = [np.sum((A - rot(t)) ** 2) for t in ths]
        assert min(dists) == pytest.approx(1.0, abs=1e-6)

    def test_reflection_distances(self):
        A = np.diag([1.0, -1.0])
        assert dist_to_O(A, EUCLID, (0, 0)) ** 2 == pytest.approx(0.0, abs=1e-14)
        assert dist_to_SO(A, EUCLID, (0, 0)) ** 2 == pytest.approx(4.0)
        ths = np.linspace(0, 2 * np.pi, 20001)
        assert min(np.sum((A - rot(t)) ** 2) for t in ths) == pytest.approx(4.0, abs=1e-6)

    def test_so_distance_dominates_o(self):
        rng = np.random.default_rng(5)
        for _ in range(500):
            A = rng.standard_normal((2, 2))
            d_o, d_so = dist_to_O(A, EUCLID, (0, 0)), dist_to_SO(A, EUCLID, (0, 0))
            assert d_so >= d_o - 1e-14
            if np.linalg.det(A) >= 0:
                assert d_so == pytest.approx(d_o, abs=1e-14)
            else:
                assert d_so > d_o

    def test_left_rotation_invariance(self):
        g = MetricField.constant([[2.0, 0.4], [0.4, 1.5]])
        rng = np.random.default_rng(6)
        for _ in range(100):
            A = rng.standard_normal((2, 2))
            R = rot(rng.uniform(0, 2 * np.pi))
            assert dist_to_SO(R @ A, g, (0, 0)) == pytest.approx(
                dist_to_SO(A, g, (0, 0)), abs=1e-12
            )


class TestMetricField:
    def test_frame_coeffs_roundtrip(self):
        fr = LatticeFrame.hexagonal()
        # constant frame coefficients -> chart matrix with matching quadratic form
        g = MetricField.from_frame_coeffs(fr, "2.0", "0.3", "1.5")
        G = g.matrix((0.2, 0.8))
        assert fr.a_vec @ G @ fr.a_vec == pytest.approx(2.0, abs=1e-12)
        assert fr.a_vec @ G @ fr.b_vec == pytest.approx(0.3, abs=1e-12)
        assert fr.b_vec @ G @ fr.b_vec == pytest.approx(1.5, abs=1e-12)

    def test_spd_check_rejects_degenerate(self):
        g = MetricField.from_frame_coeffs(LatticeFrame.hexagonal(), "x", "0", "1")
        with pytest.raises(GeometryError):
            g.check_spd(Chart(-1.0, 1.0, -1.0, 1.0))

    def test_nu_matches_definition(self):
        fr = LatticeFrame.hexagonal()
        g = MetricField.conformal(parse_field("1 + x^2"))
        p = np.array([0.4, 0.2])
        nu = float(g.nu(p, fr))
        # sqrt(det(phi^2 I)) = phi^2
        assert nu == pytest.approx((1 + 0.4**2) ** 2 * abs(fr.chart_wedge), rel=1e-12)
