import numpy as np
import pytest

from hexelastic.energy import (
    BondLaw,
    EnergyError,
    VolumeLaw,
    bond_energy,
    energy_gradient,
    total_energy,
    validate_laws,
    volume_energy,
)
from hexelastic.geometry import Chart, LatticeFrame, MetricField
from hexelastic.mesh import build_lattice, compute_measures

CHART = Chart(0.0, 1.0, 0.0, 1.0)
FRAME = LatticeFrame.hexagonal()
EUC = MetricField.euclidean()


@pytest.fixture(scope="module")
def mesh():
    tri = build_lattice(CHART, FRAME, EUC, 0.25)
    measures = compute_measures(tri, EUC, chart=CHART)
    return tri, measures


class TestBondLaw:
    def test_hookean_values(self):
        law = BondLaw()
        assert law.phi(1.0) == 0.0
        assert law.phi(2.0) == 1.0
        assert law.phi(0.0) == 1.0
        assert law.dphi(1.5) == pytest.approx(1.0)

    def test_custom_matches_closed_form(self):
        # |x - 1/x| / 2 = sinh(|log x|)
        law = BondLaw(kind="custom", expression="sqrt((x - 1/x)^2)/2")
        for r in (0.3, 0.9, 1.7, 4.0):
            assert law.phi(r) == pytest.approx(np.sinh(abs(np.log(r))), rel=1e-12)

    def test_custom_derivative_matches_fd(self):
        law = BondLaw(kind="custom", expression="(x - 1)^2 * (1 + x/10)")
        h = 1e-6
        for r in (0.5, 1.3, 2.4):
            fd = (law.phi(r + h) - law.phi(r - h)) / (2 * h)
            assert law.dphi(r) == pytest.approx(fd, rel=1e-7)

    def test_custom_requires_expression(self):
        with pytest.raises(EnergyError):
            BondLaw(kind="custom")

    def test_custom_rejects_second_variable(self):
        with pytest.raises(EnergyError):
            BondLaw(kind="custom", expression="x + y")

    def test_unknown_kind(self):
        with pytest.raises(EnergyError):
            BondLaw(kind="quartic")


class TestVolumeLaw:
    def test_huber_shape(self):
        law = VolumeLaw(beta=2.0, delta=0.5)
        assert law.psi(1.0) == 0.0
        # quadratic near 1
        assert law.psi(1.1) == pytest.approx(2.0 * 0.1**2 / (2 * 0.5), rel=1e-12)
        # linear far from 1
        assert law.psi(3.0) == pytest.approx(2.0 * (2.0 - 0.25), rel=1e-12)
        assert law.psi(-1.0) == pytest.approx(2.0 * (2.0 - 0.25), rel=1e-12)

    def test_huber_derivative_fd(self):
        law = VolumeLaw(delta=0.2)
        h = 1e-7
        for a in (0.5, 0.95, 1.05, 2.0, -1.0):
            fd = (law.psi(a + h) - law.psi(a - h)) / (2 * h)
            assert law.dpsi(a) == pytest.approx(fd, rel=1e-6)

    def test_abs_kind(self):
        law = VolumeLaw(kind="abs", beta=3.0)
        assert law.psi(1.5) == pytest.approx(1.5)
        assert law.dpsi(0.2) == -3.0

    def test_bad_delta(self):
        with pytest.raises(EnergyError):
            VolumeLaw(delta=0.0)

    def test_unknown_kind(self):
        with pytest.raises(EnergyError):
            VolumeLaw(kind="cubic")


class TestEnergies:
    def test_identity_configuration_is_ground_state(self, mesh):
        tri, measures = mesh
        f = tri.vertices.copy()
        eb = total_energy(tri, measures, BondLaw(), VolumeLaw(), f)
        assert abs(eb.bond) < 1e-24
        assert abs(eb.volume) < 1e-24
        g = energy_gradient(tri, measures, BondLaw(), VolumeLaw(), f)
        assert np.abs(g).max() < 1e-12

    def test_uniform_dilation_closed_form(self, mesh):
        tri, measures = mesh
        s = 1.3
        f = s * tri.vertices
        blaw, vlaw = BondLaw(), VolumeLaw(delta=0.1)
        assert bond_energy(tri, measures, blaw, f) == pytest.approx(
            (s - 1.0) ** 2 * measures.mu_edge.sum(), rel=1e-12
        )
        # areas scale by s^2, so every signed ratio is s^2
        assert volume_energy(tri, measures, vlaw, f) == pytest.approx(
            measures.mu.sum() * vlaw.psi(s**2), rel=1e-12
        )

    def test_rigid_motion_only_costs_nothing(self, mesh):
        tri, measures = mesh
        th = 0.7
        R = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
        f = tri.vertices @ R.T + np.array([0.4, -2.0])
        eb = total_energy(tri, measures, BondLaw(), VolumeLaw(), f)
        assert eb.total < 1e-24

    def test_reflection_pays_volume_penalty(self, mesh):
        tri, measures = mesh
        f = tri.vertices * np.array([1.0, -1.0])
        vlaw = VolumeLaw()
        # all signed ratios flip to -1: Psi(-1) per unit area
        assert volume_energy(tri, measures, vlaw, f) == pytest.approx(
            measures.mu.sum() * vlaw.psi(-1.0), rel=1e-12
        )
        assert bond_energy(tri, measures, BondLaw(), f) < 1e-24

    def test_detail_terms_sum_to_totals(self, mesh):
        tri, measures = mesh
        rng = np.random.default_rng(3)
        f = tri.vertices + 0.02 * rng.standard_normal(tri.vertices.shape)
        eb = total_energy(tri, measures, BondLaw(), VolumeLaw(), f, detail=True)
        assert eb.per_edge.shape == (tri.n_edges,)
        assert eb.per_triangle.shape == (tri.n_triangles,)
        assert eb.per_edge.sum() == pytest.approx(eb.bond, rel=1e-12)
        assert eb.per_triangle.sum() == pytest.approx(eb.volume, rel=1e-12)
        assert eb.total == eb.bond + eb.volume

    def test_gradient_matches_finite_differences(self, mesh):
        tri, measures = mesh
        rng = np.random.default_rng(7)
        f = tri.vertices + 0.03 * rng.standard_normal(tri.vertices.shape)
        blaw, vlaw = BondLaw(), VolumeLaw(delta=0.1)
        grad = energy_gradient(tri, measures, blaw, vlaw, f)
        h = 1e-6
        for v, k in [(0, 0), (0, 1), (5, 0), (5, 1), (17, 0), (17, 1)]:
            fp, fm = f.copy(), f.copy()
            fp[v, k] += h
            fm[v, k] -= h
            ep = total_energy(tri, measures, blaw, vlaw, fp).total
            em = total_energy(tri, measures, blaw, vlaw, fm).total
            assert grad[v, k] == pytest.approx((ep - em) / (2 * h), abs=1e-7)

    def test_config_shape_and_finiteness_checked(self, mesh):
        tri, measures = mesh
        with pytest.raises(EnergyError):
            bond_energy(tri, measures, BondLaw(), np.zeros((3, 2)))
        bad = tri.vertices.copy()
        bad[0, 0] = np.nan
        with pytest.raises(EnergyError):
            bond_energy(tri, measures, BondLaw(), bad)

    def test_gradient_rejects_coincident_endpoints(self, mesh):
        tri, measures = mesh
        f = tri.vertices.copy()
        i, j = tri.edges[0]
        f[j] = f[i]
        with pytest.raises(EnergyError):
            energy_gradient(tri, measures, BondLaw(), VolumeLaw(), f)


class TestValidateLaws:
    def test_builtin_laws_pass(self):
        assert validate_laws(BondLaw()) == []
        assert validate_laws(VolumeLaw()) == []
        assert validate_laws(VolumeLaw(kind="abs")) == []

    def test_quadratic_custom_passes(self):
        assert validate_laws(BondLaw(kind="custom", expression="(x-1)^2")) == []

    def test_flat_law_fails_coercivity(self):
        v = validate_laws(BondLaw(kind="custom", expression="0*x"))
        assert any(tag == "coercivity" for tag, *_ in v)

    def test_fast_growing_law_fails_growth(self):
        v = validate_laws(BondLaw(kind="custom", expression="(x-1)^4"))
        assert any(tag == "growth" for tag, *_ in v)

    def test_unknown_object_rejected(self):
        with pytest.raises(EnergyError):
            validate_laws(object())
