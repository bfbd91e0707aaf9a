import numpy as np
import pytest

from hexelastic.appendix import (
    ALL_SUITES,
    run_suites,
    suite_constructive_constant,
    suite_dist_o_bound,
    suite_dist_so_split,
    suite_isometry_polarization,
    suite_three_direction_bound,
)
from hexelastic.geometry import singular_values_2x2

N = 20_000


class TestSuitesPass:
    def test_isometry_polarization(self):
        rep = suite_isometry_polarization(n_trials=N, seed=0)
        assert rep["n_violations"] == 0
        assert rep["max_residual"] < 1e-12

    def test_three_direction_bound(self):
        rep = suite_three_direction_bound(n_trials=N, seed=1)
        assert rep["n_violations"] == 0
        assert rep["max_ratio"] <= 1.0 + 1e-12

    def test_constructive_constant(self):
        rep = suite_constructive_constant(n_trials=N, seed=2)
        assert rep["n_violations"] == 0

    def test_dist_o_bound(self):
        rep = suite_dist_o_bound(n_trials=N, seed=3)
        assert rep["n_violations"] == 0
        assert rep["finite"]
        assert rep["c_hat_max"] > 0

    def test_dist_so_split(self):
        rep = suite_dist_so_split(n_trials=N, seed=4)
        assert rep["n_violations"] == 0

    def test_run_suites_all(self):
        reps = run_suites(n_trials=5000, seed=0)
        assert [r["name"] for r in reps] == [
            "isometry_polarization",
            "three_direction_bound",
            "constructive_constant",
            "dist_o_bound",
            "dist_so_split",
        ]
        assert all(r["n_violations"] == 0 for r in reps)

    def test_run_suites_subset_and_unknown(self):
        reps = run_suites(names=["i", "v"], n_trials=2000)
        assert len(reps) == 2
        with pytest.raises(ValueError):
            run_suites(names=["vi"], n_trials=10)

    def test_suite_keys(self):
        assert set(ALL_SUITES) == {"i", "ii", "iii", "iv", "v"}


class TestMutationSanity:
    """Halving the constants (or dropping a correction term) must break the
    bounds, confirming the checks have teeth."""

    def test_three_direction_constant_is_tightish(self):
        rng = np.random.default_rng(10)
        th0 = rng.uniform(0, 2 * np.pi, N)
        theta = rng.uniform(0.05, np.pi - 0.05, N)
        lx = np.exp(rng.uniform(-1, 1, N))
        x = lx[:, None] * np.stack([np.cos(th0), np.sin(th0)], axis=1)
        y = lx[:, None] * np.stack([np.cos(th0 + theta), np.sin(th0 + theta)], axis=1)
        A = rng.standard_normal((N, 2, 2))
        lhs = np.einsum("nij,nij->n", A, A)
        denom = 0.0
        for u in (x, y, x + y):
            Au = np.einsum("nij,nj->ni", A, u)
            denom = denom + np.einsum("ni,ni->n", Au, Au) / np.einsum("ni,ni->n", u, u)
        halved = 1.0 / (1.0 - np.cos(theta))  # half the proven constant
        assert (lhs > halved * denom).any()

    def test_dist_so_needs_reflection_term(self):
        rng = np.random.default_rng(11)
        A = rng.standard_normal((N, 2, 2))
        s1, s2, _ = singular_values_2x2(A)
        det = A[:, 0, 0] * A[:, 1, 1] - A[:, 0, 1] * A[:, 1, 0]
        d_o = (s1 - 1.0) ** 2 + (s2 - 1.0) ** 2
        d_so = np.where(det >= 0, d_o, (s1 - 1.0) ** 2 + (s2 + 1.0) ** 2)
        # without the 4*sqrt(|det|) correction the bound fails on reflections
        assert ((det < 0) & (d_so > d_o + 1e-9)).any()
