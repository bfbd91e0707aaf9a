"""Property suites for the fiber-algebra inequalities, vectorized over trials.

Each suite draws random instances, checks the corresponding inequality with a
fixed slack, and returns a small report dict with the violation count.
"""

from __future__ import annotations

import numpy as np

from .geometry import singular_values_2x2

__all__ = [
    "suite_isometry_polarization",
    "suite_three_direction_bound",
    "suite_constructive_constant",
    "suite_dist_o_bound",
    "suite_dist_so_split",
    "run_suites",
    "ALL_SUITES",
]


def _rand_rotations(rng, n):
    th = rng.uniform(0.0, 2 * np.pi, n)
    c, s = np.cos(th), np.sin(th)
    R = np.empty((n, 2, 2))
    R[:, 0, 0] = c
    R[:, 0, 1] = -s
    R[:, 1, 0] = s
    R[:, 1, 1] = c
    return R


def suite_isometry_polarization(n_trials=100_000, seed=0, slack=1e-12):
    """Maps preserving the lengths of x, y and x+y preserve inner products:
    the polarization residual <Ax, Ay> - <x, y> vanishes for A in O(2)."""
    rng = np.random.default_rng(seed)
    A = _rand_rotations(rng, n_trials)
    flip = rng.random(n_trials) < 0.5
    A[flip, :, 1] *= -1.0  # half the trials get a reflection
    x = rng.standard_normal((n_trials, 2))
    y = rng.standard_normal((n_trials, 2))
    Ax = np.einsum("nij,nj->ni", A, x)
    Ay = np.einsum("nij,nj->ni", A, y)
    # preservation of the three lengths (holds by construction)
    len_res = np.max(
        np.abs(
            np.stack(
                [
                    np.einsum("ni,ni->n", Ax, Ax) - np.einsum("ni,ni->n", x, x),
                    np.einsum("ni,ni->n", Ay, Ay) - np.einsum("ni,ni->n", y, y),
                    np.einsum("ni,ni->n", Ax + Ay, Ax + Ay)
                    - np.einsum("ni,ni->n", x + y, x + y),
                ]
            )
        ),
        axis=0,
    )
    polar = np.einsum("ni,ni->n", Ax, Ay) - np.einsum("ni,ni->n", x, y)
    scale = 1.0 + np.einsum("ni,ni->n", x, x) + np.einsum("ni,ni->n", y, y)
    bad = (np.abs(polar) > slack * scale) | (len_res > slack * scale)
    return {
        "name": "isometry_polarization",
        "n_trials": n_trials,
        "n_violations": int(bad.sum()),
        "max_residual": float(np.max(np.abs(polar) / scale)),
    }


def _sample_pairs(rng, n, equal_length=True, theta_range=(0.05, np.pi - 0.05)):
    th0 = rng.uniform(0.0, 2 * np.pi, n)
    theta = rng.uniform(*theta_range, n)
    lx = np.exp(rng.uniform(-1.0, 1.0, n))
    ly = lx if equal_length else lx * np.exp(rng.uniform(0.0, np.log(5.0), n))
    x = lx[:, None] * np.stack([np.cos(th0), np.sin(th0)], axis=1)
    y = ly[:, None] * np.stack([np.cos(th0 + theta), np.sin(th0 + theta)], axis=1)
    return x, y, theta


def suite_three_direction_bound(n_trials=100_000, seed=1, slack=1e-12):
    """|A|_F^2 <= 2/(1-cos theta) * sum of the squared stretch ratios along
    x, y, x+y, for equal-length x, y at angle theta."""
    rng = np.random.default_rng(seed)
    x, y, theta = _sample_pairs(rng, n_trials, equal_length=True)
    A = rng.standard_normal((n_trials, 2, 2)) * np.exp(
        rng.uniform(-1.0, 1.0, (n_trials, 1, 1))
    )
    lhs = np.einsum("nij,nij->n", A, A)
    c = 2.0 / (1.0 - np.cos(theta))
    rhs = c * _stretch_ratio_sum(A, x, y)
    bad = lhs > rhs * (1.0 + 1e-12) + slack
    return {
        "name": "three_direction_bound",
        "n_trials": n_trials,
        "n_violations": int(bad.sum()),
        "max_ratio": float(np.max(lhs / rhs)),
    }


def _stretch_ratio_sum(A, x, y):
    out = 0.0
    for u in (x, y, x + y):
        Au = np.einsum("nij,nj->ni", A, u)
        out = out + np.einsum("ni,ni->n", Au, Au) / np.einsum("ni,ni->n", u, u)
    return out


def suite_constructive_constant(n_trials=100_000, seed=2, slack=1e-12):
    """Same bound shape for unequal lengths, with the constant assembled from
    the equal-length case applied to v = x + alpha*y, w = (1-alpha)*y."""
    rng = np.random.default_rng(seed)
    x, y, theta = _sample_pairs(
        rng, n_trials, equal_length=False, theta_range=(0.2, np.pi - 0.2)
    )
    A = rng.standard_normal((n_trials, 2, 2))
    r = np.linalg.norm(y, axis=1) / np.linalg.norm(x, axis=1)  # >= 1 by sampling
    alpha = (r**2 - 1.0) / (2.0 * r * (r + np.cos(theta)))
    v = x + alpha[:, None] * y
    w = (1.0 - alpha)[:, None] * y
    cos_vw = np.einsum("ni,ni->n", v, w) / (
        np.linalg.norm(v, axis=1) * np.linalg.norm(w, axis=1)
    )
    c1 = 2.0 / (1.0 - cos_vw)
    cprime = c1 * np.maximum.reduce(
        [
            (1.0 + alpha) / ((1.0 - alpha) ** 2 * r**2),
            1.0 + (alpha + alpha**2) / (1.0 - alpha) ** 2,
            np.ones_like(alpha),
        ]
    )
    lhs = np.einsum("nij,nij->n", A, A)
    rhs = cprime * _stretch_ratio_sum(A, x, y)
    bad = lhs > rhs * (1.0 + 1e-12) + slack
    return {
        "name": "constructive_constant",
        "n_trials": n_trials,
        "n_violations": int(bad.sum()),
        "max_ratio": float(np.max(lhs / rhs)),
    }


def suite_dist_o_bound(n_trials=100_000, seed=3, slack=1e-12, n_pairs=20):
    """dist^2(A, O(2)) is controlled by the squared stretch deviations along
    x, y, x+y; the constant is estimated per direction pair by maximizing the
    ratio over random A, and reported (finite, stable)."""
    rng = np.random.default_rng(seed)
    per_pair = n_trials // n_pairs
    max_ratios = []
    n_violations = 0
    for _ in range(n_pairs):
        x, y, _ = _sample_pairs(rng, 1, equal_length=False)
        x, y = x[0], y[0]
        A = np.eye(2) + rng.standard_normal((per_pair, 2, 2)) * np.exp(
            rng.uniform(-3.0, 1.0, (per_pair, 1, 1))
        )
        s1, s2, _ = singular_values_2x2(A)
        d2 = (s1 - 1.0) ** 2 + (s2 - 1.0) ** 2
        denom = 0.0
        for u in (x, y, x + y):
            Au = A @ u
            denom = denom + (
                np.linalg.norm(Au, axis=1) / np.linalg.norm(u) - 1.0
            ) ** 2
        zero_denom = denom <= slack
        n_violations += int((zero_denom & (d2 > 1e3 * slack)).sum())
        ratio = d2[~zero_denom] / denom[~zero_denom]
        max_ratios.append(float(ratio.max()))
    max_ratios = np.array(max_ratios)
    return {
        "name": "dist_o_bound",
        "n_trials": n_trials,
        "n_violations": n_violations,
        "c_hat_per_pair": max_ratios.tolist(),
        "c_hat_max": float(max_ratios.max()),
        "finite": bool(np.all(np.isfinite(max_ratios))),
    }


def suite_dist_so_split(n_trials=100_000, seed=4, slack=1e-12):
    """dist^2(A, SO) <= dist^2(A, O) + 4*sqrt(|det A|) when det A < 0
    (and the two distances coincide when det A >= 0)."""
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n_trials, 2, 2)) * np.exp(
        rng.uniform(-2.0, 2.0, (n_trials, 1, 1))
    )
    s1, s2, _ = singular_values_2x2(A)
    det = A[:, 0, 0] * A[:, 1, 1] - A[:, 0, 1] * A[:, 1, 0]
    d_o = (s1 - 1.0) ** 2 + (s2 - 1.0) ** 2
    d_so = np.where(det >= 0, d_o, (s1 - 1.0) ** 2 + (s2 + 1.0) ** 2)
    bound = d_o + 4.0 * np.sqrt(np.abs(det)) * (det < 0)
    bad = d_so > bound * (1.0 + 1e-12) + slack
    bad |= (det >= 0) & (np.abs(d_so - d_o) > slack)
    return {
        "name": "dist_so_split",
        "n_trials": n_trials,
        "n_violations": int(bad.sum()),
        "max_excess": float(np.max(d_so - bound)),
    }


ALL_SUITES = {
    "i": suite_isometry_polarization,
    "ii": suite_three_direction_bound,
    "iii": suite_constructive_constant,
    "iv": suite_dist_o_bound,
    "v": suite_dist_so_split,
}


def run_suites(names=None, n_trials=100_000, seed=0):
    names = list(ALL_SUITES) if names is None else list(names)
    reports = []
    for k in names:
        if k not in ALL_SUITES:
            raise ValueError(f"unknown suite {k!r}")
        reports.append(ALL_SUITES[k](n_trials=n_trials, seed=seed + ord(k[-1])))
    return reports
