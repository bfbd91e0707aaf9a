"""Discrete bond and signed-volume energies, gradients, and law validation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .expressions import ScalarFieldExpr, parse_field
from .geometry import wedge2
from .mesh import TriangleMeasures, Triangulation

__all__ = [
    "EnergyError",
    "BondLaw",
    "VolumeLaw",
    "EnergyBreakdown",
    "bond_energy",
    "volume_energy",
    "total_energy",
    "energy_gradient",
    "validate_laws",
]


class EnergyError(ValueError):
    pass


def _parse_scalar_law(source: str):
    """One-variable law from an expression in x (y must not appear)."""
    expr = parse_field(source)
    if "y" in {n for n in _variables(expr)}:
        raise EnergyError("law expressions may use only the variable x")
    return expr


def _variables(expr: ScalarFieldExpr):
    import re

    return set(re.findall(r"\b[xy]\b", expr.source))


@dataclass(frozen=True)
class BondLaw:
    """Penalty Phi on the relative elongation r of an edge."""

    kind: str = "hookean"
    expression: str | None = None
    alpha: float = 1.0
    growth_c: float = 1.0
    lipschitz: float = 2.0

    def __post_init__(self):
        if self.kind not in ("hookean", "custom"):
            raise EnergyError(f"unknown bond law kind: {self.kind!r}")
        if self.kind == "custom":
            if not self.expression:
                raise EnergyError("custom bond law needs an expression in x")
            expr = _parse_scalar_law(self.expression)
            object.__setattr__(self, "_expr", expr)
            object.__setattr__(self, "_dexpr", expr.dx)

    def phi(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == "hookean":
            return (r - 1.0) ** 2
        return self._expr(r, np.zeros_like(r))

    def dphi(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == "hookean":
            return 2.0 * (r - 1.0)
        return self._dexpr(r, np.zeros_like(r))


@dataclass(frozen=True)
class VolumeLaw:
    """Penalty Psi on the signed volume ratio a of a triangle."""

    kind: str = "huber"
    beta: float = 1.0
    delta: float = 1e-3
    alpha: float = 0.5
    growth_c: float = 1.0
    lipschitz: float = 1.0

    def __post_init__(self):
        if self.kind not in ("huber", "abs"):
            raise EnergyError(f"unknown volume law kind: {self.kind!r}")
        if self.kind == "huber" and self.delta <= 0:
            raise EnergyError("huber delta must be positive")

    def psi(self, a):
        t = np.asarray(a, dtype=float) - 1.0
        if self.kind == "abs":
            return self.beta * np.abs(t)
        d = self.delta
        return self.beta * np.where(np.abs(t) < d, t * t / (2 * d), np.abs(t) - d / 2)

    def dpsi(self, a):
        t = np.asarray(a, dtype=float) - 1.0
        if self.kind == "abs":
            return self.beta * np.sign(t)
        d = self.delta
        return self.beta * np.where(np.abs(t) < d, t / d, np.sign(t))


@dataclass(frozen=True)
class EnergyBreakdown:
    bond: float
    volume: float
    per_edge: np.ndarray | None = None
    per_triangle: np.ndarray | None = None

    @property
    def total(self):
        return self.bond + self.volume

    def to_json_dict(self):
        return {"bond": self.bond, "volume": self.volume, "total": self.total}


def _check_config(tri: Triangulation, f):
    f = np.asarray(f, dtype=float)
    if f.shape != (tri.n_vertices, 2):
        raise EnergyError(
            f"configuration shape {f.shape} does not match mesh ({tri.n_vertices}, 2)"
        )
    if not np.all(np.isfinite(f)):
        raise EnergyError("configuration has non-finite entries")
    return f


def _bond_terms(tri, measures, law, f):
    d = measures.edge_dist
    if np.any(d <= 0):
        raise EnergyError("cached edge distance is not positive")
    u = f[tri.edges[:, 1]] - f[tri.edges[:, 0]]
    r = np.linalg.norm(u, axis=1) / d
    return measures.mu_edge * law.phi(r), u, r


def _volume_ratio(tri, measures, f):
    nu = measures.nu_centroid
    if np.any(nu <= 0):
        raise EnergyError("nu measure is not positive")
    P = f[tri.triangles]
    wedge = wedge2(P[:, 1] - P[:, 0], P[:, 2] - P[:, 1])
    return tri.tri_orient * wedge / (tri.epsilon**2 * nu)


def bond_energy(
    tri: Triangulation, measures: TriangleMeasures, law: BondLaw, f
) -> float:
    f = _check_config(tri, f)
    terms, _, _ = _bond_terms(tri, measures, law, f)
    return float(terms.sum())


def volume_energy(
    tri: Triangulation, measures: TriangleMeasures, law: VolumeLaw, f
) -> float:
    f = _check_config(tri, f)
    return float((measures.mu * law.psi(_volume_ratio(tri, measures, f))).sum())


def total_energy(
    tri: Triangulation,
    measures: TriangleMeasures,
    bond_law: BondLaw,
    volume_law: VolumeLaw,
    f,
    detail: bool = False,
) -> EnergyBreakdown:
    f = _check_config(tri, f)
    eterms, _, _ = _bond_terms(tri, measures, bond_law, f)
    tterms = measures.mu * volume_law.psi(_volume_ratio(tri, measures, f))
    return EnergyBreakdown(
        bond=float(eterms.sum()),
        volume=float(tterms.sum()),
        per_edge=eterms if detail else None,
        per_triangle=tterms if detail else None,
    )


def energy_gradient(
    tri: Triangulation,
    measures: TriangleMeasures,
    bond_law: BondLaw,
    volume_law: VolumeLaw,
    f,
):
    """Analytic gradient of the total energy w.r.t. vertex positions, (V, 2)."""
    f = _check_config(tri, f)
    grad = np.zeros_like(f)

    # bond part
    d = measures.edge_dist
    u = f[tri.edges[:, 1]] - f[tri.edges[:, 0]]
    un = np.linalg.norm(u, axis=1)
    if np.any(un == 0):
        bad = int(np.argmin(un))
        raise EnergyError(f"coincident endpoints on edge {bad}: |f(q)-f(p)| = 0")
    r = un / d
    coef = measures.mu_edge * bond_law.dphi(r) / d  # d/d|u|
    gvec = (coef / un)[:, None] * u
    np.add.at(grad, tri.edges[:, 1], gvec)
    np.add.at(grad, tri.edges[:, 0], -gvec)

    # volume part: w = (f2-f1) wedge (f3-f2)
    P = f[tri.triangles]
    a_r = _volume_ratio(tri, measures, f)
    c = (
        measures.mu
        * volume_law.dpsi(a_r)
        * tri.tri_orient
        / (tri.epsilon**2 * measures.nu_centroid)
    )

    def perp(v):
        return np.stack([v[:, 1], -v[:, 0]], axis=1)

    d1 = -perp(P[:, 2] - P[:, 1])
    d2 = perp(P[:, 2] - P[:, 0])
    d3 = -perp(P[:, 1] - P[:, 0])
    np.add.at(grad, tri.triangles[:, 0], c[:, None] * d1)
    np.add.at(grad, tri.triangles[:, 1], c[:, None] * d2)
    np.add.at(grad, tri.triangles[:, 2], c[:, None] * d3)
    return grad


def validate_laws(law, n_grid: int = 2001):
    """Sample the structural conditions of a law on a log-spaced grid.

    Returns a list of violation records; empty means the declared constants
    hold on the grid.
    """
    violations = []
    if isinstance(law, BondLaw):
        r = np.concatenate([np.geomspace(1e-3, 1e3, n_grid), [1.0]])
        phi = law.phi(r)
        if abs(law.phi(1.0)) > 1e-12:
            violations.append(("phi_at_one", 1.0, float(law.phi(1.0))))
        bad = phi < law.alpha * (r - 1.0) ** 2 - 1e-12
        for rv, pv in zip(r[bad], phi[bad]):
            violations.append(("coercivity", float(rv), float(pv)))
        bad = phi > law.growth_c * (1.0 + r**2) + 1e-12
        for rv, pv in zip(r[bad], phi[bad]):
            violations.append(("growth", float(rv), float(pv)))
        rng = np.random.default_rng(0)
        s = r[rng.permutation(len(r))]
        lhs = np.abs(phi - law.phi(s))
        rhs = law.lipschitz * (1.0 + np.abs(r) + np.abs(s)) * np.abs(r - s)
        bad = lhs > rhs + 1e-9 * np.maximum(1.0, rhs)
        for rv, sv in zip(r[bad], s[bad]):
            violations.append(("lipschitz", float(rv), float(sv)))
    elif isinstance(law, VolumeLaw):
        a = np.concatenate(
            [-np.geomspace(1e-3, 1e3, n_grid), np.geomspace(1e-3, 1e3, n_grid), [0.0, 1.0]]
        )
        psi = law.psi(a)
        if abs(law.psi(1.0)) > 1e-12:
            violations.append(("psi_at_one", 1.0, float(law.psi(1.0))))
        near_one = np.abs(a - 1.0) > 1e-12
        bad = near_one & (psi <= 0)
        for av, pv in zip(a[bad], psi[bad]):
            violations.append(("positivity", float(av), float(pv)))
        neg = a < 0
        bad = neg & (psi <= law.alpha * np.sqrt(np.abs(a)))
        for av, pv in zip(a[bad], psi[bad]):
            violations.append(("coercivity", float(av), float(pv)))
        bad = psi >= law.growth_c * (1.0 + np.abs(a)) + 1e-12
        for av, pv in zip(a[bad], psi[bad]):
            violations.append(("growth", float(av), float(pv)))
        rng = np.random.default_rng(0)
        bshuf = a[rng.permutation(len(a))]
        lhs = np.abs(psi - law.psi(bshuf))
        rhs = law.lipschitz * np.abs(a - bshuf)
        bad = lhs > rhs + 1e-9 * np.maximum(1.0, rhs)
        for av, bv in zip(a[bad], bshuf[bad]):
            violations.append(("lipschitz", float(av), float(bv)))
    else:
        raise EnergyError(f"cannot validate object of type {type(law).__name__}")
    return violations
