"""Minimization of the discrete energies and epsilon sweeps."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from .continuum import affine_extend
from .energy import BondLaw, EnergyError, VolumeLaw, energy_gradient, total_energy
from .geometry import Chart, LatticeFrame, MetricField
from .mesh import Triangulation, build_lattice, compute_measures, coverage_defect

__all__ = [
    "SolveError",
    "SolveOptions",
    "SweepReport",
    "initial_configuration",
    "minimize_config",
    "epsilon_sweep",
    "procrustes_align",
]


class SolveError(ValueError):
    pass


@dataclass(frozen=True)
class SolveOptions:
    max_iters: int = 20000
    grad_tol: float = 1e-8  # scaled by mesh g-area inside minimize_config
    sufficient_decrease: float = 1e-4
    backtrack: float = 0.5
    history: int = 10
    multi_start: int = 4
    noise_amplitude: float = 0.05
    seed: int = 0
    engine: str = "scipy"  # "scipy" (L-BFGS-B) or "native" (backtracking)

    def __post_init__(self):
        if self.grad_tol <= 0:
            raise SolveError("grad_tol must be positive")
        if self.multi_start < 1:
            raise SolveError("multi_start must be >= 1")
        if self.engine not in ("scipy", "native"):
            raise SolveError(f"unknown engine {self.engine!r}")


def initial_configuration(
    tri: Triangulation, kind: str = "chart-identity", factor: float = 1.0,
    amplitude: float = 0.0, rng=None, custom=None,
):
    """Starting configurations: the chart embedding, a scaled copy, a noisy
    copy, or user-supplied values."""
    base = tri.vertices.copy()
    if kind == "chart-identity":
        return base
    if kind == "scaled":
        return factor * base
    if kind == "random":
        rng = np.random.default_rng(rng)
        return base + amplitude * rng.uniform(-1.0, 1.0, base.shape)
    if kind == "custom":
        f = np.asarray(custom, dtype=float)
        if f.shape != base.shape:
            raise SolveError("custom configuration has the wrong shape")
        return f
    raise SolveError(f"unknown initial configuration kind: {kind!r}")


def procrustes_align(f, ref):
    """Best rigid motion (rotation + translation) of f onto ref; returns the
    aligned copy and the residual RMS."""
    f = np.asarray(f, dtype=float)
    ref = np.asarray(ref, dtype=float)
    fc = f - f.mean(axis=0)
    rc = ref - ref.mean(axis=0)
    H = fc.T @ rc
    U, _, Vt = np.linalg.svd(H)
    d = np.sign(np.linalg.det(U @ Vt))
    R = U @ np.diag([1.0, d]) @ Vt
    aligned = fc @ R + ref.mean(axis=0)
    rms = float(np.sqrt(((aligned - ref) ** 2).sum(axis=1).mean()))
    return aligned, rms


def _run_engine(fun_grad, x0, gtol, opts: SolveOptions):
    from .optim import LbfgsResult

    if opts.engine == "native":
        from .optim import lbfgs as _native

        return _native(
            fun_grad,
            x0,
            grad_tol=gtol,
            max_iters=opts.max_iters,
            history=opts.history,
            c1=opts.sufficient_decrease,
            backtrack=opts.backtrack,
        )
    from scipy.optimize import minimize as _scipy_minimize

    res = _scipy_minimize(
        fun_grad,
        x0,
        jac=True,
        method="L-BFGS-B",
        options={
            "maxiter": opts.max_iters,
            "ftol": 1e-18,
            "gtol": min(gtol, 1e-10),
            "maxcor": max(opts.history, 20),
        },
    )
    gn = float(np.linalg.norm(res.jac))
    return LbfgsResult(
        x=res.x,
        fun=float(res.fun),
        grad_norm=gn,
        n_iters=int(res.nit),
        converged=bool(gn <= gtol or res.success),
        message=str(res.message),
    )


def minimize_config(
    tri: Triangulation,
    measures,
    bond_law: BondLaw,
    volume_law: VolumeLaw,
    init,
    opts: SolveOptions = SolveOptions(),
):
    """Quasi-Newton minimization of the total energy over configurations.

    Multi-starts perturb the given initial configuration with seed-derived
    noise; the mean is subtracted from the returned minimizer (translation
    gauge).  Returns (configuration, EnergyBreakdown, diagnostics).
    """
    init = np.asarray(init, dtype=float)
    if not np.all(np.isfinite(init)):
        raise SolveError("initial configuration has non-finite entries")
    area = float(measures.mu.sum())
    gtol = opts.grad_tol * max(area, 1e-12)
    shape = init.shape

    def fun_grad(x):
        f = x.reshape(shape)
        eb = total_energy(tri, measures, bond_law, volume_law, f)
        gr = energy_gradient(tri, measures, bond_law, volume_law, f)
        return eb.total, gr.ravel()

    best = None
    best_start = -1
    per_start = []
    for k in range(opts.multi_start):
        rng = np.random.default_rng([opts.seed, k])
        x0 = init if k == 0 else init + opts.noise_amplitude * tri.epsilon * (
            rng.uniform(-1.0, 1.0, shape)
        )
        try:
            res = _run_engine(fun_grad, x0.ravel(), gtol, opts)
        except EnergyError:
            per_start.append({"start": k, "status": "aborted"})
            continue
        if not np.isfinite(res.fun):
            per_start.append({"start": k, "status": "nan"})
            continue
        per_start.append(
            {
                "start": k,
                "status": res.message,
                "energy": res.fun,
                "grad_norm": res.grad_norm,
                "iters": res.n_iters,
            }
        )
        if best is None or res.fun < best.fun:
            best = res
            best_start = k
    if best is None:
        raise SolveError("all starts failed")

    f = best.x.reshape(shape)
    f = f - f.mean(axis=0)  # translation gauge
    eb = total_energy(tri, measures, bond_law, volume_law, f)
    diagnostics = {
        "grad_norm": best.grad_norm,
        "grad_tol": gtol,
        "iters": best.n_iters,
        "converged": best.converged,
        "message": best.message,
        "best_start": best_start,
        "starts": per_start,
        "options": {
            "max_iters": opts.max_iters,
            "grad_tol": opts.grad_tol,
            "sufficient_decrease": opts.sufficient_decrease,
            "backtrack": opts.backtrack,
            "history": opts.history,
            "multi_start": opts.multi_start,
            "seed": opts.seed,
        },
    }
    return f, eb, diagnostics


@dataclass
class SweepReport:
    entries: list = field(default_factory=list)

    def add(self, **kw):
        self.entries.append(kw)

    def min_energies(self):
        return np.array([e["min_energy"] for e in self.entries])

    def relative_changes(self):
        e = self.min_energies()
        denom = np.maximum(np.abs(e[:-1]), 1e-300)
        return np.abs(np.diff(e)) / denom

    def to_json(self, **kw):
        return json.dumps({"entries": self.entries}, **kw)

    CSV_COLUMNS = (
        "epsilon",
        "n_vertices",
        "min_energy",
        "bond",
        "volume",
        "grad_norm",
        "defect",
        "seconds",
    )

    def to_csv(self):
        lines = [",".join(self.CSV_COLUMNS)]
        for e in self.entries:
            lines.append(",".join(repr(e[c]) for c in self.CSV_COLUMNS))
        return "\n".join(lines) + "\n"


def epsilon_sweep(
    chart: Chart,
    frame: LatticeFrame,
    g: MetricField,
    bond_law: BondLaw,
    volume_law: VolumeLaw,
    eps_list,
    opts: SolveOptions = SolveOptions(),
    distance_mode: str = "polyline",
    init_kind: str = "chart-identity",
) -> SweepReport:
    """Minimize over a decreasing list of scales, warm-starting each mesh by
    sampling the previous minimizer's affine extension at the new vertices."""
    eps_list = list(eps_list)
    if any(e2 >= e1 for e1, e2 in zip(eps_list, eps_list[1:])):
        raise SolveError("eps_list must be strictly decreasing")
    report = SweepReport()
    prev_field = None
    for eps in eps_list:
        t0 = time.perf_counter()
        tri = build_lattice(chart, frame, g, eps)
        measures = compute_measures(tri, g, chart=chart, distance_mode=distance_mode)
        init = initial_configuration(tri, init_kind)
        if prev_field is not None:
            warm = prev_field.evaluate(tri.vertices)
            if np.all(np.isfinite(warm)):
                init = warm
        f, eb, diag = minimize_config(tri, measures, bond_law, volume_law, init, opts)
        prev_field = affine_extend(tri, f)
        report.add(
            epsilon=float(eps),
            n_vertices=int(tri.n_vertices),
            min_energy=float(eb.total),
            bond=float(eb.bond),
            volume=float(eb.volume),
            grad_norm=float(diag["grad_norm"]),
            defect=float(coverage_defect(chart, tri, g)),
            seconds=float(time.perf_counter() - t0),
            iters=int(diag["iters"]),
            converged=bool(diag["converged"]),
        )
    return report
