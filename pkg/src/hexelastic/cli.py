"""Command-line front end: mesh / minimize / sweep / qw / validate / curvature."""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import appendix
from .config import ConfigError, load_config
from .continuum import (
    ContinuumDensity,
    conformal_symmetry_check,
    qw_estimate_chain,
    qw_upper_estimate,
)
from .energy import validate_laws
from .geometry import dist_to_SO, gauss_curvature, sqrtm_spd2
from .mesh import MeshError, build_lattice, compute_measures, coverage_defect
from .solve import SolveOptions, epsilon_sweep, initial_configuration, minimize_config

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_WARN = 2


def _write(path, text):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _json_text(obj):
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _out_path(args, cfg, name):
    base = args.out or (cfg.output.get("dir") if cfg else None) or "."
    prefix = (cfg.output.get("prefix") if cfg else "") or ""
    return os.path.join(base, prefix + name)


def _load(args):
    cfg = load_config(args.config)
    if args.eps:
        eps = [float(t) for t in args.eps.split(",")]
        cfg.eps_list = eps
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg


def _solve_options(cfg):
    kw = dict(cfg.solver)
    kw.setdefault("seed", cfg.seed)
    return SolveOptions(**kw)


def _distance_kwargs(cfg):
    d = cfg.distance
    return {
        "distance_mode": d.get("mode", "polyline"),
        "distance_m": int(d.get("m", 17)),
        "n_sample": int(d.get("n_sample", 2048)),
    }


def cmd_mesh(args):
    cfg = _load(args)
    tri = build_lattice(cfg.chart, cfg.frame, cfg.metric, cfg.epsilon)
    measures = compute_measures(tri, cfg.metric, chart=cfg.chart, **_distance_kwargs(cfg))
    summary = {
        "epsilon": cfg.epsilon,
        "n_vertices": tri.n_vertices,
        "n_edges": tri.n_edges,
        "n_triangles": tri.n_triangles,
        "n_boundary_vertices": int(tri.boundary_vertex.sum()),
        "total_area": measures.total_area(),
        "coverage_defect": coverage_defect(cfg.chart, tri, cfg.metric),
    }
    _write(_out_path(args, cfg, "mesh.json"), tri.to_json(indent=2) + "\n")
    _write(_out_path(args, cfg, "mesh_summary.json"), _json_text(summary))
    print(_json_text(summary), end="")
    return EXIT_OK


def cmd_minimize(args):
    cfg = _load(args)
    tri = build_lattice(cfg.chart, cfg.frame, cfg.metric, cfg.epsilon)
    measures = compute_measures(tri, cfg.metric, chart=cfg.chart, **_distance_kwargs(cfg))
    opts = _solve_options(cfg)
    init = initial_configuration(tri, "chart-identity")
    f, eb, diag = minimize_config(
        tri, measures, cfg.bond_law, cfg.volume_law, init, opts
    )
    report = {
        "epsilon": cfg.epsilon,
        "energy": eb.to_json_dict(),
        "diagnostics": diag,
    }
    _write(_out_path(args, cfg, "minimize.json"), _json_text(report))
    _write(
        _out_path(args, cfg, "configuration.json"),
        _json_text({"values": f.tolist()}),
    )
    print(_json_text({"min_energy": eb.total, "grad_norm": diag["grad_norm"]}), end="")
    return EXIT_OK if diag["converged"] else EXIT_WARN


def cmd_sweep(args):
    cfg = _load(args)
    if len(cfg.eps_list) < 3:
        raise ConfigError("$.eps_list", "sweep needs at least 3 scales")
    opts = _solve_options(cfg)
    report = epsilon_sweep(
        cfg.chart,
        cfg.frame,
        cfg.metric,
        cfg.bond_law,
        cfg.volume_law,
        cfg.eps_list,
        opts,
        distance_mode=cfg.distance.get("mode", "polyline"),
    )
    _write(_out_path(args, cfg, "sweep.json"), report.to_json(indent=2) + "\n")
    _write(_out_path(args, cfg, "sweep.csv"), report.to_csv())
    print(report.to_csv(), end="")
    warn = not all(e["converged"] for e in report.entries)
    return EXIT_WARN if warn else EXIT_OK


def cmd_qw(args):
    cfg = _load(args)
    density = ContinuumDensity(cfg.metric, cfg.frame, cfg.bond_law, cfg.volume_law)
    p = np.array(
        [(cfg.chart.x0 + cfg.chart.x1) / 2, (cfg.chart.y0 + cfg.chart.y1) / 2]
    )
    rng = np.random.default_rng(cfg.seed)
    Rt = sqrtm_spd2(cfg.metric.matrix(p))
    rows = []
    violations = 0
    for _ in range(args.samples):
        A = (np.eye(2) + 0.7 * rng.standard_normal((2, 2))) @ Rt
        w = density.w(A, p)
        est = qw_upper_estimate(
            A, density, p, mesh_level=args.level, n_starts=4, seed=cfg.seed
        )
        d2 = dist_to_SO(A, cfg.metric, p) ** 2
        ok = est <= w + 1e-9
        violations += 0 if ok else 1
        rows.append((A, w, est, d2, ok))
    lines = ["a11,a12,a21,a22,w,qw_est,dist2_so,sandwich_ok"]
    for A, w, est, d2, ok in rows:
        lines.append(
            ",".join(
                [repr(float(v)) for v in (A[0, 0], A[0, 1], A[1, 0], A[1, 1], w, est, d2)]
            )
            + f",{int(ok)}"
        )
    _write(_out_path(args, cfg, "qw.csv"), "\n".join(lines) + "\n")
    print("\n".join(lines))
    return EXIT_WARN if violations else EXIT_OK


def cmd_curvature(args):
    cfg = _load(args)
    n = args.grid
    xs = np.linspace(cfg.chart.x0, cfg.chart.x1, n + 2)[1:-1]
    ys = np.linspace(cfg.chart.y0, cfg.chart.y1, n + 2)[1:-1]
    ks = [
        {"x": float(x), "y": float(y), "K": gauss_curvature(cfg.metric, (x, y))}
        for x in xs
        for y in ys
    ]
    kvals = np.array([row["K"] for row in ks])
    report = {
        "grid": n,
        "K_min": float(kvals.min()),
        "K_max": float(kvals.max()),
        "max_abs_K": float(np.abs(kvals).max()),
        "flat": bool(np.abs(kvals).max() < 1e-10),
        "samples": ks,
    }
    _write(_out_path(args, cfg, "curvature.json"), _json_text(report))
    print(
        _json_text({k: report[k] for k in ("K_min", "K_max", "max_abs_K", "flat")}),
        end="",
    )
    return EXIT_OK


def cmd_validate(args):
    failures = []
    reports = {}
    selector = args.suite
    if selector in ("appendix", "all"):
        for rep in appendix.run_suites(n_trials=args.trials, seed=args.seed or 0):
            reports[rep["name"]] = rep
            if rep["n_violations"]:
                failures.append(rep["name"])
    if selector in ("laws", "all"):
        from .energy import BondLaw, VolumeLaw

        for name, law in [
            ("bond_hookean", BondLaw()),
            ("volume_huber", VolumeLaw()),
            ("volume_abs", VolumeLaw(kind="abs")),
        ]:
            v = validate_laws(law)
            reports[name] = {"n_violations": len(v)}
            if v:
                failures.append(name)
    if selector in ("conformal", "all") and args.config:
        cfg = load_config(args.config)
        density = ContinuumDensity(
            cfg.metric, cfg.frame, cfg.bond_law, cfg.volume_law
        )
        rep = conformal_symmetry_check(density, cfg.chart, n_samples=200)
        reports["conformal_symmetry"] = rep
        if rep.get("skipped"):
            pass
        elif rep["transport_max_err"] > 1e-10:
            failures.append("conformal_symmetry")
    out = {"suites": reports, "failures": failures, "passed": not failures}
    print(_json_text(out), end="")
    if args.out:
        _write(os.path.join(args.out, "validate.json"), _json_text(out))
    return EXIT_OK if not failures else EXIT_WARN


def build_parser():
    p = argparse.ArgumentParser(
        prog="hexelastic",
        description="Discrete elastic lattices over reference metrics: meshing, "
        "minimization, sweeps, density-envelope estimates, validation.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, need_config=True):
        sp.add_argument("--config", required=need_config, help="config JSON path")
        sp.add_argument("--out", default=None, help="output directory")
        sp.add_argument("--seed", type=int, default=None, help="override config seed")
        sp.add_argument("--threads", type=int, default=None, help="worker cap")
        sp.add_argument("--eps", default=None, help="override epsilon list (comma-separated)")

    sp = sub.add_parser("mesh", help="build the lattice and report measures")
    common(sp)
    sp.set_defaults(fn=cmd_mesh)

    sp = sub.add_parser("minimize", help="minimize the discrete energy")
    common(sp)
    sp.set_defaults(fn=cmd_minimize)

    sp = sub.add_parser("sweep", help="minimize across a decreasing scale list")
    common(sp)
    sp.set_defaults(fn=cmd_sweep)

    sp = sub.add_parser("qw", help="tabulate density and envelope estimates")
    common(sp)
    sp.add_argument("--samples", type=int, default=20)
    sp.add_argument("--level", type=int, default=2)
    sp.set_defaults(fn=cmd_qw)

    sp = sub.add_parser("validate", help="run the property suites")
    common(sp, need_config=False)
    sp.add_argument(
        "--suite",
        default="all",
        choices=["all", "appendix", "laws", "conformal"],
    )
    sp.add_argument("--trials", type=int, default=100_000)
    sp.set_defaults(fn=cmd_validate)

    sp = sub.add_parser("curvature", help="sample the Gauss curvature")
    common(sp)
    sp.add_argument("--grid", type=int, default=5)
    sp.set_defaults(fn=cmd_curvature)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.threads:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(args.threads)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MeshError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
