"""Problem configuration: JSON schema, fail-closed validation, construction."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .energy import BondLaw, EnergyError, VolumeLaw
from .expressions import FieldError, parse_field
from .geometry import Chart, GeometryError, LatticeFrame, MetricField

__all__ = ["ConfigError", "ProblemConfig", "load_config"]

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Config validation failure; carries the offending field path."""

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")


def _take(d, path, key, required=False, default=None):
    if key in d:
        return d.pop(key)
    if required:
        raise ConfigError(f"{path}.{key}", "required field missing")
    return default


def _no_extras(d, path):
    if d:
        raise ConfigError(f"{path}.{sorted(d)[0]}", "unknown field (rejected)")


def _parse_expr(src, path):
    if not isinstance(src, str):
        raise ConfigError(path, "expected an expression string")
    try:
        return parse_field(src)
    except FieldError as exc:
        raise ConfigError(path, f"bad expression: {exc}") from exc


def _vec2(v, path):
    if (
        not isinstance(v, (list, tuple))
        or len(v) != 2
        or not all(isinstance(x, (int, float)) for x in v)
    ):
        raise ConfigError(path, "expected a pair of numbers")
    return tuple(float(x) for x in v)


@dataclass
class ProblemConfig:
    chart: Chart
    frame: LatticeFrame
    metric: MetricField
    bond_law: BondLaw
    volume_law: VolumeLaw
    eps_list: list
    solver: dict
    distance: dict
    seed: int
    output: dict
    raw: dict

    @property
    def epsilon(self):
        return self.eps_list[0]


def _build_metric(spec, path):
    if not isinstance(spec, dict):
        raise ConfigError(path, "expected an object")
    spec = dict(spec)
    kind = _take(spec, path, "kind", required=True)
    if kind == "euclidean":
        _no_extras(spec, path)
        return MetricField.euclidean()
    if kind == "conformal":
        phi = _parse_expr(_take(spec, path, "phi", required=True), f"{path}.phi")
        g0 = _take(spec, path, "g0")
        _no_extras(spec, path)
        if g0 is not None:
            g0 = np.asarray(g0, dtype=float)
            if g0.shape != (2, 2) or abs(g0[0, 1] - g0[1, 0]) > 1e-14:
                raise ConfigError(f"{path}.g0", "expected a symmetric 2x2 matrix")
        return MetricField.conformal(phi, g0=g0)
    if kind == "general":
        g_aa = _parse_expr(_take(spec, path, "g_aa", required=True), f"{path}.g_aa")
        g_bb = _parse_expr(_take(spec, path, "g_bb", required=True), f"{path}.g_bb")
        g_ab = _parse_expr(_take(spec, path, "g_ab", required=True), f"{path}.g_ab")
        _no_extras(spec, path)
        return ("general", g_aa, g_ab, g_bb)  # needs the frame; resolved later
    raise ConfigError(f"{path}.kind", f"unknown metric kind {kind!r}")


def _build_bond(spec, path):
    spec = dict(spec or {"kind": "hookean"})
    kind = _take(spec, path, "kind", default="hookean")
    kw = {}
    for k in ("alpha", "growth_c", "lipschitz"):
        v = _take(spec, path, k)
        if v is not None:
            kw[k] = float(v)
    expr = _take(spec, path, "expression")
    _no_extras(spec, path)
    try:
        return BondLaw(kind=kind, expression=expr, **kw)
    except (EnergyError, FieldError) as exc:
        raise ConfigError(path, str(exc)) from exc


def _build_volume(spec, path):
    spec = dict(spec or {"kind": "huber"})
    kind = _take(spec, path, "kind", default="huber")
    kw = {}
    for k in ("beta", "delta", "alpha", "growth_c", "lipschitz"):
        v = _take(spec, path, k)
        if v is not None:
            kw[k] = float(v)
    _no_extras(spec, path)
    try:
        return VolumeLaw(kind=kind, **kw)
    except EnergyError as exc:
        raise ConfigError(path, str(exc)) from exc


def load_config(source) -> ProblemConfig:
    """Parse and validate a config JSON document (text, dict, or path)."""
    if isinstance(source, dict):
        doc = dict(source)
    else:
        text = source
        if "\n" not in str(source) and str(source).endswith(".json"):
            with open(source, "r", encoding="utf-8") as fh:
                text = fh.read()
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError("$", f"invalid JSON: {exc}") from exc
    raw = json.loads(json.dumps(doc))
    if not isinstance(doc, dict):
        raise ConfigError("$", "top level must be an object")

    version = _take(doc, "$", "version", default=SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError("$.version", f"unsupported schema version {version!r}")

    chart_spec = _take(doc, "$", "chart", required=True)
    if not isinstance(chart_spec, dict):
        raise ConfigError("$.chart", "expected an object")
    chart_spec = dict(chart_spec)
    try:
        chart = Chart(
            x0=float(_take(chart_spec, "$.chart", "x0", required=True)),
            x1=float(_take(chart_spec, "$.chart", "x1", required=True)),
            y0=float(_take(chart_spec, "$.chart", "y0", required=True)),
            y1=float(_take(chart_spec, "$.chart", "y1", required=True)),
        )
    except GeometryError as exc:
        raise ConfigError("$.chart", str(exc)) from exc
    _no_extras(chart_spec, "$.chart")

    frame_spec = dict(_take(doc, "$", "frame", default={}) or {})
    a = _vec2(_take(frame_spec, "$.frame", "a", default=[1.0, 0.0]), "$.frame.a")
    b = _vec2(
        _take(frame_spec, "$.frame", "b", default=[-0.5, np.sqrt(3.0) / 2.0]),
        "$.frame.b",
    )
    _no_extras(frame_spec, "$.frame")
    try:
        frame = LatticeFrame(a=a, b=b)
    except GeometryError as exc:
        raise ConfigError("$.frame", str(exc)) from exc

    metric = _build_metric(_take(doc, "$", "metric", required=True), "$.metric")
    if isinstance(metric, tuple):  # general form needs the frame
        _, g_aa, g_ab, g_bb = metric
        metric = MetricField.from_frame_coeffs(frame, g_aa, g_ab, g_bb)
    try:
        metric.check_spd(chart)
    except (GeometryError, FieldError) as exc:
        raise ConfigError("$.metric", str(exc)) from exc

    bond_law = _build_bond(_take(doc, "$", "bond"), "$.bond")
    volume_law = _build_volume(_take(doc, "$", "volume"), "$.volume")

    epsilon = _take(doc, "$", "epsilon")
    eps_list = _take(doc, "$", "eps_list")
    if epsilon is None and eps_list is None:
        raise ConfigError("$.epsilon", "either epsilon or eps_list is required")
    if eps_list is None:
        eps_list = [epsilon]
    if not isinstance(eps_list, list) or not all(
        isinstance(e, (int, float)) and e > 0 for e in eps_list
    ):
        raise ConfigError("$.eps_list", "expected a list of positive numbers")
    eps_list = [float(e) for e in eps_list]

    solver = dict(_take(doc, "$", "solver", default={}) or {})
    allowed_solver = {
        "max_iters",
        "grad_tol",
        "sufficient_decrease",
        "backtrack",
        "history",
        "multi_start",
        "noise_amplitude",
        "engine",
    }
    extra = set(solver) - allowed_solver
    if extra:
        raise ConfigError(f"$.solver.{sorted(extra)[0]}", "unknown field (rejected)")

    distance = dict(_take(doc, "$", "distance", default={}) or {})
    allowed_dist = {"mode", "m", "tol", "max_iters", "n_sample"}
    extra = set(distance) - allowed_dist
    if extra:
        raise ConfigError(f"$.distance.{sorted(extra)[0]}", "unknown field (rejected)")

    seed = _take(doc, "$", "seed", default=0)
    if not isinstance(seed, int):
        raise ConfigError("$.seed", "expected an integer")

    output = dict(_take(doc, "$", "output", default={}) or {})
    extra = set(output) - {"dir", "prefix"}
    if extra:
        raise ConfigError(f"$.output.{sorted(extra)[0]}", "unknown field (rejected)")

    _no_extras(doc, "$")
    return ProblemConfig(
        chart=chart,
        frame=frame,
        metric=metric,
        bond_law=bond_law,
        volume_law=volume_law,
        eps_list=eps_list,
        solver=solver,
        distance=distance,
        seed=seed,
        output=output,
        raw=raw,
    )
