"""Experiment configuration: JSON schema, validation and problem builders."""

from __future__ import annotations

import json
import math
from dataclasses import fields as dc_fields

import jsonschema
import numpy as np

from .fields import Mesh, ScalarField, box_mesh, polar_mesh
from .metric import ChartMetric, RotationallySymmetricMetric, metric_from_config
from .solver import DirichletProblem, SolverConfig

__all__ = [
    "EXPERIMENTS",
    "CONFIG_SCHEMA",
    "ConfigError",
    "load_config",
    "validate_config",
    "build_metric",
    "build_mesh",
    "build_boundary",
    "build_problem",
    "build_solver_config",
]

EXPERIMENTS = ("solve", "barrier", "annulus-family", "estimate-check",
               "oracle-compare", "geometry-report", "rigidity")

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_PAIR = {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "experiment": {"enum": list(EXPERIMENTS)},
        "metric": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind", "domain"],
            "properties": {
                "kind": {"enum": ["euclidean", "hyperbolic_polar", "rotationally_symmetric", "hyperbolic_disk"]},
                "dim": {"type": "integer", "minimum": 1, "maximum": 8},
                "kappa": {"type": "number", "exclusiveMaximum": 0},
                "center": {"type": "array", "items": _NUM},
                "warp": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["type"],
                    "properties": {"type": {"enum": ["flat", "hyperbolic", "spherical"]}, "k": _POS},
                },
                "domain": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "r": _PAIR,
                        "box": {"type": "array", "items": _PAIR, "minItems": 1},
                    },
                    "minProperties": 1,
                    "maxProperties": 1,
                },
            },
        },
        "mesh": {
            "type": "object",
            "additionalProperties": False,
            "required": ["type", "resolution"],
            "properties": {
                "type": {"enum": ["box", "polar"]},
                "resolution": {"type": "array", "items": {"type": "integer", "minimum": 1},
                               "minItems": 2, "maxItems": 2},
            },
        },
        "boundary": {
            "type": "object",
            "additionalProperties": False,
            "required": ["type"],
            "properties": {
                "type": {"enum": ["constant", "affine", "annulus", "catenoid", "cos_theta", "random"]},
                "value": _NUM,
                "coefficients": _PAIR,
                "offset": _NUM,
                "inner": _NUM,
                "outer": _NUM,
                "amplitude": _NUM,
                "modes": {"type": "integer", "minimum": 1, "maximum": 16},
            },
        },
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "newton_tol": _POS,
                "max_newton_iters": {"type": "integer", "minimum": 1},
                "damping": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "min_step": _POS,
                "continuation_steps": {"type": "integer", "minimum": 1},
                "linear_solver_tol": _POS,
                "continuation": {"type": "boolean"},
            },
        },
        "barrier": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n": {"type": "integer", "minimum": 1},
                "r0": {"oneOf": [_POS, {"const": "auto"}]},
                "upper_cap": _POS,
                "samples": {"type": "integer", "minimum": 3},
            },
        },
        "family": {
            "type": "object",
            "additionalProperties": False,
            "required": ["r1", "outer_radii"],
            "properties": {
                "r1": _POS,
                "outer_radii": {"type": "array", "items": _POS, "minItems": 1},
                "t": {"oneOf": [{"type": "number", "minimum": 0}, {"const": "delta0"}]},
                "r0_cap": _POS,
                "nodes_per_unit": {"type": "integer", "minimum": 2},
                "oracle": {"type": "boolean"},
            },
        },
        "estimate": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"R": _POS},
        },
        "oracle": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"descent_tol": _POS, "max_iter": {"type": "integer", "minimum": 1}},
        },
        "rigidity": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "radii": {"type": "array", "items": _POS, "minItems": 2},
                "epsilons": {"type": "array", "items": _POS, "minItems": 1},
                "amplitude": _POS,
                "nodes": {"type": "integer", "minimum": 7},
            },
        },
        "outputs": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"data": {"type": "string"}, "report": {"type": "string"}},
        },
    },
}

_REQUIRED = {
    "solve": ("metric", "mesh", "boundary"),
    "barrier": ("metric",),
    "annulus-family": ("metric", "family"),
    "estimate-check": ("metric", "mesh", "boundary"),
    "oracle-compare": ("metric", "mesh", "boundary"),
    "geometry-report": ("metric", "mesh"),
    "rigidity": (),
}


# experiments that consume a single Dirichlet problem share their configs
_PROBLEM_EXPERIMENTS = ("solve", "estimate-check", "oracle-compare", "geometry-report")


class ConfigError(ValueError):
    """A configuration failed schema or consistency checks."""


def _location(path) -> str:
    return "/".join(str(p) for p in path) or "<root>"


def validate_config(cfg, experiment: str | None = None) -> dict:
    """Check ``cfg`` against the schema and the needs of ``experiment``."""
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        lines = [f"{_location(e.absolute_path)}: {e.message}" for e in errors]
        raise ConfigError("config does not match the schema:\n  " + "\n  ".join(lines))
    declared = cfg.get("experiment")
    experiment = declared if experiment is None else experiment
    if experiment is None:
        raise ConfigError("experiment: no experiment named in the config or on the command line")
    if declared is not None and declared != experiment and not (
            declared in _PROBLEM_EXPERIMENTS and experiment in _PROBLEM_EXPERIMENTS):
        raise ConfigError(f"experiment: config declares {declared!r} but {experiment!r} was requested")
    missing = [k for k in _REQUIRED[experiment] if k not in cfg]
    if missing:
        raise ConfigError(f"{experiment} needs the block(s): {', '.join(missing)}")
    if "mesh" in cfg and "metric" in cfg:
        dom = cfg["metric"]["domain"]
        want = "polar" if "r" in dom else "box"
        if cfg["mesh"]["type"] != want:
            raise ConfigError(f"mesh/type: a metric on a {'polar annulus' if want == 'polar' else 'box'} "
                              f"needs a {want} mesh")
    if experiment in ("barrier", "annulus-family") and "r" not in cfg["metric"]["domain"]:
        raise ConfigError(f"metric/domain: {experiment} needs a rotationally symmetric metric on an r-interval")
    return cfg


def load_config(path, experiment: str | None = None) -> dict:
    """Parse and validate a JSON config file."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return validate_config(cfg, experiment)


def build_metric(cfg: dict) -> ChartMetric:
    try:
        return metric_from_config(cfg["metric"])
    except ValueError as exc:
        raise ConfigError(f"metric: {exc}") from exc


def build_mesh(cfg: dict, metric: ChartMetric) -> Mesh:
    n1, n2 = cfg["mesh"]["resolution"]
    try:
        if cfg["mesh"]["type"] == "polar":
            r_min, r_max = metric.domain.bounds[0]
            return polar_mesh(r_min, r_max, n1, n2)
        if len(metric.domain.bounds) != 2:
            raise ValueError("box meshes are two-dimensional")
        return box_mesh(metric.domain.bounds, (n1, n2))
    except ValueError as exc:
        raise ConfigError(f"mesh: {exc}") from exc


def _random_data(mesh: Mesh, modes: int, amplitude: float, seed: int) -> np.ndarray:
    """Smooth random trigonometric data, normalized to sup |f| = amplitude."""
    rng = np.random.default_rng(seed)
    x = mesh.coords()
    if mesh.kind == "polar":
        s, t = x[..., 0], x[..., 1]
        base = np.zeros(mesh.shape)
        for m in range(modes + 1):
            a, b = rng.normal(size=2)
            base += (a * np.cos(m * t) + b * np.sin(m * t)) / (1 + m) ** 2
        base = base + rng.normal() * (s - s.min()) / max(s.max() - s.min(), 1e-300)
    else:
        lo = np.array([ax[0] for ax in mesh.axes])
        span = np.array([ax[-1] - ax[0] for ax in mesh.axes])
        y = (x - lo) / span
        base = np.zeros(mesh.shape)
        for k1 in range(modes + 1):
            for k2 in range(modes + 1):
                c, phase = rng.normal(), rng.uniform(0, 2 * math.pi)
                base += c * np.cos(math.pi * (k1 * y[..., 0] + k2 * y[..., 1]) + phase) / (1 + k1 + k2) ** 2
    peak = np.max(np.abs(base))
    return amplitude * base / peak if peak > 0 else base


def build_boundary(cfg: dict, mesh: Mesh, seed: int = 0) -> np.ndarray:
    """Node values of the boundary data (interior entries are a harmless extension)."""
    b = cfg["boundary"]
    kind = b["type"]
    x = mesh.coords()
    x1, x2 = x[..., 0], x[..., 1]
    if kind == "constant":
        return np.full(mesh.shape, float(b.get("value", 0.0)))
    if kind == "affine":
        a1, a2 = b.get("coefficients", [1.0, 0.0])
        return a1 * x1 + a2 * x2 + float(b.get("offset", 0.0))
    if kind == "random":
        return _random_data(mesh, int(b.get("modes", 3)), float(b.get("amplitude", 1.0)), seed)
    if kind == "cos_theta":
        amp, off = float(b.get("amplitude", 1.0)), float(b.get("offset", 0.0))
        if mesh.kind == "polar":
            return off + amp * 0.5 * (1.0 + np.cos(x2))
        rr = np.hypot(x1, x2)
        c = np.where(rr > 0, x1 / np.where(rr > 0, rr, 1.0), 1.0)
        return off + amp * 0.5 * (1.0 + c)
    if mesh.kind != "polar":
        raise ConfigError(f"boundary/type: {kind!r} data needs a polar mesh")
    if kind == "annulus":
        out = np.full(mesh.shape, float(b.get("inner", 0.0)))
        out[-1, :] = float(b.get("outer", 0.0))
        return out
    if kind == "catenoid":
        if mesh.axes[0][0] < 1.0:
            raise ConfigError("boundary/type: catenoid data needs r >= 1")
        return np.arccosh(x1) + float(b.get("offset", 0.0))
    raise ConfigError(f"boundary/type: unknown type {kind!r}")


def build_solver_config(cfg: dict) -> SolverConfig:
    block = {k: v for k, v in cfg.get("solver", {}).items() if k != "continuation"}
    names = {f.name for f in dc_fields(SolverConfig)}
    try:
        return SolverConfig(**{k: v for k, v in block.items() if k in names})
    except ValueError as exc:
        raise ConfigError(f"solver: {exc}") from exc


def build_problem(cfg: dict, seed: int = 0) -> DirichletProblem:
    metric = build_metric(cfg)
    mesh = build_mesh(cfg, metric)
    data = build_boundary(cfg, mesh, seed)
    symmetric = isinstance(metric, RotationallySymmetricMetric) and mesh.kind == "polar" and mesh.shape[1] == 1
    try:
        return DirichletProblem(metric, mesh, ScalarField(mesh, data).values, symmetry=symmetric)
    except ValueError as exc:
        raise ConfigError(f"problem: {exc}") from exc
