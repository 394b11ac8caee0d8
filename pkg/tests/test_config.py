from __future__ import annotations

import json

import numpy as np
import pytest

from minigraph.config import (ConfigError, build_boundary, build_mesh, build_metric, build_problem,
                              build_solver_config, load_config, validate_config)
from minigraph.metric import HyperbolicDiskMetric, RotationallySymmetricMetric

SOLVE = {
    "experiment": "solve",
    "metric": {"kind": "euclidean", "dim": 2, "domain": {"box": [[-1.0, 1.0], [-1.0, 1.0]]}},
    "mesh": {"type": "box", "resolution": [9, 9]},
    "boundary": {"type": "random", "modes": 2, "amplitude": 0.5},
}


def _with(**changes):
    cfg = json.loads(json.dumps(SOLVE))
    cfg.update(changes)
    return cfg


def test_valid_config_builds_problem():
    cfg = validate_config(SOLVE, "solve")
    prob = build_problem(cfg, seed=3)
    assert prob.mesh.shape == (9, 9)
    assert 0 < np.max(np.abs(prob.boundary_values)) <= 0.5 + 1e-15


def test_random_data_is_seeded():
    cfg = validate_config(SOLVE)
    mesh = build_mesh(cfg, build_metric(cfg))
    a, b, c = (build_boundary(cfg, mesh, s) for s in (1, 1, 2))
    assert np.array_equal(a, b) and not np.array_equal(a, c)


@pytest.mark.parametrize("bad,where", [
    (_with(extra=1), "extra"),
    (_with(mesh={"type": "box", "resolution": [9]}), "mesh"),
    (_with(mesh={"type": "polar", "resolution": [9, 9]}), "mesh"),
    (_with(boundary={"type": "spline"}), "boundary"),
    (_with(solver={"damping": 1.5}), "solver"),
    (_with(experiment="fly"), "experiment"),
])
def test_invalid_configs_are_rejected_with_location(bad, where):
    with pytest.raises(ConfigError) as exc:
        validate_config(bad)
    assert where in str(exc.value)


def test_experiment_mismatch():
    with pytest.raises(ConfigError):
        validate_config(SOLVE, "barrier")
    validate_config(_with(experiment="estimate-check"), "solve")


def test_load_config_reports_json_position(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"experiment": "solve",\n  "metric": }')
    with pytest.raises(ConfigError) as exc:
        load_config(path)
    assert "line 2" in str(exc.value)
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")


def test_metric_kinds():
    hyp = {"kind": "hyperbolic_polar", "dim": 2, "kappa": -1.0, "domain": {"r": [0.5, 2.0]}}
    assert isinstance(build_metric({"metric": hyp}), RotationallySymmetricMetric)
    disk = {"kind": "hyperbolic_disk", "dim": 2, "kappa": -1.0, "domain": {"box": [[-0.5, 0.5], [-0.5, 0.5]]}}
    assert isinstance(build_metric({"metric": disk}), HyperbolicDiskMetric)


def test_polar_problem_sets_symmetry_flag():
    cfg = {
        "experiment": "solve",
        "metric": {"kind": "rotationally_symmetric", "dim": 2, "warp": {"type": "flat"}, "domain": {"r": [1.05, 4.0]}},
        "mesh": {"type": "polar", "resolution": [33, 1]},
        "boundary": {"type": "catenoid"},
    }
    prob = build_problem(validate_config(cfg))
    assert prob.symmetry
    np.testing.assert_allclose(prob.boundary_values, np.arccosh([1.05, 4.0]), rtol=1e-15)


def test_solver_block():
    cfg = _with(solver={"newton_tol": 1e-9, "continuation_steps": 3, "continuation": True})
    sc = build_solver_config(validate_config(cfg))
    assert sc.newton_tol == 1e-9 and sc.continuation_steps == 3


def test_shipped_configs_validate():
    from pathlib import Path
    configs = sorted((Path(__file__).parent.parent / "configs").glob("*.json"))
    assert len(configs) >= 7
    for path in configs:
        load_config(path)
