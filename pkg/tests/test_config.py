"""
Tests for experiment configuration parsing, hashing and tolerances
"""
import json

import numpy as np
import pytest

from config.experiment import (
    ExperimentConfig, build_grid, build_mesh, build_partition, build_q, build_semilinear,
    cell_parameters, load_config, save_config,
)
from config.tolerances import CheckKind, get_check_names, get_tolerance
from numerics.errors import ConfigError


def _write(tmp_path, payload):
    path = tmp_path / "experiment.json"
    path.write_text(json.dumps(payload), encoding="utf-8")
    return path


def test_defaults():
    config = load_config()
    assert config.time.N_t == 64
    assert config.orders.alpha == 0.5
    assert config.coefficients.q.kind == "cell"
    assert config.coefficients.A.kind == "zero"
    grid = build_grid(config)
    assert grid.n_omega == 11
    assert grid.r_omega == pytest.approx(config.geometry.half_width / 6.0)
    assert grid.n_w1 == 8 and grid.n_w2 == 7


def test_hash_is_stable_and_sensitive():
    assert ExperimentConfig().config_hash == ExperimentConfig().config_hash
    changed = ExperimentConfig.model_validate({"orders": {"alpha": 0.3}})
    assert changed.config_hash != ExperimentConfig().config_hash


def test_round_trip(tmp_path):
    config = ExperimentConfig.model_validate({"name": "trip", "time": {"N_t": 40}, "noise": {"level": 1e-3}})
    path = tmp_path / "trip.json"
    save_config(config, path)
    loaded = load_config(path)
    assert loaded == config
    assert loaded.config_hash == config.config_hash


@pytest.mark.parametrize("payload", [
    {"geometry": {"magnetic": False, "window1": {"lower": [-0.3], "upper": [-0.1]}}},
    {"geometry": {"window1": {"lower": [-0.9], "upper": [-0.5]}}},
    {"orders": {"alpha": 1.0}},
    {"bogus": 1},
    {"coefficients": {"q": {"kind": "cells", "cell_values": [[1.0]]}}},
    {"coefficients": {"q": {"kind": "cell", "amplitude": 1.0, "cell": [9, 0]}}},
    {"coefficients": {"semilinear": {"lambdas": [0.01]}}},
    {"coefficients": {"semilinear": {"coefficients": [{"kind": "constant", "amplitude": -1.0},
                                                     {"kind": "constant", "amplitude": 2.0}]}}},
    {"coefficients": {"semilinear": {"coefficients": [{"kind": "constant", "amplitude": 1.0},
                                                     {"kind": "constant", "amplitude": -2.0}]}}},
    {"coefficients": {"semilinear": {"coefficients": [{"kind": "zero"},
                                                     {"kind": "cells", "cell_values": [[0.0, 1.0], [-0.5, 1.0]]}]}}},
    {"geometry": {"magnetic": False}, "coefficients": {"A": {"kind": "constant", "amplitude": 0.5}}},
])
def test_invalid_configs_rejected(tmp_path, payload):
    with pytest.raises(ConfigError):
        load_config(_write(tmp_path, payload))


def test_unreadable_config(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")
    broken = tmp_path / "broken.json"
    broken.write_text("{not json", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(broken)


def test_cell_profile_builds_the_potential():
    config = ExperimentConfig()
    grid, mesh = build_grid(config), build_mesh(config, N_t=16)
    partition = build_partition(config, grid, mesh)
    theta = cell_parameters(config.coefficients.q, partition)
    assert theta.sum() == 1.0
    assert int(np.argmax(theta)) == 1 * partition.n_time + 2
    q = build_q(config, grid, mesh)
    np.testing.assert_array_equal(q.omega_values, partition.expand(theta))


def test_semilinear_defaults():
    config = ExperimentConfig()
    spec = build_semilinear(config, build_grid(config), build_mesh(config, N_t=16))
    assert spec.powers == (0.0, 1.0)
    assert np.all(spec.coefficients[1].omega_values == 2.0)


def test_tolerance_widening_near_the_edges():
    base = get_tolerance(CheckKind.DUALITY)
    assert get_tolerance(CheckKind.DUALITY, alpha=0.95) == pytest.approx(10.0 * base)
    assert get_tolerance(CheckKind.DUALITY, s=0.1) == pytest.approx(10.0 * base)
    assert get_tolerance(CheckKind.GAUGE, alpha=0.95) == 0.0
    assert "duality" in get_check_names()


def test_magnetic_recovery_needs_the_magnetic_geometry(tmp_path):
    path = _write(tmp_path, {"geometry": {"magnetic": False}})
    assert load_config(path).geometry.magnetic is False
    with pytest.raises(ConfigError, match="B\\(0, 3r\\)"):
        load_config(path, require_magnetic=True)
    assert load_config(None, require_magnetic=True).geometry.magnetic
