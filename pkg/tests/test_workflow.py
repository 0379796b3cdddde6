"""
Tests for stage coordination, manifests and artifact chaining
"""
import numpy as np
import pytest

from config.experiment import ExperimentConfig
from models.recovery import CellPartition
from numerics.errors import MissingArtifactError
from orchestrator import StageCoordinator, WorkflowManager, WorkflowType
from stages.invert_q_stage import flag_ratio, peak_cell_distance
from utils.manifest import read_manifest


@pytest.fixture
def small_experiment():
    return ExperimentConfig.model_validate({
        "name": "small",
        "time": {"N_t": 16},
        "basis": {"n_space": 2, "n_time": 2},
    })


@pytest.fixture
def coordinator():
    return StageCoordinator()


def test_verify_passes_on_defaults(tmp_path, coordinator):
    result, manifest = coordinator.run_stage("verify", ExperimentConfig(), tmp_path)
    failed = [check.name for check in result.checks if not check.passed]
    assert failed == []
    names = {check.name for check in result.checks}
    assert {"semigroup_rate", "integration_by_parts_rate", "caputo_power", "convexity"} <= names
    rates = [check.value for check in result.checks if check.name.endswith("_rate")]
    assert min(rates) >= 0.9
    assert manifest.passed
    stored = read_manifest(tmp_path / "verify")
    assert stored["command"] == "verify"
    assert "verify/convergence.csv" in stored["artifacts"]
    assert coordinator.get_processing_stats()["passed"] == 1
    assert coordinator.get_stage_stats()["verify"]["stats"]["executions"] == 1
    assert result.get_summary()["failed_checks"] == []


def test_inversion_without_records_is_refused(tmp_path, coordinator, small_experiment):
    with pytest.raises(MissingArtifactError):
        coordinator.run_stage("invert_q", small_experiment, tmp_path)


def test_workflow_reports_missing_upstream(tmp_path, coordinator, small_experiment):
    manager = WorkflowManager(coordinator)
    outcome = manager.execute_workflow(WorkflowType.INVERT_Q, small_experiment, tmp_path)
    assert outcome["status"] == "failed"
    assert any("dnmap" in error for error in outcome["errors"])
    assert manager.get_execution_history()[-1]["status"] == "failed"


def test_reruns_produce_identical_artifacts(tmp_path, coordinator, small_experiment):
    _, first = coordinator.run_stage("dnmap", small_experiment, tmp_path / "a", seed=5, threads=1)
    _, second = coordinator.run_stage("dnmap", small_experiment, tmp_path / "b", seed=5, threads=2)
    assert first.artifacts == second.artifacts
    assert first.artifact_digest == second.artifact_digest


def test_changed_artifact_blocks_downstream(tmp_path, coordinator, small_experiment):
    coordinator.run_stage("dnmap", small_experiment, tmp_path)
    record = tmp_path / "dnmap" / "forward.bin"
    raw = record.read_bytes()
    record.write_bytes(raw[:-8] + bytes(b ^ 0xFF for b in raw[-8:]))
    with pytest.raises(MissingArtifactError):
        coordinator.run_stage("invert_q", small_experiment, tmp_path)


def test_unknown_workflow_rejected(coordinator):
    manager = WorkflowManager(coordinator)
    with pytest.raises(ValueError):
        manager.execute_workflow("teleport", ExperimentConfig())
    assert "pipeline" in manager.get_available_workflows()


def test_noisy_inversion_checks_the_peak_and_the_runge_flags(tmp_path, coordinator):
    experiment = ExperimentConfig.model_validate({
        "name": "noisy",
        "time": {"N_t": 16},
        "basis": {"n_space": 2, "n_time": 2},
        "noise": {"level": 1e-2},
    })
    coordinator.run_stage("dnmap", experiment, tmp_path)
    result, manifest = coordinator.run_stage("invert_q", experiment, tmp_path)
    checks = {check.name: check for check in result.checks}
    assert {"q_noisy_peak", "runge_flag_ratio"} <= set(checks)
    assert "q_recovery" not in checks
    assert checks["q_noisy_peak"].tolerance == 1.0
    assert checks["runge_flag_ratio"].tolerance == experiment.inversion.runge_flag_ratio
    assert 0.0 <= checks["runge_flag_ratio"].value <= 1.0
    assert manifest.passed == all(check.passed for check in result.checks)


def test_peak_distance_and_flag_ratio(close_grid, mesh):
    partition = CellPartition(close_grid, mesh, space_cells=4, time_cells=2)
    truth = np.zeros(partition.n_params)
    truth[4] = 2.0
    estimate = np.zeros(partition.n_params)
    estimate[7] = 1.5
    assert peak_cell_distance(partition, truth, estimate) == 1
    estimate[0] = -3.0
    assert peak_cell_distance(partition, truth, estimate) == 2
    assert flag_ratio(partition, []) == 0.0
    assert flag_ratio(partition, [0, 1, 2, 3]) == pytest.approx(0.5)
