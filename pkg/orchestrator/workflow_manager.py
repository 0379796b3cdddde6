"""
Workflow Manager - Named stage sequences for the command-line entry points
"""
import logging
from datetime import datetime
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Union

from config.experiment import ExperimentConfig
from models.stage_result import StageResult
from numerics.errors import LabError
from orchestrator.stage_coordinator import StageCoordinator


class WorkflowType(Enum):
    """Available workflow types"""
    VERIFY = "verify"
    FORWARD = "forward"
    DNMAP = "dnmap"
    INVERT_Q = "invert_q"
    INVERT_A = "invert_a"
    INVERT_SEMILINEAR = "invert_semilinear"
    RUNGE = "runge"
    PIPELINE = "pipeline"


class WorkflowStep:
    """Represents a single step in a workflow"""

    def __init__(self, stage_name: str, required: bool = True, condition: Optional[Callable] = None):
        self.stage_name = stage_name
        self.required = required
        self.condition = condition

    def should_execute(self, experiment: ExperimentConfig) -> bool:
        """Determine if this step should be executed"""
        if self.condition:
            return self.condition(experiment)
        return True


class WorkflowManager:
    """Manages the stage sequences and their execution"""

    def __init__(self, stage_coordinator: Optional[StageCoordinator] = None):
        self.logger = logging.getLogger(__name__)
        self.stage_coordinator = stage_coordinator or StageCoordinator()

        self.workflows = self._define_workflows()

        self.execution_history = []

        self.logger.info("Workflow manager initialized with workflows: %s", list(self.workflows.keys()))

    def _define_workflows(self) -> Dict[str, List[WorkflowStep]]:
        """Define all available workflows"""
        workflows = {}

        # One workflow per command
        for workflow_type in WorkflowType:
            if workflow_type != WorkflowType.PIPELINE:
                workflows[workflow_type.value] = [WorkflowStep(workflow_type.value, required=True)]

        # Full pipeline - verify, forward, records, then every inversion
        workflows[WorkflowType.PIPELINE.value] = [
            WorkflowStep("verify", required=True),
            WorkflowStep("forward", required=True),
            WorkflowStep("dnmap", required=True),
            WorkflowStep("invert_q", required=True),
            WorkflowStep("invert_a", required=False, condition=self._is_magnetic),
            WorkflowStep("invert_semilinear", required=False),
            WorkflowStep("runge", required=False)
        ]

        return workflows

    def _is_magnetic(self, experiment: ExperimentConfig) -> bool:
        """Magnetic recovery needs windows outside B(0, 3r)"""
        return experiment.geometry.magnetic

    def execute_workflow(self,
                         workflow_type: Union[WorkflowType, str],
                         experiment: ExperimentConfig,
                         out_dir: Optional[Union[str, Path]] = None,
                         seed: Optional[int] = None,
                         threads: Optional[int] = None) -> Dict[str, Any]:
        """
        Execute a specific workflow

        Args:
            workflow_type: Type of workflow to execute
            experiment: Parsed experiment configuration
            out_dir: Run directory
            seed: Noise seed override
            threads: Worker threads

        Returns:
            Dict containing stage results, manifests and the overall status
        """
        start_time = datetime.now()

        if isinstance(workflow_type, WorkflowType):
            workflow_type = workflow_type.value

        workflow_steps = self.workflows.get(workflow_type)
        if not workflow_steps:
            raise ValueError(f"Unknown workflow type: {workflow_type}")

        executed, skipped = [], []
        workflow_result = {
            "workflow_type": workflow_type,
            "config_hash": experiment.config_hash,
            "status": "running",
            "results": {},
            "manifests": {},
            "errors": [],
            "warnings": [],
            "processing_time": 0.0,
            "workflow_execution": {
                "total_steps": len(workflow_steps),
                "executed_steps": 0,
                "skipped_steps": 0,
                "failed_steps": 0
            }
        }

        try:
            self.logger.info(f"Starting workflow {workflow_type} for experiment '{experiment.name}'")

            for i, step in enumerate(workflow_steps):
                if not step.should_execute(experiment):
                    self.logger.info(f"Skipping step {step.stage_name} - condition not met")
                    skipped.append(step.stage_name)
                    workflow_result["workflow_execution"]["skipped_steps"] += 1
                    continue

                self.logger.debug(f"Executing workflow step {i + 1}/{len(workflow_steps)}: {step.stage_name}")
                try:
                    result, manifest = self.stage_coordinator.run_stage(
                        step.stage_name, experiment, out_dir, seed, threads
                    )
                except LabError as e:
                    workflow_result["workflow_execution"]["failed_steps"] += 1
                    if step.required:
                        raise
                    workflow_result["errors"].append(f"Optional step {step.stage_name} failed: {e}")
                    continue

                workflow_result["results"][step.stage_name] = result
                workflow_result["manifests"][step.stage_name] = manifest.to_dict()
                executed.append(step.stage_name)
                workflow_result["workflow_execution"]["executed_steps"] += 1

                if not result.is_successful():
                    workflow_result["workflow_execution"]["failed_steps"] += 1
                    if result.errors and step.required:
                        raise LabError(f"Required step {step.stage_name} failed: {result.errors}")

            workflow_result["status"] = self._determine_workflow_status(workflow_result)
            self.logger.info(f"Workflow {workflow_type} finished with status {workflow_result['status']}")

        except LabError as e:
            self.logger.error(f"Workflow {workflow_type} failed: {e}")
            workflow_result["status"] = "failed"
            workflow_result["errors"].append(str(e))

        finally:
            workflow_result["errors"].extend(self._collect_workflow_errors(workflow_result["results"]))
            workflow_result["warnings"].extend(self._collect_workflow_warnings(workflow_result["results"]))
            workflow_result["processing_time"] = (datetime.now() - start_time).total_seconds()
            self._store_execution_history(workflow_result, start_time, executed, skipped)

        return workflow_result

    def _determine_workflow_status(self, workflow_result: Dict[str, Any]) -> str:
        """Passed only when every executed stage ran cleanly and passed all its checks"""
        if workflow_result["workflow_execution"]["failed_steps"] > 0:
            return "failed"
        if all(result.is_successful() for result in workflow_result["results"].values()):
            return "passed"
        return "failed"

    def _collect_workflow_errors(self, results: Dict[str, StageResult]) -> List[str]:
        """Collect all errors from workflow results"""
        all_errors = []
        for stage_name, result in results.items():
            for error in result.errors:
                all_errors.append(f"{stage_name}: {error}")
        return all_errors

    def _collect_workflow_warnings(self, results: Dict[str, StageResult]) -> List[str]:
        """Collect all warnings from workflow results"""
        all_warnings = []
        for stage_name, result in results.items():
            for warning in result.warnings:
                all_warnings.append(f"{stage_name}: {warning}")
        return all_warnings

    def _store_execution_history(self, workflow_result: Dict[str, Any], start_time: datetime,
                                 executed: List[str], skipped: List[str]) -> None:
        """Store workflow execution in history"""
        self.execution_history.append({
            "workflow_type": workflow_result["workflow_type"],
            "config_hash": workflow_result["config_hash"],
            "status": workflow_result["status"],
            "processing_time": workflow_result["processing_time"],
            "executed_stages": executed,
            "skipped_stages": skipped,
            "error_count": len(workflow_result["errors"]),
            "warning_count": len(workflow_result["warnings"]),
            "timestamp": start_time.isoformat()
        })

        if len(self.execution_history) > 1000:
            self.execution_history = self.execution_history[-1000:]

    def get_available_workflows(self) -> List[str]:
        """Get list of available workflow types"""
        return list(self.workflows.keys())

    def get_execution_history(self, limit: int = 50) -> List[Dict[str, Any]]:
        """Get recent workflow execution history"""
        return self.execution_history[-limit:] if self.execution_history else []
