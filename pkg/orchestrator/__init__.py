"""
Orchestrator module for the fractional exterior-value laboratory

This module runs the pipeline stages, alone or in named sequences, and
chains their run manifests through a shared output directory.
"""

from .stage_coordinator import StageCoordinator
from .workflow_manager import WorkflowManager, WorkflowType, WorkflowStep

__all__ = [
    'StageCoordinator',
    'WorkflowManager',
    'WorkflowType',
    'WorkflowStep'
]
