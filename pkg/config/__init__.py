"""
Configuration module for the fractional exterior-value laboratory
"""

from .settings import settings, create_directories, STAGE_CONFIGS
from .tolerances import CheckKind, get_tolerance, get_tolerance_kind
from .experiment import (
    ExperimentConfig, load_config, save_config, build_grid, build_mesh,
    build_partition, build_q, build_A, build_semilinear
)

__all__ = [
    'settings',
    'create_directories',
    'STAGE_CONFIGS',
    'CheckKind',
    'get_tolerance',
    'get_tolerance_kind',
    'ExperimentConfig',
    'load_config',
    'save_config',
    'build_grid',
    'build_mesh',
    'build_partition',
    'build_q',
    'build_A',
    'build_semilinear'
]
