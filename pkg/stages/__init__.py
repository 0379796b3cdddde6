"""
Stages module for the fractional exterior-value laboratory
"""

from .base_stage import BaseStage, Workbench
from .verify_stage import VerifyStage
from .forward_stage import ForwardStage
from .dnmap_stage import DNMapStage
from .invert_q_stage import InvertQStage
from .invert_a_stage import InvertAStage
from .invert_semilinear_stage import InvertSemilinearStage
from .runge_stage import RungeStage

__all__ = [
    'BaseStage',
    'Workbench',
    'VerifyStage',
    'ForwardStage',
    'DNMapStage',
    'InvertQStage',
    'InvertAStage',
    'InvertSemilinearStage',
    'RungeStage'
]
