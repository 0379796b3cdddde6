"""
Models module for the fractional exterior-value laboratory
"""

from .time_mesh import ConvScheme, ConvWeights, TimeMesh, TimeSignal
from .space_grid import NodeClass, SpaceGrid, Window
from .fields import Coefficients, MagneticPotential, SemilinearSpec, SpaceTimeField
from .operators import BilinearForm, FormConstants, NonlocalOperator
from .recovery import CellPartition, ControlResult, RecoveryReport
from .stage_result import StageResult, CheckOutcome

__all__ = [
    'ConvScheme',
    'ConvWeights',
    'TimeMesh',
    'TimeSignal',
    'NodeClass',
    'SpaceGrid',
    'Window',
    'Coefficients',
    'MagneticPotential',
    'SemilinearSpec',
    'SpaceTimeField',
    'BilinearForm',
    'FormConstants',
    'NonlocalOperator',
    'CellPartition',
    'ControlResult',
    'RecoveryReport',
    'StageResult',
    'CheckOutcome'
]
