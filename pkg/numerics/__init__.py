"""
Numerical modules: time-fractional calculus, nonlocal operators, forward
solvers, DN records, inversion and reference oracles
"""

from .errors import (
    LabError, DomainError, GeometryError, ConfigError, SingularStepError, NewtonDivergenceError,
    SourceSolveError, OracleConvergenceError, BranchAmbiguityError, MissingArtifactError,
    StageBlockedError, IllConditionedWarning
)

__all__ = [
    'LabError',
    'DomainError',
    'GeometryError',
    'ConfigError',
    'SingularStepError',
    'NewtonDivergenceError',
    'SourceSolveError',
    'OracleConvergenceError',
    'BranchAmbiguityError',
    'MissingArtifactError',
    'StageBlockedError',
    'IllConditionedWarning'
]
