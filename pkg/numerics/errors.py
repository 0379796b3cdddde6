"""
Error hierarchy for the fractional exterior-value laboratory
"""
from typing import Optional


class LabError(Exception):
    """Base class for every error raised by the laboratory"""


class DomainError(LabError, ValueError):
    """An argument lies outside the domain of a kernel or special function"""


class GeometryError(LabError, ValueError):
    """A grid, window or record violates a geometric invariant"""


class ConfigError(LabError, ValueError):
    """An experiment configuration was rejected at parse time"""


class SingularStepError(LabError):
    """The implicit step matrix is not positive definite"""

    def __init__(self, message: str, step: Optional[int] = None):
        super().__init__(message)
        self.step = step


class NewtonDivergenceError(LabError):
    """The per-step Newton iteration of the semilinear solver failed to converge"""

    def __init__(self, message: str, residual: float, iterations: int, step: Optional[int] = None):
        super().__init__(f"{message} (residual={residual:.3e}, iterations={iterations}, step={step})")
        self.residual = residual
        self.iterations = iterations
        self.step = step


class SourceSolveError(LabError):
    """A forward or dual solve failed while assembling a Dirichlet-to-Neumann record"""

    def __init__(self, source_index: int, cause: Exception):
        super().__init__(f"Source {source_index} failed: {cause}")
        self.source_index = source_index
        self.cause = cause


class OracleConvergenceError(LabError):
    """A reference quadrature did not reach its target accuracy"""

    def __init__(self, message: str, previous: float, last: float):
        super().__init__(f"{message} (last extrapolants {previous!r}, {last!r})")
        self.previous = previous
        self.last = last


class BranchAmbiguityError(LabError):
    """Phase aliasing: |d.A| exceeds pi for every sampled offset"""


class MissingArtifactError(LabError, FileNotFoundError):
    """A downstream command could not find the artifact of an upstream command"""

    def __init__(self, artifact: str, stage: str):
        super().__init__(f"Stage '{stage}' requires missing upstream artifact '{artifact}'")
        self.artifact = artifact
        self.stage = stage


class StageBlockedError(LabError):
    """A successive-linearization stage was blocked by the failure of an earlier stage"""


class IllConditionedWarning(UserWarning):
    """Normal equations exceeded the configured condition-number threshold"""
