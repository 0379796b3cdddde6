"""
Stage Result Models - Simple and consistent interface for stage results
"""
from dataclasses import dataclass
from datetime import datetime
from typing import Any, Dict, List, Optional


@dataclass
class CheckOutcome:
    """One named numerical check with its measured value and tolerance"""
    name: str
    value: float
    tolerance: float
    passed: bool
    detail: str = ""

    def as_dict(self) -> Dict[str, Any]:
        return {"name": self.name, "value": self.value, "tolerance": self.tolerance,
                "passed": self.passed, "detail": self.detail}


class StageResult:
    """Simple stage result used by all stages"""

    def __init__(self):
        self.checks: List[CheckOutcome] = []
        self.errors: List[str] = []
        self.warnings: List[str] = []
        self.processing_steps: List[Dict[str, Any]] = []
        self.artifacts: Dict[str, str] = {}
        self.metrics: Dict[str, Any] = {}
        self.processing_time: Optional[float] = None

    def add_error(self, error: str) -> None:
        """Add an error message"""
        self.errors.append(error)

    def add_warning(self, warning: str) -> None:
        """Add a warning message"""
        self.warnings.append(warning)

    def add_check(self, name: str, value: float, tolerance: float, passed: Optional[bool] = None,
                  detail: str = "") -> CheckOutcome:
        """Record a check; by default it passes when value <= tolerance"""
        value = float(value)
        if passed is None:
            passed = bool(value <= tolerance)
        outcome = CheckOutcome(name=name, value=value, tolerance=float(tolerance),
                               passed=bool(passed), detail=detail)
        self.checks.append(outcome)
        return outcome

    def add_artifact(self, name: str, path: str) -> None:
        self.artifacts[name] = path

    def add_processing_step(self, stage: str, action: str, result: str) -> None:
        """Add a processing step"""
        self.processing_steps.append({
            "stage": stage,
            "action": action,
            "result": result,
            "timestamp": datetime.now().isoformat()
        })

    def checks_passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def is_successful(self) -> bool:
        """Check if the stage ran without errors and every check passed"""
        return len(self.errors) == 0 and self.checks_passed()

    def get_summary(self) -> Dict[str, Any]:
        """Get a summary of the stage result"""
        return {
            "check_count": len(self.checks),
            "failed_checks": [c.name for c in self.checks if not c.passed],
            "error_count": len(self.errors),
            "warning_count": len(self.warnings),
            "processing_steps": len(self.processing_steps),
            "successful": self.is_successful(),
            "processing_time": self.processing_time
        }
