"""
Check tolerances for identity verification and recovery acceptance
"""
from enum import Enum
from typing import Any, Dict, List


class CheckKind(Enum):
    SEMIGROUP = "semigroup"
    INTEGRATION_BY_PARTS = "integration_by_parts"
    CAPUTO_POWER = "caputo_power"
    CONVEXITY = "convexity"
    SYMMETRY = "symmetry"
    CONSTANT = "constant"
    EXTERIOR_COUPLING = "exterior_coupling"
    GAUGE = "gauge"
    CERTIFICATE = "certificate"
    DUALITY = "duality"
    RECOVERY = "recovery"
    MAGNETIC_RECOVERY = "magnetic_recovery"
    SEMILINEAR_RECOVERY = "semilinear_recovery"
    RUNGE = "runge"


# Tolerance Configuration
TOLERANCES: Dict[str, Dict[str, Any]] = {
    CheckKind.SEMIGROUP.value: {"value": 1e-2, "kind": "absolute"},
    CheckKind.INTEGRATION_BY_PARTS.value: {"value": 5e-2, "kind": "absolute"},
    CheckKind.CAPUTO_POWER.value: {"value": 5e-2, "kind": "relative"},
    CheckKind.CONVEXITY.value: {"value": 1e-12, "kind": "absolute"},
    CheckKind.SYMMETRY.value: {"value": 1e-12, "kind": "relative"},
    CheckKind.CONSTANT.value: {"value": 1e-10, "kind": "relative"},
    CheckKind.EXTERIOR_COUPLING.value: {"value": 0.0, "kind": "absolute"},
    CheckKind.GAUGE.value: {"value": 0.0, "kind": "absolute"},
    CheckKind.CERTIFICATE.value: {"value": 0.0, "kind": "absolute"},
    CheckKind.DUALITY.value: {"value": 5e-3, "kind": "relative"},
    CheckKind.RECOVERY.value: {"value": 0.2, "kind": "relative"},
    CheckKind.MAGNETIC_RECOVERY.value: {"value": 0.25, "kind": "relative"},
    CheckKind.SEMILINEAR_RECOVERY.value: {"value": 0.25, "kind": "relative"},
    CheckKind.RUNGE.value: {"value": 1e-9, "kind": "absolute"},
}

# Orders near the edges of (0, 1) converge slowly; these factors widen checks there
EDGE_WIDENING = {
    "alpha_above": 0.9,
    "s_below": 0.2,
    "factor": 10.0,
}


def get_tolerance(kind: CheckKind, alpha: float = 0.5, s: float = 0.5) -> float:
    """Tolerance for a check, widened for orders near the edges of (0, 1)"""
    value = TOLERANCES[kind.value]["value"]
    if alpha > EDGE_WIDENING["alpha_above"] or s < EDGE_WIDENING["s_below"]:
        value *= EDGE_WIDENING["factor"]
    return value


def get_tolerance_kind(kind: CheckKind) -> str:
    return TOLERANCES[kind.value]["kind"]


def get_check_names() -> List[str]:
    return list(TOLERANCES)
