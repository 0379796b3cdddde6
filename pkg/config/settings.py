"""
Configuration settings for the fractional exterior-value laboratory
"""
import os
from pathlib import Path
from typing import Any, Dict

from dotenv import load_dotenv

load_dotenv()


class Settings:
    """Application settings"""

    def __init__(self):
        # Base paths
        self.BASE_DIR = Path(__file__).resolve().parent.parent
        self.OUTPUT_DIR = Path(os.getenv("LAB_OUTPUT_DIR", str(self.BASE_DIR / "runs")))
        self.LOGS_DIR = Path(os.getenv("LAB_LOGS_DIR", str(self.BASE_DIR / "logs")))

        # Execution
        self.THREADS = int(os.getenv("LAB_THREADS", "1"))
        self.SEED = int(os.getenv("LAB_SEED", "0"))
        self.MAX_RETRIES = int(os.getenv("LAB_MAX_RETRIES", "0"))

        # Solver Configuration
        self.NEWTON_MAX_ITER = int(os.getenv("LAB_NEWTON_MAX_ITER", "50"))
        self.NEWTON_TOL = float(os.getenv("LAB_NEWTON_TOL", "1e-11"))
        self.COND_WARN = float(os.getenv("LAB_COND_WARN", "1e12"))
        self.CONTROL_FLAG_THRESHOLD = float(os.getenv("LAB_CONTROL_FLAG_THRESHOLD", "0.3"))

        self.DEBUG_MODE = os.getenv("LAB_DEBUG", "false").lower() == "true"

        # Logging Configuration
        self.LOG_LEVEL = os.getenv("LAB_LOG_LEVEL", "DEBUG" if self.DEBUG_MODE else "INFO")
        self.LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


# Global settings instance
settings = Settings()


# Ensure required directories exist
def create_directories():
    """Create necessary directories if they don't exist"""
    for directory in (settings.OUTPUT_DIR, settings.LOGS_DIR):
        directory.mkdir(parents=True, exist_ok=True)


# Stage configuration
STAGE_CONFIGS: Dict[str, Dict[str, Any]] = {
    "verify": {
        "name": "Identity Verification Stage",
        "description": "Checks discrete calculus and operator identities",
        "artifact": "verify",
        "requires": [],
        "max_retries": 0
    },
    "forward": {
        "name": "Forward Solve Stage",
        "description": "Solves forward, Riemann-Liouville and dual problems and certifies them",
        "artifact": "forward",
        "requires": [],
        "max_retries": 0
    },
    "dnmap": {
        "name": "Dirichlet-to-Neumann Stage",
        "description": "Assembles forward and dual DN records and checks their duality",
        "artifact": "dnmap",
        "requires": [],
        "max_retries": 0
    },
    "invert_q": {
        "name": "Potential Recovery Stage",
        "description": "Recovers the electric potential from a DN record",
        "artifact": "invert_q",
        "requires": ["dnmap"],
        "max_retries": 0
    },
    "invert_a": {
        "name": "Magnetic Recovery Stage",
        "description": "Recovers the magnetic potential up to sign, then the electric potential",
        "artifact": "invert_a",
        "requires": ["dnmap"],
        "max_retries": 0
    },
    "invert_semilinear": {
        "name": "Semilinear Recovery Stage",
        "description": "Recovers semilinear coefficients by successive linearization",
        "artifact": "invert_semilinear",
        "requires": [],
        "max_retries": 0
    },
    "runge": {
        "name": "Runge Approximation Stage",
        "description": "Synthesizes exterior controls for interior targets",
        "artifact": "runge",
        "requires": [],
        "max_retries": 0
    }
}
