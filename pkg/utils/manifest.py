"""
Run manifests: configuration hash, artifacts, timings and check outcomes
"""
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from utils.containers import write_json
from utils.hashing import canonical_hash

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


@dataclass
class RunManifest:
    """Record of one command run, chained to the manifests of its upstream commands"""
    command: str
    config_hash: str
    artifacts: Dict[str, str] = field(default_factory=dict)
    checks: List[Dict[str, Any]] = field(default_factory=list)
    timings: Dict[str, float] = field(default_factory=dict)
    upstream: Dict[str, str] = field(default_factory=dict)
    seed: int = 0
    threads: int = 1
    passed: bool = True
    errors: List[str] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "command": self.command,
            "config_hash": self.config_hash,
            "artifacts": dict(sorted(self.artifacts.items())),
            "checks": self.checks,
            "timings": self.timings,
            "upstream": dict(sorted(self.upstream.items())),
            "seed": self.seed,
            "threads": self.threads,
            "passed": self.passed,
            "errors": self.errors,
            "warnings": self.warnings,
        }

    @property
    def artifact_digest(self) -> str:
        """Hash of the artifact table alone; identical reruns give identical digests"""
        return canonical_hash({"config": self.config_hash, "artifacts": self.artifacts})

    def write(self, directory: Union[str, Path]) -> Path:
        path = Path(directory) / MANIFEST_NAME
        write_json(path, self.to_dict())
        logger.info(f"Wrote manifest for '{self.command}' to {path}")
        return path


def read_manifest(directory: Union[str, Path]) -> Optional[Dict[str, Any]]:
    path = Path(directory) / MANIFEST_NAME
    if not path.exists():
        return None
    return json.loads(path.read_text(encoding="utf-8"))
