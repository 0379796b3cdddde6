"""
Stable hashes for configurations, geometries and artifacts
"""
import hashlib
import json
from pathlib import Path
from typing import Any, Union


def canonical_json(payload: Any) -> str:
    """Serialize with sorted keys and no whitespace so equal payloads hash equally"""
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), allow_nan=False)


def canonical_hash(payload: Any) -> str:
    return hashlib.sha256(canonical_json(payload).encode("utf-8")).hexdigest()


def file_hash(path: Union[str, Path]) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()
