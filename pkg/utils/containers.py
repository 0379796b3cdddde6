"""
Binary field containers and CSV plot data

A container is a 16-byte magic, a little-endian uint32 format version, a
uint32 header length, a UTF-8 JSON header and a little-endian float64
payload in row-major order.
"""
import json
import logging
import struct
from pathlib import Path
from typing import Any, Dict, Tuple, Union

import numpy as np
import pandas as pd

from numerics.errors import LabError
from utils.hashing import canonical_json, file_hash

logger = logging.getLogger(__name__)

MAGIC = b"FRACLAB-FIELD\x00\x00\x00"
FORMAT_VERSION = 1
_PREFIX = struct.Struct("<16sII")


class ContainerError(LabError):
    """A container file is malformed or has an unsupported version"""


def write_container(path: Union[str, Path], array: np.ndarray, header: Dict[str, Any]) -> str:
    """Write one array with its metadata; returns the SHA-256 of the file"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = np.ascontiguousarray(array, dtype="<f8")
    meta = _jsonable(dict(header))
    meta["shape"] = list(data.shape)
    encoded = canonical_json(meta).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_PREFIX.pack(MAGIC, FORMAT_VERSION, len(encoded)))
        fh.write(encoded)
        fh.write(data.tobytes(order="C"))
    logger.debug(f"Wrote container {path} with shape {data.shape}")
    return file_hash(path)


def read_container(path: Union[str, Path]) -> Tuple[np.ndarray, Dict[str, Any]]:
    raw = Path(path).read_bytes()
    if len(raw) < _PREFIX.size:
        raise ContainerError(f"{path} is too short to be a container")
    magic, version, header_len = _PREFIX.unpack_from(raw)
    if magic != MAGIC:
        raise ContainerError(f"{path} does not start with the container magic")
    if version != FORMAT_VERSION:
        raise ContainerError(f"{path} has unsupported container version {version}")
    start = _PREFIX.size
    header = json.loads(raw[start:start + header_len].decode("utf-8"))
    payload = np.frombuffer(raw[start + header_len:], dtype="<f8")
    shape = tuple(header["shape"])
    if payload.size != int(np.prod(shape)):
        raise ContainerError(f"{path} payload does not match shape {shape}")
    return payload.reshape(shape).astype(float), header


def write_csv(path: Union[str, Path], frame: pd.DataFrame) -> str:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
    return file_hash(path)


def read_csv(path: Union[str, Path]) -> pd.DataFrame:
    return pd.read_csv(path)


def _jsonable(value: Any) -> Any:
    """Numpy scalars and arrays to plain JSON types; non-finite floats become null"""
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (np.integer, np.bool_)):
        return value.item()
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if np.isfinite(value) else None
    return value


def write_json(path: Union[str, Path], payload: Dict[str, Any]) -> str:
    """Write a structured document (reports, manifests); returns the SHA-256 of the file"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True), encoding="utf-8")
    return file_hash(path)
