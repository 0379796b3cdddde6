"""
Utilities module for the fractional exterior-value laboratory
"""

from .hashing import canonical_hash, canonical_json, file_hash
from .containers import (
    ContainerError, read_container, read_csv, write_container, write_csv, write_json
)
from .manifest import RunManifest, read_manifest

__all__ = [
    'canonical_hash',
    'canonical_json',
    'file_hash',
    'ContainerError',
    'read_container',
    'read_csv',
    'write_container',
    'write_csv',
    'write_json',
    'RunManifest',
    'read_manifest'
]
