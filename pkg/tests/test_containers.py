"""
Tests for field containers, CSV plot data and run manifests
"""
import numpy as np
import pandas as pd
import pytest

from utils.containers import (
    MAGIC, ContainerError, read_container, read_csv, write_container, write_csv, write_json,
)
from utils.hashing import file_hash
from utils.manifest import RunManifest, read_manifest


def test_container_round_trip(tmp_path, rng):
    array = rng.standard_normal((3, 5, 7))
    path = tmp_path / "field.bin"
    digest = write_container(path, array, {"kind": "dn", "s": 0.5, "sources": np.int64(3)})
    values, header = read_container(path)
    np.testing.assert_array_equal(values, array)
    assert header["shape"] == [3, 5, 7]
    assert header["kind"] == "dn"
    assert header["sources"] == 3
    assert digest == file_hash(path)
    assert path.read_bytes()[:16] == MAGIC


def test_container_header_drops_non_finite_values(tmp_path):
    path = tmp_path / "field.bin"
    write_container(path, np.zeros(2), {"condition": float("inf"), "misfit": np.nan})
    _, header = read_container(path)
    assert header["condition"] is None
    assert header["misfit"] is None


def test_identical_writes_hash_identically(tmp_path):
    array = np.linspace(0.0, 1.0, 11)
    first = write_container(tmp_path / "a.bin", array, {"b": 1, "a": 2})
    second = write_container(tmp_path / "b.bin", array, {"a": 2, "b": 1})
    assert first == second


def test_corrupt_containers_rejected(tmp_path):
    bad_magic = tmp_path / "bad.bin"
    bad_magic.write_bytes(b"NOT-A-CONTAINER!" + bytes(16))
    with pytest.raises(ContainerError):
        read_container(bad_magic)
    short = tmp_path / "short.bin"
    short.write_bytes(b"FRAC")
    with pytest.raises(ContainerError):
        read_container(short)
    truncated = tmp_path / "truncated.bin"
    write_container(truncated, np.ones(4), {})
    truncated.write_bytes(truncated.read_bytes()[:-8])
    with pytest.raises(ContainerError):
        read_container(truncated)


def test_csv_round_trip(tmp_path):
    frame = pd.DataFrame({"t": [0.0, 0.5, 1.0], "u": [0.0, 1.0 / 3.0, 2.0 / 3.0]})
    path = tmp_path / "plot.csv"
    write_csv(path, frame)
    loaded = read_csv(path)
    pd.testing.assert_frame_equal(loaded, frame)


def test_manifest_write_and_read(tmp_path):
    manifest = RunManifest(command="dnmap", config_hash="abc", artifacts={"dn.bin": "123"},
                           checks=[{"name": "duality", "passed": True}], seed=4)
    manifest.write(tmp_path)
    stored = read_manifest(tmp_path)
    assert stored["command"] == "dnmap"
    assert stored["artifacts"] == {"dn.bin": "123"}
    assert stored["seed"] == 4
    assert read_manifest(tmp_path / "elsewhere") is None


def test_artifact_digest_ignores_timings():
    first = RunManifest(command="forward", config_hash="abc", artifacts={"u.bin": "1"},
                        timings={"solve": 1.0})
    second = RunManifest(command="forward", config_hash="abc", artifacts={"u.bin": "1"},
                         timings={"solve": 2.5})
    third = RunManifest(command="forward", config_hash="abc", artifacts={"u.bin": "2"})
    assert first.artifact_digest == second.artifact_digest
    assert first.artifact_digest != third.artifact_digest


def test_json_reports_are_sanitized(tmp_path):
    path = tmp_path / "report.json"
    write_json(path, {"error": float("nan"), "cells": np.arange(3)})
    assert '"error": null' in path.read_text(encoding="utf-8")
