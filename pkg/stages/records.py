"""
Persistence of DN records between stages
"""
import logging
from pathlib import Path
from typing import Union

from models.space_grid import NodeClass
from numerics.dnmap import DNRecord, Flavor, SourceBasis
from numerics.errors import GeometryError, MissingArtifactError
from utils.containers import read_container, write_container

logger = logging.getLogger(__name__)


def save_record(path: Union[str, Path], record: DNRecord) -> str:
    return write_container(path, record.measurements, record.header())


def load_record(path: Union[str, Path], basis: SourceBasis, s: float, stage: str = "") -> DNRecord:
    """Read a record and rebind it to the experiment's grid and basis

    The stored geometry hash, mesh and basis must match the experiment; a
    record written for another configuration is rejected.
    """
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(str(path), stage)
    measurements, header = read_container(path)
    grid, mesh = basis.grid, basis.mesh
    if header.get("geometry_hash") != grid.geometry_hash:
        raise GeometryError(f"{path} was recorded on a different geometry")
    expected = {"N_t": mesh.N_t, "T": mesh.T, "alpha": mesh.alpha, "s": s, "basis": basis.describe()}
    for key, value in expected.items():
        if header.get(key) != value:
            raise GeometryError(f"{path} has {key}={header.get(key)!r}, experiment has {value!r}")
    flavor = Flavor(header["flavor"])
    logger.debug(f"Loaded {flavor.value} record {path} with shape {measurements.shape}")
    return DNRecord(flavor=flavor, grid=grid, mesh=mesh, s=s, basis=basis,
                    receivers=NodeClass(header["receivers"]), measurements=measurements,
                    geometry_hash=header["geometry_hash"])
