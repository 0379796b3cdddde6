"""
Shared fixtures: small grids and meshes that keep every solve fast
"""
import numpy as np
import pytest

from models.space_grid import SpaceGrid, Window
from models.time_mesh import TimeMesh


@pytest.fixture
def magnetic_grid():
    """Default 1D geometry: b = 2, r = b/6, both windows on the left of B_3r"""
    return SpaceGrid(dim=1, half_width=2.0, h=0.0625)


@pytest.fixture
def close_grid():
    """Non-magnetic 1D geometry with windows at distance 0.3b from the centre"""
    return SpaceGrid(dim=1, half_width=2.0, h=0.0625, magnetic=False)


@pytest.fixture
def wide_ball_grid():
    """Unit ball as Omega, for comparisons against closed-form fractional Laplacians"""
    return SpaceGrid(dim=1, half_width=2.0, h=1.0 / 64.0, r_omega=1.0, magnetic=False,
                     window1=Window((-1.9,), (-1.5,)), window2=Window((1.5,), (1.9,)))


@pytest.fixture
def mesh():
    return TimeMesh(T=1.0, N_t=32, alpha=0.5)


@pytest.fixture
def fine_mesh():
    return TimeMesh(T=1.0, N_t=64, alpha=0.5)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
