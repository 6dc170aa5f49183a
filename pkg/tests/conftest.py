import pathlib

import numpy as np
import pytest

from porouscity.mesh import load_msh

REPO = pathlib.Path(__file__).resolve().parent.parent
MESH_DIR = REPO / "meshes"


@pytest.fixture(scope="session")
def city_mini():
    return load_msh(MESH_DIR / "city_mini.msh")


@pytest.fixture(scope="session")
def city_coarse():
    return load_msh(MESH_DIR / "city_coarse.msh")


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
