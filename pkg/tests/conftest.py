# conftest.py

import numpy as np
import pytest

from core.biot import assemble_operators
from core.fem import build_dof_maps
from core.mesh import build_structured_tet_mesh
from core.params import MaterialParams, SolverConfig
from studies.manufactured import ManufacturedCase


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run the slow convergence study")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(scope="session")
def params():
    return MaterialParams()


@pytest.fixture(scope="session")
def mesh2():
    return build_structured_tet_mesh(2)


@pytest.fixture(scope="session")
def mesh4():
    return build_structured_tet_mesh(4)


@pytest.fixture(scope="session")
def dofs2(mesh2):
    return build_dof_maps(mesh2)


@pytest.fixture(scope="session")
def dofs4(mesh4):
    return build_dof_maps(mesh4)


@pytest.fixture(scope="session")
def case(params):
    return ManufacturedCase(params=params)


@pytest.fixture(scope="session")
def ops4(mesh4, params):
    return assemble_operators(mesh4, params, SolverConfig())


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
