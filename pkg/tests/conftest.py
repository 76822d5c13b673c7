import numpy as np
import pytest

from fsibem.mesh import build_cube_mesh, extract_boundary


@pytest.fixture(scope="session")
def mesh1():
    return build_cube_mesh(1)


@pytest.fixture(scope="session")
def surf1(mesh1):
    return extract_boundary(mesh1)


@pytest.fixture(scope="session")
def mesh2():
    return build_cube_mesh(2)


@pytest.fixture(scope="session")
def surf2(mesh2):
    return extract_boundary(mesh2)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
