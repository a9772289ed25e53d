import numpy as np
import pytest

from fss import fixtures
from fss.bvh import Bvh


@pytest.fixture(scope="session")
def cube():
    return fixtures.make_cube()


@pytest.fixture(scope="session")
def cube_bvh(cube):
    return Bvh(cube)


@pytest.fixture(scope="session")
def icosphere():
    return fixtures.make_icosphere()


@pytest.fixture(scope="session")
def icosphere_bvh(icosphere):
    return Bvh(icosphere)


@pytest.fixture(scope="session")
def slab():
    return fixtures.make_slab()


@pytest.fixture(scope="session")
def slab_bvh(slab):
    return Bvh(slab)


@pytest.fixture(scope="session")
def torus():
    return fixtures.make_torus()


@pytest.fixture(scope="session")
def torus_bvh(torus):
    return Bvh(torus)


@pytest.fixture(scope="session")
def cylinder():
    return fixtures.make_cylinder()


@pytest.fixture(scope="session")
def cylinder_bvh(cylinder):
    return Bvh(cylinder)


@pytest.fixture(scope="session")
def thin_fin():
    return fixtures.make_thin_fin()


@pytest.fixture(scope="session")
def thin_fin_bvh(thin_fin):
    return Bvh(thin_fin)


def mesh_volume(mesh) -> float:
    tri = mesh.triangle_vertices()
    return float(np.einsum("nd,nd->n", tri[:, 0], np.cross(tri[:, 1], tri[:, 2])).sum() / 6.0)
