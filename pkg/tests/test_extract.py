import numpy as np
import pytest

from fss.extract import DenseField, marching_cubes, sample_dense_grid
from fss.field import TriGrid, sigmoid


def sphere_field(resolution: int, radius: float = 0.8) -> DenseField:
    pitch = 2.0 / resolution
    coords = -1.0 + (np.arange(resolution) + 0.5) * pitch
    z, y, x = np.meshgrid(coords, coords, coords, indexing="ij")
    r = np.sqrt(x * x + y * y + z * z)
    occ = np.clip((radius - r) / pitch + 0.5, 0.0, 1.0)  # one-voxel linear band
    return DenseField(values=occ, origin=np.array([coords[0]] * 3),
                      pitch=np.array([pitch] * 3))


def test_sample_dense_grid_counts():
    grid = TriGrid(np.zeros((4, 4, 4)))
    field = sample_dense_grid(grid, 2)
    assert field.values.shape == (2, 2, 2)
    assert np.allclose(field.values, 0.5)


def test_sample_dense_grid_constant_model():
    grid = TriGrid(np.full((6, 6, 6), 1.7))
    field = sample_dense_grid(grid, 9)
    assert np.allclose(field.values, sigmoid(np.array(1.7)))


def test_mc_sphere_area_and_fidelity():
    field = sphere_field(128)
    mesh = marching_cubes(field, iso=0.5)
    assert mesh.watertight
    analytic = 4.0 * np.pi * 0.8**2
    assert abs(mesh.face_areas.sum() - analytic) / analytic < 0.03
    # every vertex re-queries to the iso value
    vals = field.query_trilinear(mesh.vertices)
    assert np.max(np.abs(vals - 0.5)) < 0.02
    # outward orientation: occupancy decreasing outward
    centroids = mesh.triangle_vertices().mean(axis=1)
    dots = np.einsum("nd,nd->n", mesh.face_normals, centroids)
    assert np.all(dots > 0)


def test_mc_empty_field():
    field = DenseField(values=np.zeros((8, 8, 8)), origin=np.full(3, -0.875),
                       pitch=np.full(3, 0.25))
    mesh = marching_cubes(field)
    assert len(mesh.faces) == 0


def test_mc_all_inside_gives_boundary_shell():
    res = 16
    pitch = 2.0 / res
    field = DenseField(values=np.ones((res, res, res)), origin=np.full(3, -1 + pitch / 2),
                       pitch=np.full(3, pitch))
    mesh = marching_cubes(field)
    assert len(mesh.faces) > 0
    assert mesh.watertight
    # shell hugs the domain boundary
    assert np.all(np.abs(mesh.vertices).max(axis=0) > 0.9)


def test_mc_iso_shift_stability():
    field = sphere_field(64)
    mesh_a = marching_cubes(field, iso=0.5)
    shifted = DenseField(values=np.clip(field.values + 0.001, 0.0, 1.0),
                         origin=field.origin, pitch=field.pitch)
    mesh_b = marching_cubes(shifted, iso=0.5)
    # same topology, vertices within a hundredth of a voxel
    assert len(mesh_a.vertices) == len(mesh_b.vertices)
    delta = np.abs(mesh_a.vertices - mesh_b.vertices).max()
    assert delta < 0.01 * field.pitch[0] + 1e-4


def test_mc_watertight_on_trained_style_field():
    rng = np.random.default_rng(20)
    grid = TriGrid(rng.normal(0, 2, size=(12, 12, 12)))
    field = sample_dense_grid(grid, 24)
    mesh = marching_cubes(field)
    if len(mesh.faces):
        assert mesh.watertight


def test_mc_rejects_out_of_range():
    from fss.errors import FssError

    field = DenseField(values=np.full((4, 4, 4), 2.0), origin=np.zeros(3),
                       pitch=np.full(3, 0.5))
    with pytest.raises(FssError, match="\\[0, 1\\]"):
        marching_cubes(field)


def test_dense_grid_performance_budget(slab, slab_bvh):
    import time

    from fss.schemes import SchemeConfig, fss_scheme
    from fss.field import TrainConfig, build_model, train

    ss = fss_scheme(slab, slab_bvh, SchemeConfig(total_budget=500), seed=0)
    cfg = TrainConfig(steps=50, variant="trigrid", grid_dims=(32, 32, 32),
                      lambda_nsp=0.0, lambda_mtl=0.0)
    model = build_model(cfg)
    model, _ = train(model, ss, None, cfg)
    t0 = time.time()
    field = sample_dense_grid(model, 128)
    assert time.time() - t0 < 60.0
    assert field.values.shape == (128, 128, 128)
