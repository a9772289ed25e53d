import numpy as np
import pytest

from fss import fixtures
from fss.bvh import Bvh
from fss.errors import FssError
from fss.mesh import TriangleMesh
from fss.metrics import (
    chamfer,
    evaluate,
    fin_recall,
    grid_box_mask,
    normal_reprojection,
    p2s,
)
from fss.thickness import voxelize


def quad_plane(z: float, normal, half: float = 0.8) -> TriangleMesh:
    verts = np.array([
        [-half, -half, z], [half, -half, z], [half, half, z], [-half, half, z]
    ])
    faces = np.array([[0, 1, 2], [0, 2, 3]])
    normals = np.tile(np.asarray(normal, dtype=float), (4, 1))
    return TriangleMesh(verts, faces, vertex_normals=normals)


def test_chamfer_self_is_zero(icosphere):
    assert chamfer(icosphere, icosphere, n=2000, seed=1) < 1e-6


def test_chamfer_parallel_squares():
    a = quad_plane(0.0, (0, 0, 1))
    b = quad_plane(0.1, (0, 0, 1))
    assert chamfer(a, b, n=4000, seed=2) == pytest.approx(0.1, abs=1e-6)


def test_chamfer_offset_spheres():
    a = fixtures.make_icosphere(3, 1.0)
    b = fixtures.make_icosphere(3, 1.05)
    assert chamfer(a, b, n=4000, seed=3) == pytest.approx(0.05, abs=0.005)


def test_chamfer_symmetry(icosphere, torus):
    ab = chamfer(icosphere, torus, n=4000, seed=4)
    ba = chamfer(torus, icosphere, n=4000, seed=4)
    assert abs(ab - ba) / ab < 0.02


def test_chamfer_vertex_permutation_invariance(cube):
    perm = np.random.default_rng(5).permutation(len(cube.vertices))
    inv = np.empty_like(perm)
    inv[perm] = np.arange(len(perm))
    shuffled = TriangleMesh(cube.vertices[perm], inv[cube.faces])
    d = chamfer(cube, shuffled, n=2000, seed=6)
    assert d < 1e-9


def test_p2s_self_and_blob(icosphere):
    assert p2s(icosphere, icosphere, n=2000, seed=7) < 1e-6
    # reconstruction with a distant floating blob: p2s(recon, gt) inflated
    blob = fixtures.make_icosphere(1, 0.05)
    blob_v = blob.vertices + np.array([0.0, 0.0, 3.0])
    recon = TriangleMesh(
        np.vstack([icosphere.vertices, blob_v]),
        np.vstack([icosphere.faces, blob.faces + len(icosphere.vertices)]),
    )
    fwd = p2s(recon, icosphere, n=5000, seed=8)
    rev = p2s(icosphere, recon, n=5000, seed=8)
    assert fwd > rev
    # blob area share times its distance sets the inflation scale
    share = blob.face_areas.sum() / recon.face_areas.sum()
    assert fwd == pytest.approx(share * 2.0, rel=0.5)


def test_p2s_parallel_squares():
    a = quad_plane(0.0, (0, 0, 1))
    b = quad_plane(0.1, (0, 0, 1))
    assert p2s(a, b, n=3000, seed=9) == pytest.approx(0.1, abs=1e-6)


def test_normal_reprojection_self(cube):
    err, mismatch = normal_reprojection(cube, cube, resolution=64)
    assert err == 0.0
    assert mismatch == 0.0


def test_normal_reprojection_tilted_plane():
    flat = quad_plane(0.0, (0, 0, 1))
    tilt = np.pi / 3.0
    rot = np.array([
        [1, 0, 0],
        [0, np.cos(tilt), -np.sin(tilt)],
        [0, np.sin(tilt), np.cos(tilt)],
    ])
    tilted = flat.transformed(rot)
    err, _ = normal_reprojection(flat, tilted, resolution=128)
    # |n1 - n2| = 2 sin(theta/2) = 1.0 at 60 degrees
    assert err == pytest.approx(1.0, abs=1e-6)


def test_normal_reprojection_wavy_vs_flat(slab):
    wavy = fixtures.make_wavy_slab()
    err_wavy, _ = normal_reprojection(wavy, slab, resolution=128)
    err_flat, _ = normal_reprojection(slab, slab, resolution=128)
    assert err_flat == 0.0
    assert err_wavy > 0.01


def test_normal_reprojection_zero_coverage():
    a = quad_plane(0.0, (0, 0, 1), half=0.1)
    b = TriangleMesh(a.vertices + np.array([5.0, 0.0, 0.0]), a.faces.copy())
    with pytest.raises(FssError, match="coverage"):
        normal_reprojection(a, b, resolution=32)


def test_fin_recall_values(thin_fin_bvh):
    res = 96
    gt = voxelize(thin_fin_bvh, res, res, res).values
    lo, hi = fixtures.fin_region_box()
    mask = grid_box_mask(res, lo, hi)
    assert fin_recall(gt.astype(float), gt, mask) == 1.0
    assert fin_recall(np.zeros_like(gt, dtype=float), gt, mask) == 0.0


def test_fin_recall_partial_fin(thin_fin_bvh):
    res = 128
    part = fixtures.make_partial_fin()
    gt = voxelize(thin_fin_bvh, res, res, res).values
    rec = voxelize(Bvh(part), res, res, res).values
    lo, hi = fixtures.fin_region_box()
    mask = grid_box_mask(res, lo, hi)
    recall = fin_recall(rec.astype(float), gt, mask)
    # partial fin keeps x in [0.2, 0.6] of the full [0.2, 1.0]
    assert recall == pytest.approx(0.5, abs=0.05)


def test_fin_recall_empty_mask(thin_fin_bvh):
    gt = voxelize(thin_fin_bvh, 16, 16, 16).values
    with pytest.raises(FssError, match="empty"):
        fin_recall(gt.astype(float), gt, np.zeros_like(gt, dtype=bool))


def test_evaluate_report(cube):
    report = evaluate(cube, cube, n=1000, seed=10, resolution=64)
    assert report.cd == pytest.approx(0.0, abs=1e-9)
    assert report.p2s == pytest.approx(0.0, abs=1e-9)
    assert report.normal_err == 0.0
    row = report.csv_row()
    assert len(row.split(",")) == 7
    # original-unit conversion divides by the recorded scale
    report.unit_scale = 2.0
    orig = report.in_original_units()
    assert orig["cd"] == report.cd / 2.0
