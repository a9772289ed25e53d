import numpy as np
import pytest

from fss import fixtures
from fss.bvh import Bvh
from fss.mesh import sample_surface


def test_bvh_structure_invariants(icosphere_bvh):
    b = icosphere_bvh
    seen = np.concatenate([faces for _, faces in b.leaf_faces()])
    # every face in exactly one leaf
    assert len(seen) == len(b.mesh.faces)
    assert len(np.unique(seen)) == len(b.mesh.faces)
    # child AABBs contained in parents
    for node in range(len(b.node_lo)):
        left = b.node_left[node]
        if left < 0:
            continue
        for child in (left, b.node_right[node]):
            assert np.all(b.node_lo[child] >= b.node_lo[node] - 1e-12)
            assert np.all(b.node_hi[child] <= b.node_hi[node] + 1e-12)


def test_raycast_cube(cube_bvh):
    hits = cube_bvh.raycast([0.0, 0.0, -2.0], [0.0, 0.0, 1.0])
    assert len(hits) == 2
    assert hits[0].t == pytest.approx(1.5, abs=1e-9)
    assert hits[0].entering
    assert hits[1].t == pytest.approx(2.5, abs=1e-9)
    assert not hits[1].entering


def test_raycast_miss(cube_bvh):
    assert cube_bvh.raycast([2.0, 2.0, -2.0], [0.0, 0.0, 1.0]) == []


def test_raycast_torus(torus_bvh):
    # through the hole axis: no surface crossed
    assert len(torus_bvh.raycast([0.0, 0.0, -2.0], [0.0, 0.0, 1.0])) == 0
    # through the tube: analytic ring torus gives exactly two crossings
    hits = torus_bvh.raycast([0.75, 0.0, -2.0], [0.0, 0.0, 1.0])
    assert len(hits) == 2
    # analytic crossing depths for the tube circle at the major radius
    assert hits[0].t == pytest.approx(2.0 - 0.25, abs=5e-3)
    assert hits[1].t == pytest.approx(2.0 + 0.25, abs=5e-3)


def test_is_inside_cube(cube_bvh):
    assert cube_bvh.is_inside([0.0, 0.0, 0.0])
    assert not cube_bvh.is_inside([0.0, 0.0, 0.9])


def test_is_inside_vs_analytic_sphere(icosphere_bvh):
    rng = np.random.default_rng(17)
    pts = rng.uniform(-1.2, 1.2, (10000, 3))
    inside = icosphere_bvh.is_inside_batch(pts)
    r = np.linalg.norm(pts, axis=1)
    # exclude one 256-grid voxel around the surface (covers chordal sag too)
    keep = np.abs(r - 1.0) > 2.0 / 256
    agreement = np.mean(inside[keep] == (r[keep] < 1.0))
    assert agreement >= 0.999


def test_parity_flips_along_rays(icosphere_bvh):
    # walking along a ray, insideness flips exactly at the crossings
    rng = np.random.default_rng(5)
    for _ in range(50):
        origin = rng.uniform(-1.5, -1.2, 3)
        direction = rng.normal(size=3)
        direction /= np.linalg.norm(direction)
        hits = icosphere_bvh.raycast(origin, direction)
        ts = [h.t for h in hits]
        probes = np.concatenate([[0.0], ts])
        mids = 0.5 * (probes[:-1] + probes[1:])
        if len(ts):
            mids = np.append(mids, ts[-1] + 0.1)
        states = icosphere_bvh.is_inside_batch(origin[None, :] + mids[:, None] * direction)
        for k in range(1, len(states)):
            assert states[k] != states[k - 1]


def test_closest_point_from_origin(icosphere_bvh):
    point, dist, normal, fid = icosphere_bvh.closest_point(np.zeros(3))
    # oracle: minimum over faces of the origin-to-plane distance (the
    # closest feature of a convex tessellated sphere seen from its center)
    mesh = icosphere_bvh.mesh
    plane_d = np.einsum("nd,nd->n", mesh.face_normals, mesh.vertices[mesh.faces[:, 0]])
    expected = float(np.min(plane_d))
    assert dist == pytest.approx(expected, abs=1e-9)
    assert 0.99 < dist < 1.0


def test_closest_point_on_vertex(cube_bvh):
    v = cube_bvh.mesh.vertices[3]
    point, dist, normal, fid = cube_bvh.closest_point(v)
    assert dist == pytest.approx(0.0, abs=1e-12)


def test_closest_point_above_cube(cube_bvh):
    point, dist, normal, fid = cube_bvh.closest_point(np.array([0.0, 0.0, 0.7]))
    assert np.allclose(point, [0.0, 0.0, 0.5], atol=1e-9)
    assert dist == pytest.approx(0.2, abs=1e-12)


def test_closest_point_lower_bound_property(torus_bvh):
    rng = np.random.default_rng(3)
    pts = rng.uniform(-1, 1, (50, 3))
    _, dist, _, _ = torus_bvh.closest_point_batch(pts)
    surf = sample_surface(torus_bvh.mesh, 100, seed=8)
    for i, p in enumerate(pts):
        d_samples = np.linalg.norm(surf.positions - p, axis=1)
        assert dist[i] <= d_samples.min() + 1e-12


def test_closest_batch_matches_single(icosphere_bvh):
    rng = np.random.default_rng(23)
    pts = rng.uniform(-1.1, 1.1, (64, 3))
    _, dist, _, _ = icosphere_bvh.closest_point_batch(pts)
    for i in (0, 7, 33, 63):
        _, d_single, _, _ = icosphere_bvh.closest_point(pts[i])
        assert dist[i] == pytest.approx(d_single, abs=1e-12)


def test_local_thickness_slab(slab_bvh):
    t, ok = slab_bvh.local_thickness_batch(
        np.array([[0.0, 0.0, 0.1]]), np.array([[0.0, 0.0, 1.0]])
    )
    assert ok[0]
    assert t[0] == pytest.approx(0.2, abs=1e-6)


def test_local_thickness_sphere(icosphere_bvh):
    surf = sample_surface(icosphere_bvh.mesh, 20, seed=2)
    t, ok = icosphere_bvh.local_thickness_batch(surf.positions, surf.normals)
    assert ok.all()
    assert np.all(np.abs(t - 2.0) < 0.02)


def test_local_thickness_fin(thin_fin_bvh):
    t, ok = thin_fin_bvh.local_thickness_batch(
        np.array([[0.6, 0.0, 0.01]]), np.array([[0.0, 0.0, 1.0]])
    )
    assert ok[0]
    assert t[0] == pytest.approx(0.02, abs=1e-4)


def test_local_thickness_bounded_by_diagonal(torus_bvh):
    surf = sample_surface(torus_bvh.mesh, 200, seed=4)
    t, ok = torus_bvh.local_thickness_batch(surf.positions, surf.normals)
    assert np.all(t[ok] <= torus_bvh.mesh.bbox_diagonal)
