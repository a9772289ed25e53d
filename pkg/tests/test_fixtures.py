import hashlib

import numpy as np
import pytest

from fss import fixtures
from fss.bvh import Bvh
from fss.mesh import load_mesh

from conftest import mesh_volume


@pytest.mark.parametrize("name", list(fixtures.FIXTURES))
def test_fixture_watertight_and_oriented(name):
    mesh = fixtures.FIXTURES[name]()
    assert mesh.watertight, name
    assert mesh_volume(mesh) > 0.0, name
    lo, hi = mesh.bbox
    assert np.all(lo >= -1.0 - 1e-9) and np.all(hi <= 1.0 + 1e-9), name


def test_fixture_euler_characteristics():
    assert fixtures.make_cube().euler_characteristic() == 2
    assert fixtures.make_icosphere().euler_characteristic() == 2
    assert fixtures.make_torus().euler_characteristic() == 0  # genus 1
    assert fixtures.make_thin_fin().euler_characteristic() == 2


def test_fin_thickness_parameter(thin_fin_bvh):
    t, ok = thin_fin_bvh.local_thickness_batch(
        np.array([[0.5, 0.1, 0.01], [0.7, -0.15, -0.01]]),
        np.array([[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]]),
    )
    assert ok.all()
    assert np.allclose(t, fixtures.FIN_THICKNESS, atol=1e-4)


def test_fin_face_mask(thin_fin):
    mask = fixtures.fin_face_mask(thin_fin)
    assert mask.sum() == 4  # two plate quads, two triangles each
    tri = thin_fin.triangle_vertices()[mask]
    assert np.all(tri[:, :, 0] >= fixtures.FIN_BODY_X_END - 1e-9)


def test_partial_fin_is_half_length():
    full = fixtures.make_thin_fin()
    part = fixtures.make_partial_fin()
    assert full.bbox[1][0] == pytest.approx(1.0)
    assert part.bbox[1][0] == pytest.approx(0.6)
    assert part.watertight


def test_wavy_slab_amplitude():
    wavy = fixtures.make_wavy_slab(amplitude=0.02)
    top = wavy.vertices[wavy.vertices[:, 2] > 0.0]
    assert top[:, 2].max() == pytest.approx(0.12, abs=1e-6)
    assert top[:, 2].min() == pytest.approx(0.08, abs=1e-6)


def test_write_fixture_set(tmp_path):
    written = fixtures.write_fixture_set(tmp_path)
    objs = sorted(p for p in tmp_path.iterdir() if p.suffix == ".obj")
    assert len(objs) == 8
    for obj in objs:
        mesh = load_mesh(obj)
        assert mesh.watertight, obj.name
        weights = fixtures.load_region_weights(
            obj.with_suffix("").parent / f"{obj.stem}.weights.txt", len(mesh.faces)
        )
        assert np.all(weights >= 0)
        if obj.stem in ("thin_fin", "partial_fin"):
            assert weights.max() == 8.0
        else:
            assert np.all(weights == 1.0)
    assert (tmp_path / "fixtures.meta.json").exists()


def test_fixture_set_byte_reproducible(tmp_path):
    dir_a = tmp_path / "a"
    dir_b = tmp_path / "b"
    fixtures.write_fixture_set(dir_a)
    fixtures.write_fixture_set(dir_b)
    for path_a in sorted(dir_a.iterdir()):
        path_b = dir_b / path_a.name
        ha = hashlib.sha256(path_a.read_bytes()).hexdigest()
        hb = hashlib.sha256(path_b.read_bytes()).hexdigest()
        assert ha == hb, path_a.name


def test_region_weight_parse_errors(tmp_path):
    path = tmp_path / "w.txt"
    path.write_text("0 1.0\n99 2.0\n")
    with pytest.raises(ValueError, match="out of range"):
        fixtures.load_region_weights(path, 10)
    path.write_text("0 -1.0\n")
    with pytest.raises(ValueError, match="negative"):
        fixtures.load_region_weights(path, 10)
