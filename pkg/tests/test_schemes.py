import hashlib
import math

import numpy as np
import pytest

from fss import fixtures
from fss.bvh import Bvh
from fss.labels import omni_label_batch
from fss.schemes import (
    Kind,
    SchemeConfig,
    allocate_budget,
    dos_scheme,
    fss_scheme,
    gen_counters,
    gen_twinned,
    label_ambiguity_ratio,
    load_sample_set,
    save_sample_set,
    spatial_scheme,
)
from fss.errors import BinaryFormatError
from fss.mesh import sample_surface


@pytest.fixture(scope="module")
def cfg():
    return SchemeConfig(total_budget=8000)


# ---------------------------------------------------------------------------
# spatial
# ---------------------------------------------------------------------------

def test_spatial_counts(cube, cube_bvh, cfg):
    ss = spatial_scheme(cube, cube_bvh, cfg, seed=1)
    counts = ss.kind_counts()
    assert counts["DISPLACED"] == 7500
    assert counts["UNIFORM_BOX"] == 500
    assert len(ss) == 8000


def test_spatial_thin_fin_mostly_outside(thin_fin, thin_fin_bvh):
    # displaced points near the fin plate land outside far more often than
    # points near the thick body
    cfg = SchemeConfig(total_budget=4000)
    ss = spatial_scheme(thin_fin, thin_fin_bvh, cfg, seed=2)
    pts = ss.positions[ss.kinds == Kind.DISPLACED]
    labels = ss.labels[ss.kinds == Kind.DISPLACED]
    near_fin = (pts[:, 0] > 0.25) & (np.abs(pts[:, 2]) < 0.1) & (np.abs(pts[:, 1]) < 0.25)
    near_body = pts[:, 0] < 0.1
    inside_rate_fin = labels[near_fin].mean()
    inside_rate_body = labels[near_body].mean()
    assert inside_rate_fin < 0.5 * inside_rate_body


def test_spatial_sigma_zero_limit(icosphere, icosphere_bvh):
    cfg = SchemeConfig(total_budget=2000)
    cfg.spatial.sigma = 1e-12
    cfg.spatial.uniform_ratio = 0.0
    ss = spatial_scheme(icosphere, icosphere_bvh, cfg, seed=3)
    inside_fraction = ss.labels.mean()
    assert 0.45 <= inside_fraction <= 0.55


# ---------------------------------------------------------------------------
# dos
# ---------------------------------------------------------------------------

def test_dos_displacement_is_z_only(cube, cube_bvh, cfg):
    ss = dos_scheme(cube, cube_bvh, cfg, seed=4)
    base = sample_surface(cube, cfg.total_budget, seed=_stream_seed(4, 1))
    assert np.array_equal(ss.positions[:, :2], base.positions[:, :2])
    assert not np.array_equal(ss.positions[:, 2], base.positions[:, 2])


def _stream_seed(seed, stream):
    from fss.schemes import _sub_seed

    return _sub_seed(seed, stream)


def test_dos_label_formula(slab, slab_bvh):
    cfg = SchemeConfig()
    # displaced +0.02 outward along z above the flat top -> 0.3
    from fss.labels import camera_label

    assert camera_label(slab_bvh, [0.0, 0.0, 0.12], 0.05) == pytest.approx(0.3, abs=1e-9)


def test_dos_ambiguity_on_cylinder(cylinder_bvh, cfg):
    ratio = label_ambiguity_ratio(cylinder_bvh, cfg, seed=5)
    assert ratio >= 3.0


# ---------------------------------------------------------------------------
# fss
# ---------------------------------------------------------------------------

def test_fss_budget_counts(thin_fin, thin_fin_bvh, cfg):
    ss = fss_scheme(thin_fin, thin_fin_bvh, cfg, seed=7)
    counts = ss.kind_counts()
    assert counts["COUNTER_PRIMARY"] == 600
    assert counts["COUNTER_SECONDARY"] == 600
    assert counts["TWIN_A"] == counts["TWIN_B"] == 2040
    assert counts["ANCHOR"] == 680
    assert counts["CHILD_ANCHOR"] == 2040
    assert len(ss) == 8000


def test_fss_twin_midpoints_on_surface(thin_fin_bvh, thin_fin, cfg):
    ss = fss_scheme(thin_fin, thin_fin_bvh, cfg, seed=7)
    a = ss.kinds == Kind.TWIN_A
    mid = 0.5 * (ss.positions[a] + ss.positions[ss.twin_ids[a]])
    _, dist, _, _ = thin_fin_bvh.closest_point_batch(mid)
    assert np.all(dist < 1e-3)


def test_fss_twin_involution(thin_fin, thin_fin_bvh, cfg):
    ss = fss_scheme(thin_fin, thin_fin_bvh, cfg, seed=9)
    twin_kinds = (Kind.TWIN_A, Kind.TWIN_B, Kind.COUNTER_PRIMARY, Kind.COUNTER_SECONDARY)
    sel = np.isin(ss.kinds, [int(k) for k in twin_kinds])
    idx = np.nonzero(sel)[0]
    for i in idx:
        j = ss.twin_ids[i]
        assert j != i
        assert ss.twin_ids[j] == i
    # pair kinds match up
    a_idx = np.nonzero(ss.kinds == Kind.TWIN_A)[0]
    assert np.all(ss.kinds[ss.twin_ids[a_idx]] == Kind.TWIN_B)
    p_idx = np.nonzero(ss.kinds == Kind.COUNTER_PRIMARY)[0]
    assert np.all(ss.kinds[ss.twin_ids[p_idx]] == Kind.COUNTER_SECONDARY)


def test_fss_determinism(thin_fin, thin_fin_bvh, cfg):
    a = fss_scheme(thin_fin, thin_fin_bvh, cfg, seed=11)
    b = fss_scheme(thin_fin, thin_fin_bvh, cfg, seed=11)
    assert np.array_equal(a.positions, b.positions)
    assert np.array_equal(a.labels, b.labels)
    assert np.array_equal(a.normals, b.normals)
    assert np.array_equal(a.kinds, b.kinds)
    assert np.array_equal(a.twin_ids, b.twin_ids)


def test_fss_budget_conservation_random_budgets(slab, slab_bvh):
    rng = np.random.default_rng(0)
    for budget in (8000, 4001, 13, 2, 777):
        cfg = SchemeConfig(total_budget=int(budget))
        ss = fss_scheme(slab, slab_bvh, cfg, seed=int(rng.integers(1000)))
        assert len(ss) == budget
        counts = ss.kind_counts()
        assert sum(counts.values()) == budget


def test_fss_inside_twin_stays_inside_on_fin(thin_fin, thin_fin_bvh, cfg):
    ss = fss_scheme(thin_fin, thin_fin_bvh, cfg, seed=13)
    b_idx = ss.kinds == Kind.TWIN_B  # inner twins
    pts = ss.positions[b_idx]
    on_fin = (pts[:, 0] > 0.25) & (np.abs(pts[:, 2]) < 0.011)
    inside = thin_fin_bvh.is_inside_batch(pts[on_fin])
    assert inside.mean() > 0.99


# ---------------------------------------------------------------------------
# gen_twinned specifics
# ---------------------------------------------------------------------------

def test_twinned_clamp_on_slab(slab, slab_bvh):
    cfg = SchemeConfig()
    base = sample_surface(slab, 600, seed=20)
    # interior plate points, where the smooth normal is axis-aligned and
    # the directional wall thickness is exactly 0.2
    top = (np.abs(base.positions[:, 2] - 0.1) < 1e-9) & (
        np.max(np.abs(base.positions[:, :2]), axis=1) < 0.6
    )
    pos, labels, normals, kinds, skipped = gen_twinned(slab_bvh, base, cfg, seed=21)
    assert skipped == 0
    eps = np.linalg.norm(pos[0::2] - pos[1::2], axis=1) / 2.0
    # clamp: eps <= beta * t / 2 = 0.8 * 0.2 / 2 = 0.08 on the plates
    assert np.all(eps[top] <= 0.08 + 1e-9)
    plates = np.abs(np.abs(base.positions[:, 2]) - 0.1) < 1e-9
    inner = pos[1::2]
    assert slab_bvh.is_inside_batch(inner[plates]).all()


def test_twinned_halfnormal_on_sphere(icosphere, icosphere_bvh):
    # clamp almost never binds (t ~ 2), so displacements follow |N(0, sigma)|
    cfg = SchemeConfig()
    base = sample_surface(icosphere, 2000, seed=22)
    pos, *_ = gen_twinned(icosphere_bvh, base, cfg, seed=23)
    eps = np.linalg.norm(pos[0::2] - pos[1::2], axis=1) / 2.0
    # one-sample KS test against the half-normal CDF
    x = np.sort(eps) / cfg.spatial.sigma
    cdf = math.erf  # half-normal CDF = erf(x / sqrt(2))
    theo = np.array([cdf(v / math.sqrt(2.0)) for v in x])
    emp_hi = np.arange(1, len(x) + 1) / len(x)
    emp_lo = np.arange(0, len(x)) / len(x)
    ks = max(np.abs(emp_hi - theo).max(), np.abs(emp_lo - theo).max())
    critical = 1.36 / math.sqrt(len(x))  # 5% level
    assert ks < critical


def test_twin_labels_antisymmetric_on_slab(slab, slab_bvh):
    cfg = SchemeConfig()
    base = sample_surface(slab, 500, seed=24)
    plate = np.abs(np.abs(base.positions[:, 2]) - 0.1) < 1e-9
    inner_face = (np.abs(base.positions[:, 0]) < 0.6) & (np.abs(base.positions[:, 1]) < 0.6)
    sel = plate & inner_face
    pos, labels, *_ = gen_twinned(slab_bvh, base, cfg, seed=25)
    resid = np.abs((labels[0::2] - 0.5) + (labels[1::2] - 0.5))
    assert np.all(resid[sel] <= 0.05)


# ---------------------------------------------------------------------------
# anchors
# ---------------------------------------------------------------------------

def test_anchor_labels_on_fin(thin_fin, thin_fin_bvh, cfg):
    ss = fss_scheme(thin_fin, thin_fin_bvh, cfg, seed=27)
    anchors = ss.kinds == Kind.ANCHOR
    pts = ss.positions[anchors]
    labels = ss.labels[anchors]
    mid_fin = (pts[:, 0] > 0.3) & (pts[:, 0] < 0.95) & (np.abs(pts[:, 1]) < 0.25)
    assert mid_fin.sum() > 50
    assert np.allclose(labels[mid_fin], 0.6, atol=0.02)


def test_child_labels_decrease_toward_surface(thin_fin, thin_fin_bvh, cfg):
    ss = fss_scheme(thin_fin, thin_fin_bvh, cfg, seed=27)
    children = np.nonzero(ss.kinds == Kind.CHILD_ANCHOR)[0]
    by_anchor: dict[int, list[int]] = {}
    for c in children:
        by_anchor.setdefault(int(ss.twin_ids[c]), []).append(int(c))
    checked = 0
    for anchor, kids in by_anchor.items():
        pts = ss.positions[kids]
        if not ((pts[:, 0] > 0.3) & (pts[:, 0] < 0.95) & (np.abs(pts[:, 1]) < 0.25)).all():
            continue
        anchor_label = ss.labels[anchor]
        kid_labels = ss.labels[kids]  # ordered anchor -> surface
        seq = np.concatenate([[anchor_label], kid_labels])
        assert np.all(np.diff(seq) < 0)
        assert kid_labels[-1] > 0.5
        checked += 1
    assert checked > 50


def test_no_anchors_on_sphere(icosphere, icosphere_bvh, cfg):
    ss = fss_scheme(icosphere, icosphere_bvh, cfg, seed=28)
    counts = ss.kind_counts()
    assert counts["ANCHOR"] == 0
    assert counts["CHILD_ANCHOR"] == 0


# ---------------------------------------------------------------------------
# counters
# ---------------------------------------------------------------------------

def test_counter_labels_flat_top(slab, slab_bvh):
    cfg = SchemeConfig()
    pos, labels, normals, kinds = gen_counters(slab_bvh, 400, cfg, seed=29)
    prim = labels[0::2]
    sec = labels[1::2]
    hit_col = np.array(
        [len(slab_bvh.columns.crossings(pos[2 * i : 2 * i + 1, :2]).z) > 0 for i in range(400)]
    )
    assert np.allclose(prim[hit_col], 0.45, atol=1e-9)
    assert np.allclose(sec[hit_col], 0.35, atol=1e-9)
    assert np.all(labels[~np.repeat(hit_col, 2)] == 0.0)
    assert np.all(sec <= prim)
    assert np.all(sec[hit_col] < prim[hit_col])


def test_counters_always_outside(torus, torus_bvh, cfg):
    ss = fss_scheme(torus, torus_bvh, cfg, seed=30)
    counters = np.isin(ss.kinds, [int(Kind.COUNTER_PRIMARY), int(Kind.COUNTER_SECONDARY)])
    assert not torus_bvh.is_inside_batch(ss.positions[counters]).any()
    assert np.all(ss.labels[counters] < 0.5)


# ---------------------------------------------------------------------------
# budget allocation
# ---------------------------------------------------------------------------

def test_allocation_no_thin_faces(icosphere, icosphere_bvh, cfg):
    plan = allocate_budget(icosphere, icosphere_bvh, None, cfg)
    assert plan.anchor_points == 0
    assert plan.counter_points == 1200
    assert plan.twinned_points == 6800
    assert not plan.thin_faces.any()


def test_allocation_fin_density(thin_fin, thin_fin_bvh, cfg):
    ss = fss_scheme(thin_fin, thin_fin_bvh, cfg, seed=31)
    assert ss.meta["thin_density_ratio"] >= 4.0


def test_region_file_overrides_auto(thin_fin, thin_fin_bvh, cfg):
    explicit = np.full(len(thin_fin.faces), 2.5)
    plan = allocate_budget(thin_fin, thin_fin_bvh, explicit, cfg)
    assert np.array_equal(plan.face_weights, explicit)
    auto = allocate_budget(thin_fin, thin_fin_bvh, None, cfg)
    assert auto.face_weights.max() == cfg.fss.thin_weight


def test_twin_density_follows_weights(thin_fin, thin_fin_bvh, cfg):
    # fin plate receives ~ thin_weight x the per-area density of the body
    big = SchemeConfig(total_budget=20000)
    big.fss.counter_fraction = 0.0
    big.fss.anchor_share = 0.0
    ss = fss_scheme(thin_fin, thin_fin_bvh, big, seed=32)
    pts = ss.positions
    mask = fixtures.fin_face_mask(thin_fin)
    fin_area = thin_fin.face_areas[mask].sum()
    body_area = thin_fin.face_areas[~mask].sum()
    on_fin = (pts[:, 0] > 0.21) & (np.abs(pts[:, 2]) < 0.02)
    density_ratio = (on_fin.mean() / fin_area) / ((1 - on_fin.mean()) / body_area)
    assert density_ratio == pytest.approx(8.0, rel=0.15)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def test_fss1_roundtrip(tmp_path, thin_fin, thin_fin_bvh, cfg):
    ss = fss_scheme(thin_fin, thin_fin_bvh, cfg, seed=33)
    path = tmp_path / "set.fss1"
    save_sample_set(ss, path)
    loaded = load_sample_set(path)
    assert len(loaded) == len(ss)
    assert np.allclose(loaded.positions, ss.positions, atol=1e-6)
    assert np.allclose(loaded.labels, ss.labels, atol=1e-6)
    assert np.array_equal(loaded.kinds, ss.kinds)
    assert np.array_equal(loaded.twin_ids, ss.twin_ids)


def test_fss1_layout(tmp_path, cube, cube_bvh):
    cfg = SchemeConfig(total_budget=10)
    ss = spatial_scheme(cube, cube_bvh, cfg, seed=1)
    path = tmp_path / "tiny.fss1"
    save_sample_set(ss, path)
    raw = path.read_bytes()
    assert raw[:4] == b"FSS1"
    assert int.from_bytes(raw[4:8], "little") == 1
    assert int.from_bytes(raw[8:16], "little") == 10
    assert len(raw) == 16 + 10 * 37  # packed point record is 37 bytes


def test_fss1_bad_magic(tmp_path):
    path = tmp_path / "junk.fss1"
    path.write_bytes(b"NOPE" + b"\0" * 16)
    with pytest.raises(BinaryFormatError, match="magic"):
        load_sample_set(path)


def test_fss1_same_seed_same_hash(tmp_path, slab, slab_bvh, cfg):
    hashes = []
    for _ in range(2):
        ss = fss_scheme(slab, slab_bvh, cfg, seed=55)
        path = tmp_path / "h.fss1"
        save_sample_set(ss, path)
        hashes.append(hashlib.sha256(path.read_bytes()).hexdigest())
    assert hashes[0] == hashes[1]
