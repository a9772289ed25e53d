"""Sampling training schemes: spatial, camera-constrained (DOS-style), and
the fine structure-aware scheme (FSS).

The FSS generator combines four point families under one budget:

* twinned pairs straddling the surface equidistantly along the normal,
  with the displacement clamped to a fraction of the local wall thickness
  so the inner twin of a thin wall stays inside;
* anchor points at the medial depth of thin walls plus child anchors
  walking back to the surface;
* twinned counter pairs placed outside the mesh along camera rays, the
  secondary farther out and therefore lower-labelled;
* region-guided budget allocation concentrating samples on thin or
  user-flagged faces.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path

import numpy as np

from .bvh import Bvh
from .errors import BinaryFormatError, ConfigError
from .labels import (
    LabelConfig,
    binary_label_batch,
    camera_label_batch,
    omni_label_batch,
    sample_normal_batch,
)
from .mesh import TriangleMesh, sample_surface


class Kind(IntEnum):
    TWIN_A = 0
    TWIN_B = 1
    ANCHOR = 2
    CHILD_ANCHOR = 3
    COUNTER_PRIMARY = 4
    COUNTER_SECONDARY = 5
    UNIFORM_BOX = 6
    DISPLACED = 7


TWIN_KINDS = (Kind.TWIN_A, Kind.TWIN_B, Kind.COUNTER_PRIMARY, Kind.COUNTER_SECONDARY)


@dataclass
class SamplePoint:
    position: np.ndarray
    label: float
    normal: np.ndarray
    kind: Kind
    twin_id: int  # -1 = none


@dataclass
class SpatialConfig:
    sigma: float = 0.05
    uniform_ratio: float = 1.0 / 16.0

    def validate(self, path="scheme.spatial"):
        if self.sigma <= 0:
            raise ConfigError(f"{path}.sigma", "must be positive")
        if not 0.0 <= self.uniform_ratio <= 1.0:
            raise ConfigError(f"{path}.uniform_ratio", "must be in [0, 1]")
        return self


@dataclass
class FssConfig:
    beta: float = 0.8
    tau_thin: float = 0.05
    child_count: int = 3
    counter_fraction: float = 0.15
    counter_gap_near: float = 0.1
    counter_gap_far: float = 0.3
    thin_weight: float = 8.0
    anchor_share: float = 0.4  # of the non-counter budget, when thin faces exist
    ablate: list[str] = field(default_factory=list)

    _ABLATIONS = ("twins", "proximity", "anchors", "counters", "region")

    def validate(self, path="scheme.fss"):
        if not 0.0 < self.beta <= 1.0:
            raise ConfigError(f"{path}.beta", "must be in (0, 1]")
        if self.tau_thin <= 0:
            raise ConfigError(f"{path}.tau_thin", "must be positive")
        if self.child_count < 0:
            raise ConfigError(f"{path}.child_count", "must be >= 0")
        if not 0.0 <= self.counter_fraction <= 1.0:
            raise ConfigError(f"{path}.counter_fraction", "must be in [0, 1]")
        if not 0.0 < self.counter_gap_near < self.counter_gap_far:
            raise ConfigError(f"{path}.counter_gap_near", "need 0 < near gap < far gap")
        if self.thin_weight < 0:
            raise ConfigError(f"{path}.thin_weight", "must be >= 0")
        if not 0.0 <= self.anchor_share <= 1.0:
            raise ConfigError(f"{path}.anchor_share", "must be in [0, 1]")
        for a in self.ablate:
            if a not in self._ABLATIONS:
                raise ConfigError(f"{path}.ablate", f"unknown ablation {a!r}")
        return self


@dataclass
class SchemeConfig:
    total_budget: int = 8000
    spatial: SpatialConfig = field(default_factory=SpatialConfig)
    fss: FssConfig = field(default_factory=FssConfig)
    label: LabelConfig = field(default_factory=LabelConfig)

    def validate(self, path="scheme"):
        if self.total_budget < 1:
            raise ConfigError(f"{path}.total_budget", "must be >= 1")
        self.spatial.validate(f"{path}.spatial")
        self.fss.validate(f"{path}.fss")
        self.label.validate(f"{path}.label")
        return self

    def to_dict(self) -> dict:
        return {
            "total_budget": self.total_budget,
            "spatial": {"sigma": self.spatial.sigma, "uniform_ratio": self.spatial.uniform_ratio},
            "fss": {
                "beta": self.fss.beta,
                "tau_thin": self.fss.tau_thin,
                "child_count": self.fss.child_count,
                "counter_fraction": self.fss.counter_fraction,
                "counter_gap_near": self.fss.counter_gap_near,
                "counter_gap_far": self.fss.counter_gap_far,
                "thin_weight": self.fss.thin_weight,
                "anchor_share": self.fss.anchor_share,
                "ablate": list(self.fss.ablate),
            },
            "label": {"delta_omni": self.label.delta_omni, "delta_z": self.label.delta_z},
        }


class SampleSet:
    """Columnar batch of labeled sample points."""

    def __init__(self, positions, labels, normals, kinds, twin_ids,
                 mesh_id="", scheme="", seed=0, config=None, meta=None):
        self.positions = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
        self.labels = np.asarray(labels, dtype=np.float64).ravel()
        self.normals = np.asarray(normals, dtype=np.float64).reshape(-1, 3)
        self.kinds = np.asarray(kinds, dtype=np.uint8).ravel()
        self.twin_ids = np.asarray(twin_ids, dtype=np.int64).ravel()
        self.mesh_id = mesh_id
        self.scheme = scheme
        self.seed = seed
        self.config = config or {}
        self.meta = meta or {}

    def __len__(self) -> int:
        return len(self.positions)

    def point(self, i: int) -> SamplePoint:
        return SamplePoint(self.positions[i], float(self.labels[i]), self.normals[i],
                           Kind(int(self.kinds[i])), int(self.twin_ids[i]))

    def kind_counts(self) -> dict[str, int]:
        return {k.name: int(np.count_nonzero(self.kinds == k)) for k in Kind}

    def summary(self) -> dict:
        hist, _ = np.histogram(self.labels, bins=20, range=(0.0, 1.0))
        return {
            "scheme": self.scheme,
            "mesh_id": self.mesh_id,
            "seed": self.seed,
            "total": len(self),
            "counts": {k: v for k, v in self.kind_counts().items() if v},
            "label_histogram": hist.tolist(),
            **self.meta,
        }


# ---------------------------------------------------------------------------
# FSS1 binary format
# ---------------------------------------------------------------------------

_FSS1_MAGIC = b"FSS1"
_FSS1_VERSION = 1
_POINT_DTYPE = np.dtype(
    [("position", "<f4", 3), ("label", "<f4"), ("normal", "<f4", 3),
     ("kind", "u1"), ("twin_id", "<i8")]
)


def save_sample_set(sample_set: SampleSet, path: str | Path) -> None:
    records = np.empty(len(sample_set), dtype=_POINT_DTYPE)
    records["position"] = sample_set.positions.astype("<f4")
    records["label"] = sample_set.labels.astype("<f4")
    records["normal"] = sample_set.normals.astype("<f4")
    records["kind"] = sample_set.kinds
    records["twin_id"] = sample_set.twin_ids
    with open(path, "wb") as fh:
        fh.write(_FSS1_MAGIC)
        fh.write(struct.pack("<I", _FSS1_VERSION))
        fh.write(struct.pack("<Q", len(sample_set)))
        fh.write(records.tobytes())


def load_sample_set(path: str | Path) -> SampleSet:
    raw = Path(path).read_bytes()
    if raw[:4] != _FSS1_MAGIC:
        raise BinaryFormatError(f"{path}: bad magic {raw[:4]!r}, expected {_FSS1_MAGIC!r}")
    (version,) = struct.unpack_from("<I", raw, 4)
    if version != _FSS1_VERSION:
        raise BinaryFormatError(f"{path}: unsupported version {version}")
    (count,) = struct.unpack_from("<Q", raw, 8)
    expected = 16 + count * _POINT_DTYPE.itemsize
    if len(raw) != expected:
        raise BinaryFormatError(f"{path}: size {len(raw)} != expected {expected}")
    records = np.frombuffer(raw, dtype=_POINT_DTYPE, count=count, offset=16)
    return SampleSet(
        positions=records["position"].astype(np.float64),
        labels=records["label"].astype(np.float64),
        normals=records["normal"].astype(np.float64),
        kinds=records["kind"],
        twin_ids=records["twin_id"],
    )


# ---------------------------------------------------------------------------
# baseline schemes
# ---------------------------------------------------------------------------

def spatial_scheme(mesh: TriangleMesh, bvh: Bvh, cfg: SchemeConfig, seed: int) -> SampleSet:
    """Surface points displaced by isotropic Gaussian noise plus a uniform
    box fraction, with binary labels."""
    budget = cfg.total_budget
    n_uniform = int(round(cfg.spatial.uniform_ratio * budget))
    n_displaced = budget - n_uniform
    rng = np.random.default_rng([seed, 0])

    parts_pos = []
    if n_displaced > 0:
        base = sample_surface(mesh, n_displaced, seed=_sub_seed(seed, 1))
        displaced = base.positions + cfg.spatial.sigma * rng.normal(size=(n_displaced, 3))
        parts_pos.append(displaced)
    if n_uniform > 0:
        parts_pos.append(rng.uniform(-1.0, 1.0, size=(n_uniform, 3)))
    positions = np.concatenate(parts_pos) if parts_pos else np.empty((0, 3))
    labels = binary_label_batch(bvh, positions)
    normals, fallback = sample_normal_batch(bvh, positions)
    kinds = np.concatenate([
        np.full(n_displaced, Kind.DISPLACED, dtype=np.uint8),
        np.full(n_uniform, Kind.UNIFORM_BOX, dtype=np.uint8),
    ])
    return SampleSet(
        positions, labels, normals, kinds, np.full(budget, -1, dtype=np.int64),
        scheme="spatial", seed=seed, config=cfg.to_dict(),
        meta={"normal_fallback_fraction": float(fallback.mean())},
    )


def dos_scheme(mesh: TriangleMesh, bvh: Bvh, cfg: SchemeConfig, seed: int) -> SampleSet:
    """Surface points displaced along the camera axis only, with labels
    measured along that axis."""
    budget = cfg.total_budget
    rng = np.random.default_rng([seed, 0])
    base = sample_surface(mesh, budget, seed=_sub_seed(seed, 1))
    positions = base.positions.copy()
    positions[:, 2] += cfg.spatial.sigma * rng.normal(size=budget)
    labels = camera_label_batch(bvh, positions, cfg.label.delta_z)
    normals, fallback = sample_normal_batch(bvh, positions)
    return SampleSet(
        positions, labels, normals,
        np.full(budget, Kind.DISPLACED, dtype=np.uint8),
        np.full(budget, -1, dtype=np.int64),
        scheme="dos", seed=seed, config=cfg.to_dict(),
        meta={"normal_fallback_fraction": float(fallback.mean())},
    )


# ---------------------------------------------------------------------------
# FSS
# ---------------------------------------------------------------------------

@dataclass
class BudgetPlan:
    counter_points: int
    twinned_points: int
    anchor_points: int
    face_weights: np.ndarray
    thin_faces: np.ndarray  # bool mask
    spare_anchor: int = 0  # odd-budget remainder absorbed as a childless anchor


def face_thickness(mesh: TriangleMesh, bvh: Bvh) -> np.ndarray:
    """Local wall thickness probed at each face centroid along the inward
    face normal. Faces whose probe finds no exit get +inf."""
    centroids = mesh.triangle_vertices().mean(axis=1)
    thickness, ok = bvh.local_thickness_batch(centroids, mesh.face_normals)
    return np.where(ok, thickness, np.inf)


def allocate_budget(
    mesh: TriangleMesh,
    bvh: Bvh,
    region_weights: np.ndarray | None,
    cfg: SchemeConfig,
) -> BudgetPlan:
    """Split the total budget across FSS families and derive face weights.

    Auto mode (no region file) boosts faces thinner than tau_thin by the
    configured multiplier; an explicit region file is used verbatim.
    """
    fss = cfg.fss
    thin = face_thickness(mesh, bvh) < fss.tau_thin
    if "region" in fss.ablate:
        weights = np.ones(len(mesh.faces))
    elif region_weights is not None:
        weights = np.asarray(region_weights, dtype=np.float64)
        if weights.shape != (len(mesh.faces),):
            raise ConfigError("region_weights", "one weight per face required")
        if np.any(weights < 0):
            raise ConfigError("region_weights", "weights must be >= 0")
    else:
        weights = np.where(thin, fss.thin_weight, 1.0)
    if not np.any(weights * mesh.face_areas > 0):
        raise ConfigError("region_weights", "all-zero effective weights")

    budget = cfg.total_budget
    counters = 0 if "counters" in fss.ablate else 2 * int(fss.counter_fraction * budget / 2)
    remainder = budget - counters

    anchors_enabled = np.any(thin) and "anchors" not in fss.ablate
    if anchors_enabled:
        anchor_target = int(round(fss.anchor_share * remainder))
        twinned = remainder - anchor_target
        if twinned % 2:
            twinned -= 1
        anchor_points = remainder - twinned
        spare = 0
    else:
        twinned = 2 * (remainder // 2)
        anchor_points = 0
        spare = remainder - twinned
    return BudgetPlan(
        counter_points=counters,
        twinned_points=twinned,
        anchor_points=anchor_points,
        face_weights=weights,
        thin_faces=thin,
        spare_anchor=spare,
    )


def gen_twinned(bvh: Bvh, surface_samples, cfg: SchemeConfig, seed: int):
    """Twin pairs q +- eps*n with eps = min(|N(0, sigma)|, beta*t(q)/2).

    Returns (positions, labels, normals, kinds, skipped); pairs are
    interleaved (outer, inner). When the proximity ablation is active the
    clamp is dropped.
    """
    n_pairs = len(surface_samples)
    rng = np.random.default_rng([seed, 2])
    eps = np.abs(rng.normal(0.0, cfg.spatial.sigma, size=n_pairs))
    thickness, ok = bvh.local_thickness_batch(surface_samples.positions, surface_samples.normals)
    skipped = int(np.count_nonzero(~ok))
    thickness = np.where(ok, thickness, 2.0 * cfg.label.delta_omni)
    if "proximity" not in cfg.fss.ablate:
        eps = np.minimum(eps, cfg.fss.beta * thickness / 2.0)

    q = surface_samples.positions
    n = surface_samples.normals
    outer = q + eps[:, None] * n
    inner = q - eps[:, None] * n
    positions = np.empty((2 * n_pairs, 3))
    positions[0::2] = outer
    positions[1::2] = inner
    labels = omni_label_batch(bvh, positions, cfg.label.delta_omni)
    normals, _ = sample_normal_batch(bvh, positions)
    kinds = np.empty(2 * n_pairs, dtype=np.uint8)
    kinds[0::2] = Kind.TWIN_A
    kinds[1::2] = Kind.TWIN_B
    return positions, labels, normals, kinds, skipped


def gen_anchors(bvh: Bvh, thin_samples, thickness: np.ndarray, cfg: SchemeConfig,
                family_sizes: list[int]):
    """Anchor families: the medial point of the wall under each thin-face
    sample plus children spaced uniformly back towards the surface.

    family_sizes[i] = 1 + number of children for family i (the last family
    may be truncated by the budget).
    """
    positions, kinds, parent = [], [], []
    for i, size in enumerate(family_sizes):
        q = thin_samples.positions[i]
        n = thin_samples.normals[i]
        anchor = q - 0.5 * thickness[i] * n
        base_index = len(positions)
        positions.append(anchor)
        kinds.append(Kind.ANCHOR)
        parent.append(-1)
        k = size - 1
        for c in range(1, k + 1):
            frac = c / (k + 1)
            positions.append(anchor + frac * (q - anchor))
            kinds.append(Kind.CHILD_ANCHOR)
            parent.append(base_index)
    positions = np.asarray(positions).reshape(-1, 3)
    labels = omni_label_batch(bvh, positions, cfg.label.delta_omni)
    normals, _ = sample_normal_batch(bvh, positions)
    return positions, labels, np.asarray(normals), np.asarray(kinds, dtype=np.uint8), np.asarray(parent)


def gen_counters(bvh: Bvh, n_pairs: int, cfg: SchemeConfig, seed: int):
    """Twinned counter pairs outside the mesh along camera rays.

    A random image-plane position is probed along z: if the column hits the
    mesh, the primary sits a small gap beyond the nearest silhouette
    surface (front or behind, chosen at random) and the secondary the far
    gap beyond; columns that miss get both points at random depths with
    label zero.
    """
    rng = np.random.default_rng([seed, 3])
    xy = rng.uniform(-1.0, 1.0, size=(n_pairs, 2))
    front = rng.random(n_pairs) < 0.5
    z_rand = rng.uniform(-1.0, 1.0, size=(n_pairs, 2))
    crossings, _ = bvh.columns.crossings_checked(xy)
    counts = np.diff(crossings.offsets)

    gap1 = cfg.fss.counter_gap_near * cfg.label.delta_z
    gap2 = cfg.fss.counter_gap_far * cfg.label.delta_z
    positions = np.empty((2 * n_pairs, 3))
    for i in range(n_pairs):
        if counts[i] > 0:
            seg = crossings.z_for(i)
            if front[i]:
                z1, z2 = seg[-1] + gap1, seg[-1] + gap2
            else:
                z1, z2 = seg[0] - gap1, seg[0] - gap2
        else:
            z1, z2 = z_rand[i]
        positions[2 * i] = (*xy[i], z1)
        positions[2 * i + 1] = (*xy[i], z2)
    labels = camera_label_batch(bvh, positions, cfg.label.delta_z)
    normals, _ = sample_normal_batch(bvh, positions)
    kinds = np.empty(2 * n_pairs, dtype=np.uint8)
    kinds[0::2] = Kind.COUNTER_PRIMARY
    kinds[1::2] = Kind.COUNTER_SECONDARY
    return positions, labels, normals, kinds


def fss_scheme(
    mesh: TriangleMesh,
    bvh: Bvh,
    cfg: SchemeConfig,
    region_weights: np.ndarray | None = None,
    seed: int = 0,
) -> SampleSet:
    """The full fine structure-aware sample set for one mesh."""
    plan = allocate_budget(mesh, bvh, region_weights, cfg)
    fss = cfg.fss

    all_pos, all_lab, all_norm, all_kind, all_twin = [], [], [], [], []
    offset = 0
    skipped = 0
    base_face_ids = []

    if plan.twinned_points > 0:
        n_pairs = plan.twinned_points // 2
        base = sample_surface(mesh, n_pairs, seed=_sub_seed(seed, 10), face_weights=plan.face_weights)
        if "twins" in fss.ablate:
            # independent single points: one per budget slot, random side
            base = sample_surface(mesh, plan.twinned_points, seed=_sub_seed(seed, 10),
                                  face_weights=plan.face_weights)
            rng = np.random.default_rng([seed, 2])
            eps = np.abs(rng.normal(0.0, cfg.spatial.sigma, size=plan.twinned_points))
            thickness, ok = bvh.local_thickness_batch(base.positions, base.normals)
            skipped += int(np.count_nonzero(~ok))
            thickness = np.where(ok, thickness, 2.0 * cfg.label.delta_omni)
            if "proximity" not in fss.ablate:
                eps = np.minimum(eps, fss.beta * thickness / 2.0)
            side = np.where(rng.random(plan.twinned_points) < 0.5, 1.0, -1.0)
            pos = base.positions + (side * eps)[:, None] * base.normals
            lab = omni_label_batch(bvh, pos, cfg.label.delta_omni)
            norm, _ = sample_normal_batch(bvh, pos)
            kind = np.full(plan.twinned_points, Kind.DISPLACED, dtype=np.uint8)
            twin = np.full(plan.twinned_points, -1, dtype=np.int64)
        else:
            pos, lab, norm, kind, skip = gen_twinned(bvh, base, cfg, seed)
            skipped += skip
            twin = np.arange(2 * n_pairs, dtype=np.int64) + offset
            twin[0::2] += 1
            twin[1::2] -= 1
        base_face_ids.append(base.face_ids)
        all_pos.append(pos)
        all_lab.append(lab)
        all_norm.append(norm)
        all_kind.append(kind)
        all_twin.append(twin)
        offset += len(pos)

    n_anchor_total = plan.anchor_points + plan.spare_anchor
    if n_anchor_total > 0:
        family = fss.child_count + 1
        sizes = [family] * (plan.anchor_points // family)
        if plan.anchor_points % family:
            sizes.append(plan.anchor_points % family)
        if plan.spare_anchor:
            sizes.append(1)
        anchor_weights = plan.face_weights * plan.thin_faces if np.any(plan.thin_faces) else None
        if anchor_weights is not None and not np.any(anchor_weights * mesh.face_areas > 0):
            anchor_weights = plan.thin_faces.astype(np.float64)
        base = sample_surface(mesh, len(sizes), seed=_sub_seed(seed, 11),
                              face_weights=anchor_weights)
        thickness, ok = bvh.local_thickness_batch(base.positions, base.normals)
        thickness = np.where(ok, thickness, 2.0 * cfg.label.delta_omni)
        skipped += int(np.count_nonzero(~ok))
        pos, lab, norm, kind, parent = gen_anchors(bvh, base, thickness, cfg, sizes)
        twin = np.where(parent >= 0, parent + offset, -1).astype(np.int64)
        base_face_ids.append(base.face_ids)
        all_pos.append(pos)
        all_lab.append(lab)
        all_norm.append(norm)
        all_kind.append(kind)
        all_twin.append(twin)
        offset += len(pos)

    if plan.counter_points > 0:
        n_pairs = plan.counter_points // 2
        pos, lab, norm, kind = gen_counters(bvh, n_pairs, cfg, seed)
        twin = np.arange(len(pos), dtype=np.int64) + offset
        twin[0::2] += 1
        twin[1::2] -= 1
        all_pos.append(pos)
        all_lab.append(lab)
        all_norm.append(norm)
        all_kind.append(kind)
        all_twin.append(twin)
        offset += len(pos)

    positions = np.concatenate(all_pos)
    sample_set = SampleSet(
        positions,
        np.concatenate(all_lab),
        np.concatenate(all_norm),
        np.concatenate(all_kind),
        np.concatenate(all_twin),
        scheme="fss", seed=seed, config=cfg.to_dict(),
        meta={
            "skipped_thickness_queries": skipped,
            "budget_plan": {
                "counter_points": plan.counter_points,
                "twinned_points": plan.twinned_points,
                "anchor_points": plan.anchor_points + plan.spare_anchor,
            },
            "thin_face_count": int(np.count_nonzero(plan.thin_faces)),
            "thin_density_ratio": _thin_density_ratio(mesh, plan.thin_faces, base_face_ids),
        },
    )
    assert len(sample_set) == cfg.total_budget, "budget conservation violated"
    return sample_set


def _thin_density_ratio(mesh, thin_faces, base_face_ids) -> float | None:
    """Per-area sample density on thin faces over density elsewhere."""
    if not np.any(thin_faces) or np.all(thin_faces) or not base_face_ids:
        return None
    fids = np.concatenate(base_face_ids)
    thin_hits = int(np.count_nonzero(thin_faces[fids]))
    other_hits = len(fids) - thin_hits
    thin_area = float(mesh.face_areas[thin_faces].sum())
    other_area = float(mesh.face_areas[~thin_faces].sum())
    if other_hits == 0 or thin_area == 0.0:
        return float("inf")
    return (thin_hits / thin_area) / (other_hits / other_area)


def generate_scheme(scheme: str, mesh, bvh, cfg, seed, region_weights=None) -> SampleSet:
    if scheme == "spatial":
        return spatial_scheme(mesh, bvh, cfg, seed)
    if scheme == "dos":
        return dos_scheme(mesh, bvh, cfg, seed)
    if scheme == "fss":
        return fss_scheme(mesh, bvh, cfg, region_weights=region_weights, seed=seed)
    raise ConfigError("scheme", f"unknown scheme {scheme!r}")


def label_ambiguity_ratio(bvh: Bvh, cfg: SchemeConfig, seed: int, n: int = 2000) -> float:
    """Variance ratio of camera-axis labels vs omnidirectional labels at
    matched signed distance-to-surface, on z-displaced surface points.

    At a fixed signed distance the omnidirectional label is (up to bin
    quantization) a constant, while camera-axis labels of lateral-surface
    points spread out; a high ratio quantifies that ambiguity.
    """
    base = sample_surface(bvh.mesh, n, seed=_sub_seed(seed, 20))
    rng = np.random.default_rng([seed, 21])
    pts = base.positions.copy()
    pts[:, 2] += cfg.spatial.sigma * rng.normal(size=n)
    cam = camera_label_batch(bvh, pts, cfg.label.delta_z)
    omni = omni_label_batch(bvh, pts, cfg.label.delta_omni)
    _, dist, _, _ = bvh.closest_point_batch(pts)
    signed = np.where(bvh.is_inside_batch(pts), dist, -dist)

    delta = cfg.label.delta_omni
    bins = np.linspace(-delta, delta, 21)
    which = np.digitize(signed, bins)
    var_cam, var_omni, weight = 0.0, 0.0, 0
    for b in range(1, len(bins)):
        sel = which == b
        if np.count_nonzero(sel) < 10:
            continue
        var_cam += float(np.var(cam[sel])) * int(sel.sum())
        var_omni += float(np.var(omni[sel])) * int(sel.sum())
        weight += int(sel.sum())
    if weight == 0:
        return np.inf
    # bin-quantization floor keeps the ratio finite when omni variance ~ 0
    floor = (0.5 * (bins[1] - bins[0]) / delta) ** 2 / 12.0
    return var_cam / max(var_omni, floor)


def _sub_seed(seed: int, stream: int) -> int:
    return int(np.random.SeedSequence([seed, stream]).generate_state(1)[0])
