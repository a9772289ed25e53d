"""Occupancy labels and per-sample groundtruth normals.

Three label families share one convention: values live in [0, 1], the
surface sits at 0.5, inside is above 0.5. Continuous labels map truncated
signed distance affinely onto [0, 1]:

    label = 0.5 + 0.5 * clamp(s / delta, -1, +1)

with s > 0 inside. The camera family measures s along the z axis only;
the omnidirectional family uses the true closest-surface distance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bvh import Bvh
from .errors import ConfigError


@dataclass
class LabelConfig:
    delta_omni: float = 0.05
    delta_z: float = 0.05

    def validate(self, path: str = "labels") -> "LabelConfig":
        for name in ("delta_omni", "delta_z"):
            v = getattr(self, name)
            if not (0.0 < v <= 1.0):
                raise ConfigError(f"{path}.{name}", f"must be in (0, 1], got {v}")
        return self


def _affine_clamp(signed_distance: np.ndarray, delta: float) -> np.ndarray:
    return 0.5 + 0.5 * np.clip(signed_distance / delta, -1.0, 1.0)


def binary_label_batch(bvh: Bvh, points: np.ndarray) -> np.ndarray:
    """0/1 labels from the parity inside test."""
    return bvh.is_inside_batch(np.atleast_2d(points)).astype(np.float64)


def binary_label(bvh: Bvh, p) -> float:
    return float(binary_label_batch(bvh, np.asarray(p)[None, :])[0])


def camera_label_batch(bvh: Bvh, points: np.ndarray, delta_z: float) -> np.ndarray:
    """Continuous labels from the nearest surface crossing along +-z.

    Points whose column never crosses the surface saturate to their binary
    label (0 outside, 1 inside; for watertight input that is always 0).
    """
    points = np.atleast_2d(points)
    crossings, bad = bvh.columns.crossings_checked(points[:, :2])
    counts = np.diff(crossings.offsets)
    point_of = np.repeat(np.arange(len(points)), counts)
    pz = points[point_of, 2]
    dz = crossings.z - pz

    up = np.full(len(points), np.inf)
    down = np.full(len(points), np.inf)
    sel_up = dz >= 0.0
    np.minimum.at(up, point_of[sel_up], dz[sel_up])
    np.minimum.at(down, point_of[~sel_up], -dz[~sel_up])
    magnitude = np.minimum(up, down)

    strictly_above = np.bincount(point_of[dz > 0.0], minlength=len(points))
    inside = strictly_above % 2 == 1
    sign = np.where(inside, 1.0, -1.0)
    with np.errstate(invalid="ignore"):
        s = np.where(np.isinf(magnitude), sign * np.inf, sign * magnitude)
    labels = _affine_clamp(s, delta_z)

    for i in np.nonzero(bad)[0]:
        labels[i] = _camera_label_single(bvh, points[i], delta_z)
    return labels


def _camera_label_single(bvh: Bvh, p, delta_z: float) -> float:
    dists = []
    for direction in (np.array([0.0, 0.0, 1.0]), np.array([0.0, 0.0, -1.0])):
        hits = bvh.raycast(p, direction, t_min=-1e-12)
        if hits:
            dists.append(hits[0].t)
    sign = 1.0 if bvh.is_inside(p) else -1.0
    if not dists:
        return 0.5 + 0.5 * sign
    return float(_affine_clamp(np.asarray([sign * min(dists)]), delta_z)[0])


def camera_label(bvh: Bvh, p, delta_z: float) -> float:
    return float(camera_label_batch(bvh, np.asarray(p)[None, :], delta_z)[0])


def omni_label_batch(bvh: Bvh, points: np.ndarray, delta_omni: float) -> np.ndarray:
    """Continuous labels from the closest surface point in any direction."""
    points = np.atleast_2d(points)
    _, dist, _, _ = bvh.closest_point_batch(points)
    sign = np.where(bvh.is_inside_batch(points), 1.0, -1.0)
    return _affine_clamp(sign * dist, delta_omni)


def omni_label(bvh: Bvh, p, delta_omni: float) -> float:
    return float(omni_label_batch(bvh, np.asarray(p)[None, :], delta_omni)[0])


def sample_normal_batch(bvh: Bvh, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Groundtruth normals for sample points: the interpolated surface
    normal at the nearest crossing along the camera axis.

    Equidistant up/down crossings resolve to the +z one. Points whose
    column misses the mesh fall back to the closest surface point in any
    direction; the returned mask flags those.

    Returns (normals, fallback_mask).
    """
    points = np.atleast_2d(points)
    n = len(points)
    crossings, bad = bvh.columns.crossings_checked(points[:, :2])
    normals = np.zeros((n, 3))
    fallback = np.zeros(n, dtype=bool)
    mesh = bvh.mesh
    for i in range(n):
        if bad[i]:
            fallback[i] = True
            continue
        seg = crossings.slice_for(i)
        z = crossings.z[seg]
        if len(z) == 0:
            fallback[i] = True
            continue
        pz = points[i, 2]
        k = int(np.searchsorted(z, pz))
        best = None
        if k < len(z):
            best = k  # nearest crossing at or above
        if k > 0:
            below_d = pz - z[k - 1]
            if best is None or below_d < z[k] - pz:  # strict: ties keep +z
                best = k - 1
        j = seg.start + best
        fid = crossings.face_ids[j]
        vn = mesh.vertex_normals[mesh.faces[fid]]
        nvec = crossings.bary[j] @ vn
        normals[i] = nvec / max(np.linalg.norm(nvec), 1e-30)
    if np.any(fallback):
        idx = np.nonzero(fallback)[0]
        _, _, fb_normals, _ = bvh.closest_point_batch(points[idx])
        normals[idx] = fb_normals
    return normals, fallback


def sample_normal(bvh: Bvh, p) -> np.ndarray:
    return sample_normal_batch(bvh, np.asarray(p)[None, :])[0][0]
