"""Reconstruction quality metrics.

Conventions (stated in every report so numbers are self-describing):
distances are unsquared; the Chamfer distance averages both directions;
point-to-surface is one-directional from the reconstruction to the
groundtruth; the normal error is the mean L2 difference of unit normals
over pixels covered by both renderings, averaged over front and back
views.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bvh import Bvh
from .errors import FssError
from .mesh import TriangleMesh, rotation_y, sample_surface
from .render import render_normal_map


@dataclass
class MetricReport:
    cd: float
    p2s: float
    normal_err: float
    coverage_mismatch: float
    fin_recall: float | None = None
    n_samples: int = 10000
    seed: int = 0
    unit_scale: float = 1.0  # divide by this to express in original units
    notes: dict = field(default_factory=dict)

    def in_original_units(self) -> dict:
        s = self.unit_scale
        return {"cd": self.cd / s, "p2s": self.p2s / s, "normal_err": self.normal_err}

    def csv_header(self) -> str:
        return "cd,p2s,normal_err,coverage_mismatch,fin_recall,n_samples,seed"

    def csv_row(self) -> str:
        fin = "" if self.fin_recall is None else f"{self.fin_recall:.9g}"
        return (
            f"{self.cd:.9g},{self.p2s:.9g},{self.normal_err:.9g},"
            f"{self.coverage_mismatch:.9g},{fin},{self.n_samples},{self.seed}"
        )

    def text(self) -> str:
        lines = [
            f"chamfer (bidirectional mean, unsquared): {self.cd:.6g}",
            f"point-to-surface (recon->gt):            {self.p2s:.6g}",
            f"normal reprojection (front+back L2):     {self.normal_err:.6g}",
            f"coverage mismatch fraction:              {self.coverage_mismatch:.6g}",
        ]
        if self.fin_recall is not None:
            lines.append(f"fin recall:                              {self.fin_recall:.6g}")
        return "\n".join(lines)


def _mean_surface_distance(src: TriangleMesh, dst_bvh: Bvh, n: int, seed: int) -> float:
    samples = sample_surface(src, n, seed=seed)
    _, dist, _, _ = dst_bvh.closest_point_batch(samples.positions)
    return float(dist.mean())


def chamfer(mesh_a: TriangleMesh, mesh_b: TriangleMesh, n: int = 10000, seed: int = 0,
            bvh_a: Bvh | None = None, bvh_b: Bvh | None = None) -> float:
    """Bidirectional mean point-to-surface distance (unsquared halves)."""
    if len(mesh_a.faces) == 0 or len(mesh_b.faces) == 0:
        raise FssError("chamfer requires non-empty meshes")
    bvh_a = bvh_a or Bvh(mesh_a)
    bvh_b = bvh_b or Bvh(mesh_b)
    d_ab = _mean_surface_distance(mesh_a, bvh_b, n, seed)
    d_ba = _mean_surface_distance(mesh_b, bvh_a, n, seed + 1)
    return 0.5 * (d_ab + d_ba)


def p2s(recon: TriangleMesh, gt: TriangleMesh, n: int = 10000, seed: int = 0,
        bvh_gt: Bvh | None = None) -> float:
    """One-directional mean distance from reconstruction samples to the
    groundtruth surface."""
    if len(recon.faces) == 0 or len(gt.faces) == 0:
        raise FssError("p2s requires non-empty meshes")
    return _mean_surface_distance(recon, bvh_gt or Bvh(gt), n, seed)


def normal_reprojection(recon: TriangleMesh, gt: TriangleMesh, resolution: int = 256,
                        view: str = "camera") -> tuple[float, float]:
    """Mean per-pixel L2 distance between rendered unit normals.

    Only pixels covered by both meshes enter the error; the fraction of
    pixels covered by exactly one mesh is returned separately. ``view``
    may be "camera" (front/back along z) or "side" (meshes rotated 90
    degrees about y first).

    Returns (error, coverage_mismatch_fraction).
    """
    if view == "side":
        rot = rotation_y(np.pi / 2.0)
        recon = recon.transformed(rot)
        gt = gt.transformed(rot)
    elif view != "camera":
        raise ValueError("view must be 'camera' or 'side'")
    if len(recon.faces) == 0 or len(gt.faces) == 0:
        raise FssError("normal reprojection requires non-empty meshes")
    bvh_r, bvh_g = Bvh(recon), Bvh(gt)
    errs, joint, either = [], 0, 0
    for side in ("front", "back"):
        nm_r = render_normal_map(bvh_r, resolution, side)
        nm_g = render_normal_map(bvh_g, resolution, side)
        both = nm_r.mask & nm_g.mask
        joint += int(both.sum())
        either += int((nm_r.mask | nm_g.mask).sum())
        if both.any():
            diff = np.linalg.norm(nm_r.normals[both] - nm_g.normals[both], axis=1)
            errs.append(diff)
    if joint == 0:
        raise FssError("zero joint coverage between renderings")
    err = float(np.concatenate(errs).mean())
    mismatch = float((either - joint) / max(either, 1))
    return err, mismatch


def fin_recall(recon_grid: np.ndarray, gt_grid: np.ndarray, fin_mask: np.ndarray) -> float:
    """Fraction of masked groundtruth-inside voxels the reconstruction
    recovers (occupancy above 0.5)."""
    if recon_grid.shape != gt_grid.shape or gt_grid.shape != fin_mask.shape:
        raise FssError("fin_recall requires aligned grids")
    mask = fin_mask & gt_grid.astype(bool)
    if not mask.any():
        raise FssError("empty fin mask")
    return float(np.mean(recon_grid[mask] > 0.5))


def grid_box_mask(resolution: int, lo, hi) -> np.ndarray:
    """Boolean (D, H, W) mask of voxel centers inside an axis-aligned box."""
    pitch = 2.0 / resolution
    coords = -1.0 + (np.arange(resolution) + 0.5) * pitch
    z, y, x = np.meshgrid(coords, coords, coords, indexing="ij")
    lo = np.asarray(lo)
    hi = np.asarray(hi)
    return (
        (x >= lo[0]) & (x <= hi[0])
        & (y >= lo[1]) & (y <= hi[1])
        & (z >= lo[2]) & (z <= hi[2])
    )


def evaluate(recon: TriangleMesh, gt: TriangleMesh, n: int = 10000, seed: int = 0,
             resolution: int = 256, unit_scale: float = 1.0,
             fin_recall_value: float | None = None) -> MetricReport:
    bvh_r, bvh_g = Bvh(recon), Bvh(gt)
    d_rg = _mean_surface_distance(recon, bvh_g, n, seed)
    d_gr = _mean_surface_distance(gt, bvh_r, n, seed + 1)
    cd = 0.5 * (d_rg + d_gr)
    p2s_val = d_rg
    err, mismatch = normal_reprojection(recon, gt, resolution)
    return MetricReport(
        cd=cd, p2s=p2s_val, normal_err=err, coverage_mismatch=mismatch,
        fin_recall=fin_recall_value, n_samples=n, seed=seed, unit_scale=unit_scale,
    )
