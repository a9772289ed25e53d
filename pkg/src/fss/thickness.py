"""Mesh thickness planes and the thickness loss.

A thickness plane is an H x W image whose pixel (i, j) holds the total
material length a camera-axis ray accumulates inside the mesh at that
image position, in world units. The groundtruth plane comes from exact
ray intervals; a predicted plane is the z-sum of an occupancy volume
scaled by the voxel pitch, which makes the two directly comparable at any
resolution.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bvh import Bvh
from .errors import FssError
from .render import pixel_centers, write_pfm


@dataclass
class ThicknessPlane:
    values: np.ndarray  # (H, W), world-unit thickness along z
    pixel_pitch: float
    repaired_pixels: int = 0

    @property
    def resolution(self) -> tuple[int, int]:
        return self.values.shape

    def to_csv(self, path: str | Path) -> None:
        lines = [",".join(f"{v:.9g}" for v in row) for row in self.values]
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    def to_pfm(self, path: str | Path) -> None:
        write_pfm(path, self.values)


@dataclass
class OccupancyGridGT:
    values: np.ndarray  # (D, H, W) bool, D along z, H along y, W along x
    pitch: tuple[float, float, float]  # (dz, dy, dx)

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.values.shape


def exact_thickness_plane(bvh: Bvh, resolution: int) -> ThicknessPlane:
    """Sum of (exit - entry) ray intervals per pixel of the [-1,1]^2 image.

    Columns that still report an odd crossing count after jittered
    re-casts are filled from their neighbor average; the flag count is
    recorded on the returned plane as ``repaired_pixels``.
    """
    coords, pitch = pixel_centers(resolution)
    xs, ys = np.meshgrid(coords, coords, indexing="xy")
    xy = np.stack([xs.ravel(), ys.ravel()], axis=1)
    crossings, bad = bvh.columns.crossings_checked(xy)

    values = np.zeros(len(xy))
    counts = np.diff(crossings.offsets)
    even = (counts % 2 == 0) & ~bad
    # alternate-sum of sorted crossings: exits minus entries
    point_of = np.repeat(np.arange(len(xy)), counts)
    rank = np.arange(len(crossings.z)) - np.repeat(crossings.offsets[:-1], counts)
    sign = np.where(rank % 2 == 0, -1.0, 1.0)
    contrib = np.where(even[point_of], sign * crossings.z, 0.0)
    np.add.at(values, point_of, contrib)

    grid = values.reshape(resolution, resolution)
    flagged = (~even).reshape(resolution, resolution)
    n_flagged = int(flagged.sum())
    if n_flagged:
        grid = _fill_from_neighbors(grid, flagged)
    return ThicknessPlane(values=grid, pixel_pitch=pitch, repaired_pixels=n_flagged)


def _fill_from_neighbors(grid: np.ndarray, flagged: np.ndarray) -> np.ndarray:
    out = grid.copy()
    idx = np.argwhere(flagged)
    h, w = grid.shape
    for i, j in idx:
        acc, n = 0.0, 0
        for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            a, b = i + di, j + dj
            if 0 <= a < h and 0 <= b < w and not flagged[a, b]:
                acc += grid[a, b]
                n += 1
        out[i, j] = acc / n if n else 0.0
    return out


def voxelize(bvh: Bvh, d: int, h: int, w: int) -> OccupancyGridGT:
    """Inside test at every voxel center of a (D, H, W) grid over [-1,1]^3.

    Evaluated column-wise: the sorted z-crossings of each (x, y) column
    classify all D voxel centers at once, which is equivalent to a
    per-center parity test on watertight input.
    """
    zc, dz = pixel_centers(d)
    yc, dy = pixel_centers(h)
    xc, dx = pixel_centers(w)
    xs, ys = np.meshgrid(xc, yc, indexing="xy")
    xy = np.stack([xs.ravel(), ys.ravel()], axis=1)  # (H*W, 2), y-major rows
    crossings, bad = bvh.columns.crossings_checked(xy)

    occ = np.zeros((d, h * w), dtype=bool)
    for col in range(h * w):
        z = crossings.z_for(col)
        if len(z) == 0:
            continue
        if bad[col]:
            occ[:, col] = bvh.is_inside_batch(
                np.column_stack([np.repeat(xy[col, None], d, axis=0), zc])
            )
            continue
        occ[:, col] = np.searchsorted(z, zc) % 2 == 1
    values = occ.reshape(d, h, w)
    return OccupancyGridGT(values=values, pitch=(dz, dy, dx))


def voxel_thickness_plane(grid: np.ndarray, dz: float) -> ThicknessPlane:
    """z-sum of an occupancy volume scaled to world units.

    Accepts boolean groundtruth grids or predicted volumes in [0, 1].
    """
    grid = np.asarray(grid)
    if grid.dtype == bool:
        grid = grid.astype(np.float64)
    if grid.min() < 0.0 or grid.max() > 1.0:
        raise FssError("occupancy volume values must lie in [0, 1]")
    values = dz * grid.sum(axis=0)
    return ThicknessPlane(values=values, pixel_pitch=2.0 / grid.shape[2])


def mtl_loss(pred: ThicknessPlane | np.ndarray, gt: ThicknessPlane | np.ndarray):
    """Mean squared error between thickness planes and its gradient in the
    predicted values. Returns (loss, d_loss/d_pred)."""
    p = pred.values if isinstance(pred, ThicknessPlane) else np.asarray(pred)
    g = gt.values if isinstance(gt, ThicknessPlane) else np.asarray(gt)
    if p.shape != g.shape:
        raise FssError(f"thickness plane resolution mismatch: {p.shape} vs {g.shape}")
    diff = p - g
    loss = float(np.mean(diff**2))
    grad = 2.0 * diff / diff.size
    return loss, grad
