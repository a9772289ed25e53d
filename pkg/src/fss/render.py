"""Orthographic normal-map rendering and PFM export.

Pixel (i, j) covers image-plane coordinates with x along j and y along i,
both increasing; centers sit at -1 + (k + 0.5) * 2/R. The front view sees
faces oriented towards +z, the back view faces oriented towards -z.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bvh import Bvh


@dataclass
class NormalMap:
    normals: np.ndarray  # (R, R, 3) unit vectors where mask is set
    mask: np.ndarray  # (R, R) bool
    side: str  # "front" | "back"

    @property
    def resolution(self) -> int:
        return self.normals.shape[0]


def pixel_centers(resolution: int) -> tuple[np.ndarray, np.ndarray]:
    """1D pixel-center coordinates over [-1, 1] and the pixel pitch."""
    pitch = 2.0 / resolution
    coords = -1.0 + (np.arange(resolution) + 0.5) * pitch
    return coords, pitch


def render_normal_map(bvh: Bvh, resolution: int, side: str = "front") -> NormalMap:
    if side not in ("front", "back"):
        raise ValueError("side must be 'front' or 'back'")
    coords, _ = pixel_centers(resolution)
    xs, ys = np.meshgrid(coords, coords, indexing="xy")
    xy = np.stack([xs.ravel(), ys.ravel()], axis=1)
    crossings, _ = bvh.columns.crossings_checked(xy)
    counts = np.diff(crossings.offsets)
    covered = counts > 0
    # crossings are sorted ascending in z: front hit is the last, back the first
    first = crossings.offsets[1:] - 1 if side == "front" else crossings.offsets[:-1]
    first = np.where(covered, first, 0)
    mesh = bvh.mesh
    fid = crossings.face_ids[first]
    vn = mesh.vertex_normals[mesh.faces[fid]]
    normals = np.einsum("nk,nkd->nd", crossings.bary[first], vn)
    normals /= np.maximum(np.linalg.norm(normals, axis=1, keepdims=True), 1e-30)
    normals[~covered] = 0.0
    return NormalMap(
        normals=normals.reshape(resolution, resolution, 3),
        mask=covered.reshape(resolution, resolution),
        side=side,
    )


def write_pfm(path: str | Path, data: np.ndarray) -> None:
    """Little-endian PFM; 2D arrays become Pf, (H,W,3) become PF.

    Rows are stored bottom-to-top, matching our y-up pixel convention.
    """
    data = np.asarray(data, dtype=np.float32)
    if data.ndim == 2:
        magic = b"Pf"
    elif data.ndim == 3 and data.shape[2] == 3:
        magic = b"PF"
    else:
        raise ValueError("PFM supports HxW or HxWx3 arrays")
    h, w = data.shape[:2]
    with open(path, "wb") as fh:
        fh.write(magic + b"\n")
        fh.write(f"{w} {h}\n".encode())
        fh.write(b"-1.0\n")  # negative scale marks little-endian
        fh.write(data.astype("<f4").tobytes())


def read_pfm(path: str | Path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.readline().strip()
        if magic not in (b"PF", b"Pf"):
            raise ValueError("not a PFM file")
        w, h = (int(t) for t in fh.readline().split())
        scale = float(fh.readline())
        channels = 3 if magic == b"PF" else 1
        count = w * h * channels
        fmt = "<" if scale < 0 else ">"
        raw = fh.read(count * 4)
        data = np.array(struct.unpack(f"{fmt}{count}f", raw), dtype=np.float32)
    shape = (h, w, 3) if channels == 3 else (h, w)
    return data.reshape(shape)
