"""Procedural watertight test meshes.

Every generator returns a mesh already inside the [-1,1]^3 camera box with
outward-oriented faces. The thin-fin family carries an ear-scale wall
(0.02 across) attached to a box body; its plate faces are the canonical
"thin region" for region-guided sampling and recall metrics.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .mesh import TriangleMesh, save_obj

FIN_THICKNESS = 0.02
FIN_BODY_X_END = 0.2
FIN_X_END = 1.0
FIN_HALF_WIDTH = 0.3


class _Builder:
    def __init__(self):
        self.vertices: list[tuple[float, float, float]] = []
        self.faces: list[tuple[int, int, int]] = []
        self._index: dict[tuple[float, float, float], int] = {}

    def vertex(self, x, y, z) -> int:
        key = (round(float(x), 12), round(float(y), 12), round(float(z), 12))
        if key not in self._index:
            self._index[key] = len(self.vertices)
            self.vertices.append(key)
        return self._index[key]

    def tri(self, a, b, c):
        self.faces.append((a, b, c))

    def quad(self, a, b, c, d):
        # corners counterclockwise seen from outside
        self.tri(a, b, c)
        self.tri(a, c, d)

    def mesh(self) -> TriangleMesh:
        return TriangleMesh(np.asarray(self.vertices), np.asarray(self.faces, dtype=np.int64))


def make_box(lo, hi, segments=(1, 1, 1)) -> TriangleMesh:
    """Axis-aligned box with per-axis face subdivision.

    Subdividing keeps smooth-shaded normals exact on face interiors;
    shared boundary rows weld through the builder's vertex dedup, so the
    result stays watertight for any segment counts.
    """
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    sx, sy, sz = (int(s) for s in segments)
    coords = [np.linspace(lo[a], hi[a], (sx, sy, sz)[a] + 1) for a in range(3)]
    b = _Builder()

    def grid_face(axis: int, at_hi: bool):
        # (u, v) axes of the face; corner order chosen so normals face out
        u_axis, v_axis = [a for a in range(3) if a != axis]
        us, vs = coords[u_axis], coords[v_axis]
        fixed = hi[axis] if at_hi else lo[axis]
        ids = np.empty((len(us), len(vs)), dtype=np.int64)
        for i, u in enumerate(us):
            for j, v in enumerate(vs):
                p = [0.0, 0.0, 0.0]
                p[axis] = fixed
                p[u_axis] = u
                p[v_axis] = v
                ids[i, j] = b.vertex(*p)
        flip = at_hi == (axis == 1)  # keep right-handed outward winding
        for i in range(len(us) - 1):
            for j in range(len(vs) - 1):
                a_, b_, c_, d_ = ids[i, j], ids[i + 1, j], ids[i + 1, j + 1], ids[i, j + 1]
                if flip:
                    b.quad(a_, d_, c_, b_)
                else:
                    b.quad(a_, b_, c_, d_)

    for axis in range(3):
        grid_face(axis, at_hi=False)
        grid_face(axis, at_hi=True)
    return b.mesh()


def make_cube(side: float = 1.0, center=(0.0, 0.0, 0.0)) -> TriangleMesh:
    c = np.asarray(center, dtype=np.float64)
    h = side / 2.0
    return make_box(c - h, c + h)


def make_slab(extent: float = 1.6, thickness: float = 0.2, segments: int = 8) -> TriangleMesh:
    e, t = extent / 2.0, thickness / 2.0
    return make_box((-e, -e, -t), (e, e, t), segments=(segments, segments, 1))


_ICO_T = (1.0 + np.sqrt(5.0)) / 2.0
_ICO_VERTS = np.array(
    [
        (-1, _ICO_T, 0), (1, _ICO_T, 0), (-1, -_ICO_T, 0), (1, -_ICO_T, 0),
        (0, -1, _ICO_T), (0, 1, _ICO_T), (0, -1, -_ICO_T), (0, 1, -_ICO_T),
        (_ICO_T, 0, -1), (_ICO_T, 0, 1), (-_ICO_T, 0, -1), (-_ICO_T, 0, 1),
    ],
    dtype=np.float64,
)
_ICO_FACES = np.array(
    [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ],
    dtype=np.int64,
)


def make_icosphere(subdivisions: int = 3, radius: float = 1.0) -> TriangleMesh:
    verts = [v / np.linalg.norm(v) for v in _ICO_VERTS]
    faces = [tuple(f) for f in _ICO_FACES]
    for _ in range(subdivisions):
        midpoint: dict[tuple[int, int], int] = {}

        def mid(a: int, b: int) -> int:
            key = (a, b) if a < b else (b, a)
            if key not in midpoint:
                m = verts[a] + verts[b]
                verts.append(m / np.linalg.norm(m))
                midpoint[key] = len(verts) - 1
            return midpoint[key]

        next_faces = []
        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            next_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = next_faces
    v = np.asarray(verts) * radius
    return TriangleMesh(v, np.asarray(faces, dtype=np.int64))


def make_cylinder(radius: float = 0.4, height: float = 1.6, segments: int = 64) -> TriangleMesh:
    """Cylinder with its axis along y, so the curved wall faces the camera
    laterally at x = +-radius."""
    b = _Builder()
    h = height / 2.0
    ring_lo, ring_hi = [], []
    for i in range(segments):
        a = 2.0 * np.pi * i / segments
        x, z = radius * np.cos(a), radius * np.sin(a)
        ring_lo.append(b.vertex(x, -h, z))
        ring_hi.append(b.vertex(x, h, z))
    c_lo = b.vertex(0.0, -h, 0.0)
    c_hi = b.vertex(0.0, h, 0.0)
    for i in range(segments):
        j = (i + 1) % segments
        b.quad(ring_lo[j], ring_lo[i], ring_hi[i], ring_hi[j])
        b.tri(c_lo, ring_lo[i], ring_lo[j])
        b.tri(c_hi, ring_hi[j], ring_hi[i])
    return b.mesh()


def make_torus(
    major_radius: float = 0.75,
    minor_radius: float = 0.25,
    segments_major: int = 64,
    segments_minor: int = 32,
) -> TriangleMesh:
    """Ring torus around the z axis: a z ray through the hole misses, a ray
    through the tube crosses twice."""
    b = _Builder()
    grid = np.empty((segments_major, segments_minor), dtype=np.int64)
    for i in range(segments_major):
        u = 2.0 * np.pi * i / segments_major
        for j in range(segments_minor):
            v = 2.0 * np.pi * j / segments_minor
            r = major_radius + minor_radius * np.cos(v)
            grid[i, j] = b.vertex(r * np.cos(u), r * np.sin(u), minor_radius * np.sin(v))
    for i in range(segments_major):
        i2 = (i + 1) % segments_major
        for j in range(segments_minor):
            j2 = (j + 1) % segments_minor
            b.quad(grid[i, j], grid[i2, j], grid[i2, j2], grid[i, j2])
    return b.mesh()


def make_thin_fin(fin_x_end: float = FIN_X_END) -> TriangleMesh:
    """Box body with a fin plate of thickness 0.02 sticking out along +x.

    The body's +x wall carries a rectangular opening where the fin
    attaches, keeping the union watertight.
    """
    b = _Builder()
    x0, x1 = -1.0, FIN_BODY_X_END
    w, t = FIN_HALF_WIDTH, FIN_THICKNESS / 2.0

    v = {}
    for ix, x in enumerate((x0, x1)):
        for iy, y in enumerate((-0.5, 0.5)):
            for iz, z in enumerate((-0.5, 0.5)):
                v[ix, iy, iz] = b.vertex(x, y, z)
    b.quad(v[0, 0, 0], v[0, 0, 1], v[0, 1, 1], v[0, 1, 0])  # -x
    b.quad(v[0, 0, 0], v[1, 0, 0], v[1, 0, 1], v[0, 0, 1])  # -y
    b.quad(v[0, 1, 0], v[0, 1, 1], v[1, 1, 1], v[1, 1, 0])  # +y
    b.quad(v[0, 0, 0], v[0, 1, 0], v[1, 1, 0], v[1, 0, 0])  # -z
    b.quad(v[0, 0, 1], v[1, 0, 1], v[1, 1, 1], v[0, 1, 1])  # +z

    # +x wall as a ring around the fin opening
    inner = {
        (0, 0): b.vertex(x1, -w, -t),
        (1, 0): b.vertex(x1, w, -t),
        (0, 1): b.vertex(x1, -w, t),
        (1, 1): b.vertex(x1, w, t),
    }
    o00, o10 = v[1, 0, 0], v[1, 1, 0]
    o01, o11 = v[1, 0, 1], v[1, 1, 1]
    # outward normal +x: counterclockwise seen from +x is (y,z) counterclockwise
    b.quad(o00, o10, inner[1, 0], inner[0, 0])  # below opening
    b.quad(inner[0, 1], inner[1, 1], o11, o01)  # above opening
    b.quad(o00, inner[0, 0], inner[0, 1], o01)  # -y side strip
    b.quad(inner[1, 0], o10, o11, inner[1, 1])  # +y side strip

    far = {
        (0, 0): b.vertex(fin_x_end, -w, -t),
        (1, 0): b.vertex(fin_x_end, w, -t),
        (0, 1): b.vertex(fin_x_end, -w, t),
        (1, 1): b.vertex(fin_x_end, w, t),
    }
    b.quad(inner[0, 1], far[0, 1], far[1, 1], inner[1, 1])  # fin top (+z)
    b.quad(inner[0, 0], inner[1, 0], far[1, 0], far[0, 0])  # fin bottom (-z)
    b.quad(far[0, 0], far[1, 0], far[1, 1], far[0, 1])  # fin end (+x)
    b.quad(inner[0, 0], far[0, 0], far[0, 1], inner[0, 1])  # fin -y rim
    b.quad(inner[1, 0], inner[1, 1], far[1, 1], far[1, 0])  # fin +y rim
    return b.mesh()


def make_partial_fin() -> TriangleMesh:
    return make_thin_fin(fin_x_end=0.6)


def fin_region_box(margin: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Axis-aligned box enclosing the full fin plate (used for recall masks)."""
    t = FIN_THICKNESS / 2.0
    lo = np.array([FIN_BODY_X_END + margin, -FIN_HALF_WIDTH, -t])
    hi = np.array([FIN_X_END, FIN_HALF_WIDTH, t])
    return lo, hi


def fin_face_mask(mesh: TriangleMesh, tol: float = 1e-6) -> np.ndarray:
    """True for the fin's plate faces (the 0.02-thick walls)."""
    tri = mesh.triangle_vertices()
    t = FIN_THICKNESS / 2.0
    on_plate = np.all(np.abs(np.abs(tri[:, :, 2]) - t) < tol, axis=1)
    past_body = np.all(tri[:, :, 0] >= FIN_BODY_X_END - tol, axis=1)
    return on_plate & past_body


def make_wavy_slab(
    amplitude: float = 0.02,
    periods: float = 2.0,
    extent: float = 1.6,
    thickness: float = 0.2,
    n: int = 32,
) -> TriangleMesh:
    """Slab whose top surface carries a sinusoidal height perturbation."""
    b = _Builder()
    e = extent / 2.0
    z_top, z_bot = thickness / 2.0, -thickness / 2.0
    coords = np.linspace(-e, e, n + 1)

    def top_z(x, y):
        fx = 2.0 * np.pi * periods * (x + e) / extent
        fy = 2.0 * np.pi * periods * (y + e) / extent
        return z_top + amplitude * np.sin(fx) * np.cos(fy)

    top = np.empty((n + 1, n + 1), dtype=np.int64)
    bot = np.empty((n + 1, n + 1), dtype=np.int64)
    for i, x in enumerate(coords):
        for j, y in enumerate(coords):
            top[i, j] = b.vertex(x, y, top_z(x, y))
            bot[i, j] = b.vertex(x, y, z_bot)
    for i in range(n):
        for j in range(n):
            b.quad(top[i, j], top[i + 1, j], top[i + 1, j + 1], top[i, j + 1])
            b.quad(bot[i, j], bot[i, j + 1], bot[i + 1, j + 1], bot[i + 1, j])
    for i in range(n):
        b.quad(bot[i, 0], bot[i + 1, 0], top[i + 1, 0], top[i, 0])  # -y wall
        b.quad(bot[i + 1, n], bot[i, n], top[i, n], top[i + 1, n])  # +y wall
        b.quad(bot[0, i + 1], bot[0, i], top[0, i], top[0, i + 1])  # -x wall
        b.quad(bot[n, i], bot[n, i + 1], top[n, i + 1], top[n, i])  # +x wall
    return b.mesh()


FIXTURES = {
    "cube": make_cube,
    "icosphere": make_icosphere,
    "slab": make_slab,
    "cylinder": make_cylinder,
    "torus": make_torus,
    "thin_fin": make_thin_fin,
    "partial_fin": make_partial_fin,
    "wavy_slab": make_wavy_slab,
}


def write_fixture_set(out_dir: str | Path, thin_weight: float = 8.0) -> list[Path]:
    """Write the canonical fixture meshes plus per-face region-weight files.

    Weight files carry ``face_index weight`` lines; fin plate faces get the
    thin boost, everything else 1. Output bytes are reproducible.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for name, builder in FIXTURES.items():
        mesh = builder()
        obj_path = out_dir / f"{name}.obj"
        save_obj(mesh, obj_path)
        weights = np.ones(len(mesh.faces))
        if name in ("thin_fin", "partial_fin"):
            weights[fin_face_mask(mesh)] = thin_weight
        weight_path = out_dir / f"{name}.weights.txt"
        lines = [f"{i} {w:.9g}" for i, w in enumerate(weights)]
        weight_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        written += [obj_path, weight_path]
    lo, hi = fin_region_box()
    meta = {"fin_region": {"lo": [float(v) for v in lo], "hi": [float(v) for v in hi]}}
    meta_path = out_dir / "fixtures.meta.json"
    meta_path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    written.append(meta_path)
    return written


def load_region_weights(path: str | Path, n_faces: int) -> np.ndarray:
    """Parse an ASCII ``face_index weight`` file into a per-face array."""
    weights = np.ones(n_faces)
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        parts = line.split()
        if not parts or parts[0].startswith("#"):
            continue
        idx, w = int(parts[0]), float(parts[1])
        if not 0 <= idx < n_faces:
            raise ValueError(f"{path}:{lineno}: face index {idx} out of range for {n_faces} faces")
        if w < 0:
            raise ValueError(f"{path}:{lineno}: negative weight")
        weights[idx] = w
    return weights
