"""Triangle mesh container, ASCII OBJ/PLY I/O, and surface sampling.

Meshes live in a normalized camera space: an orthographic camera looks
along the z axis, the image plane is xy, and the working volume is
[-1,1]^3 after normalization.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import MeshFormatError

_AREA_EPS = 1e-12


@dataclass
class NormalizeTransform:
    """Maps original coordinates into camera space: p_norm = (p + translation) * scale."""

    scale: float
    translation: np.ndarray

    def apply(self, points: np.ndarray) -> np.ndarray:
        return (np.asarray(points, dtype=np.float64) + self.translation) * self.scale

    def invert(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=np.float64) / self.scale - self.translation

    def to_dict(self) -> dict:
        return {"scale": float(self.scale), "translation": [float(v) for v in self.translation]}

    @classmethod
    def from_dict(cls, d: dict) -> "NormalizeTransform":
        return cls(scale=float(d["scale"]), translation=np.asarray(d["translation"], dtype=np.float64))

    @classmethod
    def identity(cls) -> "NormalizeTransform":
        return cls(scale=1.0, translation=np.zeros(3))


class TriangleMesh:
    """Indexed triangle mesh with derived normals and topology flags.

    vertices: (V,3) float64, faces: (F,3) int64. Vertex normals are
    area-weighted averages of incident face normals unless supplied.
    """

    def __init__(
        self,
        vertices: np.ndarray,
        faces: np.ndarray,
        vertex_normals: np.ndarray | None = None,
        validate: bool = True,
    ):
        self.vertices = np.ascontiguousarray(vertices, dtype=np.float64)
        self.faces = np.ascontiguousarray(faces, dtype=np.int64)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise MeshFormatError("vertices must be (V,3)")
        if self.faces.ndim != 2 or self.faces.shape[1] != 3:
            raise MeshFormatError("faces must be (F,3)")
        if len(self.vertices) == 0 or len(self.faces) == 0:
            raise MeshFormatError("empty mesh")
        if validate:
            self._validate()
        self.face_normals, self.face_areas = _face_geometry(self.vertices, self.faces)
        if validate and np.any(self.face_areas <= _AREA_EPS):
            bad = int(np.argmax(self.face_areas <= _AREA_EPS))
            raise MeshFormatError(f"zero-area face {bad}")
        if vertex_normals is None:
            self.vertex_normals = _angle_weighted_vertex_normals(
                self.vertices, self.faces, self.face_normals
            )
        else:
            self.vertex_normals = np.ascontiguousarray(vertex_normals, dtype=np.float64)
        self.watertight, self.nonmanifold_edge_count = _edge_manifold_check(self.faces)

    def _validate(self):
        if self.faces.min() < 0 or self.faces.max() >= len(self.vertices):
            raise MeshFormatError(
                f"face index out of range: max {self.faces.max()} for {len(self.vertices)} vertices"
            )
        f = self.faces
        if np.any((f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 0] == f[:, 2])):
            raise MeshFormatError("face with repeated vertex indices")

    @property
    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    @property
    def bbox_diagonal(self) -> float:
        lo, hi = self.bbox
        return float(np.linalg.norm(hi - lo))

    def triangle_vertices(self) -> np.ndarray:
        """(F,3,3) array of per-face corner positions."""
        return self.vertices[self.faces]

    def euler_characteristic(self) -> int:
        edges = np.sort(self.faces[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
        n_edges = len(np.unique(edges, axis=0))
        return len(self.vertices) - n_edges + len(self.faces)

    def transformed(self, matrix: np.ndarray) -> "TriangleMesh":
        """Apply a 3x3 linear map to vertices (and normals via the same map, renormalized)."""
        v = self.vertices @ matrix.T
        n = self.vertex_normals @ matrix.T
        n /= np.maximum(np.linalg.norm(n, axis=1, keepdims=True), 1e-30)
        return TriangleMesh(v, self.faces.copy(), vertex_normals=n, validate=False)


def rotation_y(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def _face_geometry(vertices, faces):
    tri = vertices[faces]
    cross = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    double_area = np.linalg.norm(cross, axis=1)
    normals = cross / np.maximum(double_area[:, None], 1e-30)
    return normals, 0.5 * double_area


def _angle_weighted_vertex_normals(vertices, faces, face_normals):
    # corner-angle weighting keeps normals independent of how quads were
    # split into triangles (a plain area weight skews box corners)
    tri = vertices[faces]
    acc = np.zeros_like(vertices)
    for k in range(3):
        e1 = tri[:, (k + 1) % 3] - tri[:, k]
        e2 = tri[:, (k + 2) % 3] - tri[:, k]
        e1 /= np.maximum(np.linalg.norm(e1, axis=1, keepdims=True), 1e-30)
        e2 /= np.maximum(np.linalg.norm(e2, axis=1, keepdims=True), 1e-30)
        angle = np.arccos(np.clip(np.einsum("nd,nd->n", e1, e2), -1.0, 1.0))
        np.add.at(acc, faces[:, k], face_normals * angle[:, None])
    norms = np.linalg.norm(acc, axis=1, keepdims=True)
    return acc / np.maximum(norms, 1e-30)


def _edge_manifold_check(faces) -> tuple[bool, int]:
    edges = np.sort(faces[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
    _, counts = np.unique(edges, axis=0, return_counts=True)
    nonmanifold = int(np.count_nonzero(counts != 2))
    return nonmanifold == 0, nonmanifold


# ---------------------------------------------------------------------------
# I/O
# ---------------------------------------------------------------------------

def load_mesh(path: str | Path) -> TriangleMesh:
    """Load an ASCII OBJ or PLY triangle mesh. Quads and larger polygons are
    fan-triangulated."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".obj":
        return _load_obj(path)
    if suffix == ".ply":
        return _load_ply(path)
    raise MeshFormatError(f"unsupported mesh format: {path.name}")


def _load_obj(path: Path) -> TriangleMesh:
    vertices: list[list[float]] = []
    normals: list[list[float]] = []
    faces: list[list[int]] = []
    normal_idx: list[list[int]] = []
    with open(path, "r", encoding="utf-8", errors="replace") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            tag = parts[0]
            try:
                if tag == "v":
                    vertices.append([float(parts[1]), float(parts[2]), float(parts[3])])
                elif tag == "vn":
                    normals.append([float(parts[1]), float(parts[2]), float(parts[3])])
                elif tag == "f":
                    corner_v, corner_n = [], []
                    for token in parts[1:]:
                        fields = token.split("/")
                        vi = int(fields[0])
                        if vi < 0:
                            raise MeshFormatError(f"{path.name}:{lineno}: negative indices unsupported")
                        corner_v.append(vi - 1)
                        if len(fields) == 3 and fields[2]:
                            corner_n.append(int(fields[2]) - 1)
                    for k in range(1, len(corner_v) - 1):
                        faces.append([corner_v[0], corner_v[k], corner_v[k + 1]])
                        if len(corner_n) == len(corner_v):
                            normal_idx.append([corner_n[0], corner_n[k], corner_n[k + 1]])
            except (ValueError, IndexError) as exc:
                raise MeshFormatError(f"{path.name}:{lineno}: {exc}") from exc
    if not vertices or not faces:
        raise MeshFormatError(f"{path.name}: empty mesh")
    v = np.asarray(vertices)
    f = np.asarray(faces, dtype=np.int64)
    if f.max() >= len(v) or f.min() < 0:
        raise MeshFormatError(f"{path.name}: face index out of range: max {f.max()} for {len(v)} vertices")
    vn = None
    if normals and len(normal_idx) == len(faces):
        # per-corner normals collapsed to per-vertex (last write wins; fixtures are consistent)
        vn_arr = np.zeros((len(v), 3))
        nsrc = np.asarray(normals)
        for tri, ntri in zip(f, normal_idx):
            vn_arr[tri] = nsrc[ntri]
        lens = np.linalg.norm(vn_arr, axis=1, keepdims=True)
        if np.all(lens > 1e-12):
            vn = vn_arr / lens
    return TriangleMesh(v, f, vertex_normals=vn)


def _load_ply(path: Path) -> TriangleMesh:
    with open(path, "r", encoding="utf-8", errors="replace") as fh:
        header = fh.readline().strip()
        if header != "ply":
            raise MeshFormatError(f"{path.name}: not a PLY file")
        n_vertex = n_face = 0
        vertex_props: list[str] = []
        in_vertex_element = False
        while True:
            line = fh.readline()
            if not line:
                raise MeshFormatError(f"{path.name}: truncated header")
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "format":
                if parts[1] != "ascii":
                    raise MeshFormatError(f"{path.name}: only ascii PLY supported")
            elif parts[0] == "element":
                in_vertex_element = parts[1] == "vertex"
                if parts[1] == "vertex":
                    n_vertex = int(parts[2])
                elif parts[1] == "face":
                    n_face = int(parts[2])
            elif parts[0] == "property" and in_vertex_element and parts[1] != "list":
                vertex_props.append(parts[-1])
            elif parts[0] == "end_header":
                break
        try:
            ix, iy, iz = (vertex_props.index(a) for a in ("x", "y", "z"))
        except ValueError as exc:
            raise MeshFormatError(f"{path.name}: vertex element lacks x/y/z") from exc
        vertices = np.empty((n_vertex, 3))
        for i in range(n_vertex):
            row = fh.readline().split()
            vertices[i] = (float(row[ix]), float(row[iy]), float(row[iz]))
        faces: list[list[int]] = []
        for _ in range(n_face):
            row = fh.readline().split()
            count = int(row[0])
            idx = [int(t) for t in row[1 : 1 + count]]
            for k in range(1, count - 1):
                faces.append([idx[0], idx[k], idx[k + 1]])
    if n_vertex == 0 or not faces:
        raise MeshFormatError(f"{path.name}: empty mesh")
    f = np.asarray(faces, dtype=np.int64)
    if f.max() >= n_vertex or f.min() < 0:
        raise MeshFormatError(f"{path.name}: face index out of range: max {f.max()} for {n_vertex} vertices")
    return TriangleMesh(vertices, f)


def save_obj(mesh: TriangleMesh, path: str | Path, with_normals: bool = True) -> None:
    """Write ASCII OBJ with a stable float format (byte-reproducible)."""
    lines = []
    for v in mesh.vertices:
        lines.append(f"v {v[0]:.9g} {v[1]:.9g} {v[2]:.9g}")
    if with_normals:
        for n in mesh.vertex_normals:
            lines.append(f"vn {n[0]:.9g} {n[1]:.9g} {n[2]:.9g}")
        for f in mesh.faces:
            a, b, c = f + 1
            lines.append(f"f {a}//{a} {b}//{b} {c}//{c}")
    else:
        for f in mesh.faces:
            lines.append(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Normalization and surface sampling
# ---------------------------------------------------------------------------

def normalize_to_camera_space(mesh: TriangleMesh) -> tuple[TriangleMesh, NormalizeTransform]:
    """Center the bbox at the origin and scale the longest side to 2."""
    lo, hi = mesh.bbox
    extent = hi - lo
    longest = float(extent.max())
    if longest <= 0.0:
        raise MeshFormatError("degenerate bbox: zero extent in all axes")
    center = 0.5 * (lo + hi)
    transform = NormalizeTransform(scale=2.0 / longest, translation=-center)
    out = TriangleMesh(
        transform.apply(mesh.vertices),
        mesh.faces.copy(),
        vertex_normals=mesh.vertex_normals.copy(),
        validate=False,
    )
    return out, transform


@dataclass
class SurfaceSample:
    position: np.ndarray
    normal: np.ndarray
    face_id: int
    bary: np.ndarray


class SurfaceSamples:
    """Batch of surface samples (positions, interpolated unit normals,
    face ids, barycentric coordinates)."""

    def __init__(self, positions, normals, face_ids, bary):
        self.positions = positions
        self.normals = normals
        self.face_ids = face_ids
        self.bary = bary

    def __len__(self) -> int:
        return len(self.positions)

    def __getitem__(self, i: int) -> SurfaceSample:
        return SurfaceSample(self.positions[i], self.normals[i], int(self.face_ids[i]), self.bary[i])


def sample_surface(
    mesh: TriangleMesh,
    n: int,
    seed: int,
    face_weights: np.ndarray | None = None,
) -> SurfaceSamples:
    """Sample n points with face probability proportional to area x weight and
    uniform barycentric placement inside each face. Deterministic per seed."""
    if n < 1:
        raise ValueError("n must be >= 1")
    weights = mesh.face_areas.copy()
    if face_weights is not None:
        fw = np.asarray(face_weights, dtype=np.float64)
        if fw.shape != (len(mesh.faces),):
            raise ValueError("face_weights must have one entry per face")
        if np.any(fw < 0):
            raise ValueError("face_weights must be non-negative")
        weights *= fw
    total = weights.sum()
    if total <= 0.0:
        raise ValueError("all face weights are zero")
    rng = np.random.default_rng(seed)
    cumulative = np.cumsum(weights)
    face_ids = np.searchsorted(cumulative, rng.random(n) * total)
    face_ids = np.minimum(face_ids, len(mesh.faces) - 1)

    # uniform barycentric via square-root warp
    r1 = np.sqrt(rng.random(n))
    r2 = rng.random(n)
    bary = np.stack([1.0 - r1, r1 * (1.0 - r2), r1 * r2], axis=1)

    tri = mesh.vertices[mesh.faces[face_ids]]
    positions = np.einsum("nk,nkd->nd", bary, tri)
    vn = mesh.vertex_normals[mesh.faces[face_ids]]
    normals = np.einsum("nk,nkd->nd", bary, vn)
    normals /= np.maximum(np.linalg.norm(normals, axis=1, keepdims=True), 1e-30)
    return SurfaceSamples(positions, normals, face_ids, bary)
