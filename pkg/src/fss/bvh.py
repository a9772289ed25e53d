"""BVH over triangle faces plus the spatial queries built on it.

Queries come in two flavors: exact single-element routines that walk the
tree (used where per-ray retry logic matters), and vectorized batch
routines that brute-force chunks of faces or prune via a centroid
KD-tree. Both flavors return identical results on watertight input; the
batch paths exist because Python-level tree walks are too slow for the
sample-set and oracle workloads.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .mesh import TriangleMesh

_T_MIN = 1e-9
_GRAZE_TOL = 1e-9
_JITTER_ANGLE = 1e-5
_MAX_RECAST = 8
_LEAF_SIZE = 8
_BRUTE_FACE_LIMIT = 512
_THICKNESS_BRUTE_LIMIT = 8192


@dataclass
class RayHit:
    t: float
    face_id: int
    normal: np.ndarray
    entering: bool


class Bvh:
    """Binary AABB tree with faces stored contiguously per leaf.

    Nodes are flat arrays: child index -1 marks a leaf, whose faces are
    ``order[start:start+count]``.
    """

    def __init__(self, mesh: TriangleMesh):
        self.mesh = mesh
        tri = mesh.triangle_vertices()
        self._tri = tri
        self._centroids = tri.mean(axis=1)
        face_lo = tri.min(axis=1)
        face_hi = tri.max(axis=1)

        order = np.arange(len(mesh.faces))
        node_lo, node_hi, left, right, start, count = [], [], [], [], [], []

        def build(lo_idx: int, hi_idx: int) -> int:
            node = len(node_lo)
            sel = order[lo_idx:hi_idx]
            node_lo.append(face_lo[sel].min(axis=0))
            node_hi.append(face_hi[sel].max(axis=0))
            left.append(-1)
            right.append(-1)
            start.append(lo_idx)
            count.append(hi_idx - lo_idx)
            if hi_idx - lo_idx > _LEAF_SIZE:
                axis = int(np.argmax(node_hi[node] - node_lo[node]))
                mid = (lo_idx + hi_idx) // 2
                part = np.argsort(self._centroids[sel, axis], kind="stable")
                order[lo_idx:hi_idx] = sel[part]
                left[node] = build(lo_idx, mid)
                right[node] = build(mid, hi_idx)
                count[node] = 0
            return node

        build(0, len(mesh.faces))

        self.order = order
        self.node_lo = np.asarray(node_lo)
        self.node_hi = np.asarray(node_hi)
        self.node_left = np.asarray(left)
        self.node_right = np.asarray(right)
        self.leaf_start = np.asarray(start)
        self.leaf_count = np.asarray(count)
        self._columns: ZColumns | None = None
        self._centroid_tree: cKDTree | None = None
        self._centroid_radius: float | None = None

    # -- structure introspection (used by invariant tests) ------------------

    def leaf_faces(self):
        for node in range(len(self.node_lo)):
            if self.node_left[node] < 0:
                s, c = self.leaf_start[node], self.leaf_count[node]
                yield node, self.order[s : s + c]

    @property
    def columns(self) -> "ZColumns":
        if self._columns is None:
            self._columns = ZColumns(self.mesh)
        return self._columns

    # -- ray queries ---------------------------------------------------------

    def raycast(self, origin, direction, t_min: float = _T_MIN) -> list[RayHit]:
        """All intersections along a ray, sorted ascending by t.

        Hits grazing a triangle edge trigger a jittered re-cast (direction
        tilted by ~1e-5 rad, up to 8 retries); if every retry still grazes,
        the grazing hits are dropped.
        """
        origin = np.asarray(origin, dtype=np.float64)
        direction = np.asarray(direction, dtype=np.float64)
        for attempt in range(_MAX_RECAST + 1):
            d = direction if attempt == 0 else _jitter_direction(direction, attempt)
            t, u, v, face_ids, grazing = self._collect_hits(origin, d, t_min)
            if not grazing:
                break
        if grazing:
            keep = np.minimum(np.minimum(u, v), 1.0 - u - v) >= _GRAZE_TOL
            t, u, v, face_ids = t[keep], u[keep], v[keep], face_ids[keep]
        hits = []
        ord_ = np.argsort(t, kind="stable")
        mesh = self.mesh
        for i in ord_:
            fid = int(face_ids[i])
            n0, n1, n2 = mesh.vertex_normals[mesh.faces[fid]]
            n = (1.0 - u[i] - v[i]) * n0 + u[i] * n1 + v[i] * n2
            n = n / max(np.linalg.norm(n), 1e-30)
            entering = bool(np.dot(d, mesh.face_normals[fid]) < 0.0)
            hits.append(RayHit(float(t[i]), fid, n, entering))
        return hits

    def _collect_hits(self, origin, d, t_min):
        with np.errstate(divide="ignore"):
            inv = 1.0 / d  # +-inf where the direction component is zero
        stack = [0]
        ts, us, vs, fids = [], [], [], []
        grazing = False
        while stack:
            node = stack.pop()
            if not _slab_hit(self.node_lo[node], self.node_hi[node], origin, inv):
                continue
            l = self.node_left[node]
            if l >= 0:
                stack.append(int(l))
                stack.append(int(self.node_right[node]))
                continue
            s, c = self.leaf_start[node], self.leaf_count[node]
            faces = self.order[s : s + c]
            t, u, v, ok = _moller_trumbore(self._tri[faces], origin, d, t_min)
            if np.any(ok):
                margin = np.minimum(np.minimum(u[ok], v[ok]), 1.0 - u[ok] - v[ok])
                if np.any(margin < _GRAZE_TOL):
                    grazing = True
                ts.append(t[ok])
                us.append(u[ok])
                vs.append(v[ok])
                fids.append(faces[ok])
        if ts:
            return np.concatenate(ts), np.concatenate(us), np.concatenate(vs), np.concatenate(fids), grazing
        return (np.empty(0), np.empty(0), np.empty(0), np.empty(0, dtype=np.int64), grazing)

    def raycast_all_batch(self, origins: np.ndarray, directions: np.ndarray):
        """Brute-force all-hit query for a batch of rays against every face.

        Returns (ray_idx, t, face_id, entering) flattened and sorted by
        (ray_idx, t). Intended for meshes up to a few thousand faces.
        """
        origins = np.atleast_2d(origins)
        directions = np.atleast_2d(directions)
        n_rays, n_faces = len(origins), len(self.mesh.faces)
        chunk = max(1, int(4_000_000 // max(n_faces, 1)))
        out_r, out_t, out_f = [], [], []
        for lo in range(0, n_rays, chunk):
            hi = min(lo + chunk, n_rays)
            t, u, v, ok = _moller_trumbore_grid(self._tri, origins[lo:hi], directions[lo:hi], _T_MIN)
            r_idx, f_idx = np.nonzero(ok)
            out_r.append(r_idx + lo)
            out_t.append(t[r_idx, f_idx])
            out_f.append(f_idx)
        ray_idx = np.concatenate(out_r) if out_r else np.empty(0, dtype=np.int64)
        t = np.concatenate(out_t) if out_t else np.empty(0)
        fid = np.concatenate(out_f) if out_f else np.empty(0, dtype=np.int64)
        order = np.lexsort((t, ray_idx))
        ray_idx, t, fid = ray_idx[order], t[order], fid[order]
        dirn = directions[ray_idx]
        entering = np.einsum("nd,nd->n", dirn, self.mesh.face_normals[fid]) < 0.0
        return ray_idx, t, fid, entering

    # -- inside/outside ------------------------------------------------------

    def is_inside(self, p) -> bool:
        return bool(self.is_inside_batch(np.asarray(p, dtype=np.float64)[None, :])[0])

    def is_inside_batch(self, points: np.ndarray) -> np.ndarray:
        """Ray-parity test along +z, vectorized over the column index.

        Columns with edge-grazing or odd total crossing counts fall back to
        per-point jittered ray casts.
        """
        points = np.atleast_2d(points)
        crossings, bad = self.columns.crossings_checked(points[:, :2])
        counts = np.diff(crossings.offsets)
        point_of = np.repeat(np.arange(len(points)), counts)
        above = crossings.z > points[point_of, 2]
        n_above = np.bincount(point_of[above], minlength=len(points))
        inside = n_above % 2 == 1
        for i in np.nonzero(bad)[0]:
            inside[i] = self._is_inside_single(points[i])
        return inside

    def _is_inside_single(self, p) -> bool:
        base = np.array([0.0, 0.0, 1.0])
        parity = False
        for attempt in range(_MAX_RECAST + 1):
            d = base if attempt == 0 else _jitter_direction(base, attempt)
            t, u, v, fids, grazing = self._collect_hits(p, d, _T_MIN)
            parity = len(t) % 2 == 1
            if not grazing:
                break
        return parity

    # -- closest point -------------------------------------------------------

    def closest_point(self, p):
        """Exact nearest point on the surface: best-first tree descent.

        Returns (point, distance, interpolated unit normal, face_id).
        """
        p = np.asarray(p, dtype=np.float64)
        best_d2 = np.inf
        best = None
        heap = [(_aabb_dist2(self.node_lo[0], self.node_hi[0], p), 0)]
        while heap:
            bound, node = heapq.heappop(heap)
            if bound >= best_d2:
                break
            l = self.node_left[node]
            if l >= 0:
                r = int(self.node_right[node])
                for child in (int(l), r):
                    b = _aabb_dist2(self.node_lo[child], self.node_hi[child], p)
                    if b < best_d2:
                        heapq.heappush(heap, (b, child))
                continue
            s, c = self.leaf_start[node], self.leaf_count[node]
            faces = self.order[s : s + c]
            cp, bary = _closest_point_triangles(self._tri[faces], p[None, :].repeat(len(faces), 0))
            d2 = np.sum((cp - p) ** 2, axis=1)
            k = int(np.argmin(d2))
            if d2[k] < best_d2:
                best_d2 = d2[k]
                best = (cp[k], int(faces[k]), bary[k])
        point, fid, bary = best
        normal = self._interp_normal(fid, bary)
        return point, float(np.sqrt(best_d2)), normal, fid

    def closest_point_batch(self, points: np.ndarray):
        """Vectorized exact nearest-surface query.

        Small meshes brute-force every face; larger ones prune with a
        KD-tree over face centroids, growing the candidate set until the
        remaining faces are provably farther than the best hit.
        """
        points = np.atleast_2d(points)
        n_faces = len(self.mesh.faces)
        if n_faces <= _BRUTE_FACE_LIMIT:
            return self._closest_brute(points)
        if self._centroid_tree is None:
            self._centroid_tree = cKDTree(self._centroids)
            self._centroid_radius = float(
                np.max(np.linalg.norm(self._tri - self._centroids[:, None, :], axis=2))
            )
        tree, r_max = self._centroid_tree, self._centroid_radius
        n = len(points)
        out_p = np.empty((n, 3))
        out_d = np.empty(n)
        out_f = np.empty(n, dtype=np.int64)
        out_b = np.empty((n, 3))
        pending = np.arange(n)
        k = 32
        while len(pending):
            k_eff = min(k, n_faces)
            dist_c, idx = tree.query(points[pending], k=k_eff)
            dist_c = np.atleast_2d(dist_c)
            idx = np.atleast_2d(idx)
            flat_pts = np.repeat(points[pending], k_eff, axis=0)
            cp, bary = _closest_point_triangles(self._tri[idx.ravel()], flat_pts)
            d = np.linalg.norm(cp - flat_pts, axis=1).reshape(len(pending), k_eff)
            j = np.argmin(d, axis=1)
            rows = np.arange(len(pending))
            best_d = d[rows, j]
            certified = (best_d <= dist_c[:, -1] - r_max) | (k_eff >= n_faces)
            sel = pending[certified]
            out_d[sel] = best_d[certified]
            flat_best = rows[certified] * k_eff + j[certified]
            out_p[sel] = cp[flat_best]
            out_b[sel] = bary[flat_best]
            out_f[sel] = idx[rows[certified], j[certified]]
            pending = pending[~certified]
            k *= 4
        normals = self._interp_normal_batch(out_f, out_b)
        return out_p, out_d, normals, out_f

    def _closest_brute(self, points):
        n = len(points)
        n_faces = len(self.mesh.faces)
        chunk = max(1, int(500_000 // max(n_faces, 1)))
        out_p = np.empty((n, 3))
        out_d = np.empty(n)
        out_f = np.empty(n, dtype=np.int64)
        out_b = np.empty((n, 3))
        for lo in range(0, n, chunk):
            hi = min(lo + chunk, n)
            m = hi - lo
            flat_pts = np.repeat(points[lo:hi], n_faces, axis=0)
            tris = np.tile(self._tri, (m, 1, 1))
            cp, bary = _closest_point_triangles(tris, flat_pts)
            d = np.linalg.norm(cp - flat_pts, axis=1).reshape(m, n_faces)
            j = np.argmin(d, axis=1)
            rows = np.arange(m)
            out_d[lo:hi] = d[rows, j]
            out_p[lo:hi] = cp[rows * n_faces + j]
            out_b[lo:hi] = bary[rows * n_faces + j]
            out_f[lo:hi] = j
        normals = self._interp_normal_batch(out_f, out_b)
        return out_p, out_d, normals, out_f

    def _interp_normal(self, fid, bary):
        vn = self.mesh.vertex_normals[self.mesh.faces[fid]]
        n = bary @ vn
        return n / max(np.linalg.norm(n), 1e-30)

    def _interp_normal_batch(self, fids, bary):
        vn = self.mesh.vertex_normals[self.mesh.faces[fids]]
        n = np.einsum("nk,nkd->nd", bary, vn)
        return n / np.maximum(np.linalg.norm(n, axis=1, keepdims=True), 1e-30)

    # -- thickness -----------------------------------------------------------

    def local_thickness_batch(self, positions: np.ndarray, normals: np.ndarray):
        """Wall thickness below each surface sample: distance along the
        inward normal (entry offset 1e-6) to the first exiting hit.

        Returns (thickness, ok) where ok=False marks rays that found no
        exit; callers substitute their fallback for those.
        """
        positions = np.atleast_2d(positions)
        normals = np.atleast_2d(normals)
        offset = 1e-6
        origins = positions - offset * normals
        thickness = np.full(len(positions), np.nan)
        ok = np.zeros(len(positions), dtype=bool)
        if len(self.mesh.faces) <= _THICKNESS_BRUTE_LIMIT:
            ray_idx, t, fid, entering = self.raycast_all_batch(origins, -normals)
            exiting = ~entering
            for i in np.nonzero(exiting)[0]:
                r = ray_idx[i]
                if not ok[r]:
                    thickness[r] = t[i] + offset
                    ok[r] = True
        else:
            for i in range(len(positions)):
                hits = self.raycast(origins[i], -normals[i])
                for h in hits:
                    if not h.entering:
                        thickness[i] = h.t + offset
                        ok[i] = True
                        break
        return thickness, ok


# ---------------------------------------------------------------------------
# z-column index: vertical-ray batch queries used by labels, thickness
# planes, voxelization, and rendering
# ---------------------------------------------------------------------------

class ColumnCrossings:
    """CSR batch of z-crossings: per query point, sorted crossing depths with
    face ids, barycentric coordinates, and entering flags (for a ray
    travelling towards +z)."""

    def __init__(self, offsets, z, face_ids, bary, entering, uncertain):
        self.offsets = offsets
        self.z = z
        self.face_ids = face_ids
        self.bary = bary
        self.entering = entering
        self.uncertain = uncertain

    def z_for(self, i: int) -> np.ndarray:
        return self.z[self.offsets[i] : self.offsets[i + 1]]

    def slice_for(self, i: int) -> slice:
        return slice(int(self.offsets[i]), int(self.offsets[i + 1]))


class ZColumns:
    """Uniform 2D grid over the mesh's xy footprint binning face bboxes,
    enabling vectorized vertical-ray queries."""

    def __init__(self, mesh: TriangleMesh, grid: int | None = None):
        self.mesh = mesh
        tri = mesh.triangle_vertices()
        self._tri2d = tri[:, :, :2]
        self._triz = tri[:, :, 2]
        # signed projected double-area; faces seen edge-on are skipped
        a, b, c = self._tri2d[:, 0], self._tri2d[:, 1], self._tri2d[:, 2]
        self._area2 = _cross2(b - a, c - a)
        self._nz = mesh.face_normals[:, 2]

        lo = self._tri2d.min(axis=(0, 1)) - 1e-9
        hi = self._tri2d.max(axis=(0, 1)) + 1e-9
        self.lo, self.hi = lo, hi
        if grid is None:
            grid = int(np.clip(np.sqrt(len(mesh.faces)), 8, 256))
        self.grid = grid
        pitch = (hi - lo) / grid
        self.pitch = np.maximum(pitch, 1e-12)

        f_lo = np.clip(((tri[:, :, :2].min(axis=1) - lo) / self.pitch).astype(np.int64), 0, grid - 1)
        f_hi = np.clip(((tri[:, :, :2].max(axis=1) - lo) / self.pitch).astype(np.int64), 0, grid - 1)
        cells, faces = [], []
        for fid in range(len(mesh.faces)):
            for gx in range(f_lo[fid, 0], f_hi[fid, 0] + 1):
                for gy in range(f_lo[fid, 1], f_hi[fid, 1] + 1):
                    cells.append(gx * grid + gy)
                    faces.append(fid)
        cells = np.asarray(cells, dtype=np.int64)
        faces = np.asarray(faces, dtype=np.int64)
        order = np.lexsort((faces, cells))
        self.cell_faces = faces[order]
        self.cell_offsets = np.searchsorted(cells[order], np.arange(grid * grid + 1))

    def candidates(self, xy: np.ndarray):
        """(point_idx, face_id) candidate pairs from the binning grid."""
        xy = np.atleast_2d(xy)
        g = ((xy - self.lo) / self.pitch).astype(np.int64)
        in_grid = np.all((g >= 0) & (g < self.grid), axis=1)
        cell = np.where(in_grid, g[:, 0] * self.grid + g[:, 1], 0)
        begin = self.cell_offsets[cell]
        end = self.cell_offsets[cell + 1]
        counts = np.where(in_grid, end - begin, 0)
        point_idx = np.repeat(np.arange(len(xy)), counts)
        if len(point_idx) == 0:
            return point_idx, np.empty(0, dtype=np.int64)
        starts = np.repeat(begin, counts)
        within = np.arange(len(point_idx)) - np.repeat(np.cumsum(counts) - counts, counts)
        return point_idx, self.cell_faces[starts + within]

    def crossings(self, xy: np.ndarray, graze_tol: float = _GRAZE_TOL) -> ColumnCrossings:
        xy = np.atleast_2d(xy)
        point_idx, face_ids = self.candidates(xy)
        if len(point_idx) == 0:
            offsets = np.zeros(len(xy) + 1, dtype=np.int64)
            return ColumnCrossings(offsets, np.empty(0), np.empty(0, dtype=np.int64),
                                   np.empty((0, 3)), np.empty(0, dtype=bool),
                                   np.zeros(len(xy), dtype=bool))
        p = xy[point_idx]
        a = self._tri2d[face_ids, 0]
        b = self._tri2d[face_ids, 1]
        c = self._tri2d[face_ids, 2]
        area2 = self._area2[face_ids]
        nondeg = np.abs(area2) > 1e-14
        w0 = _cross2(b - p, c - p)
        w1 = _cross2(c - p, a - p)
        w2 = _cross2(a - p, b - p)
        with np.errstate(divide="ignore", invalid="ignore"):
            u0 = w0 / area2
            u1 = w1 / area2
            u2 = w2 / area2
        margin = np.minimum(np.minimum(u0, u1), u2)
        hit = nondeg & (margin >= 0.0)
        grazing = nondeg & (margin >= -graze_tol) & (margin < graze_tol)

        uncertain = np.zeros(len(xy), dtype=bool)
        np.logical_or.at(uncertain, point_idx[grazing], True)

        pi = point_idx[hit]
        fi = face_ids[hit]
        bary = np.stack([u0[hit], u1[hit], u2[hit]], axis=1)
        z = np.einsum("nk,nk->n", bary, self._triz[fi])
        entering = self._nz[fi] < 0.0
        order = np.lexsort((z, pi))
        pi, fi, z, bary, entering = pi[order], fi[order], z[order], bary[order], entering[order]
        counts = np.bincount(pi, minlength=len(xy))
        offsets = np.concatenate([[0], np.cumsum(counts)])
        return ColumnCrossings(offsets, z, fi, bary, entering, uncertain)

    def crossings_checked(self, xy: np.ndarray, rng_jitter: float = 1e-7) -> tuple[ColumnCrossings, np.ndarray]:
        """Crossings with per-column parity repair.

        Columns that graze an edge or report an odd crossing count are
        re-queried at deterministically jittered xy offsets. Returns the
        crossings plus a boolean mask of columns that could not be repaired.
        """
        xy = np.atleast_2d(xy).astype(np.float64)
        cr = self.crossings(xy)
        counts = np.diff(cr.offsets)
        bad = cr.uncertain | (counts % 2 == 1)
        if not np.any(bad):
            return cr, bad
        fixed_xy = xy.copy()
        still_bad = np.zeros(len(xy), dtype=bool)
        for i in np.nonzero(bad)[0]:
            repaired = False
            for attempt in range(1, _MAX_RECAST + 1):
                delta = rng_jitter * attempt * np.array(
                    [np.cos(2.399963 * attempt), np.sin(2.399963 * attempt)]
                )
                sub = self.crossings(xy[i : i + 1] + delta)
                if not sub.uncertain[0] and len(sub.z) % 2 == 0:
                    fixed_xy[i] = xy[i] + delta
                    repaired = True
                    break
            if not repaired:
                still_bad[i] = True
        cr = self.crossings(fixed_xy)
        # a repair pass can itself land on a new grazing column; flag, don't loop
        counts = np.diff(cr.offsets)
        still_bad |= cr.uncertain | (counts % 2 == 1)
        return cr, still_bad


# ---------------------------------------------------------------------------
# primitive kernels
# ---------------------------------------------------------------------------

def _cross2(u, v):
    return u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]


def _slab_hit(lo, hi, origin, inv_dir) -> bool:
    with np.errstate(invalid="ignore"):
        t0 = (lo - origin) * inv_dir
        t1 = (hi - origin) * inv_dir
    # 0 * inf -> nan means the origin sits on a slab plane of a parallel axis;
    # that axis imposes no constraint
    near = np.minimum(t0, t1)
    far = np.maximum(t0, t1)
    tmin = np.where(np.isnan(near), -np.inf, near).max()
    tmax = np.where(np.isnan(far), np.inf, far).min()
    return tmax >= max(tmin, 0.0)


def _moller_trumbore(tri, origin, d, t_min):
    """Ray vs array of triangles. Returns (t, u, v, hit_mask)."""
    v0, v1, v2 = tri[:, 0], tri[:, 1], tri[:, 2]
    e1 = v1 - v0
    e2 = v2 - v0
    pvec = np.cross(d, e2)
    det = np.einsum("nd,nd->n", e1, pvec)
    ok = np.abs(det) > 1e-14
    inv = np.where(ok, 1.0 / np.where(det == 0.0, 1.0, det), 0.0)
    tvec = origin - v0
    u = np.einsum("nd,nd->n", tvec, pvec) * inv
    qvec = np.cross(tvec, e1)
    v = qvec @ d * inv
    t = np.einsum("nd,nd->n", e2, qvec) * inv
    ok &= (u >= -_GRAZE_TOL) & (v >= -_GRAZE_TOL) & (u + v <= 1.0 + _GRAZE_TOL) & (t > t_min)
    return t, u, v, ok


def _moller_trumbore_grid(tri, origins, dirs, t_min):
    """Rays (R,3) vs triangles (F,3,3) -> (R,F) grids."""
    v0 = tri[None, :, 0]
    e1 = (tri[:, 1] - tri[:, 0])[None, :]
    e2 = (tri[:, 2] - tri[:, 0])[None, :]
    d = dirs[:, None, :]
    pvec = np.cross(d, e2)
    det = np.einsum("rfd,rfd->rf", np.broadcast_to(e1, pvec.shape), pvec)
    ok = np.abs(det) > 1e-14
    inv = np.where(ok, 1.0 / np.where(det == 0.0, 1.0, det), 0.0)
    tvec = origins[:, None, :] - v0
    u = np.einsum("rfd,rfd->rf", tvec, pvec) * inv
    qvec = np.cross(tvec, np.broadcast_to(e1, tvec.shape))
    v = np.einsum("rfd,rfd->rf", np.broadcast_to(d, qvec.shape), qvec) * inv
    t = np.einsum("rfd,rfd->rf", np.broadcast_to(e2, qvec.shape), qvec) * inv
    ok &= (u >= -_GRAZE_TOL) & (v >= -_GRAZE_TOL) & (u + v <= 1.0 + _GRAZE_TOL) & (t > t_min)
    return t, u, v, ok


def _jitter_direction(d, attempt: int) -> np.ndarray:
    # deterministic tilt of ~attempt * 1e-5 rad around a varying axis
    axis = np.array(
        [np.cos(1.7 * attempt), np.sin(2.3 * attempt + 0.5), np.cos(0.9 * attempt + 1.1)]
    )
    axis = axis - d * np.dot(axis, d)
    norm = np.linalg.norm(axis)
    if norm < 1e-12:
        axis = np.array([1.0, 0.0, 0.0]) - d * d[0]
        norm = np.linalg.norm(axis)
    axis /= norm
    out = d + _JITTER_ANGLE * attempt * axis
    return out / np.linalg.norm(out)


def _aabb_dist2(lo, hi, p) -> float:
    d = np.maximum(np.maximum(lo - p, 0.0), p - hi)
    return float(np.dot(d, d))


def _closest_point_triangles(tri, points):
    """Closest point on each triangle to each point (paired arrays).

    Vectorized Ericson-style region classification. Returns (points, bary).
    """
    a, b, c = tri[:, 0], tri[:, 1], tri[:, 2]
    p = points
    ab = b - a
    ac = c - a
    ap = p - a
    d1 = np.einsum("nd,nd->n", ab, ap)
    d2 = np.einsum("nd,nd->n", ac, ap)
    bp = p - b
    d3 = np.einsum("nd,nd->n", ab, bp)
    d4 = np.einsum("nd,nd->n", ac, bp)
    cp = p - c
    d5 = np.einsum("nd,nd->n", ab, cp)
    d6 = np.einsum("nd,nd->n", ac, cp)

    vc = d1 * d4 - d3 * d2
    vb = d5 * d2 - d1 * d6
    va = d3 * d6 - d5 * d4

    n = len(p)
    u = np.empty(n)
    v = np.empty(n)
    w = np.empty(n)

    with np.errstate(divide="ignore", invalid="ignore"):
        # vertex regions
        reg_a = (d1 <= 0) & (d2 <= 0)
        reg_b = (d3 >= 0) & (d4 <= d3)
        reg_c = (d6 >= 0) & (d5 <= d6)
        # edge AB
        t_ab = d1 / (d1 - d3)
        reg_ab = ~reg_a & ~reg_b & ~reg_c & (vc <= 0) & (d1 >= 0) & (d3 <= 0)
        # edge AC
        t_ac = d2 / (d2 - d6)
        reg_ac = ~reg_a & ~reg_b & ~reg_c & ~reg_ab & (vb <= 0) & (d2 >= 0) & (d6 <= 0)
        # edge BC
        t_bc = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        reg_bc = (
            ~reg_a & ~reg_b & ~reg_c & ~reg_ab & ~reg_ac & (va <= 0) & (d4 - d3 >= 0) & (d5 - d6 >= 0)
        )
        interior = ~(reg_a | reg_b | reg_c | reg_ab | reg_ac | reg_bc)
        denom = va + vb + vc
        denom = np.where(denom == 0.0, 1.0, denom)
        v_in = vb / denom
        w_in = vc / denom

    u[reg_a], v[reg_a], w[reg_a] = 1.0, 0.0, 0.0
    u[reg_b], v[reg_b], w[reg_b] = 0.0, 1.0, 0.0
    u[reg_c], v[reg_c], w[reg_c] = 0.0, 0.0, 1.0
    v[reg_ab] = t_ab[reg_ab]
    u[reg_ab] = 1.0 - v[reg_ab]
    w[reg_ab] = 0.0
    w[reg_ac] = t_ac[reg_ac]
    u[reg_ac] = 1.0 - w[reg_ac]
    v[reg_ac] = 0.0
    w[reg_bc] = t_bc[reg_bc]
    v[reg_bc] = 1.0 - w[reg_bc]
    u[reg_bc] = 0.0
    v[interior] = v_in[interior]
    w[interior] = w_in[interior]
    u[interior] = 1.0 - v[interior] - w[interior]

    bary = np.stack([u, v, w], axis=1)
    out = u[:, None] * a + v[:, None] * b + w[:, None] * c
    return out, bary
