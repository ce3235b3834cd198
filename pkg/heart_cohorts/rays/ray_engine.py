import logging
from dataclasses import dataclass

import numpy as np

from heart_cohorts.common.utils import cross_rows, dot_rows, normalize_rows
from heart_cohorts.errors import GrazingRayError, NotClosed
from heart_cohorts.geometry.hull import scaled_about_centroid
from heart_cohorts.rays.bvh import BVH

logger = logging.getLogger(__name__)

T_MIN = 1e-6
EDGE_EPS = 1e-9
BARY_TOL = 1e-12
DEDUP_EPS = 1e-9
MAX_RETRIES = 8
CHUNK = 8192
HULL_PAD = 1e-3


@dataclass(frozen=True)
class RayHit:
    face: int
    t: float
    point: tuple


@dataclass
class RayStats:
    """
    Per-face ray statistics; `valid` is False for degenerate faces and faces left out of the
    query (their values are undefined). f_plus/f_minus hold the first-hit global face index, -1 for none.
    """
    n_i: np.ndarray
    d_n_plus: np.ndarray
    d_n_minus: np.ndarray
    valid: np.ndarray
    f_plus: np.ndarray = None
    f_minus: np.ndarray = None

    def __len__(self):
        return self.n_i.shape[0]


@dataclass
class Hits:
    """Flat hit table sorted by ray then distance."""
    ray: np.ndarray
    face: np.ndarray
    t: np.ndarray
    edge: np.ndarray

    def first(self, n_rays):
        t = np.full(n_rays, np.inf)
        face = np.full(n_rays, -1, dtype=np.int64)
        if self.ray.size:
            is_first = np.ones(self.ray.size, dtype=bool)
            is_first[1:] = self.ray[1:] != self.ray[:-1]
            t[self.ray[is_first]] = self.t[is_first]
            face[self.ray[is_first]] = self.face[is_first]
        return t, face

    def counts(self, n_rays):
        return np.bincount(self.ray, minlength=n_rays)


def _intersect(triangles, origins, directions, ray_ids, tri_ids):
    """Möller-Trumbore on (ray, triangle) pairs with explicit component arithmetic."""
    tri = triangles[tri_ids]
    o = origins[ray_ids]
    d = directions[ray_ids]
    e1 = tri[:, 1] - tri[:, 0]
    e2 = tri[:, 2] - tri[:, 0]
    p = cross_rows(d, e2)
    det = dot_rows(e1, p)
    scale = np.sqrt(dot_rows(e1, e1) * dot_rows(e2, e2))
    ok = np.abs(det) > 1e-12 * scale
    inv = np.zeros_like(det)
    inv[ok] = 1.0 / det[ok]
    s = o - tri[:, 0]
    u = dot_rows(s, p) * inv
    q = cross_rows(s, e1)
    v = dot_rows(d, q) * inv
    t = dot_rows(e2, q) * inv
    w = 1.0 - u - v
    ok &= (u >= -BARY_TOL) & (v >= -BARY_TOL) & (w >= -BARY_TOL)
    edge = np.minimum(np.minimum(u, v), w) <= EDGE_EPS
    return ok, t, edge


class RayEngine:
    """
    Ray queries against the union of one or more surfaces.
    Face indices are global: faces of targets[k] are offset by the face counts of targets[:k].
    """

    def __init__(self, targets, leaf_size=8):
        if not isinstance(targets, (list, tuple)):
            targets = [targets]
        self.targets = list(targets)
        self.face_offsets = np.cumsum([0] + [m.n_faces for m in self.targets])
        self.triangles = np.concatenate([m.vertices[m.faces] for m in self.targets], axis=0)
        degenerate = np.concatenate([m.degenerate_faces for m in self.targets])
        self._active = np.flatnonzero(~degenerate)
        self.bvh = BVH(self.triangles[self._active], leaf_size=leaf_size)

    @property
    def n_faces(self):
        return self.triangles.shape[0]

    def _pairs(self, origins, directions, t_max, brute_force):
        if brute_force:
            n = origins.shape[0]
            ray_ids = np.repeat(np.arange(n), self._active.size)
            tri_ids = np.tile(self._active, n)
            return ray_ids, tri_ids
        ray_ids, local = self.bvh.candidates(origins, directions, t_max)
        return ray_ids, self._active[local]

    def cast_many(self, origins, directions, exclude_faces=None, t_max=None, brute_force=False):
        """
        Casts every ray and returns all hits with T_MIN < t (< t_max), sorted by ray then t.
        Hits at equal distance that both lie on a triangle edge are counted once,
        keeping the lowest face index.
        """
        origins = np.asarray(origins, dtype=float).reshape(-1, 3)
        directions = np.asarray(directions, dtype=float).reshape(-1, 3)
        n = origins.shape[0]
        if exclude_faces is not None:
            exclude_faces = np.broadcast_to(np.asarray(exclude_faces, dtype=np.int64), (n,))
        if t_max is not None:
            t_max = np.broadcast_to(np.asarray(t_max, dtype=float), (n,))
        chunks = []
        for s in range(0, n, CHUNK):
            e = min(n, s + CHUNK)
            tm = None if t_max is None else t_max[s:e]
            ray_ids, tri_ids = self._pairs(origins[s:e], directions[s:e], tm, brute_force)
            ok, t, edge = _intersect(self.triangles, origins[s:e], directions[s:e], ray_ids, tri_ids)
            ok &= t > T_MIN
            if tm is not None:
                ok &= t <= tm[ray_ids]
            if exclude_faces is not None:
                ok &= tri_ids != exclude_faces[s:e][ray_ids]
            chunks.append((ray_ids[ok] + s, tri_ids[ok], t[ok], edge[ok]))
        ray = np.concatenate([c[0] for c in chunks]) if chunks else np.zeros(0, dtype=np.int64)
        face = np.concatenate([c[1] for c in chunks]) if chunks else np.zeros(0, dtype=np.int64)
        t = np.concatenate([c[2] for c in chunks]) if chunks else np.zeros(0)
        edge = np.concatenate([c[3] for c in chunks]) if chunks else np.zeros(0, dtype=bool)

        order = np.lexsort((face, t, ray))
        ray, face, t, edge = ray[order], face[order], t[order], edge[order]
        if ray.size > 1:
            same_ray = ray[1:] == ray[:-1]
            close = np.abs(t[1:] - t[:-1]) <= DEDUP_EPS * np.maximum(1.0, np.abs(t[1:]))
            both_edges = edge[1:] & edge[:-1]
            duplicate = np.concatenate(([False], same_ray & close & both_edges))
            keep = ~duplicate
            ray, face, t, edge = ray[keep], face[keep], t[keep], edge[keep]
            # equal-distance duplicates are ordered by face index, so the lowest index survives
        return Hits(ray, face, t, edge)

    def cast(self, origin, direction, exclude_face=None):
        origin = np.asarray(origin, dtype=float).reshape(1, 3)
        direction = np.asarray(direction, dtype=float).reshape(1, 3)
        exclude = None if exclude_face is None else np.array([exclude_face])
        hits = self.cast_many(origin, direction, exclude)
        points = origin + hits.t[:, None] * direction
        return [RayHit(int(f), float(t), tuple(p)) for f, t, p in zip(hits.face, hits.t, points)]


def cast_ray(targets, origin, direction, exclude_face=None):
    """Ordered hits of a single ray against `targets` (a SurfaceMesh or a list of them)."""
    return RayEngine(targets).cast(origin, direction, exclude_face)


def face_ray_stats(mesh, hull, include_self_mesh=True, engine=None, faces=None):
    """
    Casts a ray from every face centroid along +normal and -normal against
    mesh and hull (or hull only when include_self_mesh is False).
    n_i counts +normal hits; d_n_plus/d_n_minus are nearest-hit distances.
    `faces` restricts the query to a subset of face indices.
    The hull is scaled by 1 + HULL_PAD about its centroid so that mesh faces lying on the hull
    still see their exit hit beyond T_MIN. A caller-supplied `engine` is used as built.
    """
    if engine is None:
        hull = scaled_about_centroid(hull, 1.0 + HULL_PAD)
        engine = RayEngine([mesh, hull] if include_self_mesh else [hull])
    n = mesh.n_faces
    valid = ~mesh.degenerate_faces
    if faces is not None:
        chosen = np.zeros(n, dtype=bool)
        chosen[np.asarray(faces, dtype=np.int64)] = True
        valid &= chosen
    idx = np.flatnonzero(valid)
    origins = mesh.face_centroids[idx]
    normals = mesh.face_normals[idx]
    exclude = idx if include_self_mesh else None

    plus = engine.cast_many(origins, normals, exclude)
    minus = engine.cast_many(origins, -normals, exclude)
    n_i = np.zeros(n, dtype=np.int64)
    d_plus = np.full(n, np.nan)
    d_minus = np.full(n, np.nan)
    f_plus = np.full(n, -1, dtype=np.int64)
    f_minus = np.full(n, -1, dtype=np.int64)
    n_i[idx] = plus.counts(idx.size)
    d_plus[idx], f_plus[idx] = plus.first(idx.size)
    d_minus[idx], f_minus[idx] = minus.first(idx.size)
    if np.any(n_i[idx] == 0):
        logger.warning("%d faces found no exit hit; the hull does not enclose the mesh", int(np.sum(n_i[idx] == 0)))
    return RayStats(n_i=n_i, d_n_plus=d_plus, d_n_minus=d_minus, valid=valid, f_plus=f_plus, f_minus=f_minus)


def _cast_directions(seed):
    rng = np.random.default_rng(seed)
    dirs, _ = normalize_rows(rng.normal(size=(MAX_RETRIES + 1, 3)))
    return dirs


def points_in_mesh(mesh, points, seed=0, engine=None, check_closed=True):
    """
    Crossing-parity inside test. Points whose ray touches a triangle edge are re-cast
    along the next of a fixed seeded sequence of directions.
    """
    if check_closed:
        from heart_cohorts.geometry.mesh import validate_closed
        if not validate_closed(mesh)["watertight"]:
            raise NotClosed("point_in_mesh needs a closed mesh")
    if engine is None:
        engine = RayEngine(mesh)
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    inside = np.zeros(points.shape[0], dtype=bool)
    pending = np.arange(points.shape[0])
    for direction in _cast_directions(seed):
        if pending.size == 0:
            break
        dirs = np.broadcast_to(direction, (pending.size, 3))
        hits = engine.cast_many(points[pending], dirs)
        grazing = np.zeros(pending.size, dtype=bool)
        grazing[hits.ray[hits.edge]] = True
        counts = hits.counts(pending.size)
        done = ~grazing
        inside[pending[done]] = counts[done] % 2 == 1
        pending = pending[grazing]
    if pending.size:
        raise GrazingRayError("%d points graze an edge along all %d cast directions"
                              % (pending.size, MAX_RETRIES + 1), report={"points": points[pending].tolist()})
    return inside


def point_in_mesh(mesh, point, seed=0):
    return bool(points_in_mesh(mesh, np.asarray(point, dtype=float).reshape(1, 3), seed=seed)[0])


def segments_hit_surface(mesh, starts, ends, vertex_ids=None, engine=None):
    """
    Whether each segment start->end crosses `mesh`. With `vertex_ids`, faces incident to
    the segment's own vertex are ignored (offset-vertex segments start on the surface).
    """
    starts = np.asarray(starts, dtype=float).reshape(-1, 3)
    ends = np.asarray(ends, dtype=float).reshape(-1, 3)
    if engine is None:
        engine = RayEngine(mesh)
    dirs, lengths = normalize_rows(ends - starts)
    hits = engine.cast_many(starts, dirs, t_max=lengths)
    ray, face = hits.ray, hits.face
    if vertex_ids is not None and ray.size:
        vf = mesh.vertex_faces()
        local = face < mesh.n_faces
        incident = np.zeros(ray.size, dtype=bool)
        incident[local] = np.asarray(vf[np.asarray(vertex_ids)[ray[local]], face[local]]).ravel() != 0
        ray = ray[~incident]
    out = np.zeros(starts.shape[0], dtype=bool)
    out[ray] = True
    return out
