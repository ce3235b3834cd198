import logging
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from heart_cohorts.errors import UnsupportedElement
from heart_cohorts.geometry.mesh import TET

logger = logging.getLogger(__name__)

INSIDE_TOL = -1e-9
FALLBACK_CANDIDATES = 16

INSIDE = "inside"
NEAREST_FALLBACK = "nearest-fallback"


@dataclass(frozen=True)
class PointLocation:
    element: int
    weights: tuple
    containment: str


@dataclass
class Locations:
    """Batched PointLocation: element, barycentric weights [n x 4], inside flag."""
    element: np.ndarray
    weights: np.ndarray
    inside: np.ndarray

    def __len__(self):
        return self.element.shape[0]

    def __getitem__(self, i):
        return PointLocation(int(self.element[i]), tuple(float(w) for w in self.weights[i]),
                             INSIDE if self.inside[i] else NEAREST_FALLBACK)

    @property
    def n_fallback(self):
        return int(np.sum(~self.inside))


def _expand(starts, counts):
    total = int(counts.sum())
    owner = np.repeat(np.arange(counts.size), counts)
    offset = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
    return owner, np.repeat(starts, counts) + offset


class TetLocator:
    """
    Spatial hash over tetrahedron bounding boxes. Every tetrahedron is registered in
    each bucket its box touches, so the bucket of a point lists every tetrahedron
    that can contain it.
    """

    def __init__(self, mesh, bucket_size=None):
        if mesh.kind != TET:
            raise UnsupportedElement("point location needs a tetrahedral mesh")
        if mesh.n_elements == 0:
            raise ValueError("point location needs a non-empty mesh")
        self.mesh = mesh
        x = mesh.nodes[mesh.elements]
        self._x0 = x[:, 0]
        basis = np.stack((x[:, 1] - x[:, 0], x[:, 2] - x[:, 0], x[:, 3] - x[:, 0]), axis=2)
        det = np.linalg.det(basis)
        safe = np.abs(det) > 1e-300
        self._inverse = np.zeros_like(basis)
        self._inverse[safe] = np.linalg.inv(basis[safe])
        self._valid = safe

        lo = x.min(axis=1)
        hi = x.max(axis=1)
        if bucket_size is None:
            bucket_size = float(np.median((hi - lo).max(axis=1)))
        self.bucket_size = max(bucket_size, 1e-9)
        self.origin = lo.min(axis=0)
        self.dims = np.floor((hi.max(axis=0) - self.origin) / self.bucket_size).astype(np.int64) + 1
        ilo = self._cell(lo)
        ihi = self._cell(hi)
        extent = ihi - ilo + 1
        counts = extent.prod(axis=1)
        tet, local = _expand(np.zeros(counts.size, dtype=np.int64), counts)
        ext = extent[tet]
        dk = local % ext[:, 2]
        dj = (local // ext[:, 2]) % ext[:, 1]
        di = local // (ext[:, 1] * ext[:, 2])
        cells = ilo[tet] + np.stack((di, dj, dk), axis=1)
        keys = np.ravel_multi_index(cells.T, self.dims)
        order = np.lexsort((tet, keys))
        self._bucket_tets = tet[order]
        sorted_keys = keys[order]
        n_buckets = int(np.prod(self.dims))
        self._bucket_start = np.searchsorted(sorted_keys, np.arange(n_buckets + 1))
        self._centroids = cKDTree(x.mean(axis=1))

    def _cell(self, points):
        c = np.floor((points - self.origin) / self.bucket_size).astype(np.int64)
        return np.clip(c, 0, self.dims - 1)

    def barycentric(self, tets, points):
        lam = np.einsum("nij,nj->ni", self._inverse[tets], points - self._x0[tets])
        return np.concatenate((1.0 - lam.sum(axis=1, keepdims=True), lam), axis=1)

    def candidates(self, points):
        """(point, tet) pairs from the hash buckets, sorted by point then tet."""
        cells = np.floor((points - self.origin) / self.bucket_size).astype(np.int64)
        in_grid = np.all((cells >= 0) & (cells < self.dims), axis=1)
        idx = np.flatnonzero(in_grid)
        keys = np.ravel_multi_index(cells[idx].T, self.dims)
        starts = self._bucket_start[keys]
        counts = self._bucket_start[keys + 1] - starts
        owner, pos = _expand(starts, counts)
        return idx[owner], self._bucket_tets[pos]

    def locate(self, points):
        """
        Containing tetrahedron of each point (lowest index when several contain it),
        else the nearest of a few candidate tetrahedra with clamped weights.
        """
        points = np.asarray(points, dtype=float).reshape(-1, 3)
        n = points.shape[0]
        element = -np.ones(n, dtype=np.int64)
        weights = np.zeros((n, 4))
        pid, tid = self.candidates(points)
        if pid.size:
            w = self.barycentric(tid, points[pid])
            ok = (w.min(axis=1) >= INSIDE_TOL) & self._valid[tid]
            pid, tid, w = pid[ok], tid[ok], w[ok]
            first = np.ones(pid.size, dtype=bool)
            first[1:] = pid[1:] != pid[:-1]
            element[pid[first]] = tid[first]
            weights[pid[first]] = w[first]
        inside = element >= 0

        missing = np.flatnonzero(~inside)
        if missing.size:
            k = min(FALLBACK_CANDIDATES, self.mesh.n_elements)
            _, near = self._centroids.query(points[missing], k=k)
            near = np.asarray(near).reshape(missing.size, k)
            best_d = np.full(missing.size, np.inf)
            for c in range(k):
                tets = near[:, c]
                w = np.clip(self.barycentric(tets, points[missing]), 0.0, None)
                w /= np.maximum(w.sum(axis=1, keepdims=True), 1e-300)
                x = self.mesh.nodes[self.mesh.elements[tets]]
                projected = np.einsum("ni,nij->nj", w, x)
                d = np.linalg.norm(projected - points[missing], axis=1)
                better = (d < best_d) & self._valid[tets]
                best_d[better] = d[better]
                element[missing[better]] = tets[better]
                weights[missing[better]] = w[better]
            logger.debug("%d points outside the mesh located by nearest tetrahedron (max distance %.3g mm)",
                         missing.size, float(best_d.max()))
        return Locations(element=element, weights=weights, inside=inside)


def locate_point(mesh, p, locator=None):
    locator = TetLocator(mesh) if locator is None else locator
    return locator.locate(np.asarray(p, dtype=float).reshape(1, 3))[0]
