import logging

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from heart_cohorts.common.utils import cross_rows, dot_rows
from heart_cohorts.errors import DegenerateInput
from heart_cohorts.geometry.mesh import SurfaceMesh

logger = logging.getLogger(__name__)

PLANE_EPS = 1e-9


def convex_hull(points):
    """
    Convex hull of a 3D point set as an outward-oriented closed triangle mesh.
    Only the extreme points are kept as vertices, so the operation is idempotent.
    """
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if points.shape[0] < 4:
        raise DegenerateInput("convex hull needs at least 4 points, got %d" % points.shape[0])
    diag = float(np.linalg.norm(points.max(axis=0) - points.min(axis=0)))
    eps = PLANE_EPS * max(diag, 1.0)
    centered = points - points.mean(axis=0)
    singular = np.linalg.svd(centered, compute_uv=False)
    if singular[-1] <= eps:
        raise DegenerateInput("point set is coplanar or collinear (smallest extent %.3g)" % singular[-1])
    try:
        hull = ConvexHull(points)
    except QhullError as e:
        raise DegenerateInput("qhull failed: %s" % str(e).splitlines()[0])

    simplices = hull.simplices.copy()
    outward = hull.equations[:, :3]
    tri = points[simplices]
    normal = cross_rows(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    inward = dot_rows(normal, outward) < 0
    simplices[inward] = simplices[inward][:, [0, 2, 1]]

    used = np.unique(simplices)
    remap = -np.ones(points.shape[0], dtype=np.int64)
    remap[used] = np.arange(used.size)
    mesh = SurfaceMesh(points[used], remap[simplices])

    outside = _max_outside(points, hull.equations)
    if outside > eps:
        logger.warning("hull leaves a point %.3g outside a facet plane", outside)
    return mesh


def _max_outside(points, equations, block=1 << 22):
    """Largest signed distance of any point above a facet plane, in blocks of at most `block` entries."""
    rows = max(1, block // max(len(equations), 1))
    worst = -np.inf
    for s in range(0, points.shape[0], rows):
        d = points[s:s + rows] @ equations[:, :3].T + equations[:, 3]
        worst = max(worst, float(d.max()))
    return worst


def scaled_about_centroid(mesh, scale):
    """Uniform scaling about the vertex centroid; used to pad the labelling hull."""
    c = mesh.vertices.mean(axis=0)
    return SurfaceMesh(c + (mesh.vertices - c) * scale, mesh.faces)
