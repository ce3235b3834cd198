import logging
import warnings

import numpy as np
from scipy.spatial import cKDTree

from heart_cohorts.errors import MeshesDisjoint
from heart_cohorts.labelling.labels import LabelMap

logger = logging.getLogger(__name__)

MIN_BOX_OVERLAP = 0.9
WARN_EDGE_FACTOR = 2.0
_BOX_PAD = 1e-3


def box_overlap(mesh_a, mesh_b):
    """Volume of the intersection of the two bounding boxes over the volume of the smaller box."""
    lo_a, hi_a = mesh_a.bounding_box
    lo_b, hi_b = mesh_b.bounding_box
    lo_a, lo_b = lo_a - _BOX_PAD, lo_b - _BOX_PAD
    hi_a, hi_b = hi_a + _BOX_PAD, hi_b + _BOX_PAD
    inter = np.clip(np.minimum(hi_a, hi_b) - np.maximum(lo_a, lo_b), 0.0, None).prod()
    smaller = min((hi_a - lo_a).prod(), (hi_b - lo_b).prod())
    return float(inter / smaller)


def project_labels(source, target, warn_factor=WARN_EDGE_FACTOR):
    """
    Labels `target` with the label of the nearest source face centroid.
    Args:
        - source (LabelMap or SurfaceMesh): labelled surface (a mesh must carry `surface_label` cell data)
        - target (SurfaceMesh): surface of the same anatomy
    Output:
        - labels (LabelMap): map over `target`, apices moved to the nearest target vertices
    """
    if not isinstance(source, LabelMap):
        source = LabelMap.from_mesh(source, kind=None)
    overlap = box_overlap(source.mesh, target)
    if overlap < MIN_BOX_OVERLAP:
        raise MeshesDisjoint("bounding boxes overlap by %.1f%% (need %.0f%%)" % (100 * overlap, 100 * MIN_BOX_OVERLAP),
                             report={"overlap": overlap})
    distance, nearest = cKDTree(source.mesh.face_centroids).query(target.face_centroids)
    limit = warn_factor * float(np.median(source.mesh.edge_lengths()))
    far = int(np.sum(distance > limit))
    if far:
        message = "%d target faces lie more than %.3g mm from any source face centroid" % (far, limit)
        logger.warning(message)
        warnings.warn(message)

    apex = {}
    if source.apex_lv is not None or source.apex_rv is not None:
        tree = cKDTree(target.vertices)
        for key, vertex in (("apex_lv", source.apex_lv), ("apex_rv", source.apex_rv)):
            if vertex is not None:
                apex[key] = int(tree.query(source.mesh.vertices[vertex])[1])
    return LabelMap(target, source.face_labels[nearest], kind=source.kind, **apex)


def subsample_faces(mesh, max_faces, seed=0):
    """Uniformly drawn sorted face indices, at most `max_faces` of them."""
    if mesh.n_faces <= max_faces:
        return np.arange(mesh.n_faces)
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(mesh.n_faces, size=max_faces, replace=False))


def spread_from_subset(mesh, values, queried):
    """Per-face values outside `queried` copied from the nearest queried face centroid."""
    values = np.array(values)
    queried = np.asarray(queried, dtype=bool)
    if np.all(queried):
        return values
    idx = np.flatnonzero(queried)
    _, nearest = cKDTree(mesh.face_centroids[idx]).query(mesh.face_centroids[~queried])
    values[~queried] = values[idx[nearest]]
    return values
