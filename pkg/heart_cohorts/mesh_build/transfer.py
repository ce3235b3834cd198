import logging
import warnings

import numpy as np
from scipy.spatial import cKDTree

from heart_cohorts.labelling.labels import SurfaceLabel
from heart_cohorts.mesh_build.locate import TetLocator

logger = logging.getLogger(__name__)


def interpolate_fields(source, targets, names=None, locator=None):
    """
    Barycentric interpolation of the node fields of a tetrahedral mesh at `targets`.
    Args:
        - source (VolumeMesh): tet mesh carrying node fields
        - targets (ndarray): [n x 3] points
        - names (list): fields to transfer, all node fields by default
    Output:
        - values (dict): name -> [n] (or [n x k]) array
        - report (dict): n_points, n_fallback
    """
    targets = np.asarray(targets, dtype=float).reshape(-1, 3)
    locator = TetLocator(source) if locator is None else locator
    located = locator.locate(targets)
    fields = source.node_fields
    names = sorted(fields) if names is None else list(names)
    corner_nodes = source.elements[located.element]
    values = {}
    for name in names:
        f = np.asarray(fields[name], dtype=float)
        corner = f[corner_nodes]
        values[name] = np.einsum("ni,ni...->n...", located.weights, corner)
    report = {"n_points": int(targets.shape[0]), "n_fallback": located.n_fallback}
    if located.n_fallback:
        message = "%d of %d target points fell outside the source mesh; nearest-element weights used" % (
            located.n_fallback, targets.shape[0])
        logger.warning(message)
        warnings.warn(message)
    return values, report


def transfer_to_mesh(source, target, names=None):
    """Copies interpolated source node fields onto the nodes of `target`."""
    values, report = interpolate_fields(source, target.nodes, names)
    return target.with_fields(node_fields=values), report


def surface_node_labels(volume, label_map):
    """
    SurfaceLabel of every boundary node of `volume`, taken from the nearest labelled surface
    face centroid; interior nodes get Unassigned. Apex labels go to the nodes nearest to the
    surface apex vertices.
    """
    surface = label_map.mesh
    labels = np.full(volume.n_nodes, int(SurfaceLabel.Unassigned), dtype=np.int64)
    boundary = volume.boundary_nodes()
    _, nearest = cKDTree(surface.face_centroids).query(volume.nodes[boundary])
    labels[boundary] = label_map.face_labels[nearest]
    return labels, apex_nodes(volume, label_map, boundary)


def apex_nodes(volume, label_map, boundary=None):
    """Boundary node nearest to each surface apex vertex ({'lv': idx, 'rv': idx}, None when unset)."""
    boundary = volume.boundary_nodes() if boundary is None else boundary
    tree = cKDTree(volume.nodes[boundary])
    out = {}
    for key, vertex in (("lv", label_map.apex_lv), ("rv", label_map.apex_rv)):
        if vertex is None:
            out[key] = None
            continue
        _, i = tree.query(label_map.mesh.vertices[vertex])
        out[key] = int(boundary[i])
    return out


def label_node_sets(node_labels):
    """SurfaceLabel -> node indices, for the labels present."""
    return {SurfaceLabel(l): np.flatnonzero(node_labels == l) for l in np.unique(node_labels)
            if l != int(SurfaceLabel.Unassigned)}
