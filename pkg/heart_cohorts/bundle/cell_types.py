import logging
from enum import IntEnum

import numpy as np
from scipy.spatial import cKDTree
from trimesh.triangles import closest_point

from heart_cohorts.config import BundleConfig
from heart_cohorts.errors import MissingField
from heart_cohorts.labelling.labels import ENDO, SurfaceLabel

logger = logging.getLogger(__name__)


class CellType(IntEnum):
    Endo = 0
    Mid = 1
    Epi = 2


def assign_cell_types(transmural, node_labels=None, config=None):
    """
    Endo/mid/epi per node from the transmural field.
    Args:
        - transmural (ScalarField or ndarray): 0 on the endocardium, 1 on the epicardium
        - node_labels (NodeLabels): nodes on EndoRVSeptal are set to epi
        - config (BundleConfig): `endo_threshold` and `epi_threshold`
    Output:
        - cell_types (ndarray): CellType per node
    """
    if transmural is None:
        raise MissingField("cell types need the transmural field")
    config = (config or BundleConfig()).validate()
    d = np.asarray(getattr(transmural, "values", transmural), dtype=float)
    defined = getattr(transmural, "defined", np.isfinite(d)) & np.isfinite(d)

    types = np.full(d.shape[0], int(CellType.Mid), dtype=np.int64)
    types[defined & (d < config.endo_threshold)] = CellType.Endo
    types[defined & (d >= config.epi_threshold)] = CellType.Epi
    if np.any(~defined):
        logger.warning("%d nodes without a transmural value are typed mid", int((~defined).sum()))
    if node_labels is not None and SurfaceLabel.EndoRVSeptal in node_labels:
        types[node_labels.nodes(SurfaceLabel.EndoRVSeptal)] = CellType.Epi
    logger.info("cell types: %s", {t.name: int(np.sum(types == t)) for t in CellType})
    return types


def point_triangle_distances(points, triangles):
    """Exact distance from each point to the triangle on the same row ([k x 3] and [k x 3 x 3])."""
    if len(points) == 0:
        return np.zeros(0)
    nearest = closest_point(np.asarray(triangles, dtype=float), np.asarray(points, dtype=float))
    return np.linalg.norm(nearest - points, axis=1)


def endocardial_fast_layer(volume, label_map, thickness=1.0):
    """
    Nodes of `volume` within `thickness` mm of an endocardial face of the labelled surface.
    Candidate faces come from a centroid tree searched with radius `thickness` plus the largest
    centroid-to-corner distance; the test itself is the exact point-triangle distance.
    """
    if not thickness > 0:
        raise ValueError("fast layer thickness must be positive, got %r" % thickness)
    surface = label_map.mesh
    faces = label_map.faces_of(*ENDO)
    mask = np.zeros(volume.n_nodes, dtype=bool)
    if faces.size == 0:
        logger.warning("no endocardial faces; the fast layer is empty")
        return mask
    triangles = surface.vertices[surface.faces[faces]]
    centroids = triangles.mean(axis=1)
    reach = float(np.max(np.linalg.norm(triangles - centroids[:, None, :], axis=2)))
    tree = cKDTree(centroids)

    points = volume.nodes
    near = np.flatnonzero(tree.query(points, distance_upper_bound=thickness + reach)[0] < np.inf)
    if near.size == 0:
        return mask
    candidates = tree.query_ball_point(points[near], thickness + reach)
    counts = np.array([len(c) for c in candidates])
    rows = np.repeat(near, counts)
    cols = np.concatenate([np.asarray(c, dtype=np.int64) for c in candidates])
    within = point_triangle_distances(points[rows], triangles[cols]) <= thickness
    mask[rows[within]] = True
    logger.info("fast endocardial layer of %g mm holds %d of %d nodes", thickness, int(mask.sum()), volume.n_nodes)
    return mask
