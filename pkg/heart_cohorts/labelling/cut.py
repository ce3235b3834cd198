import logging

import numpy as np

from heart_cohorts.config import LabelConfig
from heart_cohorts.errors import BasalPlaneNotFound, ClusterSeparationFailed
from heart_cohorts.geometry.mesh import face_components
from heart_cohorts.labelling.biventricular import (EPI, LV, RV, SEPTAL, _centroid, _grow, _require_closed,
                                                   _sampled_faces, carve_septum, clean_classes, hull_volume,
                                                   locate_apices, padded_hull)
from heart_cohorts.labelling.labels import LabelMap, SurfaceLabel
from heart_cohorts.labelling.landmarks import angle_between, long_axis
from heart_cohorts.labelling.projection import spread_from_subset
from heart_cohorts.labelling.smoothing import absorb_islands, smooth_labels
from heart_cohorts.rays.ray_engine import RayEngine, face_ray_stats

logger = logging.getLogger(__name__)

BASAL = int(SurfaceLabel.BasalPlane)


def separate_cavities(mesh, depth, config):
    """
    Sweeps the hull-distance threshold upwards from `cut_start` in `cut_step` increments until the
    faces lying deeper than it form exactly two significant components.
    Output:
        - components (list): the two face index arrays
        - threshold (float)
    """
    threshold = config.cut_start
    limit = mesh.bounding_diagonal
    min_area = config.min_cavity_fraction * mesh.total_area
    steps = 0
    while threshold <= limit:
        deep = depth > threshold
        n, comp = face_components(mesh, deep)
        areas = np.bincount(comp[comp >= 0], weights=mesh.face_areas[comp >= 0], minlength=n)
        significant = np.flatnonzero(areas >= min_area)
        if significant.size == 2:
            logger.info("cavities separated at hull distance %.3g mm after %d steps", threshold, steps)
            return [np.flatnonzero(comp == c) for c in significant], threshold
        threshold += config.cut_step
        steps += 1
    raise ClusterSeparationFailed("no hull-distance threshold up to %.3g mm yields two cavities" % limit,
                                  report={"max_threshold": limit, "steps": steps})


def _rim_band(mesh, face_labels, config):
    """Epicardial faces within `ring_width` of the cavity borders, grown through the epicardium."""
    epi = face_labels == EPI
    cavity = np.isin(face_labels, (LV, RV, SEPTAL))
    seed = epi & (mesh.adjacency_graph @ cavity.astype(float) > 0)
    if not np.any(seed & (mesh.adjacency_graph @ (face_labels == LV).astype(float) > 0)):
        raise BasalPlaneNotFound("no epicardial face borders the LV endocardium")
    spacing = float(np.median(mesh.edge_lengths()))
    layers = max(1, int(np.ceil(config.ring_width / spacing)))
    return _grow(mesh, seed, epi, layers)


def _dominant_normal(mesh, faces, start, angle, iterations=5):
    """Area-weighted mean normal of the faces within `angle` of the running estimate."""
    cos_angle = np.cos(np.deg2rad(angle))
    normal = start / np.linalg.norm(start)
    normals = mesh.face_normals[faces]
    w = mesh.face_areas[faces]
    for _ in range(iterations):
        near = normals @ normal >= cos_angle
        if not np.any(near):
            return None
        mean = (normals[near] * w[near, None]).sum(axis=0)
        norm = np.linalg.norm(mean)
        if norm <= 1e-300:
            return None
        normal = mean / norm
    return normal


def basal_plane(mesh, face_labels, config):
    """
    BasalPlane faces: epicardial faces whose normal lies within `basal_angle` of the basal
    normal, connected to the band of epicardium around the cavity openings. The basal normal is
    the dominant normal of that band, refined from the direction opposite the LV long axis.
    Output:
        - faces (ndarray)
        - normal (ndarray): the basal normal, pointing away from the apex
    """
    band = _rim_band(mesh, face_labels, config)
    band_faces = np.flatnonzero(band)
    rim = _centroid(mesh, band_faces)
    axis = long_axis(mesh, np.flatnonzero(face_labels == LV), rim)
    normal = _dominant_normal(mesh, band_faces, -axis, config.basal_angle)
    if normal is None:
        raise BasalPlaneNotFound("no epicardial face near the cavity rims faces away from the apex",
                                 report={"band_faces": int(band_faces.size), "axis": axis.tolist()})
    tilt = angle_between(normal, -axis)
    if tilt > config.basal_angle:
        raise BasalPlaneNotFound("basal normal is %.1f deg from the LV long axis (limit %.1f)" % (tilt, config.basal_angle),
                                 report={"angle": tilt, "normal": normal.tolist(), "axis": axis.tolist()})
    epi = face_labels == EPI
    aligned = epi & (mesh.face_normals @ normal >= np.cos(np.deg2rad(config.basal_angle)))
    n, comp = face_components(mesh, aligned)
    touching = np.unique(comp[band & aligned])
    faces = np.flatnonzero(np.isin(comp, touching[touching >= 0]))
    if faces.size == 0:
        raise BasalPlaneNotFound("no epicardial face aligned with the basal normal touches the cavity rims",
                                 report={"normal": normal.tolist(), "band_faces": int(band_faces.size)})
    return faces, normal


def label_cut_geometry(mesh, config=None):
    """
    Labels a closed surface truncated by a basal plane.
    Rays are cast against the padded convex hull only; the cavities are the faces far from the hull.
    Output:
        - labels (LabelMap): kind "cut", ApexLV (and ApexRV) set
    """
    config = (config or LabelConfig()).validate()
    _require_closed(mesh)
    hull = padded_hull(mesh, config.hull_scale)
    stats = face_ray_stats(mesh, hull, include_self_mesh=False, engine=RayEngine([hull]),
                           faces=_sampled_faces(mesh, config))
    depth = spread_from_subset(mesh, np.nan_to_num(stats.d_n_plus, nan=0.0, posinf=0.0), stats.valid)

    cavities, _ = separate_cavities(mesh, depth, config)
    volumes = [hull_volume(mesh, f) for f in cavities]
    rv_faces, lv_faces = cavities if volumes[0] > volumes[1] else cavities[::-1]
    labels = np.full(mesh.n_faces, EPI, dtype=np.int64)
    labels[lv_faces] = LV
    labels[rv_faces] = RV
    labels = clean_classes(mesh, labels, (EPI, LV, RV), config)
    labels = carve_septum(mesh, labels, hull, config)

    faces, normal = basal_plane(mesh, labels, config)
    labels[faces] = BASAL
    labels = absorb_islands(mesh, labels, BASAL, keep=1)
    labels = np.array(smooth_labels(LabelMap(mesh, labels, kind="cut"), mesh, config.smoothing_iterations).face_labels)
    if not np.any(labels == BASAL):
        raise BasalPlaneNotFound("basal plane faces lost during smoothing", report={"faces": int(faces.size)})
    base = mesh.face_centroids[labels == BASAL].mean(axis=0)
    apex_lv, apex_rv = locate_apices(mesh, labels, base)
    result = LabelMap(mesh, labels, apex_lv=apex_lv, apex_rv=apex_rv, kind="cut")
    logger.info("labelled cut geometry (basal normal %s): %s", np.round(normal, 3).tolist(), result)
    return result
