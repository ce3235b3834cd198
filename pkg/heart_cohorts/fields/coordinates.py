"""
Simplified ventricular coordinates (apicobasal, circumferential, transmural, transventricular)
computed without remeshing on the part of the mesh below the basal plane.
"""
import logging
from dataclasses import dataclass

import numpy as np

from heart_cohorts.config import SolverConfig
from heart_cohorts.errors import MissingField, PlaneBelowApex, MissingLabel
from heart_cohorts.fields.boundary import NodeLabels
from heart_cohorts.fields.laplace import DirichletSpec, ScalarField, solve_laplace
from heart_cohorts.fields.standard import heart_frame, mid_surface, septal_region, septal_remap, _median_edge
from heart_cohorts.labelling.labels import SurfaceLabel
from heart_cohorts.labelling.landmarks import landmarks

logger = logging.getLogger(__name__)

BASAL_OFFSET = 10.0
COORDINATES = ("apicobasal", "circumferential", "transmural", "transventricular")


@dataclass
class BasalPlane:
    """Plane through `point` with unit `normal` pointing towards the apex; `mask` holds the apical nodes."""
    point: np.ndarray
    normal: np.ndarray
    mask: np.ndarray

    def signed_distance(self, points):
        return (np.asarray(points, dtype=float) - self.point) @ self.normal


@dataclass
class CoordinateSet:
    apicobasal: np.ndarray
    circumferential: np.ndarray
    transmural: np.ndarray
    transventricular: np.ndarray
    mask: np.ndarray
    plane: BasalPlane = None

    def __len__(self):
        return self.mask.shape[0]

    def stacked(self):
        """[n x 4] coordinates in COORDINATES order."""
        return np.stack([getattr(self, name) for name in COORDINATES], axis=1)

    def as_fields(self):
        return {name: ScalarField(name, getattr(self, name), self.mask) for name in COORDINATES}

    @classmethod
    def from_arrays(cls, values, mask=None):
        values = np.asarray(values, dtype=float)
        mask = np.all(np.isfinite(values), axis=1) if mask is None else np.asarray(mask, dtype=bool)
        return cls(*(values[:, i] for i in range(4)), mask=mask)


def artificial_basal_plane(volume, label_map, offset=BASAL_OFFSET, marks=None):
    """
    Plane orthogonal to the LV long axis, `offset` mm from the pulmonary valve centroid towards the apex.
    For cut geometries the labelled basal plane is used and every node lies on the apical side.
    """
    marks = landmarks(label_map) if marks is None else marks
    axis = marks.lv_axis
    if label_map.kind == "cut":
        point = label_map.label_centroid(SurfaceLabel.BasalPlane)
        return BasalPlane(point, axis, np.ones(volume.n_nodes, dtype=bool))
    if SurfaceLabel.ValvePulmonary not in marks.valve_centroids:
        raise MissingLabel("the artificial basal plane needs the pulmonary valve")
    point = marks.valve_centroids[SurfaceLabel.ValvePulmonary] + offset * axis
    plane = BasalPlane(point, axis, None)
    plane.mask = plane.signed_distance(volume.nodes) >= 0.0
    apex_depth = float(plane.signed_distance(marks.apex_lv))
    if apex_depth <= 0.0 or not np.any(plane.mask):
        raise PlaneBelowApex("the plane %g mm below the pulmonary valve lies %.1f mm beyond the LV apex"
                             % (offset, -apex_depth), report={"apex_depth": apex_depth})
    logger.info("artificial basal plane %.1f mm above the LV apex keeps %d of %d nodes",
                apex_depth, int(plane.mask.sum()), volume.n_nodes)
    return plane


def _apicobasal(volume, plane, apex_node, node_labels, config):
    """Laplace solve on the elements below the plane: LV apex 0, plane (or BasalPlane) nodes 1."""
    inside = plane.mask[volume.elements].all(axis=1)
    sub, node_map = volume.submesh(inside)
    kept = np.flatnonzero(node_map >= 0)
    if apex_node is None or node_map[apex_node] < 0:
        raise PlaneBelowApex("the LV apex is not part of the mesh below the basal plane")
    if SurfaceLabel.BasalPlane in node_labels:
        top = node_labels.nodes(SurfaceLabel.BasalPlane)
    else:
        outside = ~plane.mask
        touching = np.asarray(volume.node_adjacency()[:, outside].sum(axis=1)).ravel() > 0
        top = np.flatnonzero(touching & plane.mask)
    top = node_map[top]
    top = top[top >= 0]
    bc = DirichletSpec([("apex", [node_map[apex_node]], 0.0), ("basal", top, 1.0)])
    solved = solve_laplace(sub, bc, config, name="apicobasal")
    values = np.full(volume.n_nodes, np.nan)
    values[kept] = solved.values
    defined = np.zeros(volume.n_nodes, dtype=bool)
    defined[kept] = solved.defined
    return values, defined


def _angles(points, centre, axis, reference, septum):
    """Angle about the line (centre, axis) measured from `reference`, septum on the positive side, in [0, 1)."""
    u = reference - centre
    u -= np.dot(u, axis) * axis
    u /= max(np.linalg.norm(u), 1e-300)
    v = np.cross(axis, u)
    s = septum - centre
    if np.dot(s, v) < 0:
        v = -v
    d = points - centre
    theta = np.arctan2(d @ v, d @ u)
    return np.mod(theta / (2 * np.pi), 1.0)


def anterior_junction(label_map, frame, plane=None):
    """Point where the RV septal surface meets the RV free wall furthest towards the anterior."""
    mesh = label_map.mesh
    junction = np.intersect1d(label_map.vertices_of(SurfaceLabel.EndoRVSeptal),
                              label_map.vertices_of(SurfaceLabel.EndoRV))
    if junction.size == 0:
        raise MissingLabel("the RV septal surface does not touch the RV free wall")
    if plane is not None and label_map.kind != "cut":
        below = junction[plane.signed_distance(mesh.vertices[junction]) >= 0.0]
        junction = below if below.size else junction
    points = mesh.vertices[junction]
    return points[np.argmax(points @ frame.posterior_to_anterior)]


def coordinate_fields(volume, label_map, fields, plane=None, config=None, node_labels=None):
    """
    Ventricular coordinates on the nodes below the basal plane (NaN elsewhere).
        - apicobasal: Laplace solve, 0 at the LV apex, 1 on the basal plane
        - transmural: the septum corrected transmural field
        - transventricular: transventricular solve remapped so the septal mid-surface sits at 0.5
        - circumferential: angle about each ventricle's long axis from the anterior septal junction,
          septum first, in [0, 1)
    """
    for name in ("transmural", "transventricular"):
        if name not in fields:
            raise MissingField("coordinates need the %s field" % name)
    config = (config or SolverConfig()).validate()
    node_labels = NodeLabels(volume, label_map) if node_labels is None else node_labels
    marks = landmarks(label_map)
    plane = artificial_basal_plane(volume, label_map, marks=marks) if plane is None else plane

    apicobasal, defined = _apicobasal(volume, plane, node_labels.apex["lv"], node_labels, config)

    region, d_lv, d_septal = septal_region(node_labels)
    mid = mid_surface(region, d_lv, d_septal, 0.5 * _median_edge(volume))
    raw = fields["transventricular"].values
    m = float(np.median(raw[mid])) if np.any(mid) else 0.5
    transventricular = septal_remap(raw, m, share=0.5)

    frame = heart_frame(label_map)
    reference = anterior_junction(label_map, frame, plane)
    mesh = label_map.mesh
    septum = label_map.label_centroid(SurfaceLabel.EndoRVSeptal)
    circumferential = np.empty(volume.n_nodes)
    lv = transventricular <= 0.5
    for side, faces, axis in ((lv, label_map.faces_of(SurfaceLabel.EndoLV), marks.lv_axis),
                              (~lv, label_map.faces_of(SurfaceLabel.EndoRV, SurfaceLabel.EndoRVSeptal), marks.rv_axis)):
        w = mesh.face_areas[faces]
        centre = (mesh.face_centroids[faces] * w[:, None]).sum(axis=0) / w.sum()
        circumferential[side] = _angles(volume.nodes[side], centre, axis, reference, septum)

    mask = defined & plane.mask
    out = CoordinateSet(
        apicobasal=np.where(mask, apicobasal, np.nan),
        circumferential=np.where(mask, circumferential, np.nan),
        transmural=np.where(mask, fields["transmural"].values, np.nan),
        transventricular=np.where(mask, transventricular, np.nan),
        mask=mask,
        plane=plane,
    )
    logger.info("coordinates defined on %d of %d nodes", int(mask.sum()), volume.n_nodes)
    return out
