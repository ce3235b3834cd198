from dataclasses import dataclass, field

import numpy as np

from heart_cohorts.errors import MissingLabel
from heart_cohorts.labelling.labels import LV_VALVES, RV_ENDO, RV_VALVES, VALVES, SurfaceLabel

# principal/secondary variance ratio below which the vertex cloud gives no reliable long axis
ELONGATION_RATIO = 1.5
RV_AXIS_MAX_ANGLE = 45.0


def principal_axis(points):
    """Unit eigenvector of the largest covariance eigenvalue and the ratio to the second one."""
    centred = points - points.mean(axis=0)
    values, vectors = np.linalg.eigh(centred.T @ centred / max(points.shape[0], 1))
    ratio = values[2] / max(values[1], 1e-300)
    return vectors[:, 2], float(ratio)


def revolution_axis(normals, areas):
    """Direction the area-weighted face normals are most orthogonal to."""
    tensor = (normals * areas[:, None]).T @ normals
    _, vectors = np.linalg.eigh(tensor)
    return vectors[:, 0]


def long_axis(mesh, faces, base_point):
    """
    Long axis of the cavity lined by `faces`, pointing from `base_point` towards the apex.
    The principal axis of the vertex cloud is used when it is clearly elongated, otherwise
    the axis of revolution of the face normals.
    """
    vertices = mesh.vertices[np.unique(mesh.faces[faces])]
    axis, ratio = principal_axis(vertices)
    if ratio < ELONGATION_RATIO:
        axis = revolution_axis(mesh.face_normals[faces], mesh.face_areas[faces])
    if np.dot(vertices.mean(axis=0) - base_point, axis) < 0:
        axis = -axis
    return axis / np.linalg.norm(axis)


def angle_between(a, b):
    c = np.dot(a, b) / max(np.linalg.norm(a) * np.linalg.norm(b), 1e-300)
    return float(np.degrees(np.arccos(np.clip(c, -1.0, 1.0))))


def farthest_along(mesh, faces, base_point, axis):
    """Vertex of `faces` with the largest projection onto `axis` measured from `base_point`."""
    vertices = np.unique(mesh.faces[faces])
    depth = (mesh.vertices[vertices] - base_point) @ axis
    return int(vertices[np.argmax(depth)])


@dataclass
class Landmarks:
    """Anatomical reference points and directions of a labelled surface."""
    base_point: np.ndarray
    lv_axis: np.ndarray
    rv_axis: np.ndarray
    apex_lv: np.ndarray
    apex_rv: np.ndarray = None
    valve_centroids: dict = field(default_factory=dict)

    def as_dict(self):
        out = {
            "base_point": self.base_point.tolist(),
            "lv_axis": self.lv_axis.tolist(),
            "rv_axis": self.rv_axis.tolist(),
            "apex_lv": self.apex_lv.tolist(),
            "apex_rv": None if self.apex_rv is None else self.apex_rv.tolist(),
        }
        for label, c in self.valve_centroids.items():
            out[SurfaceLabel(label).name] = c.tolist()
        return out


def base_point(label_map):
    """Barycentre of the valve centroids, or the basal plane centroid of a cut geometry."""
    valves = [l for l in VALVES if label_map.label_area(l) > 0]
    if valves:
        return np.mean([label_map.label_centroid(l) for l in valves], axis=0)
    if label_map.label_area(SurfaceLabel.BasalPlane) > 0:
        return label_map.label_centroid(SurfaceLabel.BasalPlane)
    raise MissingLabel("neither valves nor a basal plane are labelled")


def landmarks(label_map):
    """Landmarks of a completed LabelMap (both apices required for biventricular maps)."""
    if label_map.apex_lv is None:
        raise MissingLabel("ApexLV is not set")
    mesh = label_map.mesh
    base = base_point(label_map)
    lv_faces = label_map.faces_of(SurfaceLabel.EndoLV)
    rv_faces = label_map.faces_of(*RV_ENDO)
    if lv_faces.size == 0:
        raise MissingLabel("EndoLV is empty")
    lv_base = np.mean([label_map.label_centroid(l) for l in LV_VALVES], axis=0) \
        if all(label_map.label_area(l) > 0 for l in LV_VALVES) else base
    lv_axis = long_axis(mesh, lv_faces, lv_base)
    rv_axis = lv_axis
    if rv_faces.size:
        rv_base = np.mean([label_map.label_centroid(l) for l in RV_VALVES], axis=0) \
            if all(label_map.label_area(l) > 0 for l in RV_VALVES) else base
        candidate = long_axis(mesh, rv_faces, rv_base)
        if angle_between(candidate, lv_axis) <= RV_AXIS_MAX_ANGLE:
            rv_axis = candidate
    valves = {l: label_map.label_centroid(l) for l in VALVES if label_map.label_area(l) > 0}
    return Landmarks(
        base_point=base,
        lv_axis=lv_axis,
        rv_axis=rv_axis,
        apex_lv=mesh.vertices[label_map.apex_lv].copy(),
        apex_rv=None if label_map.apex_rv is None else mesh.vertices[label_map.apex_rv].copy(),
        valve_centroids=valves,
    )
