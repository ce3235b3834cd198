"""
The Laplace-Dirichlet field catalogue of a labelled biventricular mesh.

Boundary values (all overridable through `fields.<name>.<SurfaceLabel> = value`):

    longitudinal         ApexLV 0, every valve (or BasalPlane) 1
    longitudinal_lv      ApexLV 0, mitral and aortic (or BasalPlane) 1
    longitudinal_rv      ApexRV 0, tricuspid and pulmonary (or BasalPlane) 1
    transmural           every endocardium 0, Epicardium 1 (septal correction applied afterwards)
    transmural_rv        EndoLV and EndoRV 0, EndoRVSeptal and Epicardium 1
    transventricular     EndoLV 0, EndoRV and EndoRVSeptal 1
    septal               EndoLV 0, EndoRVSeptal 1 (remapped to a 2/3 LV, 1/3 RV split)
    intraventricular_lv  mitral 0, aortic 1, ApexLV 0.5
    intraventricular_rv  tricuspid 0, pulmonary 1, ApexRV 0.5

These values are conventions of this package; the field definitions they implement do not fix them.
"""
import logging

import numpy as np
from scipy.spatial import cKDTree

from heart_cohorts.config import SolverConfig
from heart_cohorts.errors import DegenerateDirection, MissingField
from heart_cohorts.fields.boundary import NodeLabels
from heart_cohorts.fields.laplace import ScalarField, solve_laplace, stiffness_matrix
from heart_cohorts.labelling.labels import LV_VALVES, RV_VALVES, VALVES, SurfaceLabel as L
from heart_cohorts.labelling.landmarks import landmarks

logger = logging.getLogger(__name__)

SEPTAL_LV_SHARE = 2.0 / 3.0
DEGENERATE_ANGLE = 1.0

_FULL = {
    "longitudinal": {L.ApexLV: 0.0, **{v: 1.0 for v in VALVES}},
    "longitudinal_lv": {L.ApexLV: 0.0, **{v: 1.0 for v in LV_VALVES}},
    "longitudinal_rv": {L.ApexRV: 0.0, **{v: 1.0 for v in RV_VALVES}},
    "transmural": {L.EndoLV: 0.0, L.EndoRV: 0.0, L.EndoRVSeptal: 0.0, L.Epicardium: 1.0},
    "transmural_rv": {L.EndoLV: 0.0, L.EndoRV: 0.0, L.EndoRVSeptal: 1.0, L.Epicardium: 1.0},
    "transventricular": {L.EndoLV: 0.0, L.EndoRV: 1.0, L.EndoRVSeptal: 1.0},
    "septal": {L.EndoLV: 0.0, L.EndoRVSeptal: 1.0},
    "intraventricular_lv": {L.ValveMitral: 0.0, L.ValveAortic: 1.0, L.ApexLV: 0.5},
    "intraventricular_rv": {L.ValveTricuspid: 0.0, L.ValvePulmonary: 1.0, L.ApexRV: 0.5},
}

_CUT = {
    "longitudinal": {L.ApexLV: 0.0, L.BasalPlane: 1.0},
    "longitudinal_lv": {L.ApexLV: 0.0, L.BasalPlane: 1.0},
    "longitudinal_rv": {L.ApexRV: 0.0, L.BasalPlane: 1.0},
    "transmural": _FULL["transmural"],
    "transmural_rv": _FULL["transmural_rv"],
    "transventricular": _FULL["transventricular"],
    "septal": _FULL["septal"],
}

# fields the rest of the pipeline cannot do without
REQUIRED_FIELDS = ("longitudinal", "transmural", "transmural_rv", "transventricular", "septal")


def default_boundary_values(kind):
    """Field name -> {SurfaceLabel: value} for a 'biventricular' or 'cut' map."""
    table = _CUT if kind == "cut" else _FULL
    return {name: dict(values) for name, values in table.items()}


def septal_region(node_labels):
    """
    Nodes nearer to both the LV endocardium and the RV septal endocardium than to the epicardium
    and the RV free wall.
    """
    x = node_labels.volume.nodes

    def distance(*labels):
        nodes = node_labels.nodes(*labels)
        if nodes.size == 0:
            return np.full(x.shape[0], np.inf)
        return cKDTree(x[nodes]).query(x)[0]

    d_lv = distance(L.EndoLV)
    d_septal = distance(L.EndoRVSeptal)
    d_other = np.minimum(distance(L.Epicardium, *VALVES, L.BasalPlane), distance(L.EndoRV))
    return (d_lv < d_other) & (d_septal < d_other), d_lv, d_septal


def mid_surface(region, d_lv, d_septal, tolerance):
    """Septal nodes roughly equidistant from both septal surfaces."""
    return region & (np.abs(d_lv - d_septal) <= tolerance)


def septal_remap(values, mid_value, share=SEPTAL_LV_SHARE):
    """Monotone piecewise-linear map sending 0 -> 0, `mid_value` -> `share`, 1 -> 1."""
    values = np.asarray(values, dtype=float)
    m = float(np.clip(mid_value, 1e-6, 1.0 - 1e-6))
    return np.where(values <= m, share * values / m, share + (1.0 - share) * (values - m) / (1.0 - m))


def _median_edge(volume):
    e = volume.edges()
    return float(np.median(np.linalg.norm(volume.nodes[e[:, 0]] - volume.nodes[e[:, 1]], axis=1)))


def compute_standard_fields(volume, label_map, config=None, node_labels=None):
    """
    Solves every field of the catalogue on a tetrahedral mesh.
    Args:
        - volume (VolumeMesh): tetrahedral, boundary matching the labelled surface
        - label_map (LabelMap): completed surface labelling
        - config (SolverConfig): tolerances and boundary value overrides
    Output:
        - fields (dict): name -> ScalarField, including the septum corrected `transmural`
          (`transmural_raw` keeps the uncorrected solve) and the remapped `septal` field
    """
    config = (config or SolverConfig()).validate()
    node_labels = NodeLabels(volume, label_map) if node_labels is None else node_labels
    kind = "cut" if label_map.kind == "cut" else "biventricular"
    stiffness = stiffness_matrix(volume)
    fields = {}
    for name, values in default_boundary_values(kind).items():
        values.update(config.overrides(name))
        if name == "longitudinal_rv" and L.ApexRV not in node_labels:
            logger.info("no RV apex node, skipping %s", name)
            continue
        bc = node_labels.spec(values, name)
        fields[name] = solve_laplace(volume, bc, config, name=name, stiffness=stiffness)
        logger.info("solved %s: %s, %d iterations", name, bc, fields[name].report["iterations"])

    region, d_lv, d_septal = septal_region(node_labels)
    mid = mid_surface(region, d_lv, d_septal, 0.5 * _median_edge(volume))
    if not np.any(mid):
        mid = region
    fields["transmural_raw"] = fields["transmural"]
    fields.update(septal_fields(fields, region, mid))
    return fields


def septal_fields(fields, region, mid):
    """
    Septum corrected transmural field and the 2/3 LV split septal field.
    Inside `region` the transmural value is the RV transmural solve remapped so that the
    septal mid-surface sits at 2/3.
    """
    for name in ("transmural_raw", "transmural_rv", "septal"):
        if name not in fields:
            raise MissingField("septal correction needs the %s field" % name)
    raw = fields["transmural_raw"].values
    t_rv = fields["transmural_rv"].values
    transmural = np.array(raw)
    if np.any(mid):
        m = float(np.median(t_rv[mid]))
        transmural[region] = septal_remap(t_rv[region], m)
        s = fields["septal"].values
        septal = septal_remap(s, float(np.median(s[mid])))
    else:
        m = None
        septal = np.array(fields["septal"].values)
        logger.warning("septal region is empty; transmural field left uncorrected")
    report = {"septal_nodes": int(region.sum()), "mid_nodes": int(mid.sum()), "mid_value": m}
    return {
        "transmural": ScalarField("transmural", transmural, fields["transmural_raw"].mask, report),
        "septal": ScalarField("septal", septal, fields["septal"].mask, fields["septal"].report),
        "septal_region": ScalarField("septal_region", region.astype(float)),
    }


def projection_fields(volume, label_map, frame=None):
    """
    Left-to-right and posterior-to-anterior projection fields.
    The left-to-right direction is the mean normal of the RV septal surface (made orthogonal to the
    long axis), the posterior-to-anterior direction its cross product with the apex-to-base direction.
    Output:
        - fields (dict): 'lv_to_rv', 'posterior_to_anterior' ScalarFields, each spanning [0, 1]
        - frame (HeartFrame)
    """
    frame = heart_frame(label_map) if frame is None else frame
    out = {}
    for name, direction in (("lv_to_rv", frame.lv_to_rv), ("posterior_to_anterior", frame.posterior_to_anterior)):
        p = volume.nodes @ direction
        span = p.max() - p.min()
        out[name] = ScalarField(name, (p - p.min()) / span if span > 0 else np.zeros_like(p))
    return out, frame


class HeartFrame:
    """Orthonormal heart axes: apex-to-base, LV-to-RV and posterior-to-anterior."""

    def __init__(self, apex_to_base, lv_to_rv, posterior_to_anterior, origin):
        self.apex_to_base = apex_to_base
        self.lv_to_rv = lv_to_rv
        self.posterior_to_anterior = posterior_to_anterior
        self.origin = origin

    @property
    def matrix(self):
        """Rows are the axes; `matrix @ (x - origin)` gives heart-frame coordinates."""
        return np.stack((self.apex_to_base, self.lv_to_rv, self.posterior_to_anterior))

    def to_frame(self, points):
        return (np.asarray(points, dtype=float) - self.origin) @ self.matrix.T

    def from_frame(self, coords):
        return np.asarray(coords, dtype=float) @ self.matrix + self.origin


def heart_frame(label_map):
    """
    Heart axes from a labelled surface.
    Raises DegenerateDirection when the septal normal lies within DEGENERATE_ANGLE of the long axis.
    """
    marks = landmarks(label_map)
    mesh = label_map.mesh
    faces = label_map.faces_of(L.EndoRVSeptal)
    if faces.size == 0:
        raise DegenerateDirection("no RV septal surface to take the left-to-right direction from")
    w = mesh.face_areas[faces]
    normal = (mesh.face_normals[faces] * w[:, None]).sum(axis=0)
    normal /= max(np.linalg.norm(normal), 1e-300)
    a = -marks.lv_axis
    across = normal - np.dot(normal, a) * a
    if np.linalg.norm(across) < np.sin(np.deg2rad(DEGENERATE_ANGLE)):
        raise DegenerateDirection("septal normal is within %g deg of the long axis" % DEGENERATE_ANGLE)
    across /= np.linalg.norm(across)
    front = np.cross(a, across)
    return HeartFrame(a, across, front / np.linalg.norm(front), mesh.vertices.mean(axis=0))
