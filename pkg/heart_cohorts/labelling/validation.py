import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from heart_cohorts.common.metrics.mesh_metrics import Agreement, SurfaceDistance
from heart_cohorts.geometry.mesh import face_components
from heart_cohorts.labelling.labels import (N_LABELS, REQUIRED_FACE_LABELS, RV_ENDO, RV_VALVES,
                                            VALVES, SurfaceLabel)
from heart_cohorts.labelling.landmarks import base_point

logger = logging.getLogger(__name__)

PASS = "pass"
WARN = "warn"
FAIL = "fail"
_RANK = {PASS: 0, WARN: 1, FAIL: 2}

MIN_AREA_FRACTION = 1e-3


@dataclass
class Check:
    name: str
    status: str
    message: str = ""


@dataclass
class ValidationReport:
    kind: str
    checks: list = field(default_factory=list)

    def add(self, name, status, message=""):
        self.checks.append(Check(name, status, message))

    @property
    def status(self):
        if not self.checks:
            return PASS
        return max((c.status for c in self.checks), key=_RANK.get)

    @property
    def passed(self):
        return self.status != FAIL

    def __getitem__(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def table(self):
        return pd.DataFrame([vars(c) for c in self.checks], columns=["name", "status", "message"])

    def as_dict(self):
        return {c.name: {"status": c.status, "message": c.message} for c in self.checks}


def _kind(labels, kind):
    kind = labels.kind if kind is None else kind
    return "biventricular" if kind in ("biventricular", "full", "closed") else kind


def _check_required(labels, kind, report):
    missing = [l.name for l in REQUIRED_FACE_LABELS[kind] if labels.label_area(l) <= 0]
    if missing:
        report.add("required_labels", FAIL, "missing %s" % ", ".join(missing))
    else:
        report.add("required_labels", PASS)
    return not missing


def _check_unassigned(labels, report):
    n = int(np.sum(labels.face_labels == int(SurfaceLabel.Unassigned)))
    report.add("unassigned", FAIL if n else PASS, "%d unassigned faces" % n if n else "")


def _check_apices(labels, kind, report):
    missing = []
    if labels.apex_lv is None:
        missing.append("ApexLV")
    if kind == "biventricular" and labels.apex_rv is None:
        missing.append("ApexRV")
    report.add("apices", FAIL if missing else PASS, "missing %s" % ", ".join(missing) if missing else "")


def _check_valve_components(labels, report):
    split = []
    for label in VALVES:
        mask = labels.mask(label)
        if not np.any(mask):
            continue
        n, _ = face_components(labels.mesh, mask)
        if n != 1:
            split.append("%s (%d components)" % (label.name, n))
    report.add("valve_components", FAIL if split else PASS, "; ".join(split))


def _check_valve_identity(labels, report):
    """The mitral ring lies farther from the RV rings than the aortic; the tricuspid nearer the mitral than the pulmonary."""
    c = {l: labels.label_centroid(l) for l in VALVES}
    rv = [c[l] for l in RV_VALVES]
    mitral_gap = min(np.linalg.norm(c[SurfaceLabel.ValveMitral] - p) for p in rv)
    aortic_gap = min(np.linalg.norm(c[SurfaceLabel.ValveAortic] - p) for p in rv)
    problems = []
    if mitral_gap <= aortic_gap:
        problems.append("mitral is %.1f mm from the RV valves, aortic %.1f mm" % (mitral_gap, aortic_gap))
    tricuspid = np.linalg.norm(c[SurfaceLabel.ValveTricuspid] - c[SurfaceLabel.ValveMitral])
    pulmonary = np.linalg.norm(c[SurfaceLabel.ValvePulmonary] - c[SurfaceLabel.ValveMitral])
    if tricuspid >= pulmonary:
        problems.append("tricuspid is %.1f mm from the mitral, pulmonary %.1f mm" % (tricuspid, pulmonary))
    report.add("valve_identity", FAIL if problems else PASS, "; ".join(problems))


def _check_apex_position(labels, report):
    """Each apex lies beyond its cavity centroid when seen from the base."""
    mesh = labels.mesh
    base = base_point(labels)
    problems = []
    for name, vertex, cavity in (("ApexLV", labels.apex_lv, (SurfaceLabel.EndoLV,)),
                                 ("ApexRV", labels.apex_rv, RV_ENDO)):
        faces = labels.faces_of(*cavity)
        if vertex is None or faces.size == 0:
            continue
        w = mesh.face_areas[faces]
        centroid = (mesh.face_centroids[faces] * w[:, None]).sum(axis=0) / w.sum()
        axis = centroid - base
        depth = np.dot(mesh.vertices[vertex] - base, axis) / max(np.dot(axis, axis), 1e-300)
        if depth <= 1.0:
            problems.append("%s sits at %.2f of the base-to-centroid distance" % (name, depth))
    report.add("apex_position", FAIL if problems else PASS, "; ".join(problems))


def _check_areas(labels, kind, report):
    total = labels.total_area
    small = [l.name for l in REQUIRED_FACE_LABELS[kind]
             if 0 < labels.label_area(l) < MIN_AREA_FRACTION * total]
    report.add("label_areas", WARN if small else PASS,
               "below %.1f%% of the surface: %s" % (100 * MIN_AREA_FRACTION, ", ".join(small)) if small else "")


def validate_labels(labels, kind=None):
    """
    Sanity checks of a completed LabelMap.
    Args:
        - labels (LabelMap)
        - kind (str): 'biventricular' or 'cut', the map's own kind by default
    Output:
        - report (ValidationReport): pass/warn/fail per check
    """
    kind = _kind(labels, kind)
    if kind not in REQUIRED_FACE_LABELS:
        raise ValueError("unknown labelling kind %r" % kind)
    report = ValidationReport(kind)
    complete = _check_required(labels, kind, report)
    _check_unassigned(labels, report)
    _check_apices(labels, kind, report)
    if kind == "biventricular":
        _check_valve_components(labels, report)
        if complete:
            _check_valve_identity(labels, report)
    if labels.label_area(SurfaceLabel.EndoLV) > 0 and (complete or labels.label_area(SurfaceLabel.BasalPlane) > 0
                                                      or any(labels.label_area(l) > 0 for l in VALVES)):
        _check_apex_position(labels, report)
    _check_areas(labels, kind, report)
    log = logger.warning if report.status != PASS else logger.info
    log("label validation (%s): %s", kind, ", ".join("%s=%s" % (c.name, c.status) for c in report.checks))
    return report


def evaluate_labels(labels, true_labels):
    """
    Per-label accuracy of `labels` against reference face labels on the same mesh.
    Output:
        - table (DataFrame): one row per reference label: faces, agreement, mean surface distance (mm)
        - results (dict): aggregate and worst-label metrics
    """
    y_true = np.asarray(true_labels, dtype=np.int64)
    y_pred = np.asarray(labels.face_labels)
    distance = SurfaceDistance(labels.mesh.face_centroids)
    agreement = Agreement()
    results = {}
    results.update(distance.compute(y_pred, y_true))
    results.update(agreement.compute(y_pred, y_true))
    d_group, counts, d_worst = distance.compute_group_wise(y_pred, y_true, y_true, N_LABELS, return_dict=False)
    a_group, _, a_worst = agreement.compute_group_wise(y_pred, y_true, y_true, N_LABELS, return_dict=False)
    results[distance.worst_group_metric_field] = float(d_worst)
    results[agreement.worst_group_metric_field] = float(a_worst)
    present = np.flatnonzero(counts > 0)
    table = pd.DataFrame({
        "label": [SurfaceLabel(l).name for l in present],
        "faces": counts[present].astype(int),
        "agreement": a_group[present],
        "mean_distance_mm": d_group[present],
    })
    return table, results

