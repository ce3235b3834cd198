from enum import IntEnum

import numpy as np
import pandas as pd

from heart_cohorts.common.scatter import scatter_sum


class SurfaceLabel(IntEnum):
    """Anatomical surface labels; the integer values are the `surface_label` codes in VTK/CSV output."""
    Unassigned = 0
    Epicardium = 1
    EndoLV = 2
    EndoRV = 3
    EndoRVSeptal = 4
    BasalPlane = 5
    ValveMitral = 6
    ValveAortic = 7
    ValveTricuspid = 8
    ValvePulmonary = 9
    ApexLV = 10
    ApexRV = 11


N_LABELS = len(SurfaceLabel)
VALVES = (SurfaceLabel.ValveMitral, SurfaceLabel.ValveAortic,
          SurfaceLabel.ValveTricuspid, SurfaceLabel.ValvePulmonary)
LV_VALVES = (SurfaceLabel.ValveMitral, SurfaceLabel.ValveAortic)
RV_VALVES = (SurfaceLabel.ValveTricuspid, SurfaceLabel.ValvePulmonary)
ENDO = (SurfaceLabel.EndoLV, SurfaceLabel.EndoRV, SurfaceLabel.EndoRVSeptal)
RV_ENDO = (SurfaceLabel.EndoRV, SurfaceLabel.EndoRVSeptal)

REQUIRED_FACE_LABELS = {
    "biventricular": (SurfaceLabel.Epicardium, SurfaceLabel.EndoLV, SurfaceLabel.EndoRV,
                      SurfaceLabel.EndoRVSeptal) + VALVES,
    "cut": (SurfaceLabel.Epicardium, SurfaceLabel.EndoLV, SurfaceLabel.EndoRV,
            SurfaceLabel.EndoRVSeptal, SurfaceLabel.BasalPlane),
}

SURFACE_LABEL_FIELD = "surface_label"
APEX_FIELD = "apex_label"


def parse_label(name):
    try:
        return SurfaceLabel[name]
    except KeyError:
        raise ValueError("Unknown surface label %r, expected one of %s" % (name, [l.name for l in SurfaceLabel]))


class LabelMap:
    """
    Per-face SurfaceLabel assignment over a SurfaceMesh, plus the two apex vertices.
    Vertex labels, label areas and label centroids are derived on construction.
    """

    def __init__(self, mesh, face_labels, apex_lv=None, apex_rv=None, kind="biventricular"):
        face_labels = np.asarray(face_labels, dtype=np.int64)
        if face_labels.shape != (mesh.n_faces,):
            raise ValueError("expected %d face labels, got %s" % (mesh.n_faces, face_labels.shape))
        self._mesh = mesh
        self._face_labels = face_labels.copy()
        self._face_labels.setflags(write=False)
        self.apex_lv = None if apex_lv is None else int(apex_lv)
        self.apex_rv = None if apex_rv is None else int(apex_rv)
        self.kind = kind

        areas = mesh.face_areas
        self._label_areas = scatter_sum(areas, face_labels, dim_size=N_LABELS)
        weighted = scatter_sum(mesh.face_centroids * areas[:, None], face_labels, dim_size=N_LABELS)
        with np.errstate(invalid="ignore", divide="ignore"):
            self._label_centroids = weighted / self._label_areas[:, None]

        votes = np.zeros((mesh.n_vertices, N_LABELS))
        np.add.at(votes, (mesh.faces.ravel(), np.repeat(face_labels, 3)), 1.0)
        self._vertex_labels = np.argmax(votes, axis=1).astype(np.int64)
        self._vertex_labels.setflags(write=False)

    def __str__(self):
        present = ", ".join("%s=%d" % (SurfaceLabel(l).name, c)
                            for l, c in zip(*np.unique(self._face_labels, return_counts=True)))
        return "LabelMap(%s): %s; apex_lv=%s, apex_rv=%s" % (self.kind, present, self.apex_lv, self.apex_rv)

    @property
    def mesh(self):
        return self._mesh

    @property
    def face_labels(self):
        return self._face_labels

    @property
    def vertex_labels(self):
        return self._vertex_labels

    def label_area(self, label):
        return float(self._label_areas[int(label)])

    def label_centroid(self, label):
        return self._label_centroids[int(label)].copy()

    @property
    def total_area(self):
        return float(self._label_areas.sum())

    def mask(self, *labels):
        return np.isin(self._face_labels, [int(l) for l in labels])

    def faces_of(self, *labels):
        return np.flatnonzero(self.mask(*labels))

    def vertices_of(self, *labels):
        return np.unique(self._mesh.faces[self.mask(*labels)])

    def present(self):
        return [SurfaceLabel(l) for l in np.unique(self._face_labels)]

    def with_labels(self, face_labels, apex_lv=None, apex_rv=None):
        return LabelMap(self._mesh, face_labels,
                        self.apex_lv if apex_lv is None else apex_lv,
                        self.apex_rv if apex_rv is None else apex_rv, self.kind)

    def summary(self):
        """One row per present label: face count, area (mm2) and area-weighted centroid."""
        rows = []
        labels, counts = np.unique(self._face_labels, return_counts=True)
        for label, count in zip(labels, counts):
            c = self._label_centroids[label]
            rows.append({"label": SurfaceLabel(label).name, "code": int(label), "faces": int(count),
                         "area_mm2": float(self._label_areas[label]),
                         "centroid_x": c[0], "centroid_y": c[1], "centroid_z": c[2]})
        for name, vertex, code in (("ApexLV", self.apex_lv, SurfaceLabel.ApexLV),
                                   ("ApexRV", self.apex_rv, SurfaceLabel.ApexRV)):
            if vertex is not None:
                p = self._mesh.vertices[vertex]
                rows.append({"label": name, "code": int(code), "faces": 0, "area_mm2": 0.0,
                             "centroid_x": p[0], "centroid_y": p[1], "centroid_z": p[2]})
        return pd.DataFrame(rows, columns=["label", "code", "faces", "area_mm2",
                                           "centroid_x", "centroid_y", "centroid_z"])

    def to_mesh(self):
        """The labelled surface with `surface_label` cell data and `apex_label` point data."""
        apex = np.zeros(self._mesh.n_vertices, dtype=np.int64)
        if self.apex_lv is not None:
            apex[self.apex_lv] = int(SurfaceLabel.ApexLV)
        if self.apex_rv is not None:
            apex[self.apex_rv] = int(SurfaceLabel.ApexRV)
        return self._mesh.with_fields(vertex_fields={APEX_FIELD: apex},
                                      face_fields={SURFACE_LABEL_FIELD: self._face_labels})

    @classmethod
    def from_mesh(cls, mesh, kind="biventricular"):
        fields = mesh.face_fields
        if SURFACE_LABEL_FIELD not in fields:
            raise ValueError("mesh carries no %r cell data" % SURFACE_LABEL_FIELD)
        apex_lv = apex_rv = None
        apex = mesh.vertex_fields.get(APEX_FIELD)
        if apex is not None:
            lv = np.flatnonzero(apex == int(SurfaceLabel.ApexLV))
            rv = np.flatnonzero(apex == int(SurfaceLabel.ApexRV))
            apex_lv = int(lv[0]) if lv.size else None
            apex_rv = int(rv[0]) if rv.size else None
        if kind is None:
            kind = "cut" if np.any(fields[SURFACE_LABEL_FIELD] == int(SurfaceLabel.BasalPlane)) else "biventricular"
        return cls(mesh, fields[SURFACE_LABEL_FIELD], apex_lv, apex_rv, kind)
