import logging

import numpy as np
import pandas as pd

from heart_cohorts.common.utils import cross_rows, dot_rows
from heart_cohorts.geometry.mesh import HEX_CORNERS, TET_CORNERS

logger = logging.getLogger(__name__)

HISTOGRAM_BINS = np.linspace(0.0, 1.0, 21)
_TINY = 1e-300


def _corner_quality(x, corners, scale):
    """x: [n x k x 3] element nodes; corners: [c x 4] (corner, three neighbours)."""
    q = np.full(x.shape[0], np.inf)
    for c, a, b, d in corners:
        e1 = x[:, a] - x[:, c]
        e2 = x[:, b] - x[:, c]
        e3 = x[:, d] - x[:, c]
        det = dot_rows(e1, cross_rows(e2, e3))
        norms = (np.sqrt(dot_rows(e1, e1)) * np.sqrt(dot_rows(e2, e2)) * np.sqrt(dot_rows(e3, e3)))
        value = np.where(norms > _TINY, scale * det / np.where(norms > _TINY, norms, 1.0), 0.0)
        q = np.minimum(q, value)
    return np.clip(q, 0.0, 1.0)


def scaled_jacobians(nodes, elements):
    """
    Scaled Jacobian of every element: the minimum over corners of the corner
    Jacobian determinant divided by the product of its three edge lengths.
    Tetrahedra are normalised by sqrt(2) so the regular tetrahedron scores 1.
    Inverted or degenerate elements score 0.
    """
    elements = np.asarray(elements, dtype=np.int64)
    x = np.asarray(nodes, dtype=float)[elements]
    if elements.shape[1] == 4:
        return _corner_quality(x, TET_CORNERS, np.sqrt(2.0))
    if elements.shape[1] == 8:
        return _corner_quality(x, HEX_CORNERS, 1.0)
    raise ValueError("scaled Jacobian needs 4 (tet) or 8 (hex) nodes, got %d" % elements.shape[1])


def scaled_jacobian(element_nodes):
    element_nodes = np.asarray(element_nodes, dtype=float)
    k = element_nodes.shape[0]
    return float(scaled_jacobians(element_nodes, np.arange(k)[None, :])[0])


def quality_report(mesh):
    """
    Output:
        - report (dict): kind, n_elements, mean, min, max, argmin (element index),
          n_inverted (elements scoring 0), histogram (counts over bins of width 0.05)
    """
    q = scaled_jacobians(mesh.nodes, mesh.elements)
    if q.size == 0:
        return {"kind": mesh.kind, "n_elements": 0, "mean": 0.0, "min": 0.0, "max": 0.0,
                "argmin": -1, "n_inverted": 0, "histogram": [0] * (HISTOGRAM_BINS.size - 1)}
    hist, _ = np.histogram(q, bins=HISTOGRAM_BINS)
    report = {
        "kind": mesh.kind,
        "n_elements": int(q.size),
        "mean": float(q.mean()),
        "min": float(q.min()),
        "max": float(q.max()),
        "argmin": int(np.argmin(q)),
        "n_inverted": int(np.sum(q <= 0.0)),
        "histogram": hist.tolist(),
    }
    if report["n_inverted"]:
        logger.warning("%d degenerate or inverted %s elements, first at %d",
                       report["n_inverted"], mesh.kind, report["argmin"])
    return report


def quality_table(report):
    """Histogram rows (bin_lo, bin_hi, count) followed by the summary statistics."""
    rows = [{"bin_lo": lo, "bin_hi": hi, "count": c}
            for lo, hi, c in zip(HISTOGRAM_BINS[:-1], HISTOGRAM_BINS[1:], report["histogram"])]
    table = pd.DataFrame(rows)
    for key in ("kind", "n_elements", "mean", "min", "max", "argmin", "n_inverted"):
        table[key] = report[key]
    return table


def write_quality_csv(report, path):
    quality_table(report).to_csv(path, index=False, float_format="%.6f", lineterminator="\n")

