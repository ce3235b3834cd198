"""
Local activation times carried between geometries through ventricular coordinates.
"""
import logging
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from heart_cohorts.errors import EmptySource, MissingArtifact
from heart_cohorts.fields.coordinates import COORDINATES, CoordinateSet

logger = logging.getLogger(__name__)

# circumferential is periodic with period 1; the other coordinates live in [0, 1] and get a box
# wide enough that no wrapped distance beats the direct one
_BOX = np.array([3.0, 1.0, 3.0, 3.0])


@dataclass
class ActivationMap:
    """Activation time per node (ms); `mask` marks defined nodes."""
    times: np.ndarray
    mask: np.ndarray
    report: dict = field(default_factory=dict)

    def __len__(self):
        return self.times.shape[0]

    def masked(self, fill=np.nan):
        return np.where(self.mask, self.times, fill)


def _periodic_points(coords):
    x = np.array(coords.stacked(), dtype=float)
    x[:, [0, 2, 3]] = np.clip(x[:, [0, 2, 3]], 0.0, 1.0)
    c = np.mod(x[:, 1], 1.0)
    c[c >= 1.0] = 0.0
    x[:, 1] = c
    return x


def transfer_activation(source_coords, source_activation, target_coords):
    """
    Each target node takes the activation time of the source node nearest in coordinate space
    (apicobasal, circumferential with wraparound, transmural, transventricular).
    Target nodes without coordinates stay undefined and are counted in the report.
    """
    times = np.asarray(source_activation.times, dtype=float)
    usable = source_coords.mask & source_activation.mask & np.isfinite(times)
    if not np.any(usable):
        raise EmptySource("the activation source has no node with both coordinates and a time")
    if np.any(times[usable] < 0):
        raise ValueError("activation times must be non-negative")
    tree = cKDTree(_periodic_points(source_coords)[usable], boxsize=_BOX)
    source_times = times[usable]

    out = np.full(len(target_coords), np.nan)
    defined = target_coords.mask.copy()
    distance = np.full(len(target_coords), np.nan)
    if np.any(defined):
        d, nearest = tree.query(_periodic_points(target_coords)[defined])
        out[defined] = source_times[nearest]
        distance[defined] = d
    report = {"source_nodes": int(usable.sum()), "target_nodes": int(defined.sum()),
              "undefined": int((~defined).sum()),
              "max_distance": float(np.nanmax(distance)) if np.any(defined) else None}
    if report["undefined"]:
        logger.info("%d target nodes above the basal plane get no activation time", report["undefined"])
    return ActivationMap(out, defined, report)


def template_activation(coords, apex_time=10.0, base_time=60.0, wall_time=20.0):
    """
    Reference activation pattern on a coordinate set: apex-to-base sweep plus an endo-to-epi delay (ms).
    Used as the activation source when no source bundle is configured.
    """
    t = apex_time + (base_time - apex_time) * coords.apicobasal + wall_time * coords.transmural
    return ActivationMap(np.where(coords.mask, t, np.nan), coords.mask.copy(), {"template": True})


def load_activation_source(path):
    """Coordinates and activation times from the `fields/` files of a written case bundle."""
    folder = os.path.join(path, "fields")
    columns = []
    for name in COORDINATES + ("activation",):
        file = os.path.join(folder, "%s.txt" % name)
        if not os.path.exists(file):
            raise MissingArtifact("activation source %s has no %s" % (path, file))
        columns.append(np.loadtxt(file, ndmin=2)[:, 1])
    coords = CoordinateSet.from_arrays(np.stack(columns[:4], axis=1))
    times = columns[4]
    return coords, ActivationMap(times, np.isfinite(times))
