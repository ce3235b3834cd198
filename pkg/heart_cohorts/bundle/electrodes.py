"""
12-lead electrode positions registered to the heart through its three main directions.

The template (data/electrode_template.csv) holds one row per electrode with offsets along the
apex-to-base, LV-to-RV and posterior-to-anterior axes, in units of the largest extent of the heart's
bounding box in that frame, measured from the box centre. Every offset has a component of magnitude
at least 0.7, which keeps the electrode outside the box and hence outside the heart.
"""
import logging
import os
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy.spatial.distance import pdist

from heart_cohorts.fields.standard import heart_frame

logger = logging.getLogger(__name__)

ELECTRODES = ("V1", "V2", "V3", "V4", "V5", "V6", "LA", "RA", "LL", "RL")
TEMPLATE_PATH = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "data",
                             "electrode_template.csv")
_AXES = ["apex_to_base", "lv_to_rv", "posterior_to_anterior"]
MIN_OFFSET = 0.7
MIN_SPACING = 10.0


@dataclass
class ElectrodeSet:
    names: tuple
    positions: np.ndarray

    def __getitem__(self, name):
        return self.positions[self.names.index(name)]

    def min_spacing(self):
        return float(pdist(self.positions).min())

    def table(self):
        return pd.DataFrame({"name": list(self.names), "x": self.positions[:, 0],
                             "y": self.positions[:, 1], "z": self.positions[:, 2]})


def load_template(path=None):
    path = TEMPLATE_PATH if path is None else path
    template = pd.read_csv(path)
    missing = set(ELECTRODES) - set(template["name"])
    if missing or list(template.columns) != ["name"] + _AXES:
        raise ValueError("electrode template %s must list %s with columns %s"
                         % (path, ", ".join(ELECTRODES), ", ".join(["name"] + _AXES)))
    offsets = template[_AXES].to_numpy(dtype=float)
    if np.any(np.abs(offsets).max(axis=1) < MIN_OFFSET):
        raise ValueError("every electrode offset needs a component of magnitude >= %g" % MIN_OFFSET)
    return template.set_index("name").loc[list(ELECTRODES)].reset_index()


def place_electrodes(label_map, template=None, frame=None):
    """
    Maps the electrode template through the heart frame of a labelled surface.
    Raises DegenerateDirection when the frame cannot be built.
    """
    if template is None or isinstance(template, str):
        template = load_template(template)
    frame = heart_frame(label_map) if frame is None else frame
    local = frame.to_frame(label_map.mesh.vertices)
    lo, hi = local.min(axis=0), local.max(axis=0)
    centre = 0.5 * (lo + hi)
    scale = float(np.max(hi - lo))
    offsets = template[_AXES].to_numpy(dtype=float)
    positions = frame.from_frame(centre + scale * offsets)
    electrodes = ElectrodeSet(tuple(template["name"]), positions)
    spacing = electrodes.min_spacing()
    if spacing <= MIN_SPACING:
        logger.warning("electrodes only %.1f mm apart", spacing)
    logger.info("placed %d electrodes, heart extent %.1f mm", len(electrodes.names), scale)
    return electrodes
