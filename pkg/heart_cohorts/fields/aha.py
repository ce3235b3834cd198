"""
17-segment parcellation of the left ventricle from ventricular coordinates.

The apicobasal range above the apical cap is split in thirds (basal, mid, apical). Basal and mid
rings hold six 60 degree sectors, the apical ring four 90 degree sectors, all counted from the
anterior septal junction towards the septum:

    basal   2 anteroseptal, 3 inferoseptal, 4 inferior, 5 inferolateral, 6 anterolateral, 1 anterior
    mid     8, 9, 10, 11, 12, 7 in the same order
    apical  14 septal, 15 inferior, 16 lateral, 13 anterior
    cap     17
"""
import logging

import numpy as np

from heart_cohorts.errors import MissingCoordinates

logger = logging.getLogger(__name__)

APEX_CAP = 0.1
_SIX = np.array([2, 3, 4, 5, 6, 1])
_FOUR = np.array([14, 15, 16, 13])


def aha_segment(apicobasal, circumferential, cap=APEX_CAP):
    """Segment ids 1..17 for coordinate arrays (apicobasal 0 at the apex)."""
    ab = np.asarray(apicobasal, dtype=float)
    c = np.mod(np.asarray(circumferential, dtype=float), 1.0)
    third = (1.0 - cap) / 3.0
    segment = np.full(ab.shape, 17, dtype=np.int64)
    apical = (ab >= cap) & (ab < cap + third)
    mid = (ab >= cap + third) & (ab < cap + 2 * third)
    basal = ab >= cap + 2 * third
    six = np.minimum((c * 6).astype(np.int64), 5)
    four = np.minimum((c * 4).astype(np.int64), 3)
    segment[basal] = _SIX[six[basal]]
    segment[mid] = _SIX[six[mid]] + 6
    segment[apical] = _FOUR[four[apical]]
    return segment


def aha_segments(coords, lv_mask=None, cap=APEX_CAP):
    """
    Per-node AHA segment: 1..17 on LV nodes where the coordinates are defined, 0 elsewhere.
    LV nodes are those with transventricular <= 0.5 unless `lv_mask` is given.
    """
    if coords is None or coords.apicobasal is None or coords.circumferential is None:
        raise MissingCoordinates("AHA segments need apicobasal and circumferential coordinates")
    lv = coords.transventricular <= 0.5 if lv_mask is None else np.asarray(lv_mask, dtype=bool)
    lv = lv & coords.mask
    if not np.any(lv):
        raise MissingCoordinates("no LV node has defined coordinates")
    out = np.zeros(len(coords), dtype=np.int64)
    out[lv] = aha_segment(coords.apicobasal[lv], coords.circumferential[lv], cap)
    present = np.unique(out[lv])
    if present.size != 17:
        logger.warning("only %d AHA segments are populated", present.size)
    return out
