"""
Rule-based fibre, sheet and sheet-normal directions per tetrahedron from the gradients of the
transmural and longitudinal fields.
"""
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.spatial.transform import Rotation

from heart_cohorts.common.utils import cross_rows, dot_rows, normalize_rows
from heart_cohorts.config import AngleConfig
from heart_cohorts.errors import MissingField, UnresolvableDegenerate
from heart_cohorts.fields.laplace import gradient

logger = logging.getLogger(__name__)

DEGENERATE_NORM = 1e-9


@dataclass
class FibreFrame:
    """Unit fibre `f`, sheet `s` and normal `n = f x s` per element ([m x 3] each)."""
    f: np.ndarray
    s: np.ndarray
    n: np.ndarray
    report: dict = field(default_factory=dict)

    def __len__(self):
        return self.f.shape[0]

    def as_array(self):
        """[m x 9]: f, s, n."""
        return np.hstack((self.f, self.s, self.n))

    def as_element_fields(self):
        return {"fiber": self.f, "sheet": self.s, "normal": self.n}

    def take(self, elements):
        return FibreFrame(self.f[elements], self.s[elements], self.n[elements], dict(self.report))


def rotate_about_axis(v, axis, angle):
    """Rotates `v` about the unit `axis` by `angle` degrees (rows are rotated pairwise)."""
    v = np.asarray(v, dtype=float)
    axis = np.asarray(axis, dtype=float)
    angle = np.deg2rad(np.asarray(angle, dtype=float))
    single = v.ndim == 1
    v2, a2 = np.atleast_2d(v), np.atleast_2d(axis)
    rotvec = a2 * np.reshape(angle, (-1, 1))
    out = Rotation.from_rotvec(rotvec).apply(v2)
    return out[0] if single else out


def _element_mean(mesh, values):
    return np.asarray(values, dtype=float)[mesh.elements].mean(axis=1)


def _blend_weight(values, low, high):
    return np.clip((values - low) / (high - low), 0.0, 1.0)


def helical_angles(config, transmural, rv_weight, septal):
    """Helical angle per element from the element-mean transmural value and the region weights."""
    lv_endo, lv_epi = config.region("lv")
    rv_endo, rv_epi = config.region("rv")
    s_endo, s_epi = config.region("septum")
    endo = (1.0 - rv_weight) * lv_endo + rv_weight * rv_endo
    epi = (1.0 - rv_weight) * lv_epi + rv_weight * rv_epi
    endo = np.where(septal, s_endo, endo)
    epi = np.where(septal, s_epi, epi)
    return endo * (1.0 - transmural) + epi * transmural


def local_bases(mesh, transmural, longitudinal):
    """
    Transmural, longitudinal and circumferential unit vectors per element.
    Output:
        - e_t, e_l, e_c (ndarray): [m x 3]
        - degenerate (ndarray): elements where either gradient vanishes or both are parallel
    """
    g_t = gradient(mesh, transmural)
    g_l = gradient(mesh, longitudinal)
    e_t, norm_t = normalize_rows(g_t, eps=DEGENERATE_NORM)
    along = g_l - dot_rows(g_l, e_t)[:, None] * e_t
    e_l, norm_l = normalize_rows(along, eps=DEGENERATE_NORM)
    e_c = cross_rows(e_l, e_t)
    scale_l = np.maximum(np.linalg.norm(g_l, axis=1), 1.0)
    degenerate = (norm_t < DEGENERATE_NORM) | (norm_l < DEGENERATE_NORM * scale_l)
    return e_t, e_l, e_c, degenerate


def _orthonormal(f, s):
    f, _ = normalize_rows(f)
    s = s - dot_rows(s, f)[:, None] * f
    s, _ = normalize_rows(s)
    return f, s, cross_rows(f, s)


def fill_degenerate(mesh, f, s, degenerate, max_sweeps=100):
    """
    Gives every degenerate element the shared-face-area weighted mean frame of its resolved
    neighbours, sweep after sweep, all elements of a sweep updated together.
    """
    pending = degenerate.copy()
    if not np.any(pending):
        return f, s, 0
    i, j, area = mesh.element_face_neighbours()
    m = mesh.n_elements
    weights = sparse.csr_matrix((np.concatenate((area, area)), (np.concatenate((i, j)), np.concatenate((j, i)))),
                                shape=(m, m))
    sweeps = 0
    while np.any(pending):
        if sweeps >= max_sweeps:
            raise UnresolvableDegenerate("%d elements still lack a fibre frame after %d sweeps"
                                         % (int(pending.sum()), sweeps), report={"remaining": int(pending.sum())})
        resolved = (~pending).astype(float)
        w = weights[pending].multiply(resolved[None, :]).tocsr()
        ready = np.asarray(w.sum(axis=1)).ravel() > 0
        if not np.any(ready):
            raise UnresolvableDegenerate("%d degenerate elements have no resolved neighbour" % int(pending.sum()),
                                         report={"remaining": int(pending.sum())})
        rows = np.flatnonzero(pending)[ready]
        w = w[ready]
        # neighbouring frames are sign-aligned to the first resolved neighbour before averaging
        first = np.asarray(w.argmax(axis=1)).ravel()
        f_ref, s_ref = f[first], s[first]
        w = w.tocoo()
        fa = f[w.col] * np.sign(dot_rows(f[w.col], f_ref[w.row]) + 1e-300)[:, None]
        sa = s[w.col] * np.sign(dot_rows(s[w.col], s_ref[w.row]) + 1e-300)[:, None]
        f_avg = np.zeros((rows.size, 3))
        s_avg = np.zeros((rows.size, 3))
        np.add.at(f_avg, w.row, fa * w.data[:, None])
        np.add.at(s_avg, w.row, sa * w.data[:, None])
        f_new, s_new, _ = _orthonormal(f_avg, s_avg)
        f[rows] = f_new
        s[rows] = s_new
        pending[rows] = False
        sweeps += 1
    return f, s, sweeps


def generate_fibres(mesh, fields, config=None):
    """
    Fibre frames per tetrahedron.
    Args:
        - mesh (VolumeMesh): tetrahedral
        - fields (dict): ScalarFields or arrays; needs 'transmural' and 'longitudinal', uses
          'transventricular' and 'septal_region' for the region resolved angles when present
        - config (AngleConfig)
    Output:
        - frame (FibreFrame)
    """
    config = (config or AngleConfig()).validate()
    values = {k: getattr(v, "values", v) for k, v in fields.items()}
    for name in ("transmural", "longitudinal"):
        if name not in values:
            raise MissingField("fibres need the %s field" % name)
    e_t, _, e_c, degenerate = local_bases(mesh, values["transmural"], values["longitudinal"])
    d = np.clip(_element_mean(mesh, values["transmural"]), 0.0, 1.0)
    if "transventricular" in values:
        rv_weight = _blend_weight(_element_mean(mesh, values["transventricular"]), config.blend_low, config.blend_high)
    else:
        rv_weight = np.zeros(mesh.n_elements)
    if "septal_region" in values:
        septal = _element_mean(mesh, values["septal_region"]) >= 0.5
    else:
        septal = np.zeros(mesh.n_elements, dtype=bool)

    alpha = helical_angles(config, d, rv_weight, septal)
    beta = config.beta_endo * (1.0 - d) + config.beta_epi * d
    f = rotate_about_axis(e_c, e_t, alpha)
    s = rotate_about_axis(e_t, f, beta)
    f, s, _ = _orthonormal(f, s)
    f, s, sweeps = fill_degenerate(mesh, f, s, degenerate, config.max_sweeps)
    n = cross_rows(f, s)

    assert np.allclose(dot_rows(f, s), 0.0, atol=1e-10) and np.allclose(np.linalg.norm(n, axis=1), 1.0, atol=1e-10)
    report = {"elements": mesh.n_elements, "degenerate": int(degenerate.sum()), "sweeps": sweeps,
              "septal_elements": int(septal.sum())}
    logger.info("fibres on %d elements (%d degenerate, %d fill sweeps)", mesh.n_elements, report["degenerate"], sweeps)
    return FibreFrame(f, s, n, report)


def helical_angle(frame, e_t, e_c):
    """Signed angle (degrees) from `e_c` to the fibre about `e_t`."""
    return np.degrees(np.arctan2(dot_rows(cross_rows(e_c, frame.f), e_t), dot_rows(e_c, frame.f)))
