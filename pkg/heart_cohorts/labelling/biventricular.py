"""
Automatic labelling of closed biventricular surfaces.

Faces are first split into epicardium and endocardium by counting the crossings of a ray cast
along each face normal against the surface and its padded convex hull: an epicardial ray only
leaves through the hull, an endocardial ray crosses a cavity and the opposite wall first.
The endocardial components are told apart by volume (the RV cavity is the larger), the RV septal
wall is the part of the RV endocardium backed by a thick wall ending on the LV endocardium, and
the valve rings are the endocardial borders with the epicardium.
Meshes made of three or more closed shells (valves closed by lids) skip the ray split: the
outermost shell is the epicardium and the lids are the flattest face clusters of each cavity.
"""
import logging

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from heart_cohorts.config import LabelConfig
from heart_cohorts.errors import NotBiventricular, NotClosed, SeptumNotFound, ValveCountMismatch
from heart_cohorts.geometry.hull import convex_hull, scaled_about_centroid
from heart_cohorts.geometry.mesh import enclosed_volume, face_components, validate_closed
from heart_cohorts.labelling.labels import LabelMap, SurfaceLabel
from heart_cohorts.labelling.landmarks import angle_between, farthest_along, long_axis, principal_axis, \
    ELONGATION_RATIO, RV_AXIS_MAX_ANGLE
from heart_cohorts.labelling.projection import spread_from_subset, subsample_faces
from heart_cohorts.labelling.smoothing import absorb_islands, smooth_labels
from heart_cohorts.rays.ray_engine import RayEngine, face_ray_stats

logger = logging.getLogger(__name__)

EPI = int(SurfaceLabel.Epicardium)
LV = int(SurfaceLabel.EndoLV)
RV = int(SurfaceLabel.EndoRV)
SEPTAL = int(SurfaceLabel.EndoRVSeptal)


def padded_hull(mesh, scale):
    return scaled_about_centroid(convex_hull(mesh.vertices), scale)


def _require_closed(mesh):
    report = validate_closed(mesh)
    if not report["watertight"]:
        raise NotClosed("labelling needs a closed surface (%d defects)" % len(report["defects"]),
                        report={"defects": report["defects"][:100]})


def _sampled_faces(mesh, config):
    if mesh.n_faces <= config.downsample_faces:
        return None
    logger.info("casting rays from %d of %d faces", config.downsample_faces, mesh.n_faces)
    return subsample_faces(mesh, config.downsample_faces, seed=config.seed)


def hull_volume(mesh, faces):
    return enclosed_volume(convex_hull(mesh.vertices[np.unique(mesh.faces[faces])]))


def split_cavities(mesh, endo_mask, config):
    """
    LV/RV assignment of the two significant endocardial components.
    Output:
        - face_labels (ndarray): Epicardium outside the cavities, EndoLV/EndoRV inside
    """
    n, comp = face_components(mesh, endo_mask)
    areas = np.bincount(comp[comp >= 0], weights=mesh.face_areas[comp >= 0], minlength=n)
    significant = np.flatnonzero(areas >= config.min_cavity_fraction * mesh.total_area)
    if significant.size != 2:
        raise NotBiventricular("expected 2 endocardial cavities, found %d" % significant.size,
                               report={"cavities": int(significant.size), "component_areas": sorted(areas.tolist())[::-1][:10]})
    volumes = [hull_volume(mesh, np.flatnonzero(comp == c)) for c in significant]
    rv_comp, lv_comp = (significant if volumes[0] > volumes[1] else significant[::-1])
    labels = np.full(mesh.n_faces, EPI, dtype=np.int64)
    labels[comp == lv_comp] = LV
    labels[comp == rv_comp] = RV
    logger.info("cavity hull volumes: LV %.0f mm3, RV %.0f mm3", min(volumes), max(volumes))
    return labels


def clean_classes(mesh, face_labels, classes, config):
    """One component per class, then majority smoothing; every class must survive."""
    for label in classes:
        face_labels = absorb_islands(mesh, face_labels, label, keep=1)
    face_labels = np.array(smooth_labels(LabelMap(mesh, face_labels), mesh, config.smoothing_iterations).face_labels)
    missing = [SurfaceLabel(l).name for l in classes if not np.any(face_labels == l)]
    if missing:
        raise NotBiventricular("labels lost during smoothing: %s" % ", ".join(missing), report={"missing": missing})
    return face_labels


def carve_septum(mesh, face_labels, hull, config, engine=None):
    """
    Relabels as EndoRVSeptal the RV faces whose inward ray crosses a wall thicker than
    `septal_multiplier` times the median RV free-wall thickness and lands on the LV endocardium.
    """
    rv = np.flatnonzero(face_labels == RV)
    if engine is None:
        engine = RayEngine([mesh, hull])
    stats = face_ray_stats(mesh, hull, engine=engine, faces=rv)
    depth = stats.d_n_minus[rv]
    hit = stats.f_minus[rv]
    on_mesh = (hit >= 0) & (hit < mesh.n_faces)
    lands_on_lv = np.zeros(rv.size, dtype=bool)
    lands_on_lv[on_mesh] = face_labels[hit[on_mesh]] == LV
    usable = stats.valid[rv] & np.isfinite(depth)
    if not np.any(usable):
        raise SeptumNotFound("no RV face has a finite wall thickness", report={"rv_faces": int(rv.size)})

    threshold = config.septal_multiplier * float(np.median(depth[usable]))
    septal = usable & lands_on_lv & (depth > threshold)
    free_wall = usable & ~septal
    if np.any(free_wall):
        threshold = config.septal_multiplier * float(np.median(depth[free_wall]))
        septal = usable & lands_on_lv & (depth > threshold)
    if not np.any(septal):
        raise SeptumNotFound("no RV face exceeds the septal thickness threshold %.3g mm" % threshold,
                             report={"threshold": threshold, "rv_faces": int(rv.size),
                                     "faces_facing_lv": int(lands_on_lv.sum())})
    labels = np.array(face_labels)
    labels[rv[septal]] = SEPTAL
    labels = absorb_islands(mesh, labels, SEPTAL, keep=1)
    logger.info("septal threshold %.3g mm: %d septal faces", threshold, int(np.sum(labels == SEPTAL)))
    return labels


def _grow(mesh, seed, allowed, layers):
    graph = mesh.adjacency_graph
    region = seed.copy()
    for _ in range(layers):
        grown = (graph @ region.astype(float) > 0) & allowed
        if not np.any(grown & ~region):
            break
        region |= grown
    return region


def valve_rings(mesh, face_labels, endo_labels, config):
    """
    Ring face sets of one ventricle: its endocardial faces bordering the epicardium, widened to
    `ring_width` mm, split into components. Components smaller than `ring_fraction` of the
    largest are dropped.
    """
    endo = np.isin(face_labels, endo_labels)
    epi = face_labels == EPI
    seed = endo & (mesh.adjacency_graph @ epi.astype(float) > 0)
    spacing = float(np.median(mesh.edge_lengths()))
    layers = max(0, int(np.ceil(config.ring_width / spacing)) - 1)
    ring = _grow(mesh, seed, endo, layers)
    n, comp = face_components(mesh, ring)
    if n == 0:
        return []
    areas = np.bincount(comp[comp >= 0], weights=mesh.face_areas[comp >= 0], minlength=n)
    keep = np.flatnonzero(areas >= config.ring_fraction * areas.max())
    keep = keep[np.argsort(-areas[keep], kind="stable")]
    return [np.flatnonzero(comp == c) for c in keep]


def _centroid(mesh, faces):
    w = mesh.face_areas[faces]
    return (mesh.face_centroids[faces] * w[:, None]).sum(axis=0) / max(w.sum(), 1e-300)


def identify_valves(mesh, lv_sets, rv_sets):
    """
    Valve identities from centroid distances: the mitral valve is the LV valve farthest from the
    RV valves, the tricuspid valve the RV valve nearest the mitral valve.
    Output:
        - valves (dict): SurfaceLabel -> face indices
    """
    lv_c = [_centroid(mesh, f) for f in lv_sets]
    rv_c = [_centroid(mesh, f) for f in rv_sets]
    reach = [min(np.linalg.norm(c - r) for r in rv_c) for c in lv_c]
    mitral = int(np.argmax(reach))
    tricuspid = int(np.argmin([np.linalg.norm(r - lv_c[mitral]) for r in rv_c]))
    return {
        SurfaceLabel.ValveMitral: lv_sets[mitral],
        SurfaceLabel.ValveAortic: lv_sets[1 - mitral],
        SurfaceLabel.ValveTricuspid: rv_sets[tricuspid],
        SurfaceLabel.ValvePulmonary: rv_sets[1 - tricuspid],
    }


def locate_apices(mesh, face_labels, base):
    """
    Apex vertices: the endocardial vertex of each ventricle farthest from `base` along its long axis.
    The RV axis is the principal direction of the RV endocardium when that cloud is elongated and
    within RV_AXIS_MAX_ANGLE of the LV axis, the LV axis otherwise.
    """
    lv_faces = np.flatnonzero(face_labels == LV)
    rv_faces = np.flatnonzero(np.isin(face_labels, (RV, SEPTAL)))
    lv_axis = long_axis(mesh, lv_faces, base)
    apex_lv = farthest_along(mesh, lv_faces, base, lv_axis)
    rv_axis = lv_axis
    if rv_faces.size:
        axis, ratio = principal_axis(mesh.vertices[np.unique(mesh.faces[rv_faces])])
        if np.dot(axis, lv_axis) < 0:
            axis = -axis
        if ratio >= ELONGATION_RATIO and angle_between(axis, lv_axis) <= RV_AXIS_MAX_ANGLE:
            rv_axis = axis
        else:
            logger.debug("RV apex located along the LV axis")
    apex_rv = farthest_along(mesh, rv_faces, base, rv_axis) if rv_faces.size else None
    return apex_lv, apex_rv


def _ray_classes(mesh, config):
    """Epicardium/EndoLV/EndoRV from normal-ray crossing counts; also returns the hull and engine."""
    hull = padded_hull(mesh, config.hull_scale)
    engine = RayEngine([mesh, hull])
    stats = face_ray_stats(mesh, hull, engine=engine, faces=_sampled_faces(mesh, config))
    endo = spread_from_subset(mesh, stats.n_i >= 2, stats.valid)
    return split_cavities(mesh, endo, config), hull, engine


def _open_valves(mesh, face_labels, config):
    lv_sets = valve_rings(mesh, face_labels, (LV,), config)
    rv_sets = valve_rings(mesh, face_labels, (RV, SEPTAL), config)
    if len(lv_sets) != 2 or len(rv_sets) != 2:
        raise ValveCountMismatch("expected 2 valve rings per ventricle, found LV %d, RV %d" % (len(lv_sets), len(rv_sets)),
                                 report={"lv_rings": len(lv_sets), "rv_rings": len(rv_sets)})
    return identify_valves(mesh, lv_sets, rv_sets)


def _finish(mesh, face_labels, valves, config, kind="biventricular"):
    labels = np.array(face_labels)
    for label, faces in valves.items():
        labels[faces] = int(label)
    base = np.mean([_centroid(mesh, f) for f in valves.values()], axis=0)
    labels = np.array(smooth_labels(LabelMap(mesh, labels), mesh, config.smoothing_iterations).face_labels)
    apex_lv, apex_rv = locate_apices(mesh, labels, base)
    result = LabelMap(mesh, labels, apex_lv=apex_lv, apex_rv=apex_rv, kind=kind)
    logger.info("labelled %d faces: %s", mesh.n_faces, result)
    return result


def label_biventricular(mesh, config=None):
    """
    Labels a closed biventricular surface.
    Args:
        - mesh (SurfaceMesh): closed, outward oriented
        - config (LabelConfig): thresholds, defaults when None
    Output:
        - labels (LabelMap): every face labelled, both apex vertices set
    """
    config = (config or LabelConfig()).validate()
    _require_closed(mesh)
    n_shells, shell = face_components(mesh)
    if n_shells >= 3:
        return _label_closed_valves(mesh, shell, n_shells, config)

    labels, hull, engine = _ray_classes(mesh, config)
    labels = clean_classes(mesh, labels, (EPI, LV, RV), config)
    labels = carve_septum(mesh, labels, hull, config, engine=engine)
    valves = _open_valves(mesh, labels, config)
    return _finish(mesh, labels, valves, config)


def _shell_extent(mesh, faces):
    v = mesh.vertices[np.unique(mesh.faces[faces])]
    return float(np.linalg.norm(v.max(axis=0) - v.min(axis=0)))


def planar_lids(mesh, faces, config):
    """
    Near-planar face clusters of one shell, largest first. Faces join across edges whose dihedral
    angle is below `lid_crease_angle`; a cluster counts when its normals stay within `lid_spread`
    of their mean, it deviates less than `lid_flatness` from its best-fit plane and it covers at
    least `lid_min_area` of the shell.
    """
    graph = mesh.adjacency_graph[faces][:, faces].tocoo()
    normals = mesh.face_normals[faces]
    cos_crease = np.cos(np.deg2rad(config.lid_crease_angle))
    smooth = np.sum(normals[graph.row] * normals[graph.col], axis=1) >= cos_crease
    joined = sparse.csr_matrix((np.ones(int(smooth.sum())), (graph.row[smooth], graph.col[smooth])),
                               shape=(faces.size, faces.size))
    n, comp = csgraph.connected_components(joined, directed=False)
    areas = np.bincount(comp, weights=mesh.face_areas[faces], minlength=n)
    shell_area = float(mesh.face_areas[faces].sum())
    lids = []
    for c in np.argsort(-areas, kind="stable"):
        if areas[c] < config.lid_min_area * shell_area:
            break
        members = faces[comp == c]
        w = mesh.face_areas[members]
        mean = (mesh.face_normals[members] * w[:, None]).sum(axis=0)
        mean /= max(np.linalg.norm(mean), 1e-300)
        spread = np.degrees(np.arccos(np.clip(mesh.face_normals[members] @ mean, -1.0, 1.0))).max()
        if spread >= config.lid_spread:
            continue
        points = mesh.vertices[np.unique(mesh.faces[members])]
        offsets = (points - points.mean(axis=0)) @ mean
        if np.abs(offsets).max() > config.lid_flatness:
            continue
        lids.append(members)
    return lids


def _label_closed_valves(mesh, shell, n_shells, config):
    shells = [np.flatnonzero(shell == s) for s in range(n_shells)]
    extents = [_shell_extent(mesh, f) for f in shells]
    epi_shell = int(np.argmax(extents))
    areas = np.array([mesh.face_areas[f].sum() for f in shells])
    cavities = [s for s in range(n_shells)
                if s != epi_shell and areas[s] >= config.min_cavity_fraction * mesh.total_area]
    if len(cavities) != 2:
        raise NotBiventricular("expected 2 closed cavity shells, found %d" % len(cavities),
                               report={"shells": n_shells, "cavities": len(cavities)})
    volumes = [hull_volume(mesh, shells[s]) for s in cavities]
    rv_shell, lv_shell = cavities if volumes[0] > volumes[1] else cavities[::-1]
    stray = n_shells - 3
    if stray:
        logger.warning("%d small shells labelled as epicardium", stray)

    labels = np.full(mesh.n_faces, EPI, dtype=np.int64)
    labels[shells[lv_shell]] = LV
    labels[shells[rv_shell]] = RV
    lv_lids = planar_lids(mesh, shells[lv_shell], config)[:2]
    rv_lids = planar_lids(mesh, shells[rv_shell], config)[:2]
    if len(lv_lids) != 2 or len(rv_lids) != 2:
        raise ValveCountMismatch("expected 2 lids per cavity shell, found LV %d, RV %d" % (len(lv_lids), len(rv_lids)),
                                 report={"lv_lids": len(lv_lids), "rv_lids": len(rv_lids)})
    hull = padded_hull(mesh, config.hull_scale)
    labels = carve_septum(mesh, labels, hull, config)
    valves = identify_valves(mesh, lv_lids, rv_lids)
    logger.info("closed-valve surface: %d shells, lids found on both cavities", n_shells)
    return _finish(mesh, labels, valves, config)
