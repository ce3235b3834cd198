import logging

import numpy as np

from heart_cohorts.errors import SelfIntersectingOffset, StitchFailed
from heart_cohorts.geometry.mesh import SurfaceMesh, boundary_loops, merge_surfaces, validate_closed
from heart_cohorts.labelling.labels import SURFACE_LABEL_FIELD, SurfaceLabel
from heart_cohorts.rays.ray_engine import segments_hit_surface

logger = logging.getLogger(__name__)

SEGMENT_SHRINK = 1e-4


def _labelled(mesh, label):
    return mesh.with_fields(face_fields={SURFACE_LABEL_FIELD: np.full(mesh.n_faces, int(label), dtype=np.int64)})


def _face_labels(mesh):
    labels = mesh.face_fields.get(SURFACE_LABEL_FIELD)
    if labels is None:
        return np.full(mesh.n_faces, int(SurfaceLabel.Unassigned), dtype=np.int64)
    return np.asarray(labels, dtype=np.int64)


def fill_holes(mesh, label_new_as=SurfaceLabel.Unassigned):
    """Closes every boundary loop with a fan to its centroid; new faces carry `label_new_as`."""
    loops = boundary_loops(mesh)
    if not loops:
        return mesh
    vertices = [mesh.vertices]
    faces = [mesh.faces]
    n = mesh.n_vertices
    for loop in loops:
        ring = loop.as_array()
        centre = n
        vertices.append(loop.centroid(mesh)[None])
        n += 1
        # boundary half-edges run ring[i] -> ring[i+1]; the lid traverses them backwards
        faces.append(np.stack((np.roll(ring, -1), ring, np.full(ring.size, centre)), axis=1))
    new_faces = sum(f.shape[0] for f in faces[1:])
    labels = np.concatenate((_face_labels(mesh), np.full(new_faces, int(label_new_as), dtype=np.int64)))
    face_fields = {SURFACE_LABEL_FIELD: labels}
    logger.info("filled %d holes with %d faces", len(loops), new_faces)
    return SurfaceMesh(np.vstack(vertices), np.vstack(faces), face_fields=face_fields)


def offset_surface(mesh, distance):
    """
    Copy of `mesh` moved by `distance` against its area-weighted vertex normals.
    Raises SelfIntersectingOffset when the offset folds, crosses the original or crosses itself.
    """
    normals = mesh.vertex_normals()
    moved = mesh.vertices - distance * normals
    offset = SurfaceMesh(moved, mesh.faces)

    folded = np.sum(offset.face_normals * mesh.face_normals, axis=1) < 0
    folded &= ~mesh.degenerate_faces
    if np.any(folded):
        raise SelfIntersectingOffset("offset by %.3g mm folds %d faces" % (distance, int(folded.sum())),
                                     report={"faces": np.flatnonzero(folded)[:100].tolist()})
    vertex_ids = np.arange(mesh.n_vertices)
    crossing = segments_hit_surface(mesh, mesh.vertices, moved, vertex_ids=vertex_ids)
    if np.any(crossing):
        raise SelfIntersectingOffset("%d offset segments cross the source surface" % int(crossing.sum()),
                                     report={"vertices": np.flatnonzero(crossing)[:100].tolist()})
    edges = offset.edges
    a, b = moved[edges[:, 0]], moved[edges[:, 1]]
    step = SEGMENT_SHRINK * (b - a)
    crossing = segments_hit_surface(offset, a + step, b - step)
    if np.any(crossing):
        raise SelfIntersectingOffset("offset surface intersects itself along %d edges" % int(crossing.sum()),
                                     report={"edges": edges[crossing][:100].tolist()})
    return offset


def _loop_radius(mesh, loop):
    ring = mesh.vertices[loop.as_array()]
    return float(np.linalg.norm(ring - ring.mean(axis=0), axis=1).mean())


def _zipper(p, q, vertices):
    """
    Triangle strip between closed vertex cycles p and q (global indices) running the same way
    round. Strip faces traverse p forwards and q backwards.
    """
    start = int(np.argmin(np.linalg.norm(vertices[q] - vertices[p[0]], axis=1)))
    q = np.roll(q, -start)
    p = np.append(p, p[0])
    q = np.append(q, q[0])
    i = j = 0
    faces = []
    while i < p.size - 1 or j < q.size - 1:
        advance_p = j == q.size - 1
        if i < p.size - 1 and j < q.size - 1:
            via_p = np.linalg.norm(vertices[p[i + 1]] - vertices[q[j]])
            via_q = np.linalg.norm(vertices[q[j + 1]] - vertices[p[i]])
            advance_p = via_p <= via_q
        if advance_p:
            faces.append((p[i], p[i + 1], q[j]))
            i += 1
        else:
            faces.append((q[j + 1], q[j], p[i]))
            j += 1
    return np.asarray(faces, dtype=np.int64)


def _pair_loops(mesh_a, loops_a, mesh_b, loops_b):
    """Greedy pairing by centroid distance; pairs further apart than their mean radius are left open."""
    pairs = []
    candidates = []
    for i, la in enumerate(loops_a):
        for j, lb in enumerate(loops_b):
            d = np.linalg.norm(la.centroid(mesh_a) - lb.centroid(mesh_b))
            reach = _loop_radius(mesh_a, la) + _loop_radius(mesh_b, lb)
            if d <= reach:
                candidates.append((d, i, j))
    used_a, used_b = set(), set()
    for d, i, j in sorted(candidates):
        if i in used_a or j in used_b:
            continue
        pairs.append((i, j))
        used_a.add(i)
        used_b.add(j)
    return pairs


def _is_closed(mesh):
    return mesh is not None and validate_closed(mesh)["watertight"]


def assemble_closed_biventricular(lv_epi, lv_endo, rv_endo, extrusion=3.0):
    """
    Closed biventricular surface from three open segmentation surfaces: the RV epicardium is
    rv_endo offset by `extrusion` against its normals (normals of rv_endo face the RV cavity),
    matching rims are stitched and any remaining openings are capped.
    Faces carry a `surface_label` hint field (Unassigned on stitch strips and caps).
    """
    given = [m for m in (lv_epi, lv_endo, rv_endo) if m is not None]
    if given and all(_is_closed(m) for m in given):
        return given[0] if len(given) == 1 else merge_surfaces(given)
    if lv_epi is None or lv_endo is None or rv_endo is None:
        raise StitchFailed("open input needs lv_epi, lv_endo and rv_endo surfaces")

    rv_epi = offset_surface(rv_endo, extrusion).flipped()
    parts = [_labelled(lv_epi, SurfaceLabel.Epicardium), _labelled(lv_endo, SurfaceLabel.EndoLV),
             _labelled(rv_endo, SurfaceLabel.EndoRV), _labelled(rv_epi, SurfaceLabel.Epicardium)]
    offsets = np.cumsum([0] + [m.n_vertices for m in parts])
    vertices = np.vstack([m.vertices for m in parts])
    faces = [m.faces + offsets[k] for k, m in enumerate(parts)]
    labels = [_face_labels(m) for m in parts]
    strips = []

    # rv_epi shares vertex numbering with rv_endo, so its rims pair by index
    for loop in boundary_loops(rv_endo):
        ring = loop.as_array()
        a = ring + offsets[2]
        b = ring + offsets[3]
        a1, b1 = np.roll(a, -1), np.roll(b, -1)
        strips.append(np.concatenate((np.stack((a1, a, b), axis=1), np.stack((a1, b, b1), axis=1))))

    loops_epi = boundary_loops(lv_epi)
    loops_endo = boundary_loops(lv_endo)
    pairs = _pair_loops(lv_endo, loops_endo, lv_epi, loops_epi)
    for i, j in pairs:
        # endo rim reversed and epi rim forwards run the same way round
        p = loops_endo[i].as_array()[::-1] + offsets[1]
        q = loops_epi[j].as_array() + offsets[0]
        strips.append(_zipper(p, q, vertices))
    if len(pairs) < max(len(loops_endo), len(loops_epi)):
        logger.info("%d LV rims left unpaired and capped", len(loops_endo) + len(loops_epi) - 2 * len(pairs))

    n_strip = sum(s.shape[0] for s in strips)
    merged = SurfaceMesh(vertices, np.vstack(faces + strips),
                         face_fields={SURFACE_LABEL_FIELD: np.concatenate(
                             labels + [np.full(n_strip, int(SurfaceLabel.Unassigned), dtype=np.int64)])})
    closed = fill_holes(merged, SurfaceLabel.Unassigned)
    report = validate_closed(closed)
    if not report["watertight"]:
        raise StitchFailed("assembled surface is not watertight (%d defects)" % len(report["defects"]),
                           report={"defects": report["defects"][:100]})
    return closed
