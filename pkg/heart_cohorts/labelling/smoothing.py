import logging

import numpy as np
from scipy import sparse

from heart_cohorts.geometry.mesh import face_components
from heart_cohorts.labelling.labels import N_LABELS

logger = logging.getLogger(__name__)


def _neighbour_votes(mesh, face_labels):
    """[n_faces x N_LABELS] count of edge-adjacent faces carrying each label."""
    onehot = sparse.csr_matrix((np.ones(face_labels.size), (np.arange(face_labels.size), face_labels)),
                               shape=(face_labels.size, N_LABELS))
    return np.asarray((mesh.adjacency_graph @ onehot).todense())


def _independent(candidates, graph):
    """Greedy independent set of `candidates`, taken in the given order."""
    blocked = np.zeros(graph.shape[0], dtype=bool)
    chosen = []
    indptr, indices = graph.indptr, graph.indices
    for f in candidates:
        if blocked[f]:
            continue
        chosen.append(f)
        blocked[indices[indptr[f]:indptr[f + 1]]] = True
    return np.asarray(chosen, dtype=np.int64)


def majority_step(mesh, face_labels):
    """
    Faces whose neighbours hold a strict majority label different from their own, with at
    most one neighbour sharing their current label, restricted to an independent set.
    Candidates are taken by decreasing vote margin (majority votes minus own-label votes), so
    adjacent candidates only depend on face order when their margins tie; ties go to the lower
    face index.
    Output:
        - faces (ndarray): faces to relabel
        - labels (ndarray): their new labels
    """
    votes = _neighbour_votes(mesh, face_labels)
    best = np.argmax(votes, axis=1)
    top = votes[np.arange(face_labels.size), best]
    runner_up = np.sort(votes, axis=1)[:, -2]
    own = votes[np.arange(face_labels.size), face_labels]
    change = (best != face_labels) & (top > runner_up) & (own <= 1)
    candidates = np.flatnonzero(change)
    if candidates.size == 0:
        return candidates, candidates
    margin = top[candidates] - own[candidates]
    candidates = candidates[np.argsort(-margin, kind="stable")]
    chosen = np.sort(_independent(candidates, mesh.adjacency_graph))
    return chosen, best[chosen]


def smooth_labels(labels, mesh=None, max_iters=50):
    """
    Majority-vote smoothing of a LabelMap until nothing changes or `max_iters` rounds.
    A face only flips when it is a leaf of its own label region and its new label already
    surrounds it, so the number of connected label components never grows.
    Output:
        - labels (LabelMap): smoothed map (apex vertices kept)
    """
    mesh = labels.mesh if mesh is None else mesh
    current = np.array(labels.face_labels, dtype=np.int64)
    changed = 0
    for iteration in range(max_iters):
        faces, new = majority_step(mesh, current)
        if faces.size == 0:
            logger.debug("label smoothing reached a fixpoint after %d iterations", iteration)
            break
        current[faces] = new
        changed += faces.size
    else:
        logger.debug("label smoothing stopped after %d iterations", max_iters)
    if changed:
        logger.info("label smoothing relabelled %d faces", changed)
    return labels.with_labels(current)


def label_components(mesh, face_labels, label):
    """Connected components of one label: (n, component id per face, area per component)."""
    n, comp = face_components(mesh, face_labels == int(label))
    areas = np.bincount(comp[comp >= 0], weights=mesh.face_areas[comp >= 0], minlength=n)
    return n, comp, areas


def absorb_islands(mesh, face_labels, label, keep=1, min_fraction=0.0):
    """
    Keeps the `keep` largest components of `label` (and any whose area is at least
    `min_fraction` of the largest); every other component takes the label most common
    among the faces bordering it.
    """
    face_labels = np.array(face_labels, dtype=np.int64)
    n, comp, areas = label_components(mesh, face_labels, label)
    if n <= keep:
        return face_labels
    order = np.argsort(-areas, kind="stable")
    kept = set(order[:keep].tolist())
    kept |= set(np.flatnonzero(areas >= min_fraction * areas[order[0]]).tolist()) if min_fraction > 0 else set()
    graph = mesh.adjacency_graph
    for c in order:
        if c in kept:
            continue
        members = np.flatnonzero(comp == c)
        around = np.unique(graph[members].indices)
        around = around[face_labels[around] != int(label)]
        if around.size == 0:
            continue
        face_labels[members] = np.bincount(face_labels[around], minlength=N_LABELS).argmax()
    return face_labels
