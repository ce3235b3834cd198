"""
P1 finite elements on tetrahedral meshes: stiffness assembly, element gradients and a
Jacobi-preconditioned conjugate gradient solver for Laplace problems with Dirichlet data.
"""
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from heart_cohorts.config import SolverConfig
from heart_cohorts.errors import EmptyBoundary, MaximumPrincipleViolated, SolverDiverged
from heart_cohorts.geometry.mesh import TET

logger = logging.getLogger(__name__)

MAX_PRINCIPLE_TOL = 1e-9
_ENERGY_SLACK = 1e-12


@dataclass
class ScalarField:
    """Per-node values; `mask` marks the nodes where the field is defined (all when None)."""
    name: str
    values: np.ndarray
    mask: np.ndarray = None
    report: dict = field(default_factory=dict)

    @property
    def defined(self):
        if self.mask is None:
            return np.ones(self.values.shape[0], dtype=bool)
        return self.mask

    def __len__(self):
        return self.values.shape[0]

    def masked(self, fill=np.nan):
        out = np.array(self.values, dtype=float)
        out[~self.defined] = fill
        return out


class DirichletSpec:
    """
    Prescribed values on node sets. Each entry is (name, node indices, value); node sets must be disjoint.
    """

    def __init__(self, entries=None):
        self.entries = []
        for name, nodes, value in entries or []:
            self.add(name, nodes, value)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def add(self, name, nodes, value):
        nodes = np.unique(np.asarray(nodes, dtype=np.int64))
        for other, taken, _ in self.entries:
            shared = np.intersect1d(nodes, taken)
            if shared.size:
                raise ValueError("Dirichlet sets %s and %s share %d nodes" % (other, name, shared.size))
        self.entries.append((str(name), nodes, float(value)))
        return self

    def nodes_values(self):
        if not self.entries:
            return np.zeros(0, dtype=np.int64), np.zeros(0)
        nodes = np.concatenate([n for _, n, _ in self.entries])
        values = np.concatenate([np.full(n.size, v) for _, n, v in self.entries])
        return nodes, values

    def value_range(self):
        values = [v for _, n, v in self.entries if n.size]
        return min(values), max(values)

    def __str__(self):
        return "DirichletSpec(%s)" % ", ".join("%s=%g [%d]" % (name, v, n.size) for name, n, v in self.entries)


def tet_gradients(nodes, elements):
    """
    Gradients of the four barycentric shape functions of every tetrahedron.
    Output:
        - grads (ndarray): [m x 4 x 3]
        - volumes (ndarray): [m] signed volumes
    """
    x = nodes[elements]
    edges = np.stack((x[:, 1] - x[:, 0], x[:, 2] - x[:, 0], x[:, 3] - x[:, 0]), axis=1)
    det = np.linalg.det(edges)
    inverse = np.linalg.inv(edges)
    g = np.empty((elements.shape[0], 4, 3))
    g[:, 1:] = np.transpose(inverse, (0, 2, 1))
    g[:, 0] = -g[:, 1:].sum(axis=1)
    return g, det / 6.0


def stiffness_matrix(mesh):
    """Assembled P1 Laplace stiffness matrix (csr, symmetric positive semi-definite)."""
    if mesh.kind != TET:
        raise ValueError("Laplace solves need a tetrahedral mesh, got %s" % mesh.kind)
    grads, volumes = tet_gradients(mesh.nodes, mesh.elements)
    local = np.einsum("eik,ejk->eij", grads, grads) * np.abs(volumes)[:, None, None]
    rows = np.repeat(mesh.elements, 4, axis=1).ravel()
    cols = np.tile(mesh.elements, (1, 4)).ravel()
    a = sparse.coo_matrix((local.ravel(), (rows, cols)), shape=(mesh.n_nodes, mesh.n_nodes)).tocsr()
    a.sum_duplicates()
    return a


def gradient(mesh, values):
    """Constant P1 gradient of a nodal field on every tetrahedron ([m x 3])."""
    if isinstance(values, ScalarField):
        values = values.values
    grads, _ = tet_gradients(mesh.nodes, mesh.elements)
    return np.einsum("eik,ei->ek", grads, np.asarray(values, dtype=float)[mesh.elements])


def conjugate_gradient(a, b, x0=None, tol=1e-10, max_iterations=None, check_energy=True):
    """
    Jacobi-preconditioned conjugate gradients for a symmetric positive definite `a`.
    Stops when ||r|| <= tol * ||b||. The quadratic energy 1/2 x'Ax - b'x is checked to never increase.
    Output:
        - x (ndarray)
        - info (dict): iterations, converged, residuals (relative, one per iteration)
    """
    n = b.shape[0]
    max_iterations = 10 * max(n, 1) if max_iterations is None else max_iterations
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    diag = a.diagonal()
    inv_diag = np.where(diag > 0, 1.0 / np.where(diag > 0, diag, 1.0), 1.0)
    r = b - a @ x
    norm_b = np.linalg.norm(b)
    if norm_b == 0.0:
        norm_b = 1.0
    z = inv_diag * r
    p = z.copy()
    rz = r @ z
    energy = 0.5 * x @ (a @ x) - b @ x
    residuals = [float(np.linalg.norm(r) / norm_b)]
    iterations = 0
    while residuals[-1] > tol and iterations < max_iterations:
        ap = a @ p
        pap = p @ ap
        if pap <= 0:
            break
        step = rz / pap
        x += step * p
        r -= step * ap
        iterations += 1
        residuals.append(float(np.linalg.norm(r) / norm_b))
        if check_energy:
            new_energy = 0.5 * x @ (a @ x) - b @ x
            assert new_energy <= energy + _ENERGY_SLACK * max(1.0, abs(energy)), \
                "CG energy increased at iteration %d: %r -> %r" % (iterations, energy, new_energy)
            energy = new_energy
        z = inv_diag * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    return x, {"iterations": iterations, "converged": residuals[-1] <= tol, "residuals": residuals}


def _floating_nodes(mesh, free):
    """Free nodes in node-graph components holding no Dirichlet node."""
    n, comp = csgraph.connected_components(mesh.node_adjacency(), directed=False)
    anchored = np.zeros(n, dtype=bool)
    anchored[comp[~free]] = True
    return ~anchored[comp]


def solve_laplace(mesh, bc, config=None, name="field", stiffness=None):
    """
    Solves the Laplace equation with Dirichlet data `bc` (natural boundary conditions elsewhere).
    Args:
        - mesh (VolumeMesh): tetrahedral
        - bc (DirichletSpec)
        - config (SolverConfig)
        - stiffness (csr_matrix): reused when given
    Output:
        - field (ScalarField): nodes in components without Dirichlet data are left undefined
    """
    config = (config or SolverConfig()).validate()
    nodes, values = bc.nodes_values()
    empty = [n for n, idx, _ in bc if idx.size == 0]
    if nodes.size == 0 or empty:
        raise EmptyBoundary("field %s: empty Dirichlet set(s) %s" % (name, empty or "(none given)"))
    a = stiffness_matrix(mesh) if stiffness is None else stiffness

    x = np.zeros(mesh.n_nodes)
    x[nodes] = values
    free = np.ones(mesh.n_nodes, dtype=bool)
    free[nodes] = False
    floating = _floating_nodes(mesh, free)
    solve = free & ~floating
    if np.any(floating):
        logger.warning("field %s: %d nodes are not connected to any Dirichlet set", name, int(floating.sum()))

    info = {"iterations": 0, "converged": True, "residuals": []}
    if np.any(solve):
        a_ff = a[solve][:, solve].tocsr()
        rhs = -(a[solve][:, ~free] @ x[~free])
        x_f, info = conjugate_gradient(a_ff, rhs, tol=config.tolerance, max_iterations=config.max_iterations,
                                       check_energy=config.check_energy)
        if not info["converged"]:
            raise SolverDiverged("field %s: CG stopped after %d iterations at relative residual %.3e"
                                 % (name, info["iterations"], info["residuals"][-1]),
                                 report={"iterations": info["iterations"], "residual": info["residuals"][-1]})
        x[solve] = x_f

    lo, hi = bc.value_range()
    x, rounded = bound_to_range(x, lo, hi, ignore=floating, name=name)
    mask = None if not np.any(floating) else ~floating
    report = {"iterations": info["iterations"], "residuals": info["residuals"],
              "rounded": rounded, "floating": int(floating.sum())}
    logger.debug("field %s solved in %d iterations", name, info["iterations"])
    return ScalarField(name, x, mask, report)


def bound_to_range(x, lo, hi, ignore=None, name="field"):
    """
    Asserts the discrete maximum principle: every value lies in [lo, hi] up to MAX_PRINCIPLE_TOL.
    Round-off within the tolerance is snapped onto the bounds.
    Output:
        - x (ndarray): values clipped to [lo, hi]
        - rounded (int): number of values that were snapped
    """
    x = np.asarray(x, dtype=float)
    checked = np.ones(x.shape[0], dtype=bool) if ignore is None else ~np.asarray(ignore, dtype=bool)
    low = (x < lo - MAX_PRINCIPLE_TOL) & checked
    high = (x > hi + MAX_PRINCIPLE_TOL) & checked
    if np.any(low | high):
        worst = float(max(lo - x[checked].min(), x[checked].max() - hi))
        raise MaximumPrincipleViolated(
            "field %s: %d nodes outside [%g, %g] (worst by %.3e)" % (name, int(np.sum(low | high)), lo, hi, worst),
            report={"nodes": np.flatnonzero(low | high)[:100].tolist(), "worst": worst})
    rounded = int(np.sum(((x < lo) | (x > hi)) & checked))
    return np.clip(x, lo, hi), rounded
