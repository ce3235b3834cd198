import logging

import numpy as np

from heart_cohorts.errors import EmptyResult, NotClosed
from heart_cohorts.geometry.mesh import HEX, VolumeMesh, hex_to_tets, validate_closed
from heart_cohorts.rays.ray_engine import RayEngine, points_in_mesh

logger = logging.getLogger(__name__)

# VTK hexahedron corner offsets: bottom face counter-clockwise, then the top face
HEX_OFFSETS = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0],
                        [0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1]])


def hex_grid(xs, ys, zs, cell_mask=None):
    """
    Structured hexahedra over the tensor grid xs x ys x zs.
    Output:
        - nodes (ndarray): [nx*ny*nz x 3] grid points in C order over (i, j, k)
        - elements (ndarray): [n_cells x 8] in VTK order, cells in C order over (i, j, k)
    """
    xs, ys, zs = (np.asarray(a, dtype=float) for a in (xs, ys, zs))
    dims = (xs.size, ys.size, zs.size)
    nodes = np.stack(np.meshgrid(xs, ys, zs, indexing="ij"), axis=-1).reshape(-1, 3)
    cells = np.stack(np.meshgrid(np.arange(dims[0] - 1), np.arange(dims[1] - 1), np.arange(dims[2] - 1),
                                 indexing="ij"), axis=-1).reshape(-1, 3)
    if cell_mask is not None:
        cells = cells[np.asarray(cell_mask, dtype=bool).ravel()]
    corners = cells[:, None, :] + HEX_OFFSETS[None]
    elements = np.ravel_multi_index((corners[..., 0], corners[..., 1], corners[..., 2]), dims)
    return nodes, elements


def _grid_axes(lo, hi, edge):
    # anchored at integer multiples of `edge` so translated inputs give translated grids
    start = np.floor(lo / edge) * edge
    n = np.maximum(np.ceil((hi - start) / edge - 1e-9).astype(int), 1)
    return [start[i] + edge * np.arange(n[i] + 1) for i in range(3)]


def _column_parity(engine, xs, ys, zs):
    """
    Inside flags of every cell centre, one +x ray per (y, z) column.
    Columns whose ray touches a triangle edge are returned for an exact retest.
    """
    edge = xs[1] - xs[0]
    cx = 0.5 * (xs[:-1] + xs[1:])
    cy = 0.5 * (ys[:-1] + ys[1:])
    cz = 0.5 * (zs[:-1] + zs[1:])
    yy, zz = np.meshgrid(cy, cz, indexing="ij")
    n_cols = yy.size
    start_x = xs[0] - edge
    origins = np.stack((np.full(n_cols, start_x), yy.ravel(), zz.ravel()), axis=1)
    directions = np.broadcast_to(np.array([1.0, 0.0, 0.0]), origins.shape)
    hits = engine.cast_many(origins, directions)

    toggles = np.zeros((n_cols, cx.size + 1), dtype=np.int64)
    first_cell = np.ceil((start_x + hits.t - cx[0]) / edge).astype(np.int64)
    np.add.at(toggles, (hits.ray, np.clip(first_cell, 0, cx.size)), 1)
    inside = (np.cumsum(toggles, axis=1)[:, :-1] % 2 == 1)

    grazing = np.zeros(n_cols, dtype=bool)
    grazing[hits.ray[hits.edge]] = True
    # columns are (j, k); cells are indexed (i, j, k)
    inside = inside.reshape(cy.size, cz.size, cx.size).transpose(2, 0, 1)
    grazing = grazing.reshape(cy.size, cz.size)
    return inside, grazing, (cx, cy, cz)


def inside_cells(surface, edge, engine=None):
    """
    Output:
        - axes (list): node coordinates along x, y, z
        - inside (ndarray): boolean [nx x ny x nz], True where the cell centre is inside `surface`
    """
    lo, hi = surface.bounding_box
    xs, ys, zs = _grid_axes(lo, hi, edge)
    if engine is None:
        engine = RayEngine(surface)
    inside, grazing, (cx, cy, cz) = _column_parity(engine, xs, ys, zs)
    if np.any(grazing):
        j, k = np.nonzero(grazing)
        ii, jj = np.meshgrid(np.arange(cx.size), np.arange(j.size), indexing="ij")
        centres = np.stack((cx[ii.ravel()], cy[j[jj.ravel()]], cz[k[jj.ravel()]]), axis=1)
        retest = points_in_mesh(surface, centres, engine=engine, check_closed=False)
        inside[ii.ravel(), j[jj.ravel()], k[jj.ravel()]] = retest
        logger.debug("%d grazing voxel columns re-tested point by point", j.size)
    return [xs, ys, zs], inside


def voxelize(surface, edge):
    """
    Axis-aligned hexahedral mesh of the solid bounded by `surface`: cubes of side `edge`
    on a grid anchored at multiples of `edge`, kept when their centre is inside.
    """
    if not edge > 0:
        raise ValueError("voxel edge must be positive, got %r" % edge)
    if not validate_closed(surface)["watertight"]:
        raise NotClosed("voxelize needs a closed surface")
    axes, inside = inside_cells(surface, edge)
    if not np.any(inside):
        raise EmptyResult("no voxel centre of edge %.3g mm lies inside the surface" % edge)
    nodes, elements = hex_grid(*axes, cell_mask=inside)
    mesh = VolumeMesh(nodes, elements, HEX)
    logger.info("voxelized at %.3g mm: %d hexahedra, %d nodes", edge, mesh.n_elements, mesh.n_nodes)
    return mesh


def coarse_tet_mesh(surface, edge):
    """Tetrahedral mesh for the field solves when none is imported: voxels split into six tetrahedra."""
    return hex_to_tets(voxelize(surface, edge))
