"""Structured analytic meshes: solver and fibre test geometries and simple closed/open surfaces."""
import numpy as np

from heart_cohorts.geometry.mesh import HEX, SurfaceMesh, VolumeMesh, hex_to_tets
from heart_cohorts.mesh_build.voxelize import hex_grid


def box_bar(length=10.0, width=2.0, height=2.0, n=(10, 2, 2)):
    """Tetrahedral bar [0, length] x [0, width] x [0, height] (Kuhn split of a hex grid)."""
    xs = np.linspace(0.0, length, n[0] + 1)
    ys = np.linspace(0.0, width, n[1] + 1)
    zs = np.linspace(0.0, height, n[2] + 1)
    nodes, elements = hex_grid(xs, ys, zs)
    return hex_to_tets(VolumeMesh(nodes, elements, HEX))


def spherical_shell(inner=5.0, outer=10.0, n=8):
    """
    Tetrahedral shell between radii `inner` and `outer`. A cube shell
    (|p|inf in [0.5, 1], n cells per side, n a multiple of 4) is mapped radially
    so that |p|inf = 0.5 lands on the inner sphere and |p|inf = 1 on the outer one.
    """
    if n % 4:
        raise ValueError("spherical_shell needs n divisible by 4, got %d" % n)
    axis = np.linspace(-1.0, 1.0, n + 1)
    centres = 0.5 * (axis[:-1] + axis[1:])
    cc = np.stack(np.meshgrid(centres, centres, centres, indexing="ij"), axis=-1)
    keep = np.max(np.abs(cc), axis=-1) > 0.5
    nodes, elements = hex_grid(axis, axis, axis, cell_mask=keep)
    s = np.max(np.abs(nodes), axis=1)
    norm = np.linalg.norm(nodes, axis=1)
    radius = inner + (s - 0.5) / 0.5 * (outer - inner)
    with np.errstate(invalid="ignore", divide="ignore"):
        mapped = np.where(norm[:, None] > 0, nodes / norm[:, None] * radius[:, None], 0.0)
    return hex_to_tets(VolumeMesh(mapped, elements, HEX))


def annulus_cylinder(inner=10.0, outer=15.0, height=10.0, n_theta=48, n_r=4, n_z=6):
    """Tetrahedral thick-walled cylinder around the z axis, periodic in the angle."""
    r = np.linspace(inner, outer, n_r + 1)
    theta = np.linspace(0.0, 2 * np.pi, n_theta, endpoint=False)
    z = np.linspace(0.0, height, n_z + 1)
    dims = (n_r + 1, n_theta, n_z + 1)
    rr, tt, zz = np.meshgrid(r, theta, z, indexing="ij")
    nodes = np.stack((rr * np.cos(tt), rr * np.sin(tt), zz), axis=-1).reshape(-1, 3)
    i, j, k = np.meshgrid(np.arange(n_r), np.arange(n_theta), np.arange(n_z), indexing="ij")
    i, j, k = i.ravel(), j.ravel(), k.ravel()
    corners = []
    for di, dj, dk in ((0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0), (0, 0, 1), (1, 0, 1), (1, 1, 1), (0, 1, 1)):
        corners.append(np.ravel_multi_index((i + di, (j + dj) % n_theta, k + dk), dims))
    return hex_to_tets(VolumeMesh(nodes, np.stack(corners, axis=1), HEX))


def unit_cube_surface():
    vertices = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0],
                         [0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1]], dtype=float)
    faces = np.array([[0, 2, 1], [0, 3, 2], [4, 5, 6], [4, 6, 7],
                      [0, 1, 5], [0, 5, 4], [1, 2, 6], [1, 6, 5],
                      [2, 3, 7], [2, 7, 6], [3, 0, 4], [3, 4, 7]])
    return SurfaceMesh(vertices, faces)


def icosphere(radius=1.0, subdivisions=2, centre=(0.0, 0.0, 0.0)):
    t = (1.0 + np.sqrt(5.0)) / 2.0
    vertices = [[-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
                [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
                [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1]]
    faces = [[0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
             [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
             [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
             [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1]]
    vertices = [np.asarray(v, dtype=float) / np.linalg.norm(v) for v in vertices]
    for _ in range(subdivisions):
        cache = {}
        refined = []

        def midpoint(a, b):
            key = (min(a, b), max(a, b))
            if key not in cache:
                m = vertices[a] + vertices[b]
                vertices.append(m / np.linalg.norm(m))
                cache[key] = len(vertices) - 1
            return cache[key]

        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            refined += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        faces = refined
    return SurfaceMesh(np.asarray(vertices) * radius + np.asarray(centre, dtype=float), faces)


def open_tube(radius=10.0, height=20.0, n_theta=32, n_z=8, outward=True):
    """Cylinder side wall without caps, normals pointing away from the axis when `outward`."""
    theta = np.linspace(0.0, 2 * np.pi, n_theta, endpoint=False)
    z = np.linspace(0.0, height, n_z + 1)
    tt, zz = np.meshgrid(theta, z, indexing="ij")
    vertices = np.stack((radius * np.cos(tt), radius * np.sin(tt), zz), axis=-1).reshape(-1, 3)
    idx = np.arange(vertices.shape[0]).reshape(n_theta, n_z + 1)
    nxt = np.roll(idx, -1, axis=0)
    a, b, c, d = idx[:, :-1], nxt[:, :-1], nxt[:, 1:], idx[:, 1:]
    faces = np.concatenate((np.stack((a, b, c), axis=-1).reshape(-1, 3),
                            np.stack((a, c, d), axis=-1).reshape(-1, 3)))
    mesh = SurfaceMesh(vertices, faces)
    return mesh if outward else mesh.flipped()


def annular_disk(inner=1.0, outer=2.0, n_theta=24):
    theta = np.linspace(0.0, 2 * np.pi, n_theta, endpoint=False)
    ring = np.stack((np.cos(theta), np.sin(theta), np.zeros(n_theta)), axis=1)
    vertices = np.vstack((inner * ring, outer * ring))
    i = np.arange(n_theta)
    j = (i + 1) % n_theta
    faces = np.concatenate((np.stack((i, n_theta + i, n_theta + j), axis=1),
                            np.stack((i, n_theta + j, j), axis=1)))
    return SurfaceMesh(vertices, faces)
