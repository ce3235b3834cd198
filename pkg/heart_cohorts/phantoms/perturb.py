import random

import numpy as np
from scipy.spatial.transform import Rotation


class Perturbation:

    def __call__(self, mesh):
        """
        Args:
            - mesh (SurfaceMesh): surface to perturb.
            Meshes are immutable, so the perturbed copy is returned.
        """
        raise NotImplementedError


class VertexNoise(Perturbation):
    """Moves every vertex along its normal by clipped Gaussian noise (sigma in mm)."""

    def __init__(self, sigma=0.2, seed=None):
        self.sigma = sigma
        self._rng = np.random.default_rng(seed)

    def __call__(self, mesh):
        offset = np.clip(self._rng.normal(0.0, self.sigma, mesh.n_vertices), -2 * self.sigma, 2 * self.sigma)
        vertices = mesh.vertices + offset[:, None] * mesh.vertex_normals()
        return type(mesh)(vertices, mesh.faces, mesh.vertex_fields, mesh.face_fields)


class RigidRotation(Perturbation):
    def __init__(self, max_angle=180.0, seed=None):
        self.max_angle = max_angle
        self._rng = np.random.default_rng(seed)

    def __call__(self, mesh):
        axis = self._rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        angle = np.deg2rad(self._rng.uniform(-self.max_angle, self.max_angle))
        rotation = Rotation.from_rotvec(angle * axis).as_matrix()
        centre = mesh.vertices.mean(axis=0)
        return mesh.transformed(rotation, centre - rotation @ centre)


class AnisotropicScale(Perturbation):
    def __init__(self, min_scale=0.95, max_scale=1.05, seed=None):
        self.min_scale = min_scale
        self.max_scale = max_scale
        self._rng = np.random.default_rng(seed)

    def __call__(self, mesh):
        scale = np.diag(self._rng.uniform(self.min_scale, self.max_scale, 3))
        centre = mesh.vertices.mean(axis=0)
        return mesh.transformed(scale, centre - scale @ centre)


class ShapeAugmentor:
    def __init__(self, perturbations=None, mutex_perturbations=None, rng=None):
        self._rng = random.Random() if rng is None else rng
        self._pipeline = perturbations if perturbations is not None else []
        self._mutex_perturbations = mutex_perturbations if mutex_perturbations is not None else []

    def isinstance(self, perturbation, perturbation_list):
        for p_type in perturbation_list:
            if isinstance(perturbation, p_type):
                return True
        return False

    def __call__(self, mesh):
        applied = False
        for (prob, p) in self._pipeline:
            if self._rng.random() <= prob:
                if self.isinstance(p, self._mutex_perturbations):
                    if not applied:
                        mesh = p(mesh)
                        applied = True
                    else:
                        continue
                else:
                    mesh = p(mesh)
        return mesh


def cohort_augmentor(seed, noise=0.2):
    """Mild shape noise used for cohort draws: always vertex noise, sometimes one anisotropic scale."""
    return ShapeAugmentor(
        perturbations=[(1.0, VertexNoise(sigma=noise, seed=seed)),
                       (0.5, AnisotropicScale(seed=seed + 1))],
        rng=random.Random(seed),
    )
