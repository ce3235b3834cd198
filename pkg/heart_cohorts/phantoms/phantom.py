import logging
from dataclasses import dataclass, field, fields, replace
from typing import Dict, Optional, Tuple

import numpy as np
from skimage import measure

from heart_cohorts.errors import InvalidParams
from heart_cohorts.geometry.mesh import (SurfaceMesh, face_components, orient_consistently,
                                         weld_vertices)
from heart_cohorts.labelling.labels import LabelMap, SurfaceLabel

logger = logging.getLogger(__name__)

KINDS = ("full", "cut", "closed", "open-surfaces")
VALVE_NAMES = ("mitral", "aortic", "tricuspid", "pulmonary")
VALVE_LABELS = {
    "mitral": SurfaceLabel.ValveMitral,
    "aortic": SurfaceLabel.ValveAortic,
    "tricuspid": SurfaceLabel.ValveTricuspid,
    "pulmonary": SurfaceLabel.ValvePulmonary,
}
LV_VALVE_NAMES = ("mitral", "aortic")
GRID_OFFSET = 0.37
PADDING = 2.5
_FAR = 1e9


@dataclass
class PhantomParams:
    """
    Shape of an idealised biventricular phantom (millimetres, degrees).
    The long axis is +z, the base sits at z = 0 and the apex at negative z.
    Valves are (x, y, radius) discs cut through the basal roof.
    """
    lv_radius: float = 20.0
    lv_length: float = 50.0
    lv_wall: float = 9.0
    rv_offset: float = 24.0
    rv_axes: Tuple[float, float, float] = (36.0, 36.0, 45.0)
    rv_wall: float = 4.5
    lv_roof: float = 5.0
    rv_roof: float = 4.0
    mitral: Tuple[float, float, float] = (-8.0, -5.0, 6.0)
    aortic: Tuple[float, float, float] = (8.0, 6.0, 5.0)
    tricuspid: Tuple[float, float, float] = (36.0, -20.0, 6.0)
    pulmonary: Tuple[float, float, float] = (44.0, 14.0, 5.0)
    cut_fraction: float = 0.2
    cut_tilt: float = 0.0
    dome_height: float = 3.0
    lid_height: float = 6.0
    closed_top: float = 9.0
    open_gap: float = 8.0
    resolution: float = 1.5
    seed: int = 0

    _LENGTHS = ("lv_radius", "lv_length", "lv_wall", "rv_offset", "rv_wall", "lv_roof", "rv_roof")

    @property
    def lv_endo_axes(self):
        return np.array([self.lv_radius, self.lv_radius, self.lv_length], dtype=float)

    @property
    def lv_epi_axes(self):
        return self.lv_endo_axes + self.lv_wall

    @property
    def rv_centre(self):
        return np.array([self.rv_offset, 0.0, 0.0])

    @property
    def rv_inner_axes(self):
        return np.asarray(self.rv_axes, dtype=float)

    @property
    def rv_outer_axes(self):
        return self.rv_inner_axes + self.rv_wall

    @property
    def cut_height(self):
        return -self.cut_fraction * self.lv_length

    def valve(self, name):
        x, y, r = getattr(self, name)
        return np.array([x, y], dtype=float), float(r)

    def as_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def validate(self):
        """Raises InvalidParams when the parameters cannot produce a two-cavity phantom."""
        positive = list(self._LENGTHS) + ["resolution", "dome_height", "lid_height", "closed_top", "open_gap"]
        for name in positive:
            if not getattr(self, name) > 0:
                raise InvalidParams("%s must be positive, got %r" % (name, getattr(self, name)))
        if np.any(self.rv_inner_axes <= 0):
            raise InvalidParams("rv_axes must be positive, got %r" % (self.rv_axes,))
        if not np.all(self.lv_epi_axes > self.lv_endo_axes) or not np.all(self.rv_outer_axes > self.rv_inner_axes):
            raise InvalidParams("epicardial semi-axes must exceed endocardial semi-axes")
        if not 0.0 < self.cut_fraction < 0.9:
            raise InvalidParams("cut_fraction must lie in (0, 0.9), got %r" % self.cut_fraction)
        if not -80.0 < self.cut_tilt < 80.0:
            raise InvalidParams("cut_tilt must lie in (-80, 80) degrees, got %r" % self.cut_tilt)
        if not self.dome_height < self.lid_height < self.closed_top:
            raise InvalidParams("closed phantom needs dome_height < lid_height < closed_top")

        margin = max(1.0, self.resolution)
        lv_epi_r = self.lv_radius + self.lv_wall
        for name in VALVE_NAMES:
            c, r = self.valve(name)
            if r <= 0:
                raise InvalidParams("%s radius must be positive" % name)
            dist = float(np.hypot(*c))
            if name in LV_VALVE_NAMES:
                if dist + r + margin > self.lv_radius:
                    raise InvalidParams("%s disc leaves the LV cavity" % name)
                continue
            if dist - r - margin < lv_epi_r:
                raise InvalidParams("%s disc overlaps the LV wall" % name)
            angle = np.linspace(0.0, 2 * np.pi, 16, endpoint=False)
            rim = c + (r + margin) * np.stack((np.cos(angle), np.sin(angle)), axis=1)
            q = (rim - self.rv_centre[:2]) / self.rv_inner_axes[:2]
            if np.any(np.sum(q * q, axis=1) > 1.0):
                raise InvalidParams("%s disc leaves the RV cavity" % name)
        for group in (LV_VALVE_NAMES, ("tricuspid", "pulmonary")):
            (c0, r0), (c1, r1) = self.valve(group[0]), self.valve(group[1])
            if np.linalg.norm(c0 - c1) < r0 + r1 + margin:
                raise InvalidParams("%s and %s discs overlap" % group)

        rv_apex = self.rv_centre - np.array([0.0, 0.0, self.rv_inner_axes[2]])
        if _ellipsoid(rv_apex[None], np.zeros(3), self.lv_epi_axes)[0] <= 0:
            raise InvalidParams("RV apex lies inside the LV wall")
        lv_volume, rv_volume = cavity_volumes(self)
        if not rv_volume > lv_volume:
            raise InvalidParams("RV cavity (%.0f mm3) must be larger than the LV cavity (%.0f mm3)"
                                % (rv_volume, lv_volume))
        return self

    @classmethod
    def sample(cls, rng, base=None, max_draws=50, **overrides):
        """
        Random valid parameters around `base`: one common scale in [0.9, 1.1] times
        an independent +-4% jitter per length.
        """
        base = cls(**overrides) if base is None else replace(base, **overrides)
        for _ in range(max_draws):
            scale = rng.uniform(0.9, 1.1)

            def jitter(value):
                return float(value * scale * (1.0 + rng.uniform(-0.04, 0.04)))

            values = {name: jitter(getattr(base, name)) for name in cls._LENGTHS}
            values["rv_axes"] = tuple(jitter(a) for a in base.rv_axes)
            for name in VALVE_NAMES:
                x, y, r = getattr(base, name)
                values[name] = (jitter(x), jitter(y), jitter(r))
            values["seed"] = int(rng.integers(0, 2 ** 31 - 1))
            candidate = replace(base, **values)
            try:
                return candidate.validate()
            except InvalidParams as e:
                logger.debug("rejected phantom draw: %s", e)
        raise InvalidParams("no valid phantom parameters after %d draws" % max_draws)


def _ellipsoid(points, centre, axes):
    """Approximate signed distance to an ellipsoid, negative inside."""
    axes = np.broadcast_to(np.asarray(axes, dtype=float), points.shape)
    q = (points - centre) / axes
    k0 = np.sqrt(np.sum(q * q, axis=1))
    k1 = np.sqrt(np.sum((q / axes) ** 2, axis=1))
    d = np.empty(points.shape[0])
    ok = k1 > 0
    d[ok] = k0[ok] * (k0[ok] - 1.0) / k1[ok]
    d[~ok] = -axes[~ok].min(axis=1)
    return d


def _domed(points, centre, axes, dome):
    """Ellipsoid whose upper half (z above the centre) has semi-axis `dome` along z."""
    axes = np.tile(np.asarray(axes, dtype=float), (points.shape[0], 1))
    axes[points[:, 2] > centre[2], 2] = dome
    return _ellipsoid(points, centre, axes)


def _cylinder(points, centre_xy, radius, z0, z1):
    rho = np.hypot(points[:, 0] - centre_xy[0], points[:, 1] - centre_xy[1])
    return np.maximum.reduce((rho - radius, z0 - points[:, 2], points[:, 2] - z1))


def _cylinder_wall(points, centre_xy, radius, z0, z1):
    rho = np.hypot(points[:, 0] - centre_xy[0], points[:, 1] - centre_xy[1])
    d = np.abs(rho - radius)
    d[(points[:, 2] < z0) | (points[:, 2] > z1)] = _FAR
    return d


def _disc(points, centre_xy, radius, z):
    rho = np.hypot(points[:, 0] - centre_xy[0], points[:, 1] - centre_xy[1])
    d = np.abs(points[:, 2] - z)
    d[rho > radius] = _FAR
    return d


def cavity_volumes(params, spacing=2.0):
    """Grid estimate of the (LV, RV) cavity volumes below the base."""
    lo = np.array([-(params.lv_radius + params.lv_wall), -params.rv_axes[1], -params.lv_length])
    hi = np.array([params.rv_offset + params.rv_axes[0], params.rv_axes[1], 0.0])
    axes = [np.arange(l + 0.5 * spacing, h, spacing) for l, h in zip(lo, hi)]
    points = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    lv = _ellipsoid(points, np.zeros(3), params.lv_endo_axes) < 0
    rv = ((_ellipsoid(points, params.rv_centre, params.rv_inner_axes) < 0)
          & (_ellipsoid(points, np.zeros(3), params.lv_epi_axes) > 0))
    cell = spacing ** 3
    return float(lv.sum() * cell), float(rv.sum() * cell)


class PhantomGeometry:
    """
    Analytic description of one phantom kind: the signed solid field used for
    extraction plus the oracles (face labels, transmural and apicobasal values).
    """

    def __init__(self, params, kind):
        if kind not in KINDS:
            raise ValueError("Unknown phantom kind %r, expected one of %s" % (kind, KINDS))
        self.params = params
        self.kind = kind
        tilt = np.deg2rad(params.cut_tilt)
        self.cut_normal = np.array([0.0, -np.sin(tilt), np.cos(tilt)])
        self.cut_origin = np.array([0.0, 0.0, params.cut_height])
        self.valve_top = max(params.lv_roof, params.rv_roof) + 1.0

    # primitives
    def lv_endo(self, p):
        return _ellipsoid(p, np.zeros(3), self.params.lv_endo_axes)

    def lv_epi(self, p):
        return _ellipsoid(p, np.zeros(3), self.params.lv_epi_axes)

    def rv_inner(self, p):
        if self.kind == "closed":
            return _domed(p, self.params.rv_centre, self.params.rv_inner_axes, self.params.dome_height)
        return _ellipsoid(p, self.params.rv_centre, self.params.rv_inner_axes)

    def rv_outer(self, p):
        return _ellipsoid(p, self.params.rv_centre, self.params.rv_outer_axes)

    def lv_dome(self, p):
        return _domed(p, np.zeros(3), self.params.lv_endo_axes, self.params.dome_height)

    def cut_plane(self, p):
        return (p - self.cut_origin) @ self.cut_normal

    def _valve_cylinder(self, p, name, z0, z1):
        c, r = self.params.valve(name)
        return _cylinder(p, c, r, z0, z1)

    def lv_cavity(self, p):
        pr = self.params
        z = p[:, 2]
        if self.kind == "full":
            return np.maximum(self.lv_endo(p), z)
        if self.kind == "closed":
            chimneys = [self._valve_cylinder(p, n, -1.0, pr.lid_height) for n in LV_VALVE_NAMES]
            return np.minimum.reduce([self.lv_dome(p)] + chimneys)
        return self.lv_endo(p)

    def rv_cavity(self, p):
        pr = self.params
        z = p[:, 2]
        if self.kind == "full":
            return np.maximum.reduce((self.rv_inner(p), z, -self.lv_epi(p)))
        if self.kind == "closed":
            chimneys = [self._valve_cylinder(p, n, -1.0, pr.lid_height) for n in ("tricuspid", "pulmonary")]
            return np.maximum(np.minimum.reduce([self.rv_inner(p)] + chimneys), -self.lv_epi(p))
        return np.maximum(self.rv_inner(p), -self.lv_epi(p))

    def field(self, p):
        """Signed field of the myocardium, negative inside."""
        pr = self.params
        z = p[:, 2]
        holes = [self.lv_cavity(p), self.rv_cavity(p)]
        if self.kind == "full":
            outer = np.minimum(np.maximum(self.lv_epi(p), z - pr.lv_roof),
                               np.maximum(self.rv_outer(p), z - pr.rv_roof))
            holes += [self._valve_cylinder(p, n, -1.0, self.valve_top) for n in VALVE_NAMES]
        elif self.kind == "cut":
            outer = np.maximum(np.minimum(self.lv_epi(p), self.rv_outer(p)), self.cut_plane(p))
        elif self.kind == "closed":
            outer = np.maximum(np.minimum(self.lv_epi(p), self.rv_outer(p)), z - pr.closed_top)
        else:
            raise ValueError("open-surfaces phantoms have no solid field")
        return np.maximum(outer, -np.minimum.reduce(holes))

    def bounds(self):
        pr = self.params
        lo = np.array([-pr.lv_epi_axes[0],
                       -max(pr.lv_epi_axes[1], pr.rv_outer_axes[1]),
                       -max(pr.lv_epi_axes[2], pr.rv_outer_axes[2])])
        hi = np.array([pr.rv_offset + pr.rv_outer_axes[0], -lo[1], 0.0])
        if self.kind == "full":
            hi[2] = max(pr.lv_roof, pr.rv_roof)
        elif self.kind == "closed":
            hi[2] = pr.closed_top
        else:
            reach = abs(np.tan(np.deg2rad(pr.cut_tilt))) * hi[1]
            hi[2] = min(pr.cut_height + reach, pr.lv_epi_axes[2])
        return lo - PADDING, hi + PADDING

    # oracles
    def face_labels(self, centroids):
        """Label of the analytic surface nearest to each face centroid."""
        p = np.asarray(centroids, dtype=float)
        pr = self.params
        z = p[:, 2]
        rho_lv = np.hypot(p[:, 0], p[:, 1])
        candidates = []

        in_rv = self.rv_inner(p) < 0
        if self.kind == "full":
            in_rv &= z < 0
        septal = np.where(in_rv, int(SurfaceLabel.EndoRVSeptal), int(SurfaceLabel.Epicardium))
        candidates.append((np.abs(self.lv_epi(p)), septal))
        candidates.append((np.abs(self.rv_outer(p)), int(SurfaceLabel.Epicardium)))
        candidates.append((np.abs(self.rv_inner(p)), int(SurfaceLabel.EndoRV)))

        if self.kind == "closed":
            candidates.append((np.abs(self.lv_dome(p)), int(SurfaceLabel.EndoLV)))
            candidates.append((np.abs(z - pr.closed_top), int(SurfaceLabel.Epicardium)))
            for name in VALVE_NAMES:
                c, r = pr.valve(name)
                wall = int(SurfaceLabel.EndoLV) if name in LV_VALVE_NAMES else int(SurfaceLabel.EndoRV)
                candidates.append((_cylinder_wall(p, c, r, -1.0, pr.lid_height), wall))
                candidates.append((_disc(p, c, r, pr.lid_height), int(VALVE_LABELS[name])))
        else:
            candidates.append((np.abs(self.lv_endo(p)), int(SurfaceLabel.EndoLV)))

        if self.kind == "full":
            ceiling = np.where(rho_lv < pr.lv_radius + 0.5 * pr.lv_wall,
                               int(SurfaceLabel.EndoLV), int(SurfaceLabel.EndoRV))
            candidates.append((np.abs(z), ceiling))
            candidates.append((np.abs(z - pr.lv_roof), int(SurfaceLabel.Epicardium)))
            candidates.append((np.abs(z - pr.rv_roof), int(SurfaceLabel.Epicardium)))
            for name in VALVE_NAMES:
                c, r = pr.valve(name)
                candidates.append((_cylinder_wall(p, c, r, 0.0, self.valve_top), int(VALVE_LABELS[name])))
        if self.kind == "cut":
            candidates.append((np.abs(self.cut_plane(p)), int(SurfaceLabel.BasalPlane)))

        dist = np.stack([np.broadcast_to(d, z.shape) for d, _ in candidates], axis=1)
        labels = np.stack([np.broadcast_to(l, z.shape) for _, l in candidates], axis=1)
        best = np.argmin(dist, axis=1)
        return labels[np.arange(p.shape[0]), best].astype(np.int64)

    def transmural(self, points, iterations=60):
        """Wall fraction between the endocardial (0) and epicardial (1) ellipsoid families."""
        p = np.asarray(points, dtype=float).reshape(-1, 3)
        pr = self.params
        lv = _shell_fraction(p, np.zeros(3), pr.lv_endo_axes, pr.lv_epi_axes, iterations)
        rv = _shell_fraction(p, pr.rv_centre, pr.rv_inner_axes, pr.rv_outer_axes, iterations)
        outside_lv = self.lv_epi(p) > 0
        return np.where(outside_lv, rv, lv)

    @property
    def base_height(self):
        return self.params.cut_height if self.kind == "cut" else 0.0

    def apicobasal(self, points):
        p = np.asarray(points, dtype=float).reshape(-1, 3)
        z_apex = -self.params.lv_length
        return np.clip((p[:, 2] - z_apex) / (self.base_height - z_apex), 0.0, 1.0)

    @property
    def lv_apex(self):
        return np.array([0.0, 0.0, -self.params.lv_length])

    @property
    def rv_apex(self):
        return self.params.rv_centre - np.array([0.0, 0.0, self.params.rv_axes[2]])


def _shell_fraction(p, centre, inner, outer, iterations):
    """lambda in [0, 1] such that p lies on the ellipsoid with axes inner + lambda (outer - inner)."""
    q = p - centre

    def level(lam):
        axes = inner + lam[:, None] * (outer - inner)
        return np.sqrt(np.sum((q / axes) ** 2, axis=1)) - 1.0

    n = p.shape[0]
    lo = np.zeros(n)
    hi = np.ones(n)
    out = np.empty(n)
    below = level(lo) <= 0
    above = level(hi) >= 0
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        outside = level(mid) > 0
        lo = np.where(outside, mid, lo)
        hi = np.where(outside, hi, mid)
    out[:] = 0.5 * (lo + hi)
    out[below] = 0.0
    out[above] = 1.0
    return out


@dataclass
class Phantom:
    """A generated phantom: the surface (or open patches) with its analytic oracle."""
    kind: str
    params: PhantomParams
    geometry: PhantomGeometry
    surface: Optional[SurfaceMesh] = None
    labels: Optional[LabelMap] = None
    surfaces: Dict[str, SurfaceMesh] = field(default_factory=dict)

    def valve_centroids(self):
        if self.labels is None:
            return {}
        return {name: self.labels.label_centroid(VALVE_LABELS[name]) for name in VALVE_NAMES
                if self.labels.label_area(VALVE_LABELS[name]) > 0}

    def transmural(self, points):
        return self.geometry.transmural(points)

    def apicobasal(self, points):
        return self.geometry.apicobasal(points)

    @property
    def lv_apex(self):
        return self.geometry.lv_apex

    @property
    def rv_apex(self):
        return self.geometry.rv_apex

    def true_labels(self, mesh):
        """Oracle labels for the faces of any mesh of this anatomy (e.g. a perturbed or remeshed copy)."""
        return self.geometry.face_labels(mesh.face_centroids)


def extract_surface(field_fn, lo, hi, spacing, n_shells=1):
    """
    Marching-cubes boundary of {field < 0} on a grid shifted off the primitive planes,
    welded, keeping the `n_shells` largest components, oriented outward.
    """
    origin = lo + GRID_OFFSET * spacing
    shape = np.ceil((hi - origin) / spacing).astype(int) + 1
    axes = [origin[i] + spacing * np.arange(shape[i]) for i in range(3)]
    points = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    volume = field_fn(points).reshape(shape)
    verts, faces, _, _ = measure.marching_cubes(volume, level=0.0, spacing=(spacing,) * 3,
                                                method="lewiner", allow_degenerate=False)
    verts = verts.astype(np.float64) + origin
    vertices, faces, _, _ = weld_vertices(verts, faces.astype(np.int64))
    mesh = SurfaceMesh(vertices, faces)
    if np.any(mesh.degenerate_faces):
        mesh = mesh.subset(~mesh.degenerate_faces)[0]

    n, comp = face_components(mesh)
    if n > n_shells:
        sizes = np.bincount(comp, minlength=n)
        keep = np.argsort(-sizes, kind="stable")[:n_shells]
        logger.debug("dropping %d small surface components (%d faces)", n - n_shells,
                     int(sizes.sum() - sizes[keep].sum()))
        mesh = mesh.subset(np.isin(comp, keep))[0]
    return orient_consistently(mesh)


def _ellipsoid_patch(centre, axes, spacing, outward):
    """UV patch of the ellipsoid below its equator (z <= centre), apex closed by a fan."""
    axes = np.asarray(axes, dtype=float)
    n_phi = max(16, int(np.ceil(2 * np.pi * max(axes[0], axes[1]) / spacing)))
    n_theta = max(8, int(np.ceil(0.5 * np.pi * axes[2] / spacing)))
    theta = np.linspace(0.5 * np.pi, np.pi, n_theta + 1)[:-1]
    phi = np.linspace(0.0, 2 * np.pi, n_phi, endpoint=False)
    t, f = np.meshgrid(theta, phi, indexing="ij")
    ring = np.stack((axes[0] * np.sin(t) * np.cos(f), axes[1] * np.sin(t) * np.sin(f), axes[2] * np.cos(t)),
                    axis=-1).reshape(-1, 3)
    vertices = np.vstack((ring, [[0.0, 0.0, -axes[2]]])) + centre
    apex = vertices.shape[0] - 1

    idx = np.arange(n_theta * n_phi).reshape(n_theta, n_phi)
    nxt = np.roll(idx, -1, axis=1)
    a, b, c, d = idx[:-1], nxt[:-1], nxt[1:], idx[1:]
    quads = np.concatenate((np.stack((a, d, c), axis=-1).reshape(-1, 3),
                            np.stack((a, c, b), axis=-1).reshape(-1, 3)))
    fan = np.stack((idx[-1], np.full(n_phi, apex), nxt[-1]), axis=1)
    mesh = SurfaceMesh(vertices, np.concatenate((quads, fan)))
    radial = mesh.face_centroids - centre
    points_out = np.sum(mesh.face_normals * radial, axis=1).mean() > 0
    return mesh if points_out == outward else mesh.flipped()


def make_phantom(params=None, kind="full"):
    """
    Builds a phantom of the given kind with its oracle.
    Output:
        - phantom (Phantom): `surface` and oracle `labels` for full/cut/closed,
          `surfaces` {"lv_endo", "lv_epi", "rv_endo"} for open-surfaces
    """
    if kind not in KINDS:
        raise ValueError("Unknown phantom kind %r, expected one of %s" % (kind, KINDS))
    params = PhantomParams() if params is None else params
    params.validate()
    geometry = PhantomGeometry(params, kind)

    if kind == "open-surfaces":
        rv_axes = params.lv_epi_axes + params.open_gap
        surfaces = {
            "lv_endo": _ellipsoid_patch(np.zeros(3), params.lv_endo_axes, params.resolution, outward=False),
            "lv_epi": _ellipsoid_patch(np.zeros(3), params.lv_epi_axes, params.resolution, outward=True),
            "rv_endo": _ellipsoid_patch(np.zeros(3), rv_axes, params.resolution, outward=False),
        }
        return Phantom(kind=kind, params=params, geometry=geometry, surfaces=surfaces)

    lo, hi = geometry.bounds()
    n_shells = 3 if kind == "closed" else 1
    surface = extract_surface(geometry.field, lo, hi, params.resolution, n_shells=n_shells)
    face_labels = geometry.face_labels(surface.face_centroids)
    apex_lv = int(np.argmin(np.linalg.norm(surface.vertices - geometry.lv_apex, axis=1)))
    endo_rv = np.unique(surface.faces[np.isin(face_labels, [int(SurfaceLabel.EndoRV),
                                                           int(SurfaceLabel.EndoRVSeptal)])])
    apex_rv = None
    if endo_rv.size:
        apex_rv = int(endo_rv[np.argmin(np.linalg.norm(surface.vertices[endo_rv] - geometry.rv_apex, axis=1))])
    labels = LabelMap(surface, face_labels, apex_lv, apex_rv,
                      kind="cut" if kind == "cut" else "biventricular")
    logger.info("%s phantom: %d vertices, %d faces", kind, surface.n_vertices, surface.n_faces)
    return Phantom(kind=kind, params=params, geometry=geometry, surface=surface, labels=labels)
