'''
use this methods for assertion
self.assertEqual(a, b)          a == b
self.assertTrue(x)              bool(x) is True
self.assertFalse(x)             bool(x) is False
self.assertIs(a, b)             a is b
self.assertIsNone(x)            x is None
self.assertIn(a, b)             a in b
self.assertIsInstance(a, b)     isinstance(a, b)
'''

import functools
import json
import math
import os
import shutil
import tempfile
import unittest
import warnings
from fractions import Fraction

import numpy as np
import pandas as pd
from scipy.spatial.transform import Rotation

from heart_cohorts import get_phantom
from heart_cohorts.bundle.activation import ActivationMap, template_activation, transfer_activation
from heart_cohorts.bundle.cell_types import CellType, assign_cell_types, endocardial_fast_layer
from heart_cohorts.bundle.electrodes import ELECTRODES, load_template, place_electrodes
from heart_cohorts.bundle.variability import drug_scenarios, hill_block, sample_variability
from heart_cohorts.bundle.writer import read_manifest, verify_bundle, write_bundle
from heart_cohorts.cli import main
from heart_cohorts.cohorts.cohort import ManifestCohort, PhantomCohort, read_manifest as read_cases, write_manifest
from heart_cohorts.config import AngleConfig, LabelConfig, PipelineConfig, VariabilitySpec
from heart_cohorts.errors import (BasalPlaneNotFound, ChecksumMismatch, ClusterSeparationFailed, ConfigError,
                                  DegenerateInput, EmptyBoundary, EmptySource, InvalidParams, InvalidRange,
                                  MaximumPrincipleViolated, MeshesDisjoint, MissingArtifact, MissingField, NotClosed,
                                  ParseError, PlaneBelowApex, SelfIntersectingOffset, UnresolvableDegenerate)
from heart_cohorts.fibres.fibres import generate_fibres, helical_angle, helical_angles, local_bases, rotate_about_axis
from heart_cohorts.fields.aha import aha_segment, aha_segments
from heart_cohorts.fields.boundary import NodeLabels
from heart_cohorts.fields.coordinates import CoordinateSet, artificial_basal_plane, coordinate_fields
from heart_cohorts.fields.laplace import DirichletSpec, bound_to_range, gradient, solve_laplace
from heart_cohorts.fields.standard import compute_standard_fields, mid_surface, projection_fields, septal_region
from heart_cohorts.geometry.hull import convex_hull
from heart_cohorts.geometry.mesh import (HEX, TET, SurfaceMesh, VolumeMesh, boundary_loops, enclosed_volume,
                                         merge_surfaces, validate_closed)
from heart_cohorts.geometry.quality import quality_report, scaled_jacobians
from heart_cohorts.labelling.biventricular import label_biventricular
from heart_cohorts.labelling.cut import basal_plane, label_cut_geometry
from heart_cohorts.labelling.labels import SURFACE_LABEL_FIELD, LabelMap, SurfaceLabel
from heart_cohorts.labelling.projection import project_labels
from heart_cohorts.labelling.smoothing import smooth_labels
from heart_cohorts.labelling.validation import FAIL, evaluate_labels, validate_labels
from heart_cohorts.mesh_build.assemble import assemble_closed_biventricular, fill_holes, offset_surface
from heart_cohorts.mesh_build.locate import INSIDE, NEAREST_FALLBACK, TetLocator, locate_point
from heart_cohorts.mesh_build.transfer import interpolate_fields
from heart_cohorts.mesh_build.voxelize import coarse_tet_mesh, voxelize
from heart_cohorts.phantoms.phantom import PhantomParams, make_phantom
from heart_cohorts.phantoms.structured import annulus_cylinder, box_bar, icosphere, open_tube, spherical_shell, \
    unit_cube_surface
from heart_cohorts.pipeline import run_batch, run_case
from heart_cohorts.rays.ray_engine import RayEngine, cast_ray, face_ray_stats, points_in_mesh


@functools.lru_cache(maxsize=None)
def _phantom(kind="full"):
    return make_phantom(PhantomParams(), kind)


@functools.lru_cache(maxsize=None)
def _phantom_fields(edge=2.0):
    phantom = _phantom("full")
    volume = coarse_tet_mesh(phantom.surface, edge)
    node_labels = NodeLabels(volume, phantom.labels)
    fields = compute_standard_fields(volume, phantom.labels, node_labels=node_labels)
    return phantom, volume, node_labels, fields


# seeded phantom draws labelled per kind; set HEART_COHORTS_DRAWS=20 for the full sweep
SEEDED_DRAWS = int(os.environ.get("HEART_COHORTS_DRAWS", "1"))


def check_label_accuracy(case, labels, phantom):
    table, results = evaluate_labels(labels, phantom.labels.face_labels)
    for _, row in table.iterrows():
        case.assertLess(row["mean_distance_mm"], 2.0, row["label"])
    case.assertGreater(results["agreement_avg"], 0.9)


def winding_numbers(mesh, points):
    """Generalised winding number of a closed triangle mesh (solid angle sum / 4 pi)."""
    tri = mesh.vertices[mesh.faces]
    out = np.zeros(len(points))
    for i, p in enumerate(points):
        a, b, c = tri[:, 0] - p, tri[:, 1] - p, tri[:, 2] - p
        la, lb, lc = (np.linalg.norm(v, axis=1) for v in (a, b, c))
        num = np.einsum("ij,ij->i", a, np.cross(b, c))
        den = la * lb * lc + np.einsum("ij,ij->i", a, b) * lc + np.einsum("ij,ij->i", b, c) * la \
            + np.einsum("ij,ij->i", c, a) * lb
        out[i] = np.sum(2.0 * np.arctan2(num, den)) / (4.0 * np.pi)
    return out


def point_triangle_distance(p, a, b, c):
    """Exact point-triangle distance, row by row: plane distance when the projection is inside, else edges."""
    n = np.cross(b - a, c - a)
    n /= np.linalg.norm(n, axis=1, keepdims=True)
    h = np.einsum("ij,ij->i", p - a, n)
    q = p - h[:, None] * n
    inside = np.ones(len(p), dtype=bool)
    for u, v in ((a, b), (b, c), (c, a)):
        inside &= np.einsum("ij,ij->i", np.cross(v - u, q - u), n) >= 0

    def segment(u, v):
        t = np.clip(np.einsum("ij,ij->i", p - u, v - u) / np.einsum("ij,ij->i", v - u, v - u), 0.0, 1.0)
        return np.linalg.norm(p - (u + t[:, None] * (v - u)), axis=1)

    edges = np.minimum(np.minimum(segment(a, b), segment(b, c)), segment(c, a))
    return np.where(inside, np.abs(h), edges)


def exact_tet_quality(corners):
    """Scaled Jacobian of one tetrahedron with integer corners: 6V exactly, edge products correctly rounded."""
    x = [[Fraction(int(v)) for v in row] for row in corners]

    def sub(p, q):
        return [p[k] - q[k] for k in range(3)]

    e1, e2, e3 = sub(x[1], x[0]), sub(x[2], x[0]), sub(x[3], x[0])
    det = (e1[0] * (e2[1] * e3[2] - e2[2] * e3[1]) - e1[1] * (e2[0] * e3[2] - e2[2] * e3[0])
           + e1[2] * (e2[0] * e3[1] - e2[1] * e3[0]))
    worst = 0.0
    for i in range(4):
        others = [j for j in range(4) if j != i]
        sq = [sum(d * d for d in sub(x[j], x[i])) for j in others]
        worst = max(worst, math.sqrt(int(sq[0] * sq[1] * sq[2])))
    return max(0.0, math.sqrt(2.0) * abs(float(det)) / worst) if det != 0 else 0.0


class ConfigTest(unittest.TestCase):

    def test_defaults(self):
        config = PipelineConfig().validate()
        self.assertEqual(config.resolution.coarse, 1.5)
        self.assertEqual(config.resolution.fine, 1.0)
        self.assertEqual(config.resolution.hex, 0.4)
        self.assertEqual(config.resolution.extrusion, 3.0)
        self.assertEqual(config.label.basal_angle, 30.0)
        self.assertEqual(config.resolution.simulation_mesh, "hex")

    def test_units_and_overrides(self):
        config = PipelineConfig.from_text(
            "mesh.coarse = 1500um  # micrometres\n"
            "mesh.hex = 0.04cm\n"
            "fields.transmural.EndoRVSeptal = 0.25\n"
            "fibres.alpha_endo_rv = 80\n"
            "variability.range.GKr = 0.8,1.2\n"
            "seed = 11\n")
        self.assertAlmostEqual(config.resolution.coarse, 1.5)
        self.assertAlmostEqual(config.resolution.hex, 0.4)
        self.assertEqual(config.solver.overrides("transmural"), {SurfaceLabel.EndoRVSeptal: 0.25})
        self.assertEqual(config.angles.region("rv"), (80.0, -60.0))
        self.assertEqual(config.variability.ranges["GKr"], (0.8, 1.2))
        self.assertEqual(config.seed, 11)

    def test_snapshot_round_trip(self):
        config = PipelineConfig.from_text("fields.septal.EndoLV = 0.1\nbundle.fast_layer = 2mm\n")
        again = PipelineConfig.from_text(config.snapshot())
        self.assertEqual(again.snapshot(), config.snapshot())

    def test_errors(self):
        with self.assertRaises(ConfigError) as ctx:
            PipelineConfig.from_text("mesh.coarse = 1\nno_such.key = 3\n")
        self.assertEqual(ctx.exception.report["line"], 2)
        with self.assertRaises(ConfigError):
            PipelineConfig.from_text("fibres.alpha_endo = 120\n")
        with self.assertRaises(ConfigError):
            PipelineConfig.from_text("mesh.simulation_mesh = prism\n")
        with self.assertRaises(InvalidRange):
            PipelineConfig.from_text("variability.range.GNa = 2.0,0.5\n")


class SurfaceMeshTest(unittest.TestCase):

    def test_cube(self):
        cube = unit_cube_surface()
        self.assertTrue(validate_closed(cube)["watertight"])
        self.assertAlmostEqual(enclosed_volume(cube), 1.0, places=12)
        self.assertAlmostEqual(cube.total_area, 6.0, places=12)

    def test_open_tube(self):
        tube = open_tube()
        report = validate_closed(tube)
        self.assertFalse(report["watertight"])
        self.assertEqual(len(boundary_loops(tube)), 2)
        with self.assertRaises(NotClosed):
            enclosed_volume(tube)

    def test_merge_welds(self):
        cube = unit_cube_surface()
        shifted = cube.transformed(translation=(1.0, 0.0, 0.0))
        merged = merge_surfaces([cube, shifted])
        self.assertEqual(merged.n_vertices, 12)
        self.assertEqual(merged.n_faces, 24)

    def test_vtk_round_trip(self):
        phantom = _phantom("full")
        folder = tempfile.mkdtemp()
        try:
            path = os.path.join(folder, "labels.vtk")
            phantom.labels.to_mesh().to_file(path)
            labels = LabelMap.from_mesh(SurfaceMesh.from_file(path))
            self.assertTrue(np.array_equal(labels.face_labels, phantom.labels.face_labels))
            self.assertEqual(labels.apex_lv, phantom.labels.apex_lv)
            self.assertEqual(labels.apex_rv, phantom.labels.apex_rv)
        finally:
            shutil.rmtree(folder)

    def test_parse_errors(self):
        folder = tempfile.mkdtemp()
        try:
            stl = os.path.join(folder, "short.stl")
            with open(stl, "wb") as f:
                f.write(b"\0" * 80 + np.array([2], dtype="<u4").tobytes() + b"\0" * 50)
            with self.assertRaises(ParseError) as ctx:
                SurfaceMesh.from_file(stl)
            self.assertEqual(ctx.exception.offset, 134)

            vtk = os.path.join(folder, "bad.vtk")
            with open(vtk, "w") as f:
                f.write("# vtk DataFile Version 3.0\nbad\nASCII\nDATASET POLYDATA\nPOINTS 3 float\n"
                        "0 0 0\n1 0 x\n0 1 0\nPOLYGONS 1 4\n3 0 1 2\n")
            with self.assertRaises(ParseError) as ctx:
                SurfaceMesh.from_file(vtk)
            self.assertIsNotNone(ctx.exception.line)
            self.assertIn("bad.vtk", str(ctx.exception))
        finally:
            shutil.rmtree(folder)

    def test_fill_holes(self):
        tube = open_tube()
        closed = fill_holes(tube, SurfaceLabel.ValveMitral)
        self.assertTrue(validate_closed(closed)["watertight"])
        self.assertEqual(closed.n_vertices, tube.n_vertices + 2)
        labels = closed.face_fields[SURFACE_LABEL_FIELD]
        self.assertTrue(np.all(labels[tube.n_faces:] == int(SurfaceLabel.ValveMitral)))
        self.assertTrue(np.all(labels[: tube.n_faces] == int(SurfaceLabel.Unassigned)))
        self.assertGreater(enclosed_volume(closed), 0.0)
        cube = unit_cube_surface()
        self.assertIs(fill_holes(cube), cube)

    def test_offset_surface(self):
        sphere = icosphere(radius=10.0, subdivisions=3)
        inner = offset_surface(sphere, 2.0)
        radius = np.linalg.norm(inner.vertices, axis=1)
        self.assertLess(np.max(np.abs(radius - 8.0)), 0.05)
        with self.assertRaises(SelfIntersectingOffset):
            offset_surface(sphere, 12.0)


class RayEngineTest(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.sphere = icosphere(radius=10.0, subdivisions=3)
        rng = np.random.default_rng(0)
        cls.origins = rng.uniform(-12.0, 12.0, size=(400, 3))
        cls.directions = rng.normal(size=(400, 3))

    def test_bvh_matches_brute_force(self):
        engine = RayEngine(self.sphere)
        fast = engine.cast_many(self.origins, self.directions)
        slow = engine.cast_many(self.origins, self.directions, brute_force=True)
        self.assertTrue(np.array_equal(fast.ray, slow.ray))
        self.assertTrue(np.array_equal(fast.face, slow.face))
        self.assertTrue(np.array_equal(fast.t, slow.t))

    def test_inside_matches_winding_number(self):
        inside = points_in_mesh(self.sphere, self.origins)
        oracle = np.abs(winding_numbers(self.sphere, self.origins)) > 0.5
        self.assertTrue(np.array_equal(inside, oracle))

    def test_cube_parity(self):
        rng = np.random.default_rng(1)
        points = rng.uniform(-0.5, 1.5, size=(500, 3))
        inside = points_in_mesh(unit_cube_surface(), points)
        self.assertTrue(np.array_equal(inside, np.all((points > 0) & (points < 1), axis=1)))

    def test_open_mesh_rejected(self):
        with self.assertRaises(NotClosed):
            points_in_mesh(open_tube(), np.zeros((1, 3)))

    def test_cast_ray_orders_hits(self):
        outer = icosphere(radius=20.0, subdivisions=3)
        direction = np.array([0.3, 0.5, 0.81])
        direction /= np.linalg.norm(direction)
        hits = cast_ray([self.sphere, outer], np.zeros(3), direction)
        self.assertEqual(len(hits), 2)
        self.assertLess(hits[0].face, self.sphere.n_faces)
        self.assertGreaterEqual(hits[1].face, self.sphere.n_faces)
        self.assertTrue(9.5 < hits[0].t <= 10.0)
        self.assertTrue(19.0 < hits[1].t <= 20.0)
        self.assertTrue(np.allclose(hits[0].point, hits[0].t * direction))
        again = cast_ray(self.sphere, np.zeros(3), direction, exclude_face=hits[0].face)
        self.assertEqual(len(again), 0)

    def test_convex_shell_exits_once(self):
        stats = face_ray_stats(self.sphere, convex_hull(self.sphere.vertices))
        self.assertTrue(np.all(stats.valid))
        self.assertTrue(np.all(stats.n_i == 1))
        self.assertLess(np.nanmax(stats.d_n_plus), 0.2)
        self.assertTrue(np.all(stats.f_plus >= self.sphere.n_faces))

    def test_concentric_shells(self):
        inner = icosphere(radius=20.0, subdivisions=3)
        mesh = merge_surfaces([inner, icosphere(radius=30.0, subdivisions=3)])
        stats = face_ray_stats(mesh, convex_hull(mesh.vertices))
        gap = stats.d_n_plus[: inner.n_faces]
        self.assertLess(np.max(np.abs(gap - 10.0)), 0.5)
        self.assertTrue(np.all(stats.n_i[: inner.n_faces] == 2))
        self.assertTrue(np.all(stats.n_i[inner.n_faces:] == 1))

    def test_face_subset(self):
        stats = face_ray_stats(self.sphere, convex_hull(self.sphere.vertices), faces=[0, 5])
        self.assertEqual(np.flatnonzero(stats.valid).tolist(), [0, 5])
        self.assertTrue(np.all(np.isnan(stats.d_n_plus[~stats.valid])))


class HullTest(unittest.TestCase):

    def test_cube_with_interior_points(self):
        rng = np.random.default_rng(4)
        corners = np.array([[x, y, z] for x in (0, 1) for y in (0, 1) for z in (0, 1)], dtype=float)
        points = np.vstack((rng.uniform(0.1, 0.9, size=(200, 3)), corners))
        hull = convex_hull(points)
        self.assertEqual(hull.n_vertices, 8)
        self.assertEqual(hull.n_faces, 12)
        self.assertTrue(validate_closed(hull)["watertight"])
        self.assertAlmostEqual(enclosed_volume(hull), 1.0, places=12)
        again = convex_hull(hull.vertices)
        self.assertEqual(again.n_faces, hull.n_faces)
        self.assertAlmostEqual(enclosed_volume(again), 1.0, places=12)

    def test_large_point_set(self):
        rng = np.random.default_rng(6)
        points = rng.normal(size=(300000, 3))
        hull = convex_hull(points)
        self.assertTrue(validate_closed(hull)["watertight"])
        self.assertGreater(hull.n_faces, 1000)
        self.assertTrue(np.all(points_in_mesh(hull, 0.9 * points[:2000])))

    def test_degenerate(self):
        with self.assertRaises(DegenerateInput):
            convex_hull(np.zeros((3, 3)))
        flat = np.random.default_rng(0).uniform(size=(50, 3))
        flat[:, 2] = 0.0
        with self.assertRaises(DegenerateInput):
            convex_hull(flat)


class QualityTest(unittest.TestCase):

    def test_regular_tet(self):
        regular = np.array([[0, 0, 0], [1, 0, 0], [0.5, np.sqrt(3) / 2, 0],
                            [0.5, np.sqrt(3) / 6, np.sqrt(2.0 / 3.0)]])
        self.assertAlmostEqual(scaled_jacobians(regular, [[0, 1, 2, 3]])[0], 1.0, places=12)

    def test_exact_oracle(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            corners = rng.integers(-20, 21, size=(4, 3))
            mesh = VolumeMesh(corners, [[0, 1, 2, 3]], TET, reorient=True)
            expected = exact_tet_quality(mesh.nodes[mesh.elements[0]])
            self.assertAlmostEqual(scaled_jacobians(mesh.nodes, mesh.elements)[0], expected, delta=1e-12)

    def test_inverted_scores_zero(self):
        nodes = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]], dtype=float)
        self.assertEqual(scaled_jacobians(nodes, [[0, 2, 1, 3]])[0], 0.0)

    def test_inverted_element_reported(self):
        nodes = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]], dtype=float)
        mesh = VolumeMesh(nodes, [[0, 1, 2, 3], [0, 2, 1, 3]], TET)
        self.assertEqual(mesh.elements[1].tolist(), [0, 2, 1, 3])
        folder = tempfile.mkdtemp()
        try:
            path = os.path.join(folder, "inverted.vtk")
            mesh.to_file(path)
            for m in (mesh, VolumeMesh.from_file(path)):
                report = quality_report(m)
                self.assertEqual(report["min"], 0.0)
                self.assertEqual(report["argmin"], 1)
                self.assertEqual(report["n_inverted"], 1)
                self.assertGreater(report["max"], 0.5)
        finally:
            shutil.rmtree(folder)

    def test_voxels_are_perfect(self):
        mesh = voxelize(icosphere(radius=6.0, subdivisions=2), 1.0)
        report = quality_report(mesh)
        self.assertEqual(report["kind"], HEX)
        self.assertAlmostEqual(report["min"], 1.0, places=12)
        self.assertAlmostEqual(report["max"], 1.0, places=12)
        self.assertEqual(report["n_inverted"], 0)
        self.assertEqual(sum(report["histogram"]), mesh.n_elements)

    def test_phantom_tets_in_range(self):
        report = quality_report(coarse_tet_mesh(icosphere(radius=8.0, subdivisions=2), 2.0))
        self.assertGreater(report["min"], 0.0)
        self.assertLessEqual(report["max"], 1.0)


class VoxelLocateTest(unittest.TestCase):

    def test_voxel_volume(self):
        mesh = voxelize(icosphere(radius=10.0, subdivisions=4), 0.5)
        volume = mesh.element_volumes().sum()
        self.assertLess(abs(volume - 4.0 / 3.0 * np.pi * 1000.0) / volume, 0.03)

    def test_voxelize_rejects_open(self):
        with self.assertRaises(NotClosed):
            voxelize(open_tube(), 1.0)

    def test_affine_transfer_exact(self):
        coarse = box_bar(6.0, 3.0, 3.0, n=(3, 3, 3))
        fine = box_bar(6.0, 3.0, 3.0, n=(7, 5, 4))

        def affine(x):
            return 2.0 * x[:, 0] - 3.0 * x[:, 1] + x[:, 2] + 5.0

        source = coarse.with_fields(node_fields={"f": affine(coarse.nodes)})
        values, report = interpolate_fields(source, fine.nodes)
        self.assertEqual(report["n_fallback"], 0)
        self.assertLessEqual(np.max(np.abs(values["f"] - affine(fine.nodes))), 1e-12)

    def test_quadratic_transfer_order(self):
        rng = np.random.default_rng(5)
        points = rng.uniform(0.05, 0.95, size=(400, 3))
        errors = []
        for k in (4, 8, 16):
            mesh = box_bar(1.0, 1.0, 1.0, n=(k, k, k))
            source = mesh.with_fields(node_fields={"f": np.sum(mesh.nodes ** 2, axis=1)})
            values, _ = interpolate_fields(source, points)
            errors.append(np.max(np.abs(values["f"] - np.sum(points ** 2, axis=1))))
        self.assertGreater(errors[0] / errors[1], 3.0)
        self.assertGreater(errors[1] / errors[2], 3.0)

    def test_outside_points_fall_back(self):
        mesh = box_bar(2.0, 2.0, 2.0, n=(2, 2, 2))
        located = TetLocator(mesh).locate(np.array([[1.0, 1.0, 1.0], [5.0, 1.0, 1.0]]))
        self.assertEqual(located.n_fallback, 1)
        self.assertTrue(located.inside[0])
        self.assertAlmostEqual(located.weights[1].sum(), 1.0)

    def test_locate_point(self):
        mesh = box_bar(2.0, 2.0, 2.0, n=(2, 2, 2))
        p = np.array([0.3, 0.7, 1.1])
        location = locate_point(mesh, p)
        self.assertEqual(location.containment, INSIDE)
        weights = np.array(location.weights)
        self.assertTrue(np.all(weights >= -1e-12))
        self.assertAlmostEqual(weights.sum(), 1.0, places=12)
        self.assertLess(np.max(np.abs(weights @ mesh.nodes[mesh.elements[location.element]] - p)), 1e-12)
        self.assertEqual(locate_point(mesh, (3.0, 1.0, 1.0)).containment, NEAREST_FALLBACK)


class LaplaceTest(unittest.TestCase):

    def test_bar_is_linear(self):
        mesh = box_bar(10.0, 2.0, 2.0, n=(10, 2, 2))
        x = mesh.nodes[:, 0]
        bc = DirichletSpec([("left", np.flatnonzero(x == 0.0), 0.0), ("right", np.flatnonzero(x == 10.0), 1.0)])
        field = solve_laplace(mesh, bc)
        self.assertLess(np.max(np.abs(field.values - x / 10.0)), 1e-8)
        self.assertTrue(np.all((field.values >= 0.0) & (field.values <= 1.0)))

    def test_shell_converges(self):
        errors = []
        for n in (8, 12, 16):
            mesh = spherical_shell(5.0, 10.0, n)
            r = np.linalg.norm(mesh.nodes, axis=1)
            bc = DirichletSpec([("inner", np.flatnonzero(np.abs(r - 5.0) < 1e-9), 0.0),
                                ("outer", np.flatnonzero(np.abs(r - 10.0) < 1e-9), 1.0)])
            field = solve_laplace(mesh, bc)
            exact = (1.0 / 5.0 - 1.0 / r) / (1.0 / 5.0 - 1.0 / 10.0)
            errors.append(np.max(np.abs(field.values - exact)))
            self.assertGreaterEqual(field.values.min(), 0.0)
            self.assertLessEqual(field.values.max(), 1.0)
        self.assertGreater(errors[0], errors[1])
        self.assertGreater(errors[1], errors[2])
        self.assertGreater(np.log(errors[1] / errors[2]) / np.log(16.0 / 12.0), 1.5)

    def test_floating_component_undefined(self):
        a = box_bar(2.0, 1.0, 1.0, n=(2, 1, 1))
        b = a.transformed(translation=(10.0, 0.0, 0.0))
        mesh = VolumeMesh(np.vstack((a.nodes, b.nodes)), np.vstack((a.elements, b.elements + a.n_nodes)), TET)
        x = mesh.nodes[:, 0]
        bc = DirichletSpec([("left", np.flatnonzero(x == 0.0), 0.0), ("right", np.flatnonzero(x == 2.0), 1.0)])
        field = solve_laplace(mesh, bc)
        self.assertTrue(np.all(field.defined[: a.n_nodes]))
        self.assertFalse(np.any(field.defined[a.n_nodes:]))

    def test_empty_boundary(self):
        mesh = box_bar()
        with self.assertRaises(EmptyBoundary):
            solve_laplace(mesh, DirichletSpec())
        with self.assertRaises(EmptyBoundary):
            solve_laplace(mesh, DirichletSpec([("none", [], 0.0), ("left", [0], 1.0)]))

    def test_overlapping_sets(self):
        with self.assertRaises(ValueError):
            DirichletSpec([("a", [0, 1], 0.0), ("b", [1, 2], 1.0)])

    def test_gradient_of_affine_field(self):
        mesh = box_bar(10.0, 2.0, 2.0, n=(10, 2, 2))
        values = 2.0 * mesh.nodes[:, 0] - 3.0 * mesh.nodes[:, 1] + mesh.nodes[:, 2]
        grads = gradient(mesh, values)
        self.assertEqual(grads.shape, (mesh.n_elements, 3))
        self.assertLess(np.max(np.abs(grads - [2.0, -3.0, 1.0])), 1e-10)

    def test_range_asserted(self):
        values, rounded = bound_to_range(np.array([0.0, 0.5, 1.0 + 1e-12, -1e-13]), 0.0, 1.0)
        self.assertEqual(values.tolist(), [0.0, 0.5, 1.0, 0.0])
        self.assertEqual(rounded, 2)
        with self.assertRaises(MaximumPrincipleViolated) as ctx:
            bound_to_range(np.array([0.2, 1.1, -0.3]), 0.0, 1.0, name="transmural")
        self.assertEqual(ctx.exception.report["nodes"], [1, 2])
        self.assertAlmostEqual(ctx.exception.report["worst"], 0.3)
        ignored = np.array([False, True, True])
        values, rounded = bound_to_range(np.array([0.2, 1.1, -0.3]), 0.0, 1.0, ignore=ignored)
        self.assertEqual(values[0], 0.2)
        self.assertEqual(rounded, 0)


class LabellingTest(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.full = _phantom("full")
        cls.cut = _phantom("cut")
        cls.full_labels = label_biventricular(cls.full.surface)
        cls.cut_labels = label_cut_geometry(cls.cut.surface)

    def test_full_accuracy(self):
        check_label_accuracy(self, self.full_labels, self.full)

    def test_cut_accuracy(self):
        check_label_accuracy(self, self.cut_labels, self.cut)
        self.assertGreater(self.cut_labels.faces_of(SurfaceLabel.BasalPlane).size, 0)
        self.assertTrue(np.all(np.isfinite(self.cut_labels.label_centroid(SurfaceLabel.BasalPlane))))

    def test_rigid_motion(self):
        rotation = Rotation.from_euler("xyz", [35.0, -60.0, 15.0], degrees=True).as_matrix()
        moved = label_biventricular(self.full.surface.transformed(rotation, (40.0, -15.0, 7.0)))
        agreement = np.mean(moved.face_labels == self.full_labels.face_labels)
        self.assertGreater(agreement, 0.99)
        apex = self.full.surface.vertices[self.full_labels.apex_lv] @ rotation.T + (40.0, -15.0, 7.0)
        self.assertLess(np.linalg.norm(moved.mesh.vertices[moved.apex_lv] - apex), 2.0)

    def test_tilted_lid(self):
        mild = make_phantom(PhantomParams(cut_tilt=10.0), "cut")
        labels = label_cut_geometry(mild.surface)
        self.assertGreater(labels.faces_of(SurfaceLabel.BasalPlane).size, 0)
        steep = make_phantom(PhantomParams(cut_tilt=45.0), "cut")
        with self.assertRaises(BasalPlaneNotFound):
            label_cut_geometry(steep.surface)

    def test_basal_plane_needs_rim(self):
        # the lid separates every cavity from the epicardium, so no rim band exists
        with self.assertRaises(BasalPlaneNotFound):
            basal_plane(self.cut.surface, self.cut.labels.face_labels, LabelConfig())

    def test_sphere_has_no_cavities(self):
        with self.assertRaises(ClusterSeparationFailed):
            label_cut_geometry(icosphere(radius=10.0, subdivisions=3))

    def test_apices(self):
        for labels, phantom in ((self.full_labels, self.full), (self.cut_labels, self.cut)):
            apex = labels.mesh.vertices[labels.apex_lv]
            self.assertLess(np.linalg.norm(apex - phantom.lv_apex), 5.0)
            self.assertIsNotNone(labels.apex_rv)

    def test_validation(self):
        self.assertNotEqual(validate_labels(self.full_labels).status, FAIL)
        self.assertNotEqual(validate_labels(self.cut_labels).status, FAIL)
        summary = self.full_labels.summary()
        self.assertIn("ValveMitral", set(summary["label"]))
        self.assertAlmostEqual(summary["area_mm2"].sum(), self.full.surface.total_area, places=6)

    def test_every_face_labelled(self):
        self.assertFalse(np.any(self.full_labels.face_labels == int(SurfaceLabel.Unassigned)))


class SeededPhantomTest(unittest.TestCase):

    def test_seeded_draws(self):
        for i in range(SEEDED_DRAWS):
            params = PhantomParams.sample(np.random.default_rng(i))
            for kind, labeller in (("full", label_biventricular), ("cut", label_cut_geometry)):
                with self.subTest(draw=i, kind=kind):
                    phantom = make_phantom(params, kind)
                    labels = labeller(phantom.surface)
                    check_label_accuracy(self, labels, phantom)
                    self.assertNotEqual(validate_labels(labels).status, FAIL)
                    if kind == "cut":
                        self.assertGreater(labels.faces_of(SurfaceLabel.BasalPlane).size, 0)


class LabelOpsTest(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.sphere = icosphere(radius=10.0, subdivisions=3)
        graph = cls.sphere.adjacency_graph
        labels = np.full(cls.sphere.n_faces, int(SurfaceLabel.EndoLV), dtype=np.int64)
        # single faces and adjacent pairs of Epicardium, far apart from each other
        for k, axis in enumerate(np.vstack((np.eye(3), -np.eye(3)))):
            face = int(np.argmax(cls.sphere.face_centroids @ axis))
            labels[face] = int(SurfaceLabel.Epicardium)
            if k < 3:
                labels[graph.indices[graph.indptr[face]]] = int(SurfaceLabel.Epicardium)
        cls.noisy = labels

    def test_islands_absorbed(self):
        smoothed = smooth_labels(LabelMap(self.sphere, self.noisy))
        self.assertTrue(np.all(smoothed.face_labels == int(SurfaceLabel.EndoLV)))
        stuck = smooth_labels(LabelMap(self.sphere, self.noisy), max_iters=0)
        self.assertTrue(np.array_equal(stuck.face_labels, self.noisy))

    def test_smoothing_independent_of_face_order(self):
        perm = np.random.default_rng(8).permutation(self.sphere.n_faces)
        shuffled = SurfaceMesh(self.sphere.vertices, self.sphere.faces[perm])
        a = smooth_labels(LabelMap(self.sphere, self.noisy), max_iters=1).face_labels
        b = smooth_labels(LabelMap(shuffled, self.noisy[perm]), max_iters=1).face_labels
        # after one round every single face is gone and each pair keeps exactly one face
        self.assertEqual(int(np.sum(a != int(SurfaceLabel.EndoLV))), 3)
        self.assertEqual(int(np.sum(b != int(SurfaceLabel.EndoLV))), 3)
        final_a = smooth_labels(LabelMap(self.sphere, self.noisy)).face_labels
        final_b = smooth_labels(LabelMap(shuffled, self.noisy[perm])).face_labels
        self.assertTrue(np.array_equal(final_b, final_a[perm]))

    def test_project_onto_same_surface(self):
        source = _phantom("full").labels
        projected = project_labels(source, source.mesh)
        self.assertTrue(np.array_equal(projected.face_labels, source.face_labels))
        self.assertEqual(projected.apex_lv, source.apex_lv)
        shifted = project_labels(source, source.mesh.transformed(translation=(0.05, 0.0, 0.0)))
        self.assertGreater(np.mean(shifted.face_labels == source.face_labels), 0.99)

    def test_project_disjoint(self):
        source = _phantom("full").labels
        with self.assertRaises(MeshesDisjoint) as ctx:
            project_labels(source, source.mesh.transformed(translation=(500.0, 0.0, 0.0)))
        self.assertEqual(ctx.exception.report["overlap"], 0.0)


class StandardFieldsTest(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.phantom, cls.volume, cls.node_labels, cls.fields = _phantom_fields()

    def test_catalogue(self):
        for name in ("longitudinal", "transmural", "transmural_rv", "transventricular", "septal",
                     "intraventricular_lv", "intraventricular_rv", "septal_region"):
            self.assertIn(name, self.fields)

    def test_maximum_principle(self):
        for name, field in self.fields.items():
            values = field.values[field.defined]
            self.assertGreaterEqual(values.min(), -1e-9, name)
            self.assertLessEqual(values.max(), 1.0 + 1e-9, name)

    def test_dirichlet_values(self):
        t = self.fields["transmural_raw"].values
        self.assertTrue(np.allclose(t[self.node_labels.nodes(SurfaceLabel.EndoLV)], 0.0))
        self.assertTrue(np.allclose(t[self.node_labels.nodes(SurfaceLabel.Epicardium)], 1.0))

    def test_septal_convention(self):
        region, d_lv, d_septal = septal_region(self.node_labels)
        edge = np.median(np.linalg.norm(np.diff(self.volume.nodes[self.volume.edges()], axis=1)[:, 0], axis=1))
        mid = mid_surface(region, d_lv, d_septal, 0.5 * edge)
        self.assertTrue(np.any(mid))
        self.assertAlmostEqual(np.median(self.fields["transmural"].values[mid]), 2.0 / 3.0, delta=0.05)
        self.assertAlmostEqual(np.median(self.fields["septal"].values[mid]), 2.0 / 3.0, delta=0.05)

    def test_transmural_against_analytic(self):
        x = self.volume.nodes
        # LV free wall, away from the RV and the valves
        nodes = np.flatnonzero((x[:, 0] < -20.0) & (x[:, 2] > -35.0) & (x[:, 2] < -10.0))
        self.assertGreater(nodes.size, 0)
        analytic = self.phantom.transmural(self.volume.nodes[nodes])
        self.assertLess(np.mean(np.abs(self.fields["transmural_raw"].values[nodes] - analytic)), 0.1)

    def test_projection_fields(self):
        fields, frame = projection_fields(self.volume, self.phantom.labels)
        for name in ("lv_to_rv", "posterior_to_anterior"):
            values = fields[name].values
            self.assertAlmostEqual(values.min(), 0.0, places=12)
            self.assertAlmostEqual(values.max(), 1.0, places=12)
        self.assertTrue(np.allclose(frame.matrix @ frame.matrix.T, np.eye(3), atol=1e-12))
        # the RV lies on the +x side of the phantom
        self.assertGreater(frame.lv_to_rv[0], 0.8)
        rotation = Rotation.from_euler("zyx", [30.0, 10.0, -45.0], degrees=True).as_matrix()
        labels = self.phantom.labels
        moved = LabelMap(labels.mesh.transformed(rotation), labels.face_labels, labels.apex_lv, labels.apex_rv,
                         labels.kind)
        again, _ = projection_fields(self.volume.transformed(rotation), moved)
        for name in ("lv_to_rv", "posterior_to_anterior"):
            self.assertLess(np.max(np.abs(again[name].values - fields[name].values)), 1e-8)


class CoordinatesTest(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.phantom, cls.volume, cls.node_labels, cls.fields = _phantom_fields()
        cls.coords = coordinate_fields(cls.volume, cls.phantom.labels, cls.fields, node_labels=cls.node_labels)

    def test_ranges(self):
        c = self.coords
        self.assertTrue(np.any(c.mask))
        for name in ("apicobasal", "transmural", "transventricular"):
            values = getattr(c, name)[c.mask]
            self.assertGreaterEqual(values.min(), 0.0, name)
            self.assertLessEqual(values.max(), 1.0, name)
        self.assertGreaterEqual(c.circumferential[c.mask].min(), 0.0)
        self.assertLess(c.circumferential[c.mask].max(), 1.0)
        self.assertTrue(np.all(np.isnan(c.apicobasal[~c.mask])))

    def test_basal_plane_below_pulmonary_valve(self):
        pulmonary = self.phantom.labels.label_centroid(SurfaceLabel.ValvePulmonary)
        self.assertAlmostEqual(self.coords.plane.signed_distance(pulmonary[None])[0], -10.0, places=9)

    def test_plane_below_apex(self):
        with self.assertRaises(PlaneBelowApex) as ctx:
            artificial_basal_plane(self.volume, self.phantom.labels, offset=200.0)
        self.assertLess(ctx.exception.report["apex_depth"], 0.0)

    def test_apex_is_zero(self):
        apex = self.node_labels.apex["lv"]
        self.assertAlmostEqual(self.coords.apicobasal[apex], 0.0)

    def test_transventricular_sides(self):
        c = self.coords
        lv = np.intersect1d(self.node_labels.nodes(SurfaceLabel.EndoLV), np.flatnonzero(c.mask))
        rv = np.intersect1d(self.node_labels.nodes(SurfaceLabel.EndoRV), np.flatnonzero(c.mask))
        self.assertTrue(np.allclose(c.transventricular[lv], 0.0))
        self.assertTrue(np.allclose(c.transventricular[rv], 1.0))

    def test_aha(self):
        segments = aha_segments(self.coords)
        lv = self.coords.mask & (self.coords.transventricular <= 0.5)
        self.assertTrue(np.all(segments[lv] >= 1))
        self.assertTrue(np.all(segments[~lv] == 0))
        self.assertGreaterEqual(len(np.unique(segments[lv])), 16)

    def test_aha_table(self):
        ab = np.array([0.05, 0.2, 0.2, 0.5, 0.5, 0.9, 0.9, 0.9])
        c = np.array([0.3, 0.1, 0.8, 0.0, 0.99, 0.05, 0.55, 1.0])
        self.assertEqual(aha_segment(ab, c).tolist(), [17, 14, 13, 8, 7, 2, 5, 2])


class FibresTest(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.mesh = annulus_cylinder(inner=10.0, outer=15.0, height=10.0)
        r = np.linalg.norm(cls.mesh.nodes[:, :2], axis=1)
        cls.fields = {"transmural": (r - 10.0) / 5.0, "longitudinal": cls.mesh.nodes[:, 2] / 10.0}
        cls.frame = generate_fibres(cls.mesh, cls.fields)

    def test_orthonormal_right_handed(self):
        f, s, n = self.frame.f, self.frame.s, self.frame.n
        for v in (f, s, n):
            self.assertLess(np.max(np.abs(np.linalg.norm(v, axis=1) - 1.0)), 1e-10)
        self.assertLess(np.max(np.abs(np.einsum("ij,ij->i", f, s))), 1e-10)
        self.assertLess(np.max(np.abs(np.einsum("ij,ij->i", f, n))), 1e-10)
        self.assertLess(np.max(np.abs(np.einsum("ij,ij->i", np.cross(f, s), n) - 1.0)), 1e-10)

    def test_helical_law(self):
        e_t, _, e_c, degenerate = local_bases(self.mesh, self.fields["transmural"], self.fields["longitudinal"])
        self.assertFalse(np.any(degenerate))
        measured = helical_angle(self.frame, e_t, e_c)
        d = self.fields["transmural"][self.mesh.elements].mean(axis=1)
        self.assertLess(np.max(np.abs(measured - (60.0 - 120.0 * d))), 0.01)
        radius = np.linalg.norm(self.mesh.element_centroids()[:, :2], axis=1)
        self.assertLess(np.max(np.abs(measured - (60.0 - 120.0 * (radius - 10.0) / 5.0))), 2.0)

    def test_region_angles(self):
        config = AngleConfig(alpha_endo_rv=90.0, alpha_epi_rv=-25.0, alpha_endo_septum=60.0, alpha_epi_septum=-60.0)
        d = np.array([0.0, 1.0, 0.0, 1.0, 0.5])
        rv = np.array([0.0, 0.0, 1.0, 1.0, 0.5])
        septal = np.array([False, False, False, False, True])
        self.assertTrue(np.allclose(helical_angles(config, d, rv, septal), [60.0, -60.0, 90.0, -25.0, 0.0]))

    def test_degenerate_filled(self):
        mesh = box_bar(10.0, 2.0, 2.0, n=(10, 2, 2))
        x = mesh.nodes[:, 0]
        fields = {"transmural": x / 10.0, "longitudinal": np.where(x < 2.5, 0.0, mesh.nodes[:, 2])}
        frame = generate_fibres(mesh, fields)
        self.assertGreater(frame.report["degenerate"], 0)
        self.assertGreaterEqual(frame.report["sweeps"], 1)
        self.assertTrue(np.all(np.isfinite(frame.as_array())))
        self.assertLess(np.max(np.abs(np.linalg.norm(frame.f, axis=1) - 1.0)), 1e-10)

    def test_unresolvable(self):
        mesh = box_bar()
        with self.assertRaises(UnresolvableDegenerate):
            generate_fibres(mesh, {"transmural": mesh.nodes[:, 0] / 10.0, "longitudinal": np.zeros(mesh.n_nodes)})

    def test_missing_field(self):
        with self.assertRaises(MissingField):
            generate_fibres(self.mesh, {"transmural": self.fields["transmural"]})

    def test_rotate_about_axis(self):
        self.assertTrue(np.allclose(rotate_about_axis([1.0, 0.0, 0.0], [0.0, 0.0, 1.0], 90.0), [0.0, 1.0, 0.0]))
        v = np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
        axes = np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0]])
        out = rotate_about_axis(v, axes, np.array([-90.0, 90.0]))
        self.assertTrue(np.allclose(out, [[0.0, -1.0, 0.0], [0.0, -1.0, 0.0]]))
        self.assertTrue(np.allclose(rotate_about_axis(v, axes, 0.0), v))

    def test_rotation_invariant_angles(self):
        rotation = Rotation.from_euler("xyz", [20.0, -35.0, 50.0], degrees=True).as_matrix()
        rotated = self.mesh.transformed(rotation=rotation)
        frame = generate_fibres(rotated, self.fields)
        self.assertLess(np.max(np.abs(frame.f - self.frame.f @ rotation.T)), 1e-8)


class CellTypeTest(unittest.TestCase):

    def test_thresholds(self):
        d = np.array([0.0, 0.3, 1.0 / 3.0, 0.5, 2.0 / 3.0, 0.9, np.nan])
        types = assign_cell_types(d)
        expected = [CellType.Endo, CellType.Endo, CellType.Mid, CellType.Mid, CellType.Epi, CellType.Epi,
                    CellType.Mid]
        self.assertEqual(types.tolist(), [int(t) for t in expected])

    def test_septal_surface_is_epi(self):
        class SeptalNodes:
            def __contains__(self, label):
                return label == SurfaceLabel.EndoRVSeptal

            def nodes(self, *labels):
                return np.array([0, 1])

        types = assign_cell_types(np.zeros(3), SeptalNodes())
        self.assertEqual(types.tolist(), [int(CellType.Epi), int(CellType.Epi), int(CellType.Endo)])

    def test_missing(self):
        with self.assertRaises(MissingField):
            assign_cell_types(None)

    def test_fast_layer_matches_exhaustive(self):
        sphere = icosphere(radius=6.0, subdivisions=2)
        labels = LabelMap(sphere, np.full(sphere.n_faces, int(SurfaceLabel.EndoLV)))
        volume = voxelize(sphere, 1.5)
        layer = endocardial_fast_layer(volume, labels, thickness=1.0)

        tri = sphere.vertices[sphere.faces]
        n, m = volume.n_nodes, tri.shape[0]
        p = np.repeat(volume.nodes, m, axis=0)
        t = np.tile(tri, (n, 1, 1))
        d = point_triangle_distance(p, t[:, 0], t[:, 1], t[:, 2]).reshape(n, m).min(axis=1)
        self.assertTrue(np.array_equal(layer, d <= 1.0))
        self.assertTrue(np.any(layer))
        self.assertFalse(np.all(layer))


class ActivationTest(unittest.TestCase):

    @staticmethod
    def coords(values):
        return CoordinateSet.from_arrays(np.asarray(values, dtype=float))

    def test_identity(self):
        rng = np.random.default_rng(2)
        coords = self.coords(rng.uniform(size=(200, 4)))
        source = template_activation(coords)
        out = transfer_activation(coords, source, coords)
        self.assertTrue(np.array_equal(out.times, source.times))
        self.assertEqual(out.report["max_distance"], 0.0)

    def test_circumferential_wraps(self):
        source = self.coords([[0.5, 0.99, 0.5, 0.2], [0.5, 0.5, 0.5, 0.2]])
        times = ActivationMap(np.array([7.0, 40.0]), np.array([True, True]))
        target = self.coords([[0.5, 0.01, 0.5, 0.2], [0.5, 0.0, 0.5, 0.2]])
        out = transfer_activation(source, times, target)
        self.assertEqual(out.times.tolist(), [7.0, 7.0])

    def test_undefined_targets(self):
        source = self.coords([[0.1, 0.1, 0.1, 0.1]])
        target = self.coords([[0.1, 0.1, 0.1, 0.1], [np.nan] * 4])
        out = transfer_activation(source, ActivationMap(np.array([3.0]), np.array([True])), target)
        self.assertEqual(out.report["undefined"], 1)
        self.assertTrue(np.isnan(out.masked()[1]))

    def test_errors(self):
        coords = self.coords([[0.1, 0.1, 0.1, 0.1]])
        with self.assertRaises(EmptySource):
            transfer_activation(coords, ActivationMap(np.array([np.nan]), np.array([False])), coords)
        with self.assertRaises(ValueError):
            transfer_activation(coords, ActivationMap(np.array([-1.0]), np.array([True])), coords)


class ElectrodeTest(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.phantom = _phantom("full")
        cls.electrodes = place_electrodes(cls.phantom.labels)

    def test_names_and_spacing(self):
        self.assertEqual(self.electrodes.names, ELECTRODES)
        self.assertGreater(self.electrodes.min_spacing(), 10.0)

    def test_outside_heart(self):
        self.assertFalse(np.any(points_in_mesh(self.phantom.surface, self.electrodes.positions)))

    def test_rigid_motion(self):
        rotation = Rotation.from_euler("zyx", [40.0, -25.0, 70.0], degrees=True).as_matrix()
        shift = np.array([12.0, -7.0, 3.0])
        labels = self.phantom.labels
        moved = LabelMap(labels.mesh.transformed(rotation, shift), labels.face_labels, labels.apex_lv, labels.apex_rv,
                         labels.kind)
        positions = place_electrodes(moved).positions
        self.assertLess(np.max(np.abs(positions - (self.electrodes.positions @ rotation.T + shift))), 1e-6)

    def test_template_checked(self):
        folder = tempfile.mkdtemp()
        try:
            path = os.path.join(folder, "template.csv")
            template = load_template()
            template.loc[0, ["apex_to_base", "lv_to_rv", "posterior_to_anterior"]] = 0.1
            template.to_csv(path, index=False)
            with self.assertRaises(ValueError):
                load_template(path)
        finally:
            shutil.rmtree(folder)


class VariabilityTest(unittest.TestCase):

    def test_seeded(self):
        spec = VariabilitySpec(seed=4)
        a, b = sample_variability(spec), sample_variability(spec)
        self.assertTrue(a.equals(b))
        self.assertFalse(a.equals(sample_variability(VariabilitySpec(seed=5))))
        self.assertEqual(len(a), 9)
        currents = [c for c in a.columns if c != "sample"]
        self.assertTrue(np.all(a.loc[0, currents] == 1.0))
        for c in currents:
            lo, hi = spec.ranges[c]
            self.assertTrue(a[c].between(lo, hi).all())

    def test_ranges_without_control(self):
        spec = VariabilitySpec(ranges={"GKr": (0.5, 0.9), "GNa": (0.5, 2.0)}, n_samples=5, seed=3)
        table = sample_variability(spec)
        self.assertTrue(table["GKr"].between(0.5, 0.9).all())
        self.assertTrue(table["GNa"].between(0.5, 2.0).all())
        self.assertNotEqual(table.loc[0, "GNa"], 1.0)

    def test_hill(self):
        self.assertAlmostEqual(float(hill_block(0.1, 0.1)), 0.5)
        self.assertAlmostEqual(float(hill_block(0.0, 0.1, 2.0)), 1.0)

    def test_scenarios(self):
        spec = VariabilitySpec(n_samples=3, ic50={"GKr": 0.1})
        table = sample_variability(spec)
        scenarios = drug_scenarios(table, spec)
        self.assertEqual(len(scenarios), 9)
        self.assertEqual(list(scenarios.columns[:2]), ["sample", "dose_uM"])
        control = scenarios[scenarios["dose_uM"] == 0.0].reset_index(drop=True)
        self.assertTrue(np.allclose(control["GKr"], table["GKr"]))
        blocked = scenarios[scenarios["dose_uM"] == 0.1].reset_index(drop=True)
        self.assertTrue(np.allclose(blocked["GKr"], 0.5 * table["GKr"]))
        self.assertTrue(np.allclose(blocked["GNa"], table["GNa"]))
        self.assertEqual(len(drug_scenarios(table, VariabilitySpec(n_samples=3))), 3)


class BundleTest(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.mesh = box_bar(10.0, 2.0, 2.0, n=(5, 1, 1))
        x = cls.mesh.nodes[:, 0]
        cls.fields = {"transmural": x / 10.0, "longitudinal": cls.mesh.nodes[:, 2] / 2.0}
        cls.fibres = generate_fibres(cls.mesh, cls.fields)
        cls.cell_types = assign_cell_types(cls.fields["transmural"])

    def setUp(self):
        self.folder = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.folder)

    def write(self, name="bundle"):
        config = PipelineConfig()
        variability = sample_variability(config.variability)
        return write_bundle(os.path.join(self.folder, name), self.mesh, self.fields, self.fibres, self.cell_types,
                            variability=variability, scenarios=drug_scenarios(variability), config=config)

    def test_layout_and_verify(self):
        bundle = self.write()
        for name in ("nodes.txt", "elements.txt", "fibres.txt", "fields/transmural.txt", "fields/cell_type.txt",
                     "variability.csv", "scenarios.csv", "params.txt", "mesh.vtk", "config.txt"):
            self.assertIn(name, bundle.files)
        files, meta = read_manifest(bundle.path)
        self.assertEqual(files, bundle.files)
        self.assertEqual(int(meta["seed"]), 0)
        self.assertEqual(verify_bundle(bundle.path).files, bundle.files)
        nodes = np.loadtxt(bundle.file("nodes.txt"))
        self.assertEqual(nodes.shape, (self.mesh.n_nodes, 4))
        fibres = np.loadtxt(bundle.file("fibres.txt"))
        self.assertEqual(fibres.shape, (self.mesh.n_elements, 10))

    def test_params(self):
        bundle = self.write()
        with open(bundle.file("params.txt")) as f:
            text = f.read()
        self.assertIn("cv_fibre_cm_per_s = 6.70000000e+01", text)
        self.assertIn("cv_sheet_cm_per_s = 3.00000000e+01", text)
        self.assertIn("cv_normal_cm_per_s = 1.70000000e+01", text)

    def test_byte_identical(self):
        self.assertEqual(self.write("a").digest(), self.write("a").digest())

    def test_tamper_detected(self):
        bundle = self.write()
        with open(bundle.file("fields/transmural.txt"), "a") as f:
            f.write("0 0\n")
        os.remove(bundle.file("params.txt"))
        with self.assertRaises(ChecksumMismatch) as ctx:
            verify_bundle(bundle.path)
        self.assertIn("fields/transmural.txt", str(ctx.exception))
        self.assertIn("params.txt", str(ctx.exception))

    def test_missing_inputs(self):
        with self.assertRaises(MissingArtifact):
            write_bundle(self.folder, self.mesh, {"longitudinal": self.fields["longitudinal"]}, self.fibres,
                         self.cell_types)
        with self.assertRaises(MissingArtifact):
            write_bundle(self.folder, self.mesh, self.fields, None, self.cell_types)
        with self.assertRaises(MissingArtifact):
            verify_bundle(os.path.join(self.folder, "nowhere"))


class PhantomTest(unittest.TestCase):

    def test_kinds(self):
        for kind in ("full", "cut", "closed"):
            phantom = _phantom(kind)
            self.assertTrue(validate_closed(phantom.surface)["watertight"], kind)
            self.assertGreater(enclosed_volume(phantom.surface), 0.0)
        surfaces = make_phantom(PhantomParams(), "open-surfaces").surfaces
        self.assertEqual(sorted(surfaces), ["lv_endo", "lv_epi", "rv_endo"])

    def test_registry(self):
        with self.assertRaises(ValueError):
            get_phantom("tetralogy")
        a = PhantomParams.sample(np.random.default_rng(9))
        b = PhantomParams.sample(np.random.default_rng(9))
        self.assertEqual(a, b)

    def test_invalid(self):
        with self.assertRaises(InvalidParams):
            PhantomParams(lv_wall=-1.0).validate()
        with self.assertRaises(InvalidParams):
            PhantomParams(rv_axes=(10.0, 10.0, 20.0)).validate()


class AssembleTest(unittest.TestCase):

    def test_open_surfaces_closed(self):
        s = make_phantom(PhantomParams(), "open-surfaces").surfaces
        closed = assemble_closed_biventricular(s["lv_epi"], s["lv_endo"], s["rv_endo"], extrusion=3.0)
        self.assertTrue(validate_closed(closed)["watertight"])
        self.assertGreater(enclosed_volume(closed), 0.0)
        labels = set(np.unique(closed.face_fields[SURFACE_LABEL_FIELD]).tolist())
        for label in (SurfaceLabel.Epicardium, SurfaceLabel.EndoLV, SurfaceLabel.EndoRV):
            self.assertIn(int(label), labels)
        # RV epicardium vertices follow the RV endocardium vertices
        start = s["lv_epi"].n_vertices + s["lv_endo"].n_vertices + s["rv_endo"].n_vertices
        rv_epi = closed.vertices[start:start + s["rv_endo"].n_vertices]
        thickness = np.linalg.norm(rv_epi - s["rv_endo"].vertices, axis=1)
        self.assertLess(np.max(np.abs(thickness - 3.0)), 0.2)

    def test_closed_input_passes_through(self):
        sphere = icosphere(radius=10.0, subdivisions=2)
        self.assertIs(assemble_closed_biventricular(sphere, None, None), sphere)


class CohortTest(unittest.TestCase):

    def setUp(self):
        self.folder = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.folder)

    def test_phantom_cohort(self):
        cohort = PhantomCohort(4, seed=1, kinds=("full", "cut"))
        self.assertEqual(len(cohort), 4)
        self.assertEqual(cohort.kind_array.tolist(), [0, 1, 0, 1])
        cut = cohort.get_subset("cut")
        self.assertEqual(cut.case_ids, [cohort.case_ids[1], cohort.case_ids[3]])
        with self.assertRaises(ValueError):
            cohort.get_subset("closed")

    def test_manifest(self):
        items = [{"case_id": "a", "surfaces": ["a.vtk"]},
                 {"case_id": "b", "surfaces": ["/abs/b.vtk"], "mesh": "b_tets.vtk", "kind": "cut"}]
        path = os.path.join(self.folder, "cases.json")
        write_manifest(items, path)
        self.assertEqual(read_cases(path), items)
        cohort = ManifestCohort(path)
        self.assertEqual(cohort[0]["surfaces"], [os.path.join(self.folder, "a.vtk")])
        self.assertEqual(cohort[1]["surfaces"], ["/abs/b.vtk"])
        self.assertEqual(cohort[1]["mesh"], os.path.join(self.folder, "b_tets.vtk"))
        self.assertEqual(cohort[1]["kind"], "cut")

    def test_eval(self):
        cohort = PhantomCohort(3, seed=2, kinds=("full", "cut"))
        results, results_str = cohort.eval(["ok", "fail", "warn"])
        self.assertAlmostEqual(results["success_avg"], 2.0 / 3.0)
        self.assertAlmostEqual(results["success_kind:full"], 1.0)
        self.assertAlmostEqual(results["success_kind:cut"], 0.0)
        self.assertAlmostEqual(results["success_wg"], 0.0)
        self.assertIn("Worst-group", results_str)


class PipelineTest(unittest.TestCase):

    def setUp(self):
        self.folder = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.folder)

    def test_sphere_fails_at_label(self):
        path = os.path.join(self.folder, "sphere.vtk")
        icosphere(radius=20.0, subdivisions=3).to_file(path)
        bundle, report = run_case({"case_id": "sphere", "surfaces": [path]}, out=self.folder)
        self.assertIsNone(bundle)
        self.assertEqual(report.failed_stage, "label")
        self.assertEqual(report.exit_code, 2)
        self.assertEqual(report.status, "fail")
        with open(os.path.join(self.folder, "sphere", "report.json")) as f:
            self.assertEqual(json.load(f)["failed_stage"], "label")
        self.assertTrue(os.path.getsize(os.path.join(self.folder, "sphere", "case.log")) > 0)

    def test_missing_surface(self):
        _, report = run_case({"case_id": "nothing", "surfaces": []}, out=self.folder)
        self.assertEqual(report.failed_stage, "load")

    def test_empty_batch(self):
        summary, success_rate = run_batch([], out=self.folder)
        self.assertEqual(len(summary), 0)
        self.assertEqual(success_rate, 1.0)
        self.assertTrue(os.path.exists(os.path.join(self.folder, "summary.csv")))


class PipelinePhantomTest(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.folder = tempfile.mkdtemp()
        path = os.path.join(cls.folder, "heart.vtk")
        _phantom("full").surface.to_file(path)
        cls.config = PipelineConfig.from_text("mesh.coarse = 2.5\nmesh.hex = 2.5\nvariability.n_samples = 3\n")
        cls.inputs = {"case_id": "heart", "surfaces": [path], "kind": "full"}
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            cls.bundle, cls.report = run_case(cls.inputs, cls.config, out=cls.folder)

    @classmethod
    def tearDownClass(cls):
        shutil.rmtree(cls.folder)

    def test_completes(self):
        self.assertIsNotNone(self.bundle, self.report.error)
        self.assertEqual(self.report.exit_code, 0)
        self.assertEqual(list(self.report.stages), ["load", "close", "label", "validate", "volume", "fields",
                                                    "coordinates", "fibres", "bundle"])
        verify_bundle(self.bundle.path)

    def test_bundle_contents(self):
        for name in ("apicobasal", "circumferential", "transventricular", "aha", "fast_layer", "activation",
                     "cell_type"):
            self.assertIn("fields/%s.txt" % name, self.bundle.files)
        electrodes = pd.read_csv(self.bundle.file("electrodes.txt"), sep=" ", header=None)
        self.assertEqual(electrodes[0].tolist(), list(ELECTRODES))
        self.assertEqual(self.report.quality["kind"], HEX)

    def test_deterministic(self):
        digest = self.bundle.digest()
        bundle, _ = run_case(self.inputs, self.config, out=self.folder)
        self.assertEqual(bundle.digest(), digest)


class CliTest(unittest.TestCase):

    def setUp(self):
        self.folder = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.folder)

    def test_usage_error(self):
        with self.assertRaises(SystemExit) as ctx:
            main(["label"])
        self.assertEqual(ctx.exception.code, 1)

    def test_bad_config(self):
        path = os.path.join(self.folder, "bad.cfg")
        with open(path, "w") as f:
            f.write("mesh.coarse = -1\n")
        self.assertEqual(main(["quality", "x.vtk", "--config", path]), 1)

    def test_quality(self):
        path = os.path.join(self.folder, "bar.vtk")
        box_bar().to_file(path)
        self.assertEqual(main(["quality", path, "--out", self.folder]), 0)
        table = pd.read_csv(os.path.join(self.folder, "quality.csv"))
        self.assertEqual(int(table["n_elements"].iloc[0]), box_bar().n_elements)

    def test_phantom_and_voxelize(self):
        self.assertEqual(main(["phantom", "--seed", "3", "--out", self.folder]), 0)
        surface = os.path.join(self.folder, "phantom_full.vtk")
        self.assertTrue(os.path.exists(surface))
        self.assertEqual(main(["voxelize", surface, "--edge", "3", "--out", self.folder]), 0)
        self.assertEqual(VolumeMesh.from_file(os.path.join(self.folder, "voxels.vtk")).kind, HEX)

    def test_verify_missing(self):
        self.assertEqual(main(["verify", os.path.join(self.folder, "none")]), 2)


if __name__ == '__main__':
    unittest.main()
