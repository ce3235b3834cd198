"""
heart-cohorts command line.

    heart-cohorts bundle surface.vtk --out runs            whole pipeline for one case
    heart-cohorts batch cases.json --jobs 8 --out runs     every case of a JSON-lines case list
    heart-cohorts label surface.vtk --kind cut             one stage at a time (close, label, voxelize,
                                                           fields, fibres, coords, aha, quality, interp)
    heart-cohorts phantom --kind full --seed 3             synthetic test geometry
    heart-cohorts verify runs/case/bundle                  manifest checksums

Exit codes: 0 ok, 1 usage or configuration error, 2 case failure.
"""
import argparse
import logging
import os
import sys

import numpy as np

from heart_cohorts import __version__
from heart_cohorts.config import KINDS, PipelineConfig
from heart_cohorts.errors import ConfigError, HeartCohortsError, InvalidRange
from heart_cohorts.log import configure_console

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FAILED = 2


class _Parser(argparse.ArgumentParser):

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, "%s: error: %s\n" % (self.prog, message))


def _common():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value configuration file")
    common.add_argument("--seed", type=int, help="seed for labelling subsamples, phantoms and variability")
    common.add_argument("--out", help="output directory")
    common.add_argument("--kind", choices=KINDS, help="geometry kind")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for batch runs")
    common.add_argument("-v", "--verbose", action="count", default=0)
    return common


def build_parser():
    parser = _Parser(prog="heart-cohorts", description="Biventricular surface meshes to simulation bundles.")
    parser.add_argument("--version", action="version", version="%(prog)s " + __version__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True
    common = [_common()]

    p = sub.add_parser("close", parents=common, help="closed surface from one surface or three open patches")
    p.add_argument("surfaces", nargs="+", help="closed surface, or LV epicardium, LV endocardium, RV endocardium")
    p = sub.add_parser("label", parents=common, help="anatomical surface labels")
    p.add_argument("surface")
    p = sub.add_parser("voxelize", parents=common, help="hexahedral mesh of a closed surface")
    p.add_argument("surface")
    p.add_argument("--edge", type=float, help="voxel edge (mm), mesh.hex by default")
    p.add_argument("--tets", action="store_true", help="split every voxel into six tetrahedra")
    p = sub.add_parser("fields", parents=common, help="Laplace-Dirichlet fields on a tetrahedral mesh")
    p.add_argument("labels", help="labelled surface (surface_label cell data)")
    p.add_argument("--mesh", help="tetrahedral mesh; voxel tetrahedra at mesh.coarse when omitted")
    p = sub.add_parser("fibres", parents=common, help="fibre, sheet and normal directions per element")
    p.add_argument("fields", help="volume mesh with transmural and longitudinal node fields")
    p = sub.add_parser("coords", parents=common, help="ventricular coordinates")
    p.add_argument("labels")
    p.add_argument("fields")
    p = sub.add_parser("aha", parents=common, help="17-segment LV parcellation")
    p.add_argument("coords", help="volume mesh with coordinate node fields")
    p = sub.add_parser("bundle", parents=common, help="whole pipeline for one case")
    p.add_argument("surfaces", nargs="+")
    p.add_argument("--mesh", help="tetrahedral mesh to solve on")
    p.add_argument("--case-id", help="case directory name, the first surface's name by default")
    p = sub.add_parser("batch", parents=common, help="whole pipeline for every case of a case list")
    p.add_argument("cases", help="JSON-lines case list")
    p = sub.add_parser("quality", parents=common, help="scaled Jacobian report")
    p.add_argument("mesh")
    p = sub.add_parser("interp", parents=common, help="barycentric transfer of node fields")
    p.add_argument("source", help="tetrahedral mesh with node fields")
    p.add_argument("target", help="mesh whose nodes receive the fields")
    p = sub.add_parser("phantom", parents=common, help="synthetic biventricular geometry")
    p.add_argument("--phantom-kind", default=None, choices=("full", "cut", "closed", "open-surfaces"),
                   help="phantom family, --kind by default")
    p = sub.add_parser("verify", parents=common, help="recompute bundle checksums")
    p.add_argument("bundle")
    return parser


def load_config(args):
    config = PipelineConfig.from_file(args.config) if args.config else PipelineConfig()
    if args.seed is not None:
        config.seed = args.seed
        config.label.seed = args.seed
        config.variability.seed = args.seed
    if args.kind is not None:
        config.kind = args.kind
    if args.out is not None:
        config.out = args.out
    return config.validate()


def _out(config, name):
    os.makedirs(config.out, exist_ok=True)
    return os.path.join(config.out, name)


def _label_kind(config):
    return "cut" if config.kind == "cut" else "biventricular"


def _scalar_fields(mesh):
    from heart_cohorts.fields.laplace import ScalarField
    return {name: ScalarField(name, np.asarray(v, dtype=float)) for name, v in mesh.node_fields.items()
            if np.ndim(v) == 1}


def _load_labels(path, config):
    from heart_cohorts.geometry.mesh import SurfaceMesh
    from heart_cohorts.labelling.labels import LabelMap
    return LabelMap.from_mesh(SurfaceMesh.from_file(path), kind=_label_kind(config))


def cmd_close(args, config):
    from heart_cohorts.geometry.mesh import SurfaceMesh
    from heart_cohorts.pipeline import close_surface
    surface = close_surface([SurfaceMesh.from_file(p) for p in args.surfaces], config.resolution.extrusion)
    surface.to_file(_out(config, "closed.vtk"))
    print(surface)
    return EXIT_OK


def cmd_label(args, config):
    from heart_cohorts.geometry.mesh import SurfaceMesh
    from heart_cohorts.labelling.validation import FAIL, validate_labels
    from heart_cohorts.pipeline import label_surface
    labels = label_surface(SurfaceMesh.from_file(args.surface), config.kind, config.label)
    labels.to_mesh().to_file(_out(config, "labels.vtk"))
    labels.summary().to_csv(_out(config, "labels.csv"), index=False, float_format="%.6f", lineterminator="\n")
    report = validate_labels(labels)
    print(report.table().to_string(index=False))
    return EXIT_FAILED if report.status == FAIL else EXIT_OK


def cmd_voxelize(args, config):
    from heart_cohorts.geometry.mesh import SurfaceMesh, hex_to_tets
    from heart_cohorts.mesh_build.voxelize import voxelize
    mesh = voxelize(SurfaceMesh.from_file(args.surface), args.edge or config.resolution.hex)
    if args.tets:
        mesh = hex_to_tets(mesh)
    mesh.to_file(_out(config, "voxels.vtk"))
    print(mesh)
    return EXIT_OK


def cmd_fields(args, config):
    from heart_cohorts.fields.standard import compute_standard_fields, projection_fields
    from heart_cohorts.pipeline import volume_mesh
    labels = _load_labels(args.labels, config)
    mesh = volume_mesh(labels.mesh, config, args.mesh)
    fields = compute_standard_fields(mesh, labels, config.solver)
    fields.update(projection_fields(mesh, labels)[0])
    mesh = mesh.with_fields(node_fields={name: f.values for name, f in fields.items()})
    mesh.to_file(_out(config, "fields.vtk"))
    for name in sorted(fields):
        print("%-22s %s" % (name, fields[name].report.get("iterations", "-")))
    return EXIT_OK


def cmd_fibres(args, config):
    from heart_cohorts.fibres.fibres import generate_fibres
    from heart_cohorts.geometry.mesh import VolumeMesh
    mesh = VolumeMesh.from_file(args.fields)
    frame = generate_fibres(mesh, _scalar_fields(mesh), config.angles)
    mesh.with_fields(element_fields=frame.as_element_fields()).to_file(_out(config, "fibres.vtk"))
    print(frame.report)
    return EXIT_OK


def cmd_coords(args, config):
    from heart_cohorts.fields.coordinates import coordinate_fields
    from heart_cohorts.geometry.mesh import VolumeMesh
    labels = _load_labels(args.labels, config)
    mesh = VolumeMesh.from_file(args.fields)
    coords = coordinate_fields(mesh, labels, _scalar_fields(mesh), config=config.solver)
    node_fields = {"coord_%s" % name: f.values for name, f in coords.as_fields().items()}
    mesh.with_fields(node_fields=node_fields).to_file(_out(config, "coords.vtk"))
    print("coordinates defined on %d of %d nodes" % (int(coords.mask.sum()), mesh.n_nodes))
    return EXIT_OK


def cmd_aha(args, config):
    from heart_cohorts.fields.aha import aha_segments
    from heart_cohorts.fields.coordinates import COORDINATES, CoordinateSet
    from heart_cohorts.geometry.mesh import VolumeMesh
    mesh = VolumeMesh.from_file(args.coords)
    fields = mesh.node_fields
    coords = CoordinateSet.from_arrays(np.stack([fields["coord_%s" % n] for n in COORDINATES], axis=1))
    segments = aha_segments(coords)
    mesh.with_fields(node_fields={"aha": segments}).to_file(_out(config, "aha.vtk"))
    ids, counts = np.unique(segments[segments > 0], return_counts=True)
    for i, c in zip(ids, counts):
        print("segment %2d: %d nodes" % (i, c))
    return EXIT_OK


def cmd_bundle(args, config):
    from heart_cohorts.pipeline import run_case
    case_id = args.case_id or os.path.splitext(os.path.basename(args.surfaces[0]))[0]
    inputs = {"case_id": case_id, "surfaces": args.surfaces, "kind": config.kind}
    if args.mesh:
        inputs["mesh"] = args.mesh
    _, report = run_case(inputs, config)
    for name, stage in report.stages.items():
        print("%-12s %-4s %8.2f s %s" % (name, stage.status, stage.seconds, stage.message))
    return report.exit_code


def cmd_batch(args, config):
    from heart_cohorts.cohorts.cohort import ManifestCohort
    from heart_cohorts.pipeline import run_batch
    cohort = ManifestCohort(args.cases, default_kind=config.kind)
    summary, success_rate = run_batch(cohort, config, jobs=args.jobs)
    print(summary.to_string(index=False))
    print("success rate: %.1f%% of %d cases" % (100 * success_rate, len(summary)))
    return EXIT_OK


def cmd_quality(args, config):
    from heart_cohorts.geometry.mesh import VolumeMesh
    from heart_cohorts.geometry.quality import quality_report, write_quality_csv
    report = quality_report(VolumeMesh.from_file(args.mesh))
    write_quality_csv(report, _out(config, "quality.csv"))
    print("%s: %d elements, scaled Jacobian mean %.3f min %.3f max %.3f"
          % (report["kind"], report["n_elements"], report["mean"], report["min"], report["max"]))
    return EXIT_OK


def cmd_interp(args, config):
    from heart_cohorts.geometry.mesh import VolumeMesh
    from heart_cohorts.geometry.mesh_io import load_mesh
    from heart_cohorts.mesh_build.transfer import interpolate_fields
    source = VolumeMesh.from_file(args.source)
    target = load_mesh(args.target)
    points = target.nodes if isinstance(target, VolumeMesh) else target.vertices
    values, report = interpolate_fields(source, points)
    if isinstance(target, VolumeMesh):
        target = target.with_fields(node_fields=values)
    else:
        target = target.with_fields(vertex_fields=values)
    target.to_file(_out(config, "interp.vtk"))
    print("%d points, %d outside the source mesh" % (report["n_points"], report["n_fallback"]))
    return EXIT_OK


def cmd_phantom(args, config):
    from heart_cohorts import get_phantom
    kind = args.phantom_kind or config.kind
    phantom = get_phantom(kind, seed=args.seed)
    if kind == "open-surfaces":
        for name, mesh in sorted(phantom.surfaces.items()):
            mesh.to_file(_out(config, "phantom_%s.vtk" % name))
    else:
        phantom.surface.to_file(_out(config, "phantom_%s.vtk" % kind))
        phantom.labels.to_mesh().to_file(_out(config, "phantom_%s_labels.vtk" % kind))
    print(phantom.params)
    return EXIT_OK


def cmd_verify(args, config):
    from heart_cohorts.bundle.writer import verify_bundle
    bundle = verify_bundle(args.bundle)
    print("%s: %d files verified" % (bundle.path, len(bundle.files)))
    return EXIT_OK


COMMANDS = {
    "close": cmd_close, "label": cmd_label, "voxelize": cmd_voxelize, "fields": cmd_fields,
    "fibres": cmd_fibres, "coords": cmd_coords, "aha": cmd_aha, "bundle": cmd_bundle, "batch": cmd_batch,
    "quality": cmd_quality, "interp": cmd_interp, "phantom": cmd_phantom, "verify": cmd_verify,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    configure_console(args.verbose)
    try:
        config = load_config(args)
    except (ConfigError, InvalidRange, OSError) as e:
        print("configuration error: %s" % e, file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args, config)
    except HeartCohortsError as e:
        logger.error("%s failed: %s: %s", args.command, type(e).__name__, e)
        print("%s: %s" % (type(e).__name__, e), file=sys.stderr)
        return EXIT_FAILED
    except (OSError, ValueError) as e:
        print("error: %s" % e, file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
