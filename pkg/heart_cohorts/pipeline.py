"""
Per-case pipeline (close, label, validate, volume mesh, fields, coordinates, fibres, bundle)
and the batch runner over a case list.
"""
import json
import logging
import os
import time
import warnings
from contextlib import contextmanager
from dataclasses import dataclass, field
from multiprocessing import Pool

import numpy as np
import pandas as pd
import progressbar

from heart_cohorts.bundle.activation import load_activation_source, template_activation, transfer_activation
from heart_cohorts.bundle.cell_types import assign_cell_types, endocardial_fast_layer
from heart_cohorts.bundle.electrodes import place_electrodes
from heart_cohorts.bundle.variability import drug_scenarios, sample_variability
from heart_cohorts.bundle.writer import write_bundle
from heart_cohorts.config import PipelineConfig
from heart_cohorts.errors import LabellingError, NotClosed
from heart_cohorts.fibres.fibres import generate_fibres
from heart_cohorts.fields.aha import aha_segments
from heart_cohorts.fields.boundary import NodeLabels
from heart_cohorts.fields.coordinates import CoordinateSet, coordinate_fields
from heart_cohorts.fields.standard import compute_standard_fields, projection_fields
from heart_cohorts.geometry.mesh import TET, SurfaceMesh, VolumeMesh, validate_closed
from heart_cohorts.geometry.quality import quality_report, write_quality_csv
from heart_cohorts.labelling.biventricular import label_biventricular
from heart_cohorts.labelling.cut import label_cut_geometry
from heart_cohorts.labelling.validation import FAIL, validate_labels
from heart_cohorts.log import case_logging
from heart_cohorts.mesh_build.assemble import assemble_closed_biventricular, fill_holes
from heart_cohorts.mesh_build.locate import TetLocator
from heart_cohorts.mesh_build.transfer import interpolate_fields
from heart_cohorts.mesh_build.voxelize import coarse_tet_mesh, voxelize

logger = logging.getLogger(__name__)

OK = "ok"
WARN = "warn"
FAIL_STATUS = "fail"
STAGES = ("load", "close", "label", "validate", "volume", "fields", "coordinates", "fibres", "bundle")


def label_surface(mesh, kind="full", config=None):
    """LabelMap of a closed surface; `kind` is full (open or closed valves) or cut."""
    if kind == "cut":
        return label_cut_geometry(mesh, config)
    if kind in ("full", "closed", "biventricular"):
        return label_biventricular(mesh, config)
    raise ValueError("unknown geometry kind %r" % kind)


def close_surface(surfaces, extrusion=3.0):
    """
    A closed surface from one surface (small holes capped) or from the three open LV epicardium,
    LV endocardium and RV endocardium patches.
    """
    if len(surfaces) == 3:
        return assemble_closed_biventricular(*surfaces, extrusion=extrusion)
    if len(surfaces) != 1:
        raise ValueError("expected one closed surface or three open patches, got %d surfaces" % len(surfaces))
    mesh = surfaces[0]
    if not validate_closed(mesh)["watertight"]:
        mesh = fill_holes(mesh)
        defects = validate_closed(mesh)["defects"]
        if defects:
            raise NotClosed("surface still has %d defects after hole filling" % len(defects))
    return mesh


def volume_mesh(surface, config, mesh_path=None):
    """Coarse tetrahedral mesh for the field solves: the imported one or a split voxel mesh."""
    if mesh_path:
        mesh = VolumeMesh.from_file(mesh_path)
        if mesh.kind != TET:
            raise ValueError("%s is not a tetrahedral mesh" % mesh_path)
        return mesh
    return coarse_tet_mesh(surface, config.resolution.coarse)


def simulation_mesh(surface, coarse, config, imported=False):
    res = config.resolution
    if res.simulation_mesh == "hex":
        return voxelize(surface, res.hex)
    if imported or res.fine >= res.coarse:
        return coarse
    return coarse_tet_mesh(surface, res.fine)


def _circular(values):
    angle = 2 * np.pi * values
    return np.cos(angle), np.sin(angle)


def transfer_to_simulation(coarse, sim, node_fields, coords, fibres):
    """
    Node fields, coordinates and fibres on the simulation mesh, by barycentric interpolation from
    the coarse mesh (the circumferential angle through its cosine and sine) and, for fibres, the
    frame of the coarse element holding each simulation element centroid.
    """
    if sim is coarse:
        return dict(node_fields), coords, fibres
    carried = dict(node_fields)
    for name in ("apicobasal", "transventricular"):
        carried["coord_" + name] = getattr(coords, name)
    carried["coord_cos"], carried["coord_sin"] = _circular(coords.circumferential)
    locator = TetLocator(coarse)
    values, report = interpolate_fields(coarse.with_fields(node_fields=carried), sim.nodes, locator=locator)
    circumferential = np.mod(np.arctan2(values.pop("coord_sin"), values.pop("coord_cos")) / (2 * np.pi), 1.0)
    stacked = np.stack((values.pop("coord_apicobasal"), circumferential, values["transmural"],
                        values.pop("coord_transventricular")), axis=1)
    sim_coords = CoordinateSet.from_arrays(stacked)
    sim_coords.plane = coords.plane
    elements = locator.locate(sim.element_centroids()).element
    logger.info("carried %d fields to %d simulation nodes (%d fallback locations)",
                len(values), sim.n_nodes, report["n_fallback"])
    return values, sim_coords, fibres.take(elements)


@dataclass
class StageResult:
    status: str
    seconds: float
    message: str = ""


@dataclass
class CaseReport:
    """Per-stage status and timings of one case, with quality and label validation summaries."""
    case_id: str
    kind: str = ""
    stages: dict = field(default_factory=dict)
    quality: dict = field(default_factory=dict)
    validation: dict = field(default_factory=dict)
    bundle: str = None
    failed_stage: str = None
    error: str = None

    @property
    def status(self):
        statuses = [s.status for s in self.stages.values()]
        if FAIL_STATUS in statuses or self.bundle is None:
            return FAIL_STATUS
        return WARN if WARN in statuses else OK

    @property
    def exit_code(self):
        return 0 if self.bundle is not None else 2

    @property
    def seconds(self):
        return float(sum(s.seconds for s in self.stages.values()))

    @contextmanager
    def stage(self, name, case_filter=None):
        """Times a stage; warnings raised inside it turn the status to warn, exceptions to fail."""
        if case_filter is not None:
            case_filter.stage = name
        start = time.perf_counter()
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            try:
                yield
            except Exception as e:
                self.stages[name] = StageResult(FAIL_STATUS, time.perf_counter() - start,
                                                "%s: %s" % (type(e).__name__, e))
                self.failed_stage = name
                self.error = "%s: %s" % (type(e).__name__, e)
                raise
        soft = [w for w in caught if issubclass(w.category, UserWarning)]
        for w in caught:
            if w not in soft:
                logger.debug("%s: %s", w.category.__name__, w.message)
        status = WARN if soft else OK
        message = "; ".join(sorted({str(w.message) for w in soft}))
        self.stages[name] = StageResult(status, time.perf_counter() - start, message)

    def warn(self, name, message):
        s = self.stages[name]
        self.stages[name] = StageResult(WARN, s.seconds, "; ".join(m for m in (s.message, message) if m))

    def as_dict(self):
        return {
            "case_id": self.case_id,
            "kind": self.kind,
            "status": self.status,
            "failed_stage": self.failed_stage,
            "error": self.error,
            "bundle": self.bundle,
            "stages": {k: vars(v) for k, v in self.stages.items()},
            "quality": self.quality,
            "validation": self.validation,
        }

    def summary_row(self):
        row = {"case_id": self.case_id, "kind": self.kind, "status": self.status,
               "failed_stage": self.failed_stage or "", "seconds": self.seconds}
        for name in STAGES:
            row["%s_seconds" % name] = self.stages[name].seconds if name in self.stages else np.nan
        row["quality_mean"] = self.quality.get("mean", np.nan)
        row["quality_min"] = self.quality.get("min", np.nan)
        row["validation"] = self.validation.get("status", "")
        return row

    def write(self, path):
        with open(path, "w", newline="\n") as f:
            json.dump(self.as_dict(), f, indent=2, sort_keys=True, default=str)
            f.write("\n")


def run_case(inputs, config=None, out=None):
    """
    Runs the full pipeline on one case. Never raises for stage failures: they end the case and
    are recorded in the report.
    Args:
        - inputs (dict): case_id, surfaces (one closed surface or three open patches), optional
          mesh (tetrahedral) and kind (full | cut, the config's kind by default)
        - config (PipelineConfig)
        - out (str): output root; the case goes to out/<case_id>/
    Output:
        - bundle (CaseBundle or None)
        - report (CaseReport)
    """
    config = (config or PipelineConfig()).validate()
    case_id = str(inputs.get("case_id", "case"))
    kind = inputs.get("kind", config.kind)
    case_dir = os.path.join(out or config.out, case_id)
    os.makedirs(case_dir, exist_ok=True)
    report = CaseReport(case_id, kind)
    bundle = None

    with case_logging(case_id, os.path.join(case_dir, "case.log")) as case_filter:
        logger.info("case %s (%s) started", case_id, kind)
        try:
            with report.stage("load", case_filter):
                paths = list(inputs.get("surfaces", []))
                if not paths:
                    raise ValueError("case %s lists no surface" % case_id)
                surfaces = [SurfaceMesh.from_file(p) for p in paths]

            with report.stage("close", case_filter):
                surface = close_surface(surfaces, config.resolution.extrusion)

            with report.stage("label", case_filter):
                labels = label_surface(surface, kind, config.label)
                labels.to_mesh().to_file(os.path.join(case_dir, "labels.vtk"))
                labels.summary().to_csv(os.path.join(case_dir, "labels.csv"), index=False,
                                        float_format="%.6f", lineterminator="\n")

            with report.stage("validate", case_filter):
                validation = validate_labels(labels)
                report.validation = validation.as_dict()
                if validation.status == FAIL:
                    failed = [c.name for c in validation.checks if c.status == FAIL]
                    raise LabellingError("label validation failed: %s" % ", ".join(failed),
                                         report=validation.as_dict())
            if validation.status != "pass":
                report.warn("validate", "label validation warnings")

            with report.stage("volume", case_filter):
                coarse = volume_mesh(surface, config, inputs.get("mesh"))
                sim = simulation_mesh(surface, coarse, config, imported=bool(inputs.get("mesh")))
                quality = quality_report(sim)
                write_quality_csv(quality, os.path.join(case_dir, "quality.csv"))
                report.quality = {k: quality[k] for k in ("kind", "n_elements", "mean", "min", "max", "n_inverted")}

            with report.stage("fields", case_filter):
                node_labels = NodeLabels(coarse, labels)
                fields = compute_standard_fields(coarse, labels, config.solver, node_labels)
                projections, frame = projection_fields(coarse, labels)
                fields.update(projections)

            with report.stage("coordinates", case_filter):
                coords = coordinate_fields(coarse, labels, fields, config=config.solver, node_labels=node_labels)

            with report.stage("fibres", case_filter):
                fibres = generate_fibres(coarse, fields, config.angles)

            with report.stage("bundle", case_filter):
                node_fields = {name: f.values for name, f in fields.items()}
                node_fields["transventricular_raw"] = node_fields.pop("transventricular")
                sim_fields, sim_coords, sim_fibres = transfer_to_simulation(coarse, sim, node_fields, coords, fibres)
                for name in ("apicobasal", "circumferential", "transventricular"):
                    sim_fields[name] = getattr(sim_coords, name)
                sim_fields["aha"] = aha_segments(sim_coords)
                sim_labels = node_labels if sim is coarse else NodeLabels(sim, labels)
                cell_types = assign_cell_types(sim_fields["transmural"], sim_labels, config.bundle)
                sim_fields["fast_layer"] = endocardial_fast_layer(sim, labels, config.bundle.fast_layer)

                if config.bundle.activation_source:
                    source_coords, source_times = load_activation_source(config.bundle.activation_source)
                else:
                    source_coords, source_times = sim_coords, template_activation(sim_coords)
                activation = transfer_activation(source_coords, source_times, sim_coords)
                sim_fields["activation"] = activation.masked()

                electrodes = place_electrodes(labels, config.bundle.electrode_template, frame=frame)
                variability = sample_variability(config.variability)
                scenarios = drug_scenarios(variability, config.variability)
                bundle = write_bundle(os.path.join(case_dir, "bundle"), sim, sim_fields, sim_fibres, cell_types,
                                      electrodes=electrodes, variability=variability, scenarios=scenarios,
                                      config=config)
                report.bundle = bundle.path
        except Exception:
            logger.exception("case %s failed at stage %s", case_id, report.failed_stage)
        logger.info("case %s finished: %s in %.1f s", case_id, report.status, report.seconds)
    report.write(os.path.join(case_dir, "report.json"))
    return bundle, report


def _run_one(args):
    inputs, config, out = args
    _, report = run_case(inputs, config, out)
    return report


def run_batch(cases, config=None, out=None, jobs=1):
    """
    Runs every case of a cohort and writes `summary.csv` to `out`.
    Args:
        - cases (CaseDataset or list of input dicts)
        - jobs (int): worker processes; results do not depend on it
    Output:
        - summary (DataFrame): one row per case, sorted by case id
        - success_rate (float)
    """
    config = (config or PipelineConfig()).validate()
    out = out or config.out
    os.makedirs(out, exist_ok=True)
    items = list(cases)
    args = [(item, config, out) for item in items]
    reports = []
    if args:
        pbar = progressbar.ProgressBar(max_value=len(args))
        if jobs > 1:
            pool = Pool(jobs)
            for i, report in enumerate(pool.imap_unordered(_run_one, args)):
                reports.append(report)
                pbar.update(i)
            pool.close()
            pool.join()
        else:
            for i, a in enumerate(args):
                reports.append(_run_one(a))
                pbar.update(i)
        pbar.update(len(args))

    columns = ["case_id", "kind", "status", "failed_stage", "seconds"] + ["%s_seconds" % s for s in STAGES] + \
        ["quality_mean", "quality_min", "validation"]
    summary = pd.DataFrame([r.summary_row() for r in reports], columns=columns)
    summary = summary.sort_values("case_id", kind="mergesort").reset_index(drop=True)
    summary.to_csv(os.path.join(out, "summary.csv"), index=False, float_format="%.3f", lineterminator="\n")
    success_rate = float(np.mean(summary["status"] != FAIL_STATUS)) if len(summary) else 1.0
    logger.info("batch of %d cases: success rate %.1f%%", len(summary), 100 * success_rate)
    return summary, success_rate
