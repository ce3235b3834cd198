"""
Case bundle: the directory of simulation-input files for one virtual patient.

    manifest.txt      version, seed and `sha256  path` per file
    config.txt        PipelineConfig snapshot
    nodes.txt         id x y z (mm)
    elements.txt      id n0 n1 ... (0-based node ids)
    fibres.txt        id fx fy fz sx sy sz nx ny nz (per element)
    fields/<name>.txt id value (per node; nan where undefined)
    electrodes.txt    name x y z (mm)
    variability.csv   sample, scaling factor per current
    scenarios.csv     sample, dose_uM, blocked scaling factors
    params.txt        conduction velocities
    mesh.vtk          everything above on one unstructured grid

Floats are written as '%.8e', lines end with LF, and no file carries a timestamp, so identical
inputs give byte-identical bundles.
"""
import glob
import hashlib
import logging
import os
from dataclasses import dataclass, field

import numpy as np

from heart_cohorts import __version__
from heart_cohorts.config import BundleConfig
from heart_cohorts.errors import ChecksumMismatch, MissingArtifact, WriteFailed
from heart_cohorts.geometry.mesh_io import save_mesh

logger = logging.getLogger(__name__)

MANIFEST = "manifest.txt"
FLOAT = "%.8e"
REQUIRED_FIELDS = ("transmural",)


@dataclass
class CaseBundle:
    path: str
    files: dict
    version: str = __version__
    seed: int = 0
    config: str = ""
    report: dict = field(default_factory=dict)

    def file(self, name):
        return os.path.join(self.path, name)

    def digest(self):
        """One hash over the manifest; equal for byte-identical bundles."""
        return sha256_file(self.file(MANIFEST))


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _rows(f, ids, values, fmt):
    for i, row in zip(ids, values):
        f.write("%s %s\n" % (i, " ".join(fmt % v for v in np.atleast_1d(row))))


def _write_table(path, values, fmt=FLOAT, ids=None):
    values = np.asarray(values)
    ids = np.arange(values.shape[0]) if ids is None else ids
    with open(path, "w", newline="\n") as f:
        _rows(f, ids, values, fmt)


def _field_format(values):
    return "%d" if np.issubdtype(values.dtype, np.integer) or values.dtype == bool else FLOAT


def write_params(path, config):
    cv = {"fibre": config.cv_fibre, "sheet": config.cv_sheet, "normal": config.cv_normal}
    with open(path, "w", newline="\n") as f:
        f.write("# orthotropic conduction velocity targets along fibre, sheet and sheet-normal\n")
        for name, value in cv.items():
            f.write("cv_%s_m_per_s = %s\n" % (name, FLOAT % value))
            f.write("cv_%s_cm_per_s = %s\n" % (name, FLOAT % (100.0 * value)))
        f.write("fast_layer_mm = %s\n" % (FLOAT % config.fast_layer))
        f.write("endo_threshold = %s\n" % (FLOAT % config.endo_threshold))
        f.write("epi_threshold = %s\n" % (FLOAT % config.epi_threshold))


def write_bundle(path, volume, fields, fibres, cell_types, electrodes=None, variability=None, scenarios=None,
                 config=None):
    """
    Writes a case bundle and its manifest.
    Args:
        - path (str): bundle directory, created when missing
        - volume (VolumeMesh): simulation mesh
        - fields (dict): name -> per-node array (ScalarFields accepted); must include 'transmural'
        - fibres (FibreFrame): one frame per element of `volume`
        - cell_types (ndarray): CellType per node
        - electrodes (ElectrodeSet), variability, scenarios (DataFrame): optional
        - config (PipelineConfig): snapshot stored with the bundle
    Output:
        - bundle (CaseBundle)
    """
    if volume is None or fibres is None or cell_types is None:
        raise MissingArtifact("a bundle needs the mesh, fibres and cell types")
    values = {k: np.asarray(getattr(v, "values", v)) for k, v in fields.items()}
    for name in REQUIRED_FIELDS:
        if name not in values:
            raise MissingArtifact("a bundle needs the %s field" % name)
    if len(fibres) != volume.n_elements:
        raise MissingArtifact("fibres cover %d of %d elements" % (len(fibres), volume.n_elements))
    values["cell_type"] = np.asarray(cell_types, dtype=np.int64)
    for name, v in values.items():
        if v.shape[0] != volume.n_nodes:
            raise ValueError("field %s has %d values for %d nodes" % (name, v.shape[0], volume.n_nodes))
    bundle_config = config.bundle if config is not None else BundleConfig()
    seed = config.seed if config is not None else 0
    snapshot = config.snapshot() if config is not None else ""

    written = []
    try:
        os.makedirs(os.path.join(path, "fields"), exist_ok=True)
        for stale in glob.glob(os.path.join(path, "fields", "*.txt")):
            os.remove(stale)

        def target(name):
            written.append(name)
            return os.path.join(path, name)

        with open(target("config.txt"), "w", newline="\n") as f:
            f.write(snapshot)
        _write_table(target("nodes.txt"), volume.nodes)
        _write_table(target("elements.txt"), volume.elements, fmt="%d")
        _write_table(target("fibres.txt"), fibres.as_array())
        for name in sorted(values):
            _write_table(target("fields/%s.txt" % name), values[name], fmt=_field_format(values[name]))
        if electrodes is not None:
            _write_table(target("electrodes.txt"), electrodes.positions, ids=electrodes.names)
        for name, table in (("variability.csv", variability), ("scenarios.csv", scenarios)):
            if table is not None:
                table.to_csv(target(name), index=False, float_format=FLOAT, lineterminator="\n")
        write_params(target("params.txt"), bundle_config)

        node_fields = {k: v for k, v in values.items() if v.ndim == 1}
        grid = volume.with_fields(node_fields=node_fields, element_fields=fibres.as_element_fields())
        save_mesh(grid, target("mesh.vtk"))

        files = {name: sha256_file(os.path.join(path, name)) for name in sorted(written)}
        with open(os.path.join(path, MANIFEST), "w", newline="\n") as f:
            f.write("# heart_cohorts case bundle\n")
            f.write("version %s\n" % __version__)
            f.write("seed %d\n" % seed)
            for name, digest in files.items():
                f.write("%s  %s\n" % (digest, name))
    except OSError as e:
        raise WriteFailed("cannot write bundle %s: %s" % (path, e), report={"path": path, "written": written})

    logger.info("bundle %s: %d files", path, len(files))
    return CaseBundle(path, files, __version__, seed, snapshot)


def read_manifest(path):
    manifest = os.path.join(path, MANIFEST)
    if not os.path.exists(manifest):
        raise MissingArtifact("%s has no %s" % (path, MANIFEST))
    files, meta = {}, {}
    with open(manifest) as f:
        for line in f:
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if len(parts[0]) == 64 and len(parts) == 2:
                files[parts[1]] = parts[0]
            else:
                meta[parts[0]] = " ".join(parts[1:])
    return files, meta


def verify_bundle(path):
    """
    Recomputes every checksum listed in the manifest.
    Raises ChecksumMismatch naming each missing or altered file.
    """
    files, meta = read_manifest(path)
    bad = []
    for name, digest in files.items():
        file = os.path.join(path, name)
        if not os.path.exists(file) or sha256_file(file) != digest:
            bad.append(name)
    if bad:
        raise ChecksumMismatch(bad)
    seed = int(meta.get("seed", 0))
    config = ""
    if "config.txt" in files:
        with open(os.path.join(path, "config.txt")) as f:
            config = f.read()
    return CaseBundle(path, files, meta.get("version", ""), seed, config)
