"""
Pipeline configuration: one dataclass per concern, aggregated by PipelineConfig and read from
line-oriented `key = value` files (`#` comments, `label.*`/`fields.*`/... section prefixes).
Lengths accept um, mm and cm suffixes and are stored in millimetres.
"""
import logging
import re
from dataclasses import dataclass, field, fields, asdict

from heart_cohorts.errors import ConfigError, InvalidRange
from heart_cohorts.labelling.labels import parse_label

logger = logging.getLogger(__name__)

KINDS = ("full", "cut")
_UNITS = {"um": 1e-3, "mm": 1.0, "cm": 10.0}
_LENGTH = re.compile(r"^([-+0-9.eE]+)\s*(um|mm|cm)$")

DEFAULT_DRUG_DOSES = (0.0, 0.1, 0.2)


def parse_length(text):
    """'1500um' -> 1.5; a bare number is read as millimetres."""
    text = str(text).strip()
    match = _LENGTH.match(text)
    if match:
        return float(match.group(1)) * _UNITS[match.group(2)]
    return float(text)


@dataclass
class ResolutionConfig:
    coarse: float = 1.5
    fine: float = 1.0
    hex: float = 0.4
    extrusion: float = 3.0
    simulation_mesh: str = "hex"

    _lengths = ("coarse", "fine", "hex", "extrusion")

    def validate(self):
        if self.simulation_mesh not in ("hex", "tet"):
            raise ConfigError("mesh.simulation_mesh must be hex or tet, got %r" % self.simulation_mesh)
        for name in self._lengths:
            if not getattr(self, name) > 0:
                raise ConfigError("mesh.%s must be positive" % name)
        return self


@dataclass
class LabelConfig:
    smoothing_iterations: int = 50
    septal_multiplier: float = 1.5
    basal_angle: float = 30.0
    downsample_faces: int = 200000
    cut_start: float = 1.0
    cut_step: float = 0.5
    ring_width: float = 4.0
    hull_scale: float = 1.02
    min_cavity_fraction: float = 0.02
    ring_fraction: float = 0.2
    lid_crease_angle: float = 2.0
    lid_spread: float = 10.0
    lid_flatness: float = 0.25
    lid_min_area: float = 0.002
    seed: int = 0

    _lengths = ("cut_start", "cut_step", "ring_width", "lid_flatness")

    def validate(self):
        for f in fields(self):
            if f.name == "seed":
                continue
            if not getattr(self, f.name) > 0:
                raise ConfigError("label.%s must be positive" % f.name)
        if self.hull_scale <= 1.0:
            raise ConfigError("label.hull_scale must exceed 1")
        return self


@dataclass
class SolverConfig:
    tolerance: float = 1e-10
    max_iterations: int = None
    check_energy: bool = True
    dirichlet: dict = field(default_factory=dict)

    def validate(self):
        if not 0.0 < self.tolerance < 1.0:
            raise ConfigError("fields.tolerance must lie in (0, 1)")
        if self.max_iterations is not None and self.max_iterations <= 0:
            raise ConfigError("fields.max_iterations must be positive")
        return self

    def overrides(self, name):
        """SurfaceLabel -> value overrides for one field."""
        return dict(self.dirichlet.get(name, {}))


@dataclass
class AngleConfig:
    alpha_endo: float = 60.0
    alpha_epi: float = -60.0
    beta_endo: float = 0.0
    beta_epi: float = 0.0
    alpha_endo_rv: float = None
    alpha_epi_rv: float = None
    alpha_endo_septum: float = None
    alpha_epi_septum: float = None
    blend_low: float = 0.4
    blend_high: float = 0.6
    max_sweeps: int = 100

    def validate(self):
        for name in ("alpha_endo", "alpha_epi", "beta_endo", "beta_epi", "alpha_endo_rv", "alpha_epi_rv",
                     "alpha_endo_septum", "alpha_epi_septum"):
            value = getattr(self, name)
            if value is not None and not -90.0 < value <= 90.0:
                raise ConfigError("fibres.%s must lie in (-90, 90], got %r" % (name, value))
        if not 0.0 <= self.blend_low < self.blend_high <= 1.0:
            raise ConfigError("fibres.blend_low < fibres.blend_high must lie in [0, 1]")
        return self

    def region(self, name):
        """(alpha_endo, alpha_epi) for 'lv', 'rv' or 'septum', falling back to the global pair."""
        if name == "lv":
            return self.alpha_endo, self.alpha_epi
        endo = getattr(self, "alpha_endo_%s" % name)
        epi = getattr(self, "alpha_epi_%s" % name)
        return (self.alpha_endo if endo is None else endo), (self.alpha_epi if epi is None else epi)


@dataclass
class BundleConfig:
    endo_threshold: float = 1.0 / 3.0
    epi_threshold: float = 2.0 / 3.0
    fast_layer: float = 1.0
    cv_fibre: float = 0.67
    cv_sheet: float = 0.30
    cv_normal: float = 0.17
    activation_source: str = None
    electrode_template: str = None

    _lengths = ("fast_layer",)

    def validate(self):
        if not 0.0 < self.endo_threshold < self.epi_threshold < 1.0:
            raise ConfigError("bundle thresholds need 0 < endo_threshold < epi_threshold < 1")
        if not self.fast_layer > 0:
            raise ConfigError("bundle.fast_layer must be positive")
        for name in ("cv_fibre", "cv_sheet", "cv_normal"):
            if not getattr(self, name) > 0:
                raise ConfigError("bundle.%s must be positive" % name)
        return self


@dataclass
class VariabilitySpec:
    """Uniform scaling ranges per ionic current; sample 0 is the all-ones control when every range holds 1."""
    ranges: dict = field(default_factory=lambda: {
        "GNa": (0.5, 2.0), "GCaL": (0.5, 2.0), "GKr": (0.5, 2.0),
        "GKs": (0.5, 2.0), "GK1": (0.5, 2.0), "Gto": (0.5, 2.0),
    })
    n_samples: int = 9
    seed: int = 0
    doses: tuple = DEFAULT_DRUG_DOSES
    ic50: dict = field(default_factory=dict)
    hill: dict = field(default_factory=dict)

    def validate(self):
        if self.n_samples < 1:
            raise InvalidRange("variability.n_samples must be at least 1")
        for name, (lo, hi) in self.ranges.items():
            if not 0.0 < lo <= hi:
                raise InvalidRange("scaling range for %s must satisfy 0 < low <= high, got (%r, %r)" % (name, lo, hi))
        for name, value in self.ic50.items():
            if name not in self.ranges:
                raise InvalidRange("IC50 given for unknown current %s" % name)
            if not value > 0:
                raise InvalidRange("IC50 of %s must be positive" % name)
        if any(d < 0 for d in self.doses):
            raise InvalidRange("drug doses must be non-negative")
        return self


_SECTIONS = {
    "mesh": ("resolution", ResolutionConfig),
    "label": ("label", LabelConfig),
    "fields": ("solver", SolverConfig),
    "fibres": ("angles", AngleConfig),
    "bundle": ("bundle", BundleConfig),
}


def _convert(current, text, is_length):
    if is_length:
        return parse_length(text)
    if isinstance(current, bool):
        if text.lower() in ("1", "true", "yes", "on"):
            return True
        if text.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError("not a boolean: %r" % text)
    if isinstance(current, int):
        return int(text)
    if isinstance(current, float):
        return float(text)
    if current is None:
        for cast in (int, float):
            try:
                return cast(text)
            except ValueError:
                pass
        return None if text.lower() == "none" else text
    return text


@dataclass
class PipelineConfig:
    resolution: ResolutionConfig = field(default_factory=ResolutionConfig)
    label: LabelConfig = field(default_factory=LabelConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    angles: AngleConfig = field(default_factory=AngleConfig)
    bundle: BundleConfig = field(default_factory=BundleConfig)
    variability: VariabilitySpec = field(default_factory=VariabilitySpec)
    kind: str = "full"
    seed: int = 0
    out: str = "output"

    def validate(self):
        if self.kind not in KINDS:
            raise ConfigError("kind must be one of %s, got %r" % (KINDS, self.kind))
        for part in (self.resolution, self.label, self.solver, self.angles, self.bundle, self.variability):
            part.validate()
        return self

    @classmethod
    def from_file(cls, path):
        with open(path) as f:
            return cls.from_text(f.read(), source=path)

    @classmethod
    def from_text(cls, text, source="<config>"):
        config = cls()
        for number, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError("%s:%d: expected 'key = value', got %r" % (source, number, raw.strip()),
                                  report={"line": number})
            key, value = (s.strip() for s in line.split("=", 1))
            try:
                config.set(key, value)
            except (ConfigError, ValueError, KeyError) as e:
                raise ConfigError("%s:%d: %s" % (source, number, e), report={"line": number, "key": key})
        return config.validate()

    def set(self, key, value):
        """Applies one `section.name = value` entry (value given as text)."""
        parts = key.split(".")
        if len(parts) == 1:
            if key == "seed":
                self.seed = int(value)
            elif key == "kind":
                self.kind = value
            elif key == "out":
                self.out = value
            else:
                raise ConfigError("unknown key %r" % key)
            return
        section, rest = parts[0], parts[1:]
        if section == "variability":
            self._set_variability(rest, value)
            return
        if section == "fields" and len(rest) == 2:
            label = parse_label(rest[1])
            self.solver.dirichlet.setdefault(rest[0], {})[label] = float(value)
            return
        if section not in _SECTIONS or len(rest) != 1:
            raise ConfigError("unknown key %r" % key)
        attr, _ = _SECTIONS[section]
        target = getattr(self, attr)
        name = rest[0]
        if name.startswith("_") or name not in {f.name for f in fields(target)} or name == "dirichlet":
            raise ConfigError("unknown key %r" % key)
        is_length = name in getattr(target, "_lengths", ())
        setattr(target, name, _convert(getattr(target, name), value, is_length))

    def _set_variability(self, rest, value):
        spec = self.variability
        if rest == ["n_samples"]:
            spec.n_samples = int(value)
        elif rest == ["seed"]:
            spec.seed = int(value)
        elif rest == ["doses"]:
            spec.doses = tuple(float(v) for v in value.split(","))
        elif len(rest) == 2 and rest[0] == "range":
            lo, hi = (float(v) for v in value.split(","))
            spec.ranges[rest[1]] = (lo, hi)
        elif len(rest) == 2 and rest[0] in ("ic50", "hill"):
            getattr(spec, rest[0])[rest[1]] = float(value)
        else:
            raise ConfigError("unknown key %r" % ("variability." + ".".join(rest)))

    def snapshot(self):
        """Canonical sorted `key=value` lines; from_text(snapshot()) gives an equal config."""
        lines = ["kind=%s" % self.kind, "seed=%d" % self.seed, "out=%s" % self.out]
        for section, (attr, _) in _SECTIONS.items():
            target = getattr(self, attr)
            for f in fields(target):
                if f.name == "dirichlet":
                    continue
                lines.append("%s.%s=%s" % (section, f.name, _render(getattr(target, f.name))))
        for name, values in self.solver.dirichlet.items():
            for label, v in values.items():
                lines.append("fields.%s.%s=%s" % (name, label.name, _render(v)))
        spec = self.variability
        lines.append("variability.n_samples=%d" % spec.n_samples)
        lines.append("variability.seed=%d" % spec.seed)
        lines.append("variability.doses=%s" % ",".join(_render(d) for d in spec.doses))
        for name, (lo, hi) in spec.ranges.items():
            lines.append("variability.range.%s=%s,%s" % (name, _render(lo), _render(hi)))
        for kind in ("ic50", "hill"):
            for name, v in getattr(spec, kind).items():
                lines.append("variability.%s.%s=%s" % (kind, name, _render(v)))
        return "\n".join(sorted(lines)) + "\n"

    def as_dict(self):
        return asdict(self)


def _render(value):
    if isinstance(value, float):
        return repr(value)
    if value is None:
        return "none"
    return str(value)
