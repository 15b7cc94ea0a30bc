"""Run configuration: YAML parsing, validation, defaults and normalized dump.

Schema (version 1)::

    schema: 1
    model: echo_closed        # eigensweep | hyperfine | echo_closed | echo_exact
                              # | echo_lindblad | sensitivity | noise_variance
                              # | optimal_angle
    constants: {D_gs: 2870.0, gamma_B: 2.8, gamma_N: 0.4316, A_xx: 3.65, A_zz: 3.03}
    field:
      magnitude: 65           # G
      theta: {start: 89, stop: 91, count: 101}   # deg, inclusive endpoints
    tau: {start: 0, stop: 3, count: 301}         # us
    transition: minus_zero    # or plus_zero
    readout: {fluorescence_F: 100, contrast_C: 0.15, readout_Tr: 300, init_tini: 2}
    noise: {kind: line, angle: -45, gamma: 0.1, amplitude: 1.0}
           # kind: none | line | isotropic | dipolar (u: [ux, uy, uz], DS: G)
    conventional: {eta_Bz_parallel: [300, 800]}  # nT/sqrt(Hz)
    lindblad: {secular: true}
    output: {path: result.csv, format: csv}
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np
import yaml

from .errors import ConfigError
from .hamiltonian import PhysicalConstants
from .sensitivity import ReadoutParams

SCHEMA_VERSION = 1
MODELS = (
    "eigensweep",
    "hyperfine",
    "echo_closed",
    "echo_exact",
    "echo_lindblad",
    "sensitivity",
    "noise_variance",
    "optimal_angle",
)
FORMATS = ("csv", "json")
NOISE_KINDS = ("none", "line", "isotropic", "dipolar")


@dataclass(frozen=True)
class RangeSpec:
    start: float
    stop: float
    count: int = 1

    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.count)

    def to_dict(self):
        return {"start": self.start, "stop": self.stop, "count": self.count}


@dataclass(frozen=True)
class FieldSection:
    magnitude: float
    theta: RangeSpec | None = None

    def to_dict(self):
        out = {"magnitude": self.magnitude}
        if self.theta is not None:
            out["theta"] = self.theta.to_dict()
        return out


@dataclass(frozen=True)
class NoiseSection:
    kind: str = "none"
    angle: float = -45.0
    gamma: float = 0.0
    amplitude: float = 1.0
    u: tuple = (0.0, 0.0, 1.0)
    DS: float = 1.0

    def to_dict(self):
        out = {"kind": self.kind}
        if self.kind == "line":
            out.update(angle=self.angle, gamma=self.gamma, amplitude=self.amplitude)
        elif self.kind == "isotropic":
            out.update(gamma=self.gamma, amplitude=self.amplitude)
        elif self.kind == "dipolar":
            out.update(u=list(self.u), DS=self.DS)
        return out


@dataclass(frozen=True)
class OutputSection:
    path: str | None = None
    format: str = "csv"

    def to_dict(self):
        out = {"format": self.format}
        if self.path is not None:
            out["path"] = self.path
        return out


@dataclass(frozen=True)
class RunConfig:
    model: str
    field: FieldSection
    constants: PhysicalConstants = PhysicalConstants()
    tau: RangeSpec | None = None
    transition: str = "minus_zero"
    readout: ReadoutParams | None = None
    noise: NoiseSection = NoiseSection()
    eta_Bz_parallel: tuple = ()
    secular: bool = True
    output: OutputSection = field(default_factory=OutputSection)
    schema: int = SCHEMA_VERSION

    def to_dict(self) -> dict:
        """Normalized document with every default filled in."""
        out = {
            "schema": self.schema,
            "model": self.model,
            "constants": dataclasses.asdict(self.constants),
            "field": self.field.to_dict(),
            "transition": self.transition,
            "noise": self.noise.to_dict(),
            "conventional": {"eta_Bz_parallel": list(self.eta_Bz_parallel)},
            "lindblad": {"secular": self.secular},
            "output": self.output.to_dict(),
        }
        if self.tau is not None:
            out["tau"] = self.tau.to_dict()
        if self.readout is not None:
            out["readout"] = dataclasses.asdict(self.readout)
        return out


def dump_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=True, default_flow_style=False)


def _check_keys(section: dict, allowed, path: str):
    if not isinstance(section, dict):
        raise ConfigError("expected a mapping", path=path)
    unknown = sorted(set(section) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) {', '.join(unknown)}", path=path)


def _number(value, path, kind=float):
    if isinstance(value, str):
        # YAML 1.1 reads exponents without a dot, e.g. 1e-3, as strings
        try:
            value = float(value)
        except ValueError:
            pass
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"expected a number, got {value!r}", path=path)
    if kind is int:
        if int(value) != value:
            raise ConfigError(f"expected an integer, got {value!r}", path=path)
        return int(value)
    if not np.isfinite(value):
        raise ConfigError("value must be finite", path=path)
    return float(value)


def _range(doc, path) -> RangeSpec:
    _check_keys(doc, ("start", "stop", "count"), path)
    for key in ("start", "stop"):
        if key not in doc:
            raise ConfigError(f"missing '{key}'", path=path)
    start = _number(doc["start"], f"{path}.start")
    stop = _number(doc["stop"], f"{path}.stop")
    count = _number(doc.get("count", 1), f"{path}.count", int)
    if count < 1:
        raise ConfigError("count must be >= 1", path=f"{path}.count")
    if start > stop:
        raise ConfigError("start must be <= stop", path=path)
    return RangeSpec(start, stop, count)


def _constants(doc) -> PhysicalConstants:
    names = [f.name for f in dataclasses.fields(PhysicalConstants)]
    _check_keys(doc, names, "constants")
    values = {k: _number(v, f"constants.{k}") for k, v in doc.items()}
    for k, v in values.items():
        if v <= 0:
            raise ConfigError("must be strictly positive", path=f"constants.{k}")
    return PhysicalConstants(**values)


def _readout(doc) -> ReadoutParams:
    names = [f.name for f in dataclasses.fields(ReadoutParams)]
    _check_keys(doc, names, "readout")
    values = {k: _number(v, f"readout.{k}") for k, v in doc.items()}
    try:
        return ReadoutParams(**values)
    except ValueError as exc:
        raise ConfigError(str(exc), path="readout") from None


def _noise(doc) -> NoiseSection:
    _check_keys(doc, ("kind", "angle", "gamma", "amplitude", "u", "DS"), "noise")
    kind = doc.get("kind", "none")
    if kind not in NOISE_KINDS:
        raise ConfigError(f"kind must be one of {NOISE_KINDS}", path="noise.kind")
    kw = {"kind": kind}
    for key in ("angle", "gamma", "amplitude", "DS"):
        if key in doc:
            kw[key] = _number(doc[key], f"noise.{key}")
    for key in ("gamma", "amplitude", "DS"):
        if kw.get(key, 0.0) < 0:
            raise ConfigError("must be non-negative", path=f"noise.{key}")
    if "u" in doc:
        u = doc["u"]
        if not isinstance(u, (list, tuple)) or len(u) != 3:
            raise ConfigError("u must be a list of three numbers", path="noise.u")
        u = np.array([_number(x, "noise.u") for x in u])
        n = np.linalg.norm(u)
        if n == 0:
            raise ConfigError("u must be non-zero", path="noise.u")
        kw["u"] = tuple(float(x) for x in u / n)
    return NoiseSection(**kw)


_REQUIREMENTS = {
    "eigensweep": ("field.theta",),
    "hyperfine": ("field.theta",),
    "echo_closed": ("field.theta", "tau"),
    "echo_exact": ("field.theta", "tau"),
    "echo_lindblad": ("field.theta", "tau", "noise"),
    "sensitivity": ("field.theta", "tau", "readout"),
    "noise_variance": ("field.theta", "noise"),
    "optimal_angle": ("noise",),
}


def config_from_dict(doc: dict, default_model: str | None = None) -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a mapping")
    _check_keys(
        doc,
        ("schema", "model", "constants", "field", "tau", "transition", "readout", "noise",
         "conventional", "lindblad", "output"),
        "",
    )
    if "schema" not in doc:
        raise ConfigError("missing required 'schema' field", path="schema")
    if doc["schema"] != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema version {doc['schema']!r}", path="schema")
    model = doc.get("model", default_model)
    if model is None:
        raise ConfigError("missing 'model'", path="model")
    if model not in MODELS:
        raise ConfigError(f"model must be one of {MODELS}", path="model")

    if "field" not in doc:
        raise ConfigError("missing 'field' section", path="field")
    fdoc = doc["field"]
    _check_keys(fdoc, ("magnitude", "theta"), "field")
    if "magnitude" not in fdoc:
        raise ConfigError("missing 'magnitude'", path="field.magnitude")
    magnitude = _number(fdoc["magnitude"], "field.magnitude")
    if magnitude < 0:
        raise ConfigError("must be >= 0", path="field.magnitude")
    theta = _range(fdoc["theta"], "field.theta") if "theta" in fdoc else None
    if theta is not None and not (0 <= theta.start and theta.stop <= 180):
        raise ConfigError("angles must lie in [0, 180] deg", path="field.theta")

    tau = _range(doc["tau"], "tau") if "tau" in doc else None
    if tau is not None and tau.start < 0:
        raise ConfigError("tau must be non-negative", path="tau.start")

    transition = doc.get("transition", "minus_zero")
    if transition not in ("minus_zero", "plus_zero"):
        raise ConfigError("must be 'minus_zero' or 'plus_zero'", path="transition")

    conventional = doc.get("conventional", {})
    _check_keys(conventional, ("eta_Bz_parallel",), "conventional")
    eta_bz = conventional.get("eta_Bz_parallel", [])
    if not isinstance(eta_bz, (list, tuple)):
        eta_bz = [eta_bz]
    eta_bz = tuple(_number(x, "conventional.eta_Bz_parallel") for x in eta_bz)

    lind = doc.get("lindblad", {})
    _check_keys(lind, ("secular",), "lindblad")
    secular = lind.get("secular", True)
    if not isinstance(secular, bool):
        raise ConfigError("must be true or false", path="lindblad.secular")

    out = doc.get("output", {})
    _check_keys(out, ("path", "format"), "output")
    fmt = out.get("format", "csv")
    if fmt not in FORMATS:
        raise ConfigError(f"format must be one of {FORMATS}", path="output.format")
    path = out.get("path")
    if path is not None and not isinstance(path, str):
        raise ConfigError("must be a string", path="output.path")

    cfg = RunConfig(
        model=model,
        field=FieldSection(magnitude, theta),
        constants=_constants(doc.get("constants", {})),
        tau=tau,
        transition=transition,
        readout=_readout(doc["readout"]) if "readout" in doc else None,
        noise=_noise(doc["noise"]) if "noise" in doc else NoiseSection(),
        eta_Bz_parallel=eta_bz,
        secular=secular,
        output=OutputSection(path, fmt),
    )
    _validate_model(cfg, doc)
    return cfg


def _validate_model(cfg: RunConfig, doc: dict):
    for req in _REQUIREMENTS[cfg.model]:
        if req == "field.theta" and cfg.field.theta is None:
            raise ConfigError(f"model '{cfg.model}' requires a theta range", path="field.theta")
        if req == "tau" and cfg.tau is None:
            raise ConfigError(f"model '{cfg.model}' requires a 'tau' section", path="tau")
        if req == "readout" and cfg.readout is None:
            raise ConfigError(f"model '{cfg.model}' requires a 'readout' section", path="readout")
        if req == "noise" and "noise" not in doc:
            raise ConfigError(f"model '{cfg.model}' requires a 'noise' section", path="noise")
    kind = cfg.noise.kind
    if cfg.model == "echo_lindblad" and kind == "dipolar":
        raise ConfigError("dipolar noise has no collapse-operator form", path="noise.kind")
    if cfg.model in ("noise_variance", "optimal_angle") and kind == "none":
        raise ConfigError(f"model '{cfg.model}' needs a noise kind other than 'none'", path="noise.kind")


def parse_config(text: str, default_model: str | None = None) -> RunConfig:
    """Parse a YAML document into a validated :class:`RunConfig`."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        col = mark.column + 1 if mark is not None else None
        problem = getattr(exc, "problem", None) or str(exc)
        raise ConfigError(f"YAML parse error: {problem}", line=line, column=col) from None
    if doc is None:
        doc = {}
    return config_from_dict(doc, default_model)


def apply_overrides(doc: dict, overrides) -> dict:
    """Apply ``key.sub=value`` overrides (values parsed as YAML scalars)."""
    doc = dict(doc or {})
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, raw = item.split("=", 1)
        try:
            value = yaml.safe_load(raw)
        except yaml.YAMLError:
            raise ConfigError(f"cannot parse value {raw!r}", path=key) from None
        node = doc
        parts = key.strip().split(".")
        for part in parts[:-1]:
            child = node.get(part)
            if not isinstance(child, dict):
                child = {}
            child = dict(child)
            node[part] = child
            node = child
        node[parts[-1]] = value
    return doc
