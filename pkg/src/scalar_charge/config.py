"""Run configuration: a versioned JSON document, validated against a schema."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import jsonschema

from .dynamics import ParticleParams
from .errors import ConfigError
from .profiles import KINDS, TARGETS, ProfileComponent, RadiationProfile

SCHEMA_VERSION = 1

_number = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_pos_list = {"type": "array", "items": _pos}

SCHEMA = {
    "type": "object",
    "required": ["schema_version", "particle", "integrator"],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "name": {"type": "string"},
        "particle": {
            "type": "object",
            "required": ["bare_mass", "charge"],
            "additionalProperties": False,
            "properties": {"bare_mass": _number, "charge": _number},
        },
        "radiation": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "components": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["target", "center", "half_width", "amplitude"],
                        "additionalProperties": False,
                        "properties": {
                            "kind": {"enum": list(KINDS)},
                            "target": {"enum": list(TARGETS)},
                            "center": _number,
                            "half_width": _number,
                            "amplitude": _number,
                        },
                    },
                }
            },
        },
        "integrator": {
            "type": "object",
            "required": ["t_end"],
            "additionalProperties": False,
            "properties": {"t_end": _number, "tolerance": _pos, "max_step": _pos},
        },
        "picard": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "enabled": {"type": "boolean"},
                "horizon": _pos,
                "gamma_factor": _pos,
                "tol": _pos,
                "sup_tol": _pos,
                "max_iter": {"type": "integer", "minimum": 1},
                "grid_nodes": {"type": "integer", "minimum": 2},
            },
        },
        "verify": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "windows": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["start", "length"],
                        "additionalProperties": False,
                        "properties": {
                            "start": {"oneOf": [{"type": "number", "minimum": 0}, {"const": "exit"}]},
                            "length": _pos,
                        },
                    },
                },
                "epsilons": _pos_list,
                "force_samples": {"type": "integer", "minimum": 1},
                "decay": {"type": "boolean"},
            },
        },
        "snapshot": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "times": {"type": "array", "items": {"type": "number", "minimum": 0}},
                "x_min": _number,
                "x_max": _number,
                "points": {"type": "integer", "minimum": 2},
            },
        },
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "charge": {"type": "array", "items": _number, "minItems": 1},
                "bare_mass": {"type": "array", "items": _number, "minItems": 1},
                "amplitude_scale": {"type": "array", "items": _number, "minItems": 1},
                "workers": {"type": "integer", "minimum": 1},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "directory": {"type": "string"},
                "formats": {"type": "array", "items": {"enum": ["csv", "json"]}},
            },
        },
    },
}


@dataclass
class IntegratorConfig:
    t_end: float
    tolerance: float = 1e-10
    max_step: float = 0.1


@dataclass
class PicardConfig:
    enabled: bool = False
    horizon: float = 20.0
    gamma_factor: float = 2.0
    tol: float = 1e-9
    sup_tol: float = 1e-9
    max_iter: int = 200
    grid_nodes: int = 4096


@dataclass
class WindowConfig:
    start: float | str
    length: float


@dataclass
class VerifyConfig:
    windows: list[WindowConfig] = field(default_factory=lambda: [WindowConfig(0.0, 5.0),
                                                                 WindowConfig("exit", 5.0)])
    epsilons: list[float] = field(default_factory=lambda: [0.2, 0.1, 0.05, 0.025])
    force_samples: int = 50
    decay: bool = True


@dataclass
class SnapshotConfig:
    times: list[float] = field(default_factory=lambda: [0.0])
    x_min: float = -10.0
    x_max: float = 10.0
    points: int = 200


@dataclass
class SweepConfig:
    charge: list[float] | None = None
    bare_mass: list[float] | None = None
    amplitude_scale: list[float] | None = None
    workers: int = 1


@dataclass
class OutputConfig:
    directory: str = "out"
    formats: list[str] = field(default_factory=lambda: ["csv", "json"])


@dataclass
class RunConfig:
    particle: ParticleParams
    radiation: RadiationProfile
    integrator: IntegratorConfig
    picard: PicardConfig = field(default_factory=PicardConfig)
    verify: VerifyConfig = field(default_factory=VerifyConfig)
    snapshot: SnapshotConfig = field(default_factory=SnapshotConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    name: str = "run"

    def to_dict(self) -> dict:
        sweep = {k: v for k, v in asdict(self.sweep).items() if v is not None}
        return {
            "schema_version": SCHEMA_VERSION,
            "name": self.name,
            "particle": {"bare_mass": self.particle.bare_mass, "charge": self.particle.charge},
            "radiation": {"components": [asdict(c) for c in self.radiation.components]},
            "integrator": asdict(self.integrator),
            "picard": asdict(self.picard),
            "verify": asdict(self.verify),
            "snapshot": asdict(self.snapshot),
            "sweep": sweep,
            "output": asdict(self.output),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def parse_config(doc: dict) -> RunConfig:
    """Validate ``doc`` and build a :class:`RunConfig`; raises :class:`ConfigError`."""
    try:
        jsonschema.validate(doc, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"schema violation at {where}: {exc.message}") from None
    try:
        particle = ParticleParams(**doc["particle"])
        comps = doc.get("radiation", {}).get("components", [])
        radiation = RadiationProfile(tuple(ProfileComponent(**c) for c in comps))
        integrator = IntegratorConfig(**doc["integrator"])
        if not integrator.t_end > 0:
            raise ValueError("integrator.t_end must be > 0")
        verify_doc = dict(doc.get("verify", {}))
        if "windows" in verify_doc:
            verify_doc["windows"] = [WindowConfig(**w) for w in verify_doc["windows"]]
        snapshot = SnapshotConfig(**doc.get("snapshot", {}))
        if not snapshot.x_max > snapshot.x_min:
            raise ValueError("snapshot.x_max must exceed snapshot.x_min")
        return RunConfig(
            particle=particle,
            radiation=radiation,
            integrator=integrator,
            picard=PicardConfig(**doc.get("picard", {})),
            verify=VerifyConfig(**verify_doc),
            snapshot=snapshot,
            sweep=SweepConfig(**doc.get("sweep", {})),
            output=OutputConfig(**doc.get("output", {})),
            name=doc.get("name", "run"),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> RunConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(doc)
