"""
Experiment configuration: TOML in, validated pydantic sections out.

Every section forbids unknown keys, and quantities carrying units are converted at this
boundary (see :mod:`config.units`). The experiment kind decides which sections are required;
all are checked before anything is computed.
"""

import logging
import math

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, ValidationError, model_validator
from typing_extensions import Annotated

from exciton_control.errors import ConfigError

from .units import parse_quantity

logger = logging.getLogger(__name__)


def _unit(kind: str):
    return BeforeValidator(lambda v: parse_quantity(v, kind))


Frequency = Annotated[float, _unit("frequency")]
Length = Annotated[float, _unit("length")]
Time = Annotated[float, _unit("time")]
ElectricField = Annotated[float, _unit("field")]
Intensity = Annotated[float, _unit("intensity")]
Angle = Annotated[float, _unit("angle")]
Dipole = Annotated[float, _unit("dipole")]
Polarizability = Annotated[float, _unit("polarizability")]

EXPERIMENT_KINDS = ("dispersion", "kick", "focus1d", "focus2d", "steer", "vacancy_scan", "block_focus")

# Sections each experiment kind needs
REQUIRED_SECTIONS: Dict[str, Tuple[str, ...]] = {
    "dispersion": ("lattice", "coupling", "dispersion"),
    "kick": ("lattice", "coupling", "initial_state", "time"),
    "focus1d": ("lattice", "coupling", "initial_state", "time", "protocol"),
    "focus2d": ("lattice", "coupling", "initial_state", "time", "protocol"),
    "steer": ("lattice", "coupling", "initial_state", "time", "steering"),
    "vacancy_scan": ("lattice", "coupling", "initial_state", "protocol", "ensemble"),
    "block_focus": ("lattice", "coupling", "ensemble"),
}


class Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class LatticeSection(Section):
    dim: Literal[1, 2]
    extent: Union[int, List[int]]
    lattice_constant: Length = Field(gt=0)

    @model_validator(mode="after")
    def _extent_matches(self):
        if isinstance(self.extent, list) and len(self.extent) != self.dim:
            raise ValueError(f"extent {self.extent} needs {self.dim} entries")
        return self


class DisorderSection(Section):
    vacancy_fraction: float = Field(0.0, ge=0.0, lt=1.0)
    seed: Optional[int] = None
    mask_file: Optional[str] = None


class CouplingSection(Section):
    kind: Literal["nearest_neighbor", "dipolar"]
    alpha: Frequency
    site_energy: Frequency = 0.0
    theta: Angle = math.pi / 2
    phi: Angle = 0.0
    truncation: float = Field(math.inf, ge=1.0)
    gauge: bool = False


class InitialStateSection(Section):
    kind: Literal["gaussian", "eigenstate", "single_site", "bessel", "uniform"]
    center: Optional[List[float]] = None
    width: Optional[Length] = Field(None, gt=0)
    carrier_ak: List[float] = Field(default_factory=lambda: [0.0])
    site: Optional[List[int]] = None
    lead_time: Optional[Time] = Field(None, ge=0)

    @model_validator(mode="after")
    def _kind_fields(self):
        needs = {
            "gaussian": ("center", "width"),
            "single_site": ("site",),
            "bessel": ("site", "lead_time"),
        }.get(self.kind, ())
        missing = [name for name in needs if getattr(self, name) is None]
        if missing:
            raise ValueError(f"initial_state kind '{self.kind}' needs {', '.join(missing)}")
        return self


class TimeSection(Section):
    duration: Time = Field(gt=0)
    samples: int = Field(100, ge=1)
    snapshot_stride: int = Field(10, ge=1)
    tolerance: float = Field(1e-9, gt=0)
    method: Literal["auto", "dense", "krylov"] = "auto"


class ProtocolSection(Section):
    kind: Literal["linear_kick", "quadratic_lens", "field_schedule"]
    delta_ak: Optional[List[float]] = None
    phi0: Union[float, Literal["optimal"], None] = None
    target: Optional[List[float]] = None
    apply_at: Time = 0.0
    realization: Literal["mask", "pulse"] = "mask"
    pulse_duration: Optional[Time] = Field(None, gt=0)
    envelope: Literal["sin2", "sin4", "square"] = "sin2"

    @model_validator(mode="after")
    def _kind_fields(self):
        if self.kind == "linear_kick" and self.delta_ak is None:
            raise ValueError("protocol kind 'linear_kick' needs delta_ak")
        if self.kind == "quadratic_lens" and (self.phi0 is None or self.target is None):
            raise ValueError("protocol kind 'quadratic_lens' needs phi0 and target")
        if self.realization == "pulse" and self.kind != "field_schedule" and self.pulse_duration is None:
            raise ValueError("realization 'pulse' needs pulse_duration")
        return self


class FieldSection(Section):
    pulse: Literal["dc_gradient", "gaussian_beam"]
    dc_field: ElectricField = 0.0
    gradient: ElectricField = 0.0               # A, field change per site
    theta: Angle = math.pi / 2
    phi: Angle = 0.0
    intensity: Intensity = Field(0.0, ge=0)
    waist: Optional[Length] = Field(None, gt=0)
    wavelength: Optional[Length] = Field(None, gt=0)
    beam_offset: Length = 0.0
    beam_profile: Literal["linear", "axial", "quadratic", "transverse"] = "linear"
    rotational_constant: Optional[Frequency] = Field(None, gt=0)
    dipole_moment: Optional[Dipole] = Field(None, gt=0)
    alpha_parallel: Polarizability = 0.0
    alpha_perpendicular: Polarizability = 0.0
    transition_dipole: Optional[Dipole] = None
    detuning: Optional[Frequency] = None
    start: Time = 0.0
    duration: Time = Field(gt=0)
    center: Optional[List[float]] = None


class Breakpoint(Section):
    time: Time
    theta: Angle
    phi: Angle = 0.0


class SteeringSection(Section):
    breakpoints: List[Breakpoint] = Field(min_length=1)
    ramp_slices: int = Field(0, ge=0)
    samples_per_epoch: int = Field(10, ge=1)


class DispersionSection(Section):
    thetas: List[Angle] = Field(default_factory=lambda: [math.pi / 2])
    n_k: int = Field(201, ge=2)
    ring_check: bool = True


class EnsembleSection(Section):
    n_realizations: int = Field(48, ge=1)
    vacancy_fractions: List[float] = Field(min_length=1)
    target: Optional[List[int]] = None
    focus_time: Union[Literal["clean_scan", "predicted"], Time] = "clean_scan"
    block_shape: Optional[List[int]] = None
    horizon: Optional[Time] = Field(None, gt=0)
    initial: Literal["uniform", "state"] = "uniform"
    jobs: Optional[int] = Field(None, ge=1)

    @model_validator(mode="after")
    def _fractions(self):
        bad = [f for f in self.vacancy_fractions if not 0.0 <= f < 1.0]
        if bad:
            raise ValueError(f"vacancy_fractions must lie in [0, 1), got {bad}")
        return self


class OutputSection(Section):
    dir: str = "results"
    state_dumps: bool = True
    triplets: bool = False


class ExperimentConfig(Section):
    kind: Literal[EXPERIMENT_KINDS]
    name: str = "experiment"
    description: str = ""
    seed: int = 0
    lattice: Optional[LatticeSection] = None
    disorder: DisorderSection = DisorderSection()
    coupling: Optional[CouplingSection] = None
    initial_state: Optional[InitialStateSection] = None
    time: Optional[TimeSection] = None
    protocol: Optional[ProtocolSection] = None
    field: Optional[FieldSection] = None
    steering: Optional[SteeringSection] = None
    dispersion: Optional[DispersionSection] = None
    ensemble: Optional[EnsembleSection] = None
    output: OutputSection = OutputSection()

    @model_validator(mode="after")
    def _required_sections(self):
        missing = [s for s in REQUIRED_SECTIONS[self.kind] if getattr(self, s) is None]
        if missing:
            raise ValueError(f"experiment kind '{self.kind}' needs section(s): {', '.join(missing)}")
        if self.kind == "focus1d" and self.lattice.dim != 1:
            raise ValueError("focus1d needs lattice.dim = 1")
        if self.kind == "focus2d" and self.lattice.dim != 2:
            raise ValueError("focus2d needs lattice.dim = 2")
        if self.kind in ("focus1d", "focus2d", "vacancy_scan") and self.protocol.kind != "quadratic_lens":
            raise ValueError(f"experiment kind '{self.kind}' needs protocol.kind = 'quadratic_lens'")
        if self.kind == "kick" and self.protocol is None and self.field is None:
            raise ValueError("experiment kind 'kick' needs a protocol or a field section")
        if self.kind == "block_focus" and (self.ensemble.block_shape is None or self.ensemble.horizon is None):
            raise ValueError("block_focus needs ensemble.block_shape and ensemble.horizon")
        return self


def format_validation_error(exc: ValidationError) -> str:
    """One line per problem: dotted key path and message."""
    lines = []
    for err in exc.errors():
        key = ".".join(str(p) for p in err["loc"]) or "<root>"
        lines.append(f"{key}: {err['msg']}")
    return "\n".join(lines)


def validate_config(raw: Dict[str, Any]) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(f"invalid configuration:\n{format_validation_error(exc)}") from exc


def merge_onto_preset(preset: Dict[str, Any], user: Dict[str, Any], path: str = "") -> Dict[str, Any]:
    """User keys are added to the preset; a user value differing from a preset value is an error."""
    merged = dict(preset)
    for key, value in user.items():
        dotted = f"{path}{key}"
        if key not in preset:
            merged[key] = value
        elif isinstance(preset[key], dict) and isinstance(value, dict):
            merged[key] = merge_onto_preset(preset[key], value, dotted + ".")
        elif preset[key] != value:
            raise ConfigError(f"{dotted}: {value!r} conflicts with preset value {preset[key]!r}")
    return merged


def read_toml(path: Union[str, Path]) -> Dict[str, Any]:
    path = Path(path)
    try:
        with path.open("rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def load_config(path: Optional[Union[str, Path]] = None, preset: Optional[str] = None,
                overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    """
    Read a TOML file and/or a named preset. A file may itself name a preset with a
    top-level ``preset = "beam_kick"`` key. ``overrides`` (explicit command-line values) win.
    """
    from .presets import get_preset

    raw: Dict[str, Any] = read_toml(path) if path is not None else {}
    named = raw.pop("preset", None)
    if preset is not None and named is not None and named != preset:
        raise ConfigError(f"preset: file names '{named}' but '{preset}' was requested")
    preset = preset or named
    if preset is not None:
        raw = merge_onto_preset(get_preset(preset), raw)
        logger.info(f"Using preset '{preset}'")
    for dotted, value in (overrides or {}).items():
        section = raw
        *parents, leaf = dotted.split(".")
        for name in parents:
            section = section.setdefault(name, {})
        section[leaf] = value
    return validate_config(raw)
