"""Simulation configuration: the flat ``key = value`` file format and ``SimConfig``."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, Optional

from .errors import ConfigError, InvalidConfigError
from .models import (
    Approximation,
    ConvolutionMethod,
    Formulation,
    ModeLattice,
    ParticleParams,
    UnitsConfig,
    Vector3,
    build_lattice,
)
from .stochastic import InitialModeDist, InitialModeKind, NoiseConfig
from .trajectory import TimeGrid

logger = logging.getLogger(__name__)

ECHO_NAME = "config.echo"
SEED_LIMIT = 2**64


@dataclass(slots=True, frozen=True)
class LatticeConfig:
    """Box side L, lattice radius n_max and an optional mode cap (0 keeps all)."""

    box_length: float = 2.0 * math.pi
    n_max: int = 1
    max_modes: int = 0

    def __post_init__(self) -> None:
        if not (self.box_length > 0 and math.isfinite(self.box_length)):
            raise InvalidConfigError(f"box_length must be > 0, got {self.box_length!r}")
        if self.n_max < 1:
            raise InvalidConfigError(f"n_max must be >= 1, got {self.n_max!r}")
        if self.max_modes < 0:
            raise InvalidConfigError(f"max_modes must be >= 0, got {self.max_modes!r}")


@dataclass(slots=True, frozen=True)
class SimConfig:
    units: UnitsConfig = field(default_factory=UnitsConfig)
    particle: ParticleParams = field(default_factory=ParticleParams)
    lattice: LatticeConfig = field(default_factory=LatticeConfig)
    approx: Approximation = Approximation.DIPOLE
    formulation: Formulation = Formulation.LOCAL
    convolution: ConvolutionMethod = ConvolutionMethod.INCREMENTAL
    grid: TimeGrid = field(default_factory=TimeGrid)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    initial_dist: InitialModeDist = field(default_factory=lambda: InitialModeDist(InitialModeKind.VACUUM))
    x0: Vector3 = (0.0, 0.0, 0.0)
    p0: Vector3 = (1.0, 0.0, 0.0)
    n_trajectories: int = 1
    master_seed: int = 0
    kernel_horizon: float = 0.0
    loglog: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "approx", Approximation.from_value(self.approx))
        object.__setattr__(self, "formulation", Formulation.from_value(self.formulation))
        object.__setattr__(self, "convolution", ConvolutionMethod.from_value(self.convolution))
        if self.formulation is Formulation.REDUCED and self.approx is not Approximation.QUADRUPOLE:
            raise InvalidConfigError("the reduced formulation requires the quadrupole approximation")
        if self.n_trajectories < 1:
            raise InvalidConfigError(f"n_trajectories must be >= 1, got {self.n_trajectories}")
        if not 0 <= self.master_seed < SEED_LIMIT:
            raise InvalidConfigError(f"master_seed must fit in 64 bits, got {self.master_seed}")

    def build_lattice(self) -> ModeLattice:
        lattice = build_lattice(self.lattice.box_length, self.lattice.n_max, self.units, self.particle)
        if 0 < self.lattice.max_modes < lattice.n_modes:
            logger.warning(
                "Truncating lattice to the first %s of %s modes (diagnostic only)",
                self.lattice.max_modes,
                lattice.n_modes,
            )
            lattice = lattice.truncated(self.lattice.max_modes)
        return lattice

    def horizon(self, lattice: ModeLattice) -> float:
        """Memory-metric horizon; 10/ω_min unless set explicitly."""

        return self.kernel_horizon if self.kernel_horizon > 0 else 10.0 / lattice.omega_min

    @property
    def noise_applies(self) -> bool:
        if not self.noise.active:
            return False
        return self.approx is Approximation.DIPOLE or self.noise.in_quadrupole


# -- value parsers ------------------------------------------------------------


def _parse_float(text: str) -> float:
    value = float(text)
    if not math.isfinite(value):
        raise ValueError("value must be finite")
    return value


def _parse_int(text: str) -> int:
    return int(text, 10)


def _parse_bool(text: str) -> bool:
    normalized = text.strip().lower()
    if normalized in {"true", "yes", "on", "1"}:
        return True
    if normalized in {"false", "no", "off", "0"}:
        return False
    raise ValueError(f"expected true or false, got {text!r}")


def _parse_vector(text: str) -> Vector3:
    parts = [part.strip() for part in text.split(",")]
    if len(parts) != 3:
        raise ValueError(f"expected three comma-separated numbers, got {text!r}")
    x, y, z = (_parse_float(part) for part in parts)
    return (x, y, z)


def _choice(enum_type) -> Callable[[str], Any]:
    def parse(text: str):
        return enum_type.from_value(text)

    return parse


def _format(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(repr(float(part)) for part in value)
    if hasattr(value, "value"):
        return str(value.value)
    return str(value)


@dataclass(slots=True, frozen=True)
class _Key:
    parse: Callable[[str], Any]
    default: Any
    check: Optional[Callable[[Any], bool]] = None
    requirement: str = ""


_KEYS: Dict[str, _Key] = {
    "units.hbar": _Key(_parse_float, 1.0, lambda v: v > 0, "must be > 0"),
    "units.c": _Key(_parse_float, 1.0, lambda v: v > 0, "must be > 0"),
    "particle.mass": _Key(_parse_float, 1.0, lambda v: v > 0, "must be > 0"),
    "particle.charge": _Key(_parse_float, 1.0),
    "particle.coupling_scale": _Key(_parse_float, 1.0, lambda v: v >= 0, "must be >= 0"),
    "lattice.box_length": _Key(_parse_float, 2.0 * math.pi, lambda v: v > 0, "must be > 0"),
    "lattice.n_max": _Key(_parse_int, 1, lambda v: v >= 1, "must be an integer >= 1"),
    "lattice.max_modes": _Key(_parse_int, 0, lambda v: v >= 0, "must be >= 0 (0 keeps all modes)"),
    "dynamics.approx": _Key(_choice(Approximation), Approximation.DIPOLE),
    "dynamics.formulation": _Key(_choice(Formulation), Formulation.LOCAL),
    "dynamics.convolution": _Key(_choice(ConvolutionMethod), ConvolutionMethod.INCREMENTAL),
    "grid.t0": _Key(_parse_float, 0.0),
    "grid.dt": _Key(_parse_float, 0.01, lambda v: v > 0, "must be > 0"),
    "grid.n_steps": _Key(_parse_int, 1000, lambda v: v >= 1, "must be an integer >= 1"),
    "noise.enabled": _Key(_parse_bool, False),
    "noise.sigma": _Key(_parse_float, 0.0, lambda v: v >= 0, "must be >= 0"),
    "noise.tau_c": _Key(_parse_float, 1.0, lambda v: v > 0, "must be > 0"),
    "noise.in_quadrupole": _Key(_parse_bool, False),
    "initial.kind": _Key(_choice(InitialModeKind), InitialModeKind.VACUUM),
    "initial.temperature": _Key(_parse_float, 1.0, lambda v: v >= 0, "must be >= 0"),
    "initial.occupation": _Key(_parse_float, 0.0, lambda v: v >= 0, "must be >= 0"),
    "initial.x0": _Key(_parse_vector, (0.0, 0.0, 0.0)),
    "initial.p0": _Key(_parse_vector, (1.0, 0.0, 0.0)),
    "ensemble.n_trajectories": _Key(_parse_int, 1, lambda v: v >= 1, "must be an integer >= 1"),
    "ensemble.master_seed": _Key(_parse_int, 0, lambda v: 0 <= v < SEED_LIMIT, "must be in [0, 2**64)"),
    "kernel.horizon": _Key(_parse_float, 0.0, lambda v: v >= 0, "must be >= 0 (0 means 10/omega_min)"),
    "output.loglog": _Key(_parse_bool, True),
}


def _build(values: Dict[str, Any]) -> SimConfig:
    return SimConfig(
        units=UnitsConfig(values["units.hbar"], values["units.c"]),
        particle=ParticleParams(
            values["particle.mass"], values["particle.charge"], values["particle.coupling_scale"]
        ),
        lattice=LatticeConfig(values["lattice.box_length"], values["lattice.n_max"], values["lattice.max_modes"]),
        approx=values["dynamics.approx"],
        formulation=values["dynamics.formulation"],
        convolution=values["dynamics.convolution"],
        grid=TimeGrid(values["grid.t0"], values["grid.dt"], values["grid.n_steps"]),
        noise=NoiseConfig(
            values["noise.sigma"], values["noise.tau_c"], values["noise.enabled"], values["noise.in_quadrupole"]
        ),
        initial_dist=InitialModeDist(
            values["initial.kind"], values["initial.temperature"], values["initial.occupation"]
        ),
        x0=values["initial.x0"],
        p0=values["initial.p0"],
        n_trajectories=values["ensemble.n_trajectories"],
        master_seed=values["ensemble.master_seed"],
        kernel_horizon=values["kernel.horizon"],
        loglog=values["output.loglog"],
    )


def parse_config_text(text: str) -> SimConfig:
    values = {key: entry.default for key, entry in _KEYS.items()}
    lines: Dict[str, int] = {}

    for number, raw in enumerate(text.splitlines(), start=1):
        content = raw.split("#", 1)[0].strip()
        if not content:
            continue
        if "=" not in content:
            raise ConfigError("expected `key = value`", line=number)
        key, _, value_text = (part.strip() for part in content.partition("="))
        entry = _KEYS.get(key)
        if entry is None:
            raise ConfigError("unknown key", key=key, line=number)
        if key in lines:
            raise ConfigError(f"duplicate key (first set on line {lines[key]})", key=key, line=number)
        try:
            value = entry.parse(value_text)
        except (ValueError, InvalidConfigError) as exc:
            raise ConfigError(f"invalid value {value_text!r}: {exc}", key=key, line=number) from exc
        if entry.check is not None and not entry.check(value):
            raise ConfigError(f"{value_text!r} {entry.requirement}", key=key, line=number)
        values[key] = value
        lines[key] = number

    try:
        return _build(values)
    except InvalidConfigError as exc:
        key = "dynamics.formulation"
        raise ConfigError(str(exc), key=key, line=lines.get(key)) from exc


def parse_config(path: Path | str) -> SimConfig:
    """Read a config file; missing keys take their defaults, unknown keys are rejected."""

    path = Path(path)
    text = path.read_text(encoding="utf-8")
    config = parse_config_text(text)
    logger.debug("Parsed config %s", path)
    return config


def _flatten(config: SimConfig) -> Dict[str, Any]:
    return {
        "units.hbar": config.units.hbar,
        "units.c": config.units.c,
        "particle.mass": config.particle.mass,
        "particle.charge": config.particle.charge,
        "particle.coupling_scale": config.particle.coupling_scale,
        "lattice.box_length": config.lattice.box_length,
        "lattice.n_max": config.lattice.n_max,
        "lattice.max_modes": config.lattice.max_modes,
        "dynamics.approx": config.approx,
        "dynamics.formulation": config.formulation,
        "dynamics.convolution": config.convolution,
        "grid.t0": config.grid.t0,
        "grid.dt": config.grid.dt,
        "grid.n_steps": config.grid.n_steps,
        "noise.enabled": config.noise.enabled,
        "noise.sigma": config.noise.sigma,
        "noise.tau_c": config.noise.tau_c,
        "noise.in_quadrupole": config.noise.in_quadrupole,
        "initial.kind": config.initial_dist.kind,
        "initial.temperature": config.initial_dist.temperature,
        "initial.occupation": config.initial_dist.occupation,
        "initial.x0": config.x0,
        "initial.p0": config.p0,
        "ensemble.n_trajectories": config.n_trajectories,
        "ensemble.master_seed": config.master_seed,
        "kernel.horizon": config.kernel_horizon,
        "output.loglog": config.loglog,
    }


def render_config(config: SimConfig) -> str:
    """Effective configuration as config text; ``parse_config_text`` reproduces ``config``."""

    flat = _flatten(config)
    lines = ["# effective configuration"]
    section = None
    for key in _KEYS:
        prefix = key.split(".", 1)[0]
        if prefix != section:
            if section is not None:
                lines.append("")
            section = prefix
        lines.append(f"{key} = {_format(flat[key])}")
    return "\n".join(lines) + "\n"


def config_dict(config: SimConfig) -> Dict[str, Any]:
    """JSON-friendly flat mapping of every key."""

    result: Dict[str, Any] = {}
    for key, value in _flatten(config).items():
        if hasattr(value, "value"):
            value = value.value
        elif isinstance(value, tuple):
            value = list(value)
        result[key] = value
    return result


class ConfigManager:
    """Load a config file and write its effective echo next to run outputs."""

    def __init__(self, path: Path | None = None) -> None:
        self.path = path
        self.config = SimConfig()

    def load(self) -> SimConfig:
        if self.path is None:
            self.config = SimConfig()
        else:
            self.config = parse_config(self.path)
        return self.config

    def save(self, directory: Path, config: SimConfig | None = None) -> Path:
        config = config or self.config
        self.config = config
        directory.mkdir(parents=True, exist_ok=True)
        target = directory / ECHO_NAME
        target.write_text(render_config(config), encoding="utf-8")
        return target


__all__ = [
    "ECHO_NAME",
    "LatticeConfig",
    "SimConfig",
    "ConfigManager",
    "parse_config",
    "parse_config_text",
    "render_config",
    "config_dict",
]
