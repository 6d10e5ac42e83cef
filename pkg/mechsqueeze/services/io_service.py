"""
Scenario files (TOML) in, sweep results (CSV / JSON) out.

Scenario files use Hz for frequencies and rates, K, kg, W and m otherwise.
Every scenario kind has a preset; the file only needs what differs from it.
"""
import copy
import logging

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Dict, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import ValidationError

from mechsqueeze import config
from mechsqueeze.exceptions import ConfigError, SqueezeError
from mechsqueeze.models import SweepResult
from mechsqueeze.schemas import (
    FREQUENCY_AXES,
    ConfigFile,
    CouplingDrive,
    PowerDrive,
    Scenario,
    ScenarioKind,
    SqueezingSpec,
    SweepAxis,
    SystemParams,
)
from mechsqueeze.services.squeezing_service import from_components, nm_to_opo, opo_to_nm
from mechsqueeze.services.sweep_service import rescale_eta

logger = logging.getLogger(__name__)

TWO_PI = 2 * np.pi

CSV_COLUMNS = [
    "axis",
    "method",
    "V_min",
    "V_max",
    "phi_star_rad",
    "squeeze_db",
    "occupancy",
    "micromotion_pp",
    "stable",
]

# Operating point shared by the fig3 presets
FIG3_SYSTEM: Dict[str, Any] = {
    "mechanical_frequency": 1.0e6,
    "mass": 1.0e-12,
    "kappa": 380.0e3,
    "temperature": 0.1,
    "quality_factor": 1.0e7,
    "G": 110.0e3,
}

# Squashing estimate; its quoted occupancy needs Q = omega_m0 / gamma_m
SQUASHING_SYSTEM: Dict[str, Any] = {
    "mechanical_frequency": 1.0e6,
    "mass": 1.0e-11,
    "kappa": 125.0e3,
    "temperature": 4.0,
    "quality_factor": 1.0e7,
    "q_convention": "linewidth",
    "G": 21.0e3,
}

WHITE_SQUEEZING: Dict[str, Any] = {"db": 6.0, "b_x_norm": config.WHITE_BANDWIDTH_FACTOR}

PRESETS: Dict[ScenarioKind, Dict[str, Dict[str, Any]]] = {
    ScenarioKind.FIG3A: {
        "system": FIG3_SYSTEM,
        "squeezing": WHITE_SQUEEZING,
        "scenario": {
            "axis": {"name": "input_db", "start": 0.0, "stop": 10.0, "points": 11},
            "methods": ["analytic_rsl", "analytic_white", "analytic_finite_bw", "exact"],
        },
    },
    ScenarioKind.FIG3B: {
        "system": FIG3_SYSTEM,
        "squeezing": WHITE_SQUEEZING,
        "scenario": {
            "axis": {"name": "delta_norm", "start": -5.0, "stop": 5.0, "points": 21},
            "methods": ["exact"],
        },
    },
    ScenarioKind.FIG3C: {
        "system": FIG3_SYSTEM,
        "squeezing": {"db": 6.0, "b_x_norm": 1.0},
        "scenario": {
            "axis": {"name": "b_x_norm", "start": 0.05, "stop": 100.0, "points": 41, "spacing": "log"},
            "methods": ["analytic_finite_bw", "analytic_white"],
        },
    },
    ScenarioKind.FIG3D: {
        "system": FIG3_SYSTEM,
        "squeezing": WHITE_SQUEEZING,
        "scenario": {
            "axis": {"name": "temperature", "start": 1.0e-3, "stop": 10.0, "points": 17, "spacing": "log"},
            "methods": ["analytic_white", "exact"],
        },
    },
    ScenarioKind.SQUASHING: {
        "system": SQUASHING_SYSTEM,
        "squeezing": WHITE_SQUEEZING,
        "scenario": {
            "axis": {"name": "input_db", "start": 0.0, "stop": 6.0, "points": 7},
            "methods": ["analytic_rsl", "analytic_white", "exact"],
        },
    },
    ScenarioKind.CUSTOM: {
        "system": FIG3_SYSTEM,
        "squeezing": WHITE_SQUEEZING,
        "scenario": {
            "axis": {"name": "input_db", "start": 0.0, "stop": 6.0, "points": 7},
            "methods": ["analytic_white"],
        },
    },
}

_RATE_GROUP = ("quality_factor", "gamma_m")
_DRIVE_GROUP = ("G", "power", "cavity_length", "reflectivity")


def _merge(preset: Dict[str, Dict[str, Any]], raw: Dict[str, Any]) -> Dict[str, Any]:
    """
    Overlay file tables on a preset. Keys of one exclusive group in the file
    drop the whole group from the preset; a [squeezing] table replaces the
    preset's squeezing form.
    """
    merged = copy.deepcopy(preset)
    system = dict(raw.get("system", {}))
    for group in (_RATE_GROUP, _DRIVE_GROUP):
        if any(key in system for key in group):
            for key in group:
                merged["system"].pop(key, None)
    merged["system"].update(system)
    if "squeezing" in raw:
        merged["squeezing"] = dict(raw["squeezing"])
    merged["scenario"].update(raw.get("scenario", {}))
    return merged


def _format_validation(exc: ValidationError) -> str:
    problems = []
    for err in exc.errors():
        loc = ".".join(str(part) for part in err["loc"]) or "config"
        problems.append(f"{loc}: {err['msg']}")
    return "; ".join(problems)


def parse_config(raw: Dict[str, Any]) -> ConfigFile:
    """Validate parsed TOML tables against the preset of their scenario kind."""
    unknown = set(raw) - {"system", "squeezing", "scenario"}
    if unknown:
        raise ConfigError(f"unknown table(s): {', '.join(sorted(unknown))}")
    kind_name = raw.get("scenario", {}).get("kind", ScenarioKind.CUSTOM.value)
    try:
        kind = ScenarioKind(kind_name)
    except ValueError:
        raise ConfigError(f"scenario.kind: unknown scenario kind {kind_name!r}") from None
    merged = _merge(PRESETS[kind], raw)
    merged["scenario"]["kind"] = kind.value
    try:
        return ConfigFile.model_validate(merged)
    except ValidationError as exc:
        raise ConfigError(_format_validation(exc)) from exc


def read_config(path: Union[str, Path]) -> ConfigFile:
    path = Path(path)
    try:
        with path.open("rb") as handle:
            raw = tomllib.load(handle)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from exc
    return parse_config(raw)


def resolve_config(cfg: ConfigFile) -> Tuple[SystemParams, SqueezingSpec, Scenario]:
    """Convert file units to rad/s and build the validated domain objects."""
    s, sq, sc = cfg.system, cfg.squeezing, cfg.scenario

    def rad(value):
        return None if value is None else TWO_PI * value

    try:
        if s.G is not None:
            drive = CouplingDrive(G=TWO_PI * s.G)
        else:
            drive = PowerDrive(power=s.power, cavity_length=s.cavity_length, reflectivity=s.reflectivity)
        system = SystemParams(
            omega_c=rad(s.optical_frequency),
            omega_m0=TWO_PI * s.mechanical_frequency,
            mass=s.mass,
            kappa=TWO_PI * s.kappa,
            temperature=s.temperature,
            quality_factor=s.quality_factor,
            gamma_m=rad(s.gamma_m),
            q_convention=s.q_convention,
            drive=drive,
            detuning_policy=s.detuning_policy,
            detuning=rad(s.detuning),
            delta=TWO_PI * s.delta,
        )
        if sc.eta is not None:
            system = rescale_eta(system, sc.eta)

        if sq.gamma_o is not None:
            spec = opo_to_nm(TWO_PI * sq.gamma_o, TWO_PI * sq.epsilon * np.exp(1j * sq.epsilon_phase))
        elif sq.db is not None:
            b_x = TWO_PI * sq.b_x if sq.b_x is not None else sq.b_x_norm * system.omega_m0
            spec = nm_to_opo(sq.db, b_x, phase=sq.epsilon_phase)
        else:
            spec = from_components(sq.N, sq.M_abs * np.exp(1j * sq.M_phase), TWO_PI * sq.b_x, TWO_PI * sq.b_y)

        axis = sc.axis.model_dump()
        if sc.axis.name in FREQUENCY_AXES:
            axis["start"] *= TWO_PI
            axis["stop"] *= TWO_PI
        scenario = Scenario(
            kind=sc.kind,
            system=system,
            squeezing=spec,
            axis=SweepAxis(**axis),
            methods=sc.methods,
            phase_samples=sc.phase_samples,
        )
    except ValidationError as exc:
        raise ConfigError(_format_validation(exc)) from exc
    except SqueezeError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    return system, spec, scenario


def load_config(path: Union[str, Path]) -> Tuple[SystemParams, SqueezingSpec, Scenario]:
    """
    Read and validate a scenario file.

    Raises ConfigError with line/column for TOML syntax errors and with the
    offending field names for validation errors.
    """
    return resolve_config(read_config(path))


def preset_scenario(kind: Union[str, ScenarioKind]) -> Scenario:
    """Scenario built from a kind's preset alone."""
    return resolve_config(parse_config({"scenario": {"kind": ScenarioKind(kind).value}}))[2]


def write_output(result: SweepResult, fmt: str, path: Union[str, Path]) -> None:
    """
    CSV (fixed columns, RFC 4180) or JSON (rows plus metadata).

    CSV output carries no timestamps, so identical results give identical bytes.
    """
    path = Path(path)
    fmt = str(fmt).lower()
    if fmt == "csv":
        frame = pd.DataFrame([row.model_dump() for row in result.rows], columns=CSV_COLUMNS)
        frame.to_csv(path, index=False, lineterminator="\r\n")
    elif fmt == "json":
        path.write_text(result.model_dump_json(indent=2), encoding="utf-8")
    else:
        raise ValueError(f"unknown output format {fmt!r} (expected csv or json)")
    logger.info("wrote %d rows to %s", len(result.rows), path)


def read_result(path: Union[str, Path]) -> SweepResult:
    return SweepResult.model_validate_json(Path(path).read_text(encoding="utf-8"))
