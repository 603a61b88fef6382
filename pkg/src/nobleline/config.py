"""INI configuration loading and resolution into model objects.

A run is described by up to five sections. [gas_cell], [optics], and
[magnetics] hold physical inputs; [system] holds the directly-measured rates
(gamma_a, gamma_b are required there — nothing derives them) plus optional
overrides that win over any derived value; [scenario] selects and tunes a
protocol. Unknown sections or keys are hard errors: a typo that silently
reverts a parameter to its default would poison a scan.

The resolved, typed mapping travels into every output's provenance block and
can be fed back through :func:`config_from_mapping` to reproduce a run.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields as dc_fields
from importlib import resources

from scipy import constants as _const

from .model import (ConfigError, GasCell, MagneticConfig, OpticalParams,
                    SystemParams, build_system, derive_optics)

#: default bias-field grid for sweeps, mG (log-spaced, includes both
#: calibration anchor fields)
DEFAULT_FIELD_GRID = (4.0, 5.0, 6.1, 7.3, 8.8, 10.7, 12.9, 15.6, 18.8,
                      22.7, 27.4, 33.1, 40.0)

SCENARIO_NAMES = ("spectrum", "excite", "sweep_field", "transient",
                  "calibrate")


def _parse_float(text):
    try:
        return float(text)
    except (TypeError, ValueError):
        raise ConfigError(f"expected a number, got {text!r}") from None


def _parse_int(text):
    try:
        return int(str(text))
    except (TypeError, ValueError):
        raise ConfigError(f"expected an integer, got {text!r}") from None


def _parse_str(text):
    return str(text)


def _parse_float_list(text):
    if isinstance(text, (list, tuple)):
        return tuple(float(v) for v in text)
    parts = [p for p in str(text).replace(",", " ").split() if p]
    if not parts:
        raise ConfigError("expected a list of numbers, got nothing")
    return tuple(_parse_float(p) for p in parts)


# schema: section -> key -> parser; required keys listed separately
_SCHEMAS = {
    "gas_cell": {
        "alkali_density": _parse_float,
        "noble_pressure": _parse_float,
        "temperature": _parse_float,
        "alkali_polarization": _parse_float,
        "noble_polarization": _parse_float,
        "slowing_factor": _parse_float,
        "exchange_coefficient": _parse_float,
        "cell_diameter": _parse_float,
        "noble_density": _parse_float,
    },
    "optics": {
        "beam_area": _parse_float,
        "optical_halfwidth": _parse_float,
        "optical_detuning": _parse_float,
        "control_power": _parse_float,
        "wavelength": _parse_float,      # nm; alternative to photon_energy
        "photon_energy": _parse_float,   # J
        "optical_depth": _parse_float,
        "signal_ratio_db": _parse_float,
        "electron_radius": _parse_float,
        "tilt_coeff": _parse_float,
        "faraday_coeff": _parse_float,
        "scattering_rate": _parse_float,
    },
    "magnetics": {
        "field": _parse_float,
        "alkali_gyromagnetic": _parse_float,
        "noble_gyromagnetic": _parse_float,
        "alkali_emf": _parse_float,
        "noble_emf": _parse_float,
    },
    "system": {
        "gamma_a": _parse_float,
        "gamma_b": _parse_float,
        "omega_a": _parse_float,
        "omega_b": _parse_float,
        "exchange": _parse_float,
        "exchange_ab": _parse_float,
        "exchange_ba": _parse_float,
        "tilt_coeff": _parse_float,
        "alkali_polarization": _parse_float,
    },
    "scenario": {
        "name": _parse_str,
        "seed": _parse_int,
        "noise_sigma": _parse_float,
        "points": _parse_int,
        "span_halfwidths": _parse_float,
        "baseline_halfwidths": _parse_float_list,
        "fields": _parse_float_list,
        "pulse_efolds": _parse_float,
        "ramp_efolds": _parse_float,
        "dead_efolds": _parse_float,
        "observe_efolds": _parse_float,
        "readout_cycles": _parse_float,
        "samples_per_cycle": _parse_float,
        "demod_periods": _parse_float,
        "tilt_amplitude": _parse_float,
        "signal_amplitude": _parse_float,
        "method": _parse_str,
        "trials": _parse_int,
        "out_prefix": _parse_str,
    },
}

_REQUIRED = {
    "gas_cell": ("alkali_density", "noble_pressure", "temperature",
                 "alkali_polarization", "noble_polarization",
                 "slowing_factor", "exchange_coefficient", "cell_diameter"),
    "optics": ("beam_area", "optical_halfwidth", "optical_detuning",
               "control_power", "optical_depth"),
    "magnetics": ("field", "alkali_gyromagnetic"),
    "system": ("gamma_a", "gamma_b"),
    "scenario": (),
}


@dataclass(frozen=True)
class ScenarioConfig:
    """Protocol selection and tuning knobs with safe defaults."""

    name: str = "spectrum"
    seed: int = 0
    noise_sigma: float = 0.0
    points: int = 41
    span_halfwidths: float = 5.0
    baseline_halfwidths: tuple = (10.0, 20.0, 30.0, 40.0)
    fields: tuple = DEFAULT_FIELD_GRID
    pulse_efolds: float = 3.0
    ramp_efolds: float = 0.0
    dead_efolds: float = 6.0
    observe_efolds: float = 2.0
    readout_cycles: float = 3.0
    samples_per_cycle: float = 32.0
    demod_periods: float = 8.0
    tilt_amplitude: float = 1.0
    signal_amplitude: float = 1.0
    method: str = "closed_form"
    trials: int = 200
    out_prefix: str = ""

    def __post_init__(self):
        if self.name not in SCENARIO_NAMES:
            raise ConfigError(f"unknown scenario name {self.name!r}; "
                              f"expected one of {SCENARIO_NAMES}")
        if self.method not in ("closed_form", "demodulated", "dynamics"):
            raise ConfigError(f"unknown scenario method {self.method!r}")
        if self.points < 5:
            raise ConfigError("scenario needs at least 5 grid points")
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma must be non-negative")
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")


@dataclass(frozen=True)
class Bundle:
    """Everything a run needs, resolved and validated."""

    system: SystemParams
    scenario: ScenarioConfig
    cell: GasCell | None = None
    optics: OpticalParams | None = None
    magnetics: MagneticConfig | None = None
    mapping: dict = field(default_factory=dict, compare=False)


def _typed_mapping(raw: dict) -> dict:
    typed = {}
    for section, entries in raw.items():
        if section not in _SCHEMAS:
            raise ConfigError(f"unknown section [{section}]; "
                              f"expected one of {sorted(_SCHEMAS)}")
        schema = _SCHEMAS[section]
        out = {}
        for key, value in entries.items():
            if key not in schema:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            try:
                out[key] = schema[key](value)
            except ConfigError as exc:
                raise ConfigError(f"[{section}] {key}: {exc}") from None
        missing = [k for k in _REQUIRED[section] if k not in out]
        if missing:
            raise ConfigError(f"[{section}] missing required keys: {missing}")
        typed[section] = out
    return typed


def _resolve_photon_energy(optics_map: dict) -> dict:
    out = dict(optics_map)
    wavelength = out.pop("wavelength", None)
    if (wavelength is None) == (out.get("photon_energy") is None):
        raise ConfigError("[optics] needs exactly one of wavelength (nm) "
                          "or photon_energy (J)")
    if wavelength is not None:
        if wavelength <= 0:
            raise ConfigError("[optics] wavelength must be positive")
        out["photon_energy"] = _const.h * _const.c / (wavelength * 1e-9)
    return out


def config_from_mapping(raw: dict) -> Bundle:
    """Resolve a {section: {key: value}} mapping into a Bundle.

    Values may be strings (as parsed from INI) or already-typed numbers
    (as stored in a provenance block); both resolve identically.
    """
    typed = _typed_mapping(raw)
    if "system" not in typed:
        raise ConfigError("a [system] section with gamma_a and gamma_b "
                          "is required")

    try:
        cell = GasCell(**typed["gas_cell"]) if "gas_cell" in typed else None
        magnetics = (MagneticConfig(**typed["magnetics"])
                     if "magnetics" in typed else None)
        optics = None
        if "optics" in typed:
            optics = OpticalParams(**_resolve_photon_energy(typed["optics"]))
            if optics.tilt_coeff is None or optics.faraday_coeff is None \
                    or optics.scattering_rate is None:
                if cell is None:
                    raise ConfigError("[optics] coupling derivation needs a "
                                      "[gas_cell] section (or give tilt_coeff,"
                                      " faraday_coeff, scattering_rate)")
                optics = derive_optics(optics, cell)
        system = build_system(magnetics=magnetics, cell=cell, optics=optics,
                              overrides=typed["system"])
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None

    scenario = ScenarioConfig(**typed.get("scenario", {}))
    return Bundle(system=system, scenario=scenario, cell=cell, optics=optics,
                  magnetics=magnetics, mapping=typed)


def load_config(path) -> Bundle:
    """Parse an INI file and resolve it (see config_from_mapping)."""
    parser = configparser.ConfigParser(interpolation=None,
                                       inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    read = parser.read(path)
    if not read:
        raise ConfigError(f"config file not found or unreadable: {path}")
    raw = {section: dict(parser.items(section))
           for section in parser.sections()}
    if not raw:
        raise ConfigError(f"config file has no sections: {path}")
    return config_from_mapping(raw)


def provenance_mapping(bundle: Bundle) -> dict:
    """JSON-safe resolved mapping, reloadable via config_from_mapping."""
    out = {}
    for section, entries in bundle.mapping.items():
        out[section] = {k: (list(v) if isinstance(v, tuple) else v)
                        for k, v in entries.items()}
    return out


def scenario_with(scenario: ScenarioConfig, **updates) -> ScenarioConfig:
    """Copy a scenario with some fields replaced (validating the result)."""
    values = {f.name: getattr(scenario, f.name)
              for f in dc_fields(ScenarioConfig)}
    values.update(updates)
    return ScenarioConfig(**values)


def preset_path(name: str = "k3he_reference"):
    """Filesystem path of a packaged preset configuration."""
    ref = resources.files("nobleline").joinpath("presets", f"{name}.ini")
    if not ref.is_file():
        raise ConfigError(f"no packaged preset named {name!r}")
    return ref
