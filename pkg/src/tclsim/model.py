"""Scenario construction: working-regime presets, units and config files.

Preset values are quoted in wavenumbers (cm^-1) and converted to angular
frequency in rad/fs. A scenario is immutable; the level system with its
rate functions is derived from the stored parameters on demand.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import asdict, dataclass, field, fields, replace
from functools import cached_property
from pathlib import Path
from types import MappingProxyType
from typing import Any, Mapping, Optional

import numpy as np
import scipy.constants as const

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
import tomli_w

from .dynamics import DIM, LevelSystem, ModelFlags, SolverSettings, Transition, level_index
from .rates import RATE_CONVENTIONS, RateFunction

#: rad/fs per cm^-1: 2 pi c with c in cm/fs
WAVENUMBER_TO_ANGULAR = 2.0 * math.pi * const.c * 1e2 * 1e-15


class ConfigError(ValueError):
    """Invalid scenario configuration."""


class PositivityWarning(UserWarning):
    pass


class Regime(enum.Enum):
    OVERDAMPED = "overdamped"
    UNDERDAMPED = "underdamped"
    INTERMEDIATE = "intermediate"
    CUSTOM = "custom"


class Mode(enum.Enum):
    MARKOVIAN = "markovian"
    NONMARKOVIAN = "nonmarkovian"


class InitialState(enum.Enum):
    PURIFIED = "purified"
    PAPER_LITERAL = "paper_literal"
    GROUND = "ground"
    CUSTOM = "custom"


# Working-regime presets, cm^-1 except the occupations.
PRESETS = MappingProxyType({
    Regime.OVERDAMPED: MappingProxyType(dict(
        delta_split=120.0, gamma_e1g=0.005, gamma_e2g=0.0016, gamma_e1m=140.0, gamma_e2m=18.0,
        gamma_m1m2=1e-10, gamma_m2g=200.0, tau2_inv=41.0, nbar_1h=60000.0, nbar_2h=10000.0)),
    Regime.UNDERDAMPED: MappingProxyType(dict(
        delta_split=600.0, gamma_e1g=0.005, gamma_e2g=0.005, gamma_e1m=35.0, gamma_e2m=35.0,
        gamma_m1m2=1e-10, gamma_m2g=50.0, tau2_inv=41.0, nbar_1h=10000.0, nbar_2h=20000.0)),
    Regime.INTERMEDIATE: MappingProxyType(dict(
        delta_split=720.0, gamma_e1g=0.005, gamma_e2g=0.005, gamma_e1m=280.0, gamma_e2m=280.0,
        gamma_m1m2=1e-10, gamma_m2g=300.0, tau2_inv=41.0, nbar_1h=90000.0, nbar_2h=10000.0)),
})

DEFAULT_HORIZON_FS = MappingProxyType({
    Regime.OVERDAMPED: 1000.0, Regime.UNDERDAMPED: 2000.0,
    Regime.INTERMEDIATE: 1000.0, Regime.CUSTOM: 1000.0,
})

# Nominal absolute energies (cm^-1). Only delta_split matters for the
# interaction-picture dynamics; these keep every transition frequency positive.
NOMINAL_ENERGY_E2 = 12000.0
NOMINAL_ENERGY_M1 = 10000.0
NOMINAL_ENERGY_M2 = 8000.0

# transition name -> (upper, lower, bath, rate field, occupation field)
TRANSITIONS = MappingProxyType({
    "e1g": ("e1", "g", "hot", "gamma_e1g", "nbar_1h"),
    "e2g": ("e2", "g", "hot", "gamma_e2g", "nbar_2h"),
    "e1m1": ("e1", "m1", "cold1", "gamma_e1m", "nbar_1c"),
    "e2m1": ("e2", "m1", "cold1", "gamma_e2m", "nbar_2c"),
    "m1m2": ("m1", "m2", "load", "gamma_m1m2", "nbar_load"),
    "m2g": ("m2", "g", "cold2", "gamma_m2g", "nbar_m2c"),
})

_FREQ_FIELDS = ("delta_split", "energy_e2", "energy_m1", "energy_m2")
_RATE_FIELDS = ("gamma_e1g", "gamma_e2g", "gamma_e1m", "gamma_e2m", "gamma_m1m2", "gamma_m2g", "tau2_inv")
_NBAR_FIELDS = ("nbar_1h", "nbar_2h", "nbar_1c", "nbar_2c", "nbar_load", "nbar_m2c")


def wavenumber_to_angular(nu_tilde):
    """cm^-1 -> rad/fs."""
    return nu_tilde * WAVENUMBER_TO_ANGULAR


def angular_to_wavenumber(omega):
    return omega / WAVENUMBER_TO_ANGULAR


def bose_occupation(omega: float, temperature: float) -> float:
    """Mean thermal occupation of a mode at ``omega`` (rad/fs) and
    ``temperature`` (K)."""
    if not omega > 0:
        raise ValueError(f"omega must be positive, got {omega!r}")
    if temperature < 0:
        raise ValueError("temperature must be >= 0")
    if temperature == 0:
        return 0.0
    x = const.hbar * omega * 1e15 / (const.k * temperature)
    return 1.0 / math.expm1(x) if x < 700 else 0.0


@dataclass(frozen=True)
class Params:
    """Physical inputs of a scenario; frequencies and rates in rad/fs."""

    delta_split: float = 0.0
    energy_e2: float = wavenumber_to_angular(NOMINAL_ENERGY_E2)
    energy_m1: float = wavenumber_to_angular(NOMINAL_ENERGY_M1)
    energy_m2: float = wavenumber_to_angular(NOMINAL_ENERGY_M2)
    gamma_e1g: float = 0.0
    gamma_e2g: float = 0.0
    gamma_e1m: float = 0.0
    gamma_e2m: float = 0.0
    gamma_m1m2: float = 0.0
    gamma_m2g: float = 0.0
    tau2_inv: float = 0.0
    nbar_1h: float = 0.0
    nbar_2h: float = 0.0
    nbar_1c: float = 0.0
    nbar_2c: float = 0.0
    nbar_load: float = 0.0
    nbar_m2c: float = 0.0
    p_hot: float = 1.0
    p_cold: float = 1.0
    kappa_scale: float = 1.0
    rate_convention: str = "eq10"
    rate_model: str = "closed_form"
    # per-transition overrides keyed by transition name, rad/fs
    kappa: Mapping[str, float] = field(default_factory=dict)
    detuning: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        for name in _FREQ_FIELDS + _RATE_FIELDS + _NBAR_FIELDS + ("p_hot", "p_cold", "kappa_scale"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
                raise ConfigError(f"{name} must be a finite number, got {v!r}")
        for name in _RATE_FIELDS + _NBAR_FIELDS + ("delta_split",):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0, got {getattr(self, name)!r}")
        for name in ("p_hot", "p_cold"):
            if abs(getattr(self, name)) > 1:
                raise ConfigError(f"|{name}| must be <= 1, got {getattr(self, name)!r}")
        if not self.kappa_scale > 0:
            raise ConfigError("kappa_scale must be positive")
        if self.rate_convention not in RATE_CONVENTIONS:
            raise ConfigError(f"rate_convention must be one of {sorted(RATE_CONVENTIONS)}")
        if self.rate_model not in ("closed_form", "quadrature"):
            raise ConfigError("rate_model must be 'closed_form' or 'quadrature'")
        for label, table in (("kappa", self.kappa), ("detuning", self.detuning)):
            for k, v in table.items():
                if k not in TRANSITIONS:
                    raise ConfigError(f"unknown transition {k!r} in {label}; expected one of {list(TRANSITIONS)}")
                if not math.isfinite(v) or (label == "kappa" and v <= 0):
                    raise ConfigError(f"bad {label} value for {k}: {v!r}")
        if not (self.energy_m2 > 0 and self.energy_m1 > self.energy_m2 and self.energy_e2 > self.energy_m1):
            raise ConfigError("level energies must satisfy e2 > m1 > m2 > g = 0")
        object.__setattr__(self, "kappa", MappingProxyType(dict(self.kappa)))
        object.__setattr__(self, "detuning", MappingProxyType(dict(self.detuning)))

    def __eq__(self, other):
        if not isinstance(other, Params):
            return NotImplemented
        return all(
            (dict(getattr(self, f.name)) == dict(getattr(other, f.name)))
            if f.name in ("kappa", "detuning") else getattr(self, f.name) == getattr(other, f.name)
            for f in fields(self)
        )

    __hash__ = None

    def __reduce__(self):
        # mappingproxy is not picklable; rebuild through the constructor
        kw = {f.name: getattr(self, f.name) for f in fields(self)}
        kw["kappa"], kw["detuning"] = dict(self.kappa), dict(self.detuning)
        return _params_from_kwargs, (kw,)


def _params_from_kwargs(kw):
    return Params(**kw)


@dataclass(frozen=True)
class Scenario:
    regime: Regime
    mode: Mode
    params: Params
    flags: ModelFlags = ModelFlags()
    initial_state: InitialState = InitialState.PURIFIED
    custom_rho: Optional[tuple] = None
    horizon_fs: float = 1000.0
    solver: SolverSettings = SolverSettings()

    def __post_init__(self):
        if not (self.horizon_fs > 0 and math.isfinite(self.horizon_fs)):
            raise ConfigError(f"horizon_fs must be positive, got {self.horizon_fs!r}")
        if self.initial_state is InitialState.CUSTOM:
            if self.custom_rho is None:
                raise ConfigError("initial_state 'custom' needs a density matrix")
            rho = np.array(self.custom_rho, dtype=complex)
            if rho.shape != (DIM, DIM):
                raise ConfigError(f"custom density matrix must be {DIM}x{DIM}")
            if np.max(np.abs(rho - rho.conj().T)) > 1e-12:
                raise ConfigError("custom density matrix must be Hermitian")
            if abs(np.trace(rho) - 1) > 1e-10:
                raise ConfigError("custom density matrix must have unit trace")

    # attributes read by dynamics.integrate
    @property
    def p_hot(self) -> float:
        return self.params.p_hot

    @property
    def p_cold(self) -> float:
        return self.params.p_cold

    @property
    def tau2_inv(self) -> float:
        return self.params.tau2_inv

    @cached_property
    def system(self) -> LevelSystem:
        return _build_system(self.params, self.mode, self.horizon_fs)

    def initial_rho(self) -> np.ndarray:
        return initial_density_matrix(self.initial_state, self.custom_rho)

    def with_overrides(self, overrides: Mapping[str, Any]) -> "Scenario":
        return _apply_overrides(self, overrides)


def initial_density_matrix(kind: InitialState, custom=None) -> np.ndarray:
    rho = np.zeros((DIM, DIM), dtype=complex)
    a, b = level_index("e1"), level_index("e2")
    if kind is InitialState.PURIFIED:
        rho[a, a] = rho[b, b] = rho[a, b] = rho[b, a] = 0.5
    elif kind is InitialState.PAPER_LITERAL:
        warnings.warn(
            "paper_literal initial state has trace 0.5 and |rho_e1e2| > sqrt(rho_e1e1 rho_e2e2): "
            "it is not a valid density matrix",
            PositivityWarning,
            stacklevel=2,
        )
        rho[b, b] = rho[a, b] = rho[b, a] = 0.5
    elif kind is InitialState.GROUND:
        rho[0, 0] = 1.0
    else:
        rho = np.array(custom, dtype=complex)
    return rho


def _build_system(p: Params, mode: Mode, horizon: float) -> LevelSystem:
    energies = (0.0, p.energy_e2 + p.delta_split, p.energy_e2, p.energy_m1, p.energy_m2)
    transitions = []
    for name, (upper, lower, bath, rate_field, nbar_field) in TRANSITIONS.items():
        gamma = getattr(p, rate_field)
        omega = energies[level_index(upper)] - energies[level_index(lower)]
        if mode is Mode.MARKOVIAN:
            rate = RateFunction.markovian(gamma, omega, p.rate_convention)
        else:
            kappa = p.kappa.get(name, p.kappa_scale * gamma)
            det = p.detuning.get(name, 0.0)
            if p.rate_model == "quadrature" and gamma > 0:
                grid = np.linspace(0.0, horizon, int(math.ceil(horizon / 0.5)) + 1)
                rate = RateFunction.from_quadrature(gamma, kappa, omega, grid, det, 1e-9, p.rate_convention)
            else:
                rate = RateFunction.closed_form(gamma, kappa, omega, det, p.rate_convention)
        transitions.append(Transition(name, upper, lower, bath, rate, getattr(p, nbar_field)))
    return LevelSystem(energies, p.delta_split, tuple(transitions))


def preset_params(regime: Regime) -> Params:
    """Params for a working regime, converted to rad/fs. Cold-bath
    occupations are zero."""
    if regime is Regime.CUSTOM:
        return Params()
    table = PRESETS[regime]
    kw = {}
    for k, v in table.items():
        kw[k] = v if k.startswith("nbar") else wavenumber_to_angular(v)
    return Params(**kw)


def _as_enum(enum_cls, value, what):
    if isinstance(value, enum_cls):
        return value
    try:
        return enum_cls(str(value).lower())
    except ValueError:
        choices = ", ".join(e.value for e in enum_cls)
        raise ConfigError(f"unknown {what} {value!r}; expected one of: {choices}") from None


_PARAM_KEYS = {f.name for f in fields(Params)} - {"kappa", "detuning"}
_FLAG_KEYS = {f.name for f in fields(ModelFlags)}
_SOLVER_KEYS = {f.name for f in fields(SolverSettings)}
_SCENARIO_KEYS = {"horizon_fs", "initial_state", "custom_rho", "units"}


def _convert(key: str, value, units: str):
    if units == "angular" or key not in _FREQ_FIELDS + _RATE_FIELDS:
        return value
    return wavenumber_to_angular(value)


def _apply_overrides(sc: Scenario, overrides: Mapping[str, Any]) -> Scenario:
    units = overrides.get("units", "wavenumber")
    if units not in ("wavenumber", "angular"):
        raise ConfigError(f"units must be 'wavenumber' or 'angular', got {units!r}")
    pkw, fkw, skw, top = {}, {}, {}, {}
    kappa, detuning = dict(sc.params.kappa), dict(sc.params.detuning)
    for key, value in overrides.items():
        if key == "units":
            continue
        if key in _PARAM_KEYS:
            if key in ("rate_convention", "rate_model"):
                pkw[key] = value
            else:
                pkw[key] = _convert(key, _number(key, value), units)
        elif key.startswith("kappa_") and key[6:] in TRANSITIONS:
            v = _number(key, value)
            kappa[key[6:]] = v if units == "angular" else wavenumber_to_angular(v)
        elif key.startswith("detuning_") and key[9:] in TRANSITIONS:
            v = _number(key, value)
            detuning[key[9:]] = v if units == "angular" else wavenumber_to_angular(v)
        elif key in _FLAG_KEYS:
            if not isinstance(value, bool):
                raise ConfigError(f"flag {key} must be true/false, got {value!r}")
            fkw[key] = value
        elif key in _SOLVER_KEYS:
            skw[key] = value if key == "method" else _number(key, value)
        elif key == "horizon_fs":
            top[key] = _number(key, value)
        elif key == "initial_state":
            top[key] = _as_enum(InitialState, value, "initial_state")
        elif key == "custom_rho":
            top[key] = _freeze_matrix(value)
        else:
            raise ConfigError(f"unrecognized parameter {key!r}")
    try:
        params = replace(sc.params, kappa=kappa, detuning=detuning, **pkw)
        flags = replace(sc.flags, **fkw)
        solver = replace(sc.solver, **skw)
        return replace(sc, params=params, flags=flags, solver=solver, **top)
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc


def _number(key, value) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key} must be a number, got {value!r}")
    return float(value)


def _freeze_matrix(value) -> tuple:
    arr = np.array(value, dtype=complex)
    return tuple(tuple(complex(x) for x in row) for row in arr)


def build_scenario(regime, mode, overrides: Optional[Mapping[str, Any]] = None) -> Scenario:
    """Fully resolved scenario for a preset regime (or ``custom``) and mode.

    ``overrides`` is a flat mapping of parameter, flag, solver and scenario
    keys. Frequencies and rates are read in cm^-1 unless ``units`` is
    ``"angular"``. Unknown keys raise :class:`ConfigError`.
    """
    regime = _as_enum(Regime, regime, "regime")
    mode = _as_enum(Mode, mode, "mode")
    sc = Scenario(regime, mode, preset_params(regime), horizon_fs=DEFAULT_HORIZON_FS[regime])
    if overrides:
        sc = _apply_overrides(sc, overrides)
    return sc


def inverse_lifetime_scale(params: Params) -> float:
    """Largest Markovian depletion rate of e1 or e2: the cold-bath rate plus
    the thermally enhanced emission ``gamma_h (nbar_h + 1)``."""
    e1 = params.gamma_e1m + params.gamma_e1g * (params.nbar_1h + 1.0)
    e2 = params.gamma_e2m + params.gamma_e2g * (params.nbar_2h + 1.0)
    return max(e1, e2)


def classify_regime(scenario: Scenario) -> Regime:
    """Damping regime from the ratio of ``delta_split`` to
    :func:`inverse_lifetime_scale`: intermediate within a factor of 2 either
    way, overdamped below, underdamped above."""
    delta = scenario.params.delta_split
    scale = inverse_lifetime_scale(scenario.params)
    if delta == 0.0:
        return Regime.OVERDAMPED
    if scale == 0.0:
        return Regime.UNDERDAMPED
    ratio = delta / scale
    if ratio < 0.5:
        return Regime.OVERDAMPED
    if ratio > 2.0:
        return Regime.UNDERDAMPED
    return Regime.INTERMEDIATE


# --- config files ---------------------------------------------------------

_SECTIONS = ("system", "bath", "solver", "flags", "initial")
_SYSTEM_KEYS = {"regime", "mode", "units", "delta_split", "energy_e2", "energy_m1", "energy_m2",
                "initial_state", "horizon_fs"}
_BATH_KEYS = (set(_RATE_FIELDS) | set(_NBAR_FIELDS)
              | {"units", "p_hot", "p_cold", "kappa_scale", "rate_convention", "rate_model", "kappa", "detuning"})


def scenario_to_config(sc: Scenario) -> dict:
    p = sc.params
    doc = {
        "system": {
            "regime": sc.regime.value,
            "mode": sc.mode.value,
            "units": "angular",
            "delta_split": p.delta_split,
            "energy_e2": p.energy_e2,
            "energy_m1": p.energy_m1,
            "energy_m2": p.energy_m2,
            "initial_state": sc.initial_state.value,
            "horizon_fs": sc.horizon_fs,
        },
        "bath": {"units": "angular"},
        "solver": asdict(sc.solver),
        "flags": asdict(sc.flags),
    }
    bath = doc["bath"]
    for name in _RATE_FIELDS + _NBAR_FIELDS + ("p_hot", "p_cold", "kappa_scale", "rate_convention", "rate_model"):
        bath[name] = getattr(p, name)
    if p.kappa:
        bath["kappa"] = dict(p.kappa)
    if p.detuning:
        bath["detuning"] = dict(p.detuning)
    if sc.custom_rho is not None:
        rho = np.array(sc.custom_rho, dtype=complex)
        doc["initial"] = {"rho_real": rho.real.tolist(), "rho_imag": rho.imag.tolist()}
    return doc


def dumps_config(sc: Scenario) -> str:
    return tomli_w.dumps(scenario_to_config(sc))


def loads_config(text: str) -> Scenario:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    return config_to_scenario(doc)


def load_config(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return loads_config(text)


def save_config(sc: Scenario, path) -> None:
    Path(path).write_text(dumps_config(sc))


def _section(doc, name, allowed) -> dict:
    sec = doc.get(name, {})
    if not isinstance(sec, dict):
        raise ConfigError(f"[{name}] must be a table")
    unknown = set(sec) - allowed
    if unknown:
        raise ConfigError(f"unrecognized key(s) in [{name}]: {', '.join(sorted(unknown))}")
    return sec


def config_to_scenario(doc: Mapping[str, Any]) -> Scenario:
    """Scenario from a parsed config document. Values absent from the
    document come from the regime preset."""
    unknown = set(doc) - set(_SECTIONS)
    if unknown:
        raise ConfigError(f"unrecognized section(s): {', '.join(sorted(unknown))}")
    system = _section(doc, "system", _SYSTEM_KEYS)
    bath = _section(doc, "bath", _BATH_KEYS)
    solver = _section(doc, "solver", _SOLVER_KEYS)
    flags = _section(doc, "flags", _FLAG_KEYS)
    initial = _section(doc, "initial", {"rho_real", "rho_imag"})

    sc = build_scenario(system.get("regime", "custom"), system.get("mode", "nonmarkovian"))
    system_units = system.get("units", "wavenumber")
    bath_units = bath.get("units", "wavenumber")
    # initial_state waits for [initial], which may carry the custom matrix
    overrides_sys = {k: v for k, v in system.items() if k not in ("regime", "mode", "units", "initial_state")}
    overrides_bath = {k: v for k, v in bath.items() if k not in ("units", "kappa", "detuning")}
    for table in ("kappa", "detuning"):
        sub = bath.get(table, {})
        if not isinstance(sub, dict):
            raise ConfigError(f"[bath.{table}] must be a table")
        overrides_bath.update({f"{table}_{k}": v for k, v in sub.items()})
    sc = _apply_overrides(sc, {**overrides_sys, "units": system_units})
    sc = _apply_overrides(sc, {**overrides_bath, "units": bath_units})
    sc = _apply_overrides(sc, {**solver, **flags})
    last = {k: system[k] for k in ("initial_state",) if k in system}
    if initial:
        try:
            last["custom_rho"] = np.array(initial["rho_real"], dtype=float) + 1j * np.array(
                initial.get("rho_imag", np.zeros((DIM, DIM))), dtype=float)
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"bad [initial] section: {exc}") from exc
    return _apply_overrides(sc, last) if last else sc
