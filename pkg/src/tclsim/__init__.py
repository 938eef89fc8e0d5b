"""Time-convolutionless master-equation simulator for a five-level
photosynthetic heat engine coupled to Lorentzian baths."""

from .dynamics import (IntegrationError, InvariantBreach, Liouvillian, ModelFlags, SolverSettings,
                       integrate, liouvillian_apply, steady_state_detect)
from .model import (ConfigError, Mode, Params, Regime, Scenario, build_scenario, classify_regime,
                    load_config, save_config, wavenumber_to_angular)
from .observables import ComparisonReport, TrajectoryRecord, compare, simulate, write_csv
from .rates import QuadratureError, RateFunction, rate_closed_form, rate_quadrature
from .spectral import SpectralDensity

__version__ = "0.1.0"

__all__ = [
    "ComparisonReport", "ConfigError", "IntegrationError", "InvariantBreach", "Liouvillian", "Mode",
    "ModelFlags", "Params", "QuadratureError", "RateFunction", "Regime", "Scenario", "SolverSettings",
    "SpectralDensity", "TrajectoryRecord", "build_scenario", "classify_regime", "compare", "integrate",
    "liouvillian_apply", "load_config", "rate_closed_form", "rate_quadrature", "save_config", "simulate",
    "steady_state_detect", "wavenumber_to_angular", "write_csv",
]
