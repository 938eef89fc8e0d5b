"""Built-in oracle suite run by ``tclsim validate``."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping, Optional

import numpy as np

from .dynamics import HERMITICITY_TOL, TRACE_TOL, integrate
from .model import PRESETS, ConfigError, Mode, Params, Regime, Scenario, build_scenario, wavenumber_to_angular
from .observables import extract
from .rates import (RateFunction, bath_kernel_quadrature, lorentzian_fourier, rate_quadrature)
from .spectral import SpectralDensity

POSITIVITY_TOL = 1e-8


@dataclass
class Check:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


def check_rate_oracle(convention: str = "eq10", n: int = 50, seed: int = 2024) -> Check:
    """Dynamics rate against the double quadrature on random triples."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    ratios = []
    for _ in range(n):
        gamma = 10 ** rng.uniform(-4, -1)
        kappa = gamma * 10 ** rng.uniform(-1, 1)
        t = rng.uniform(0.0, 5.0 / kappa)
        rate = RateFunction.closed_form(gamma, kappa, 1.0, convention=convention)
        quad = rate_quadrature(t, rate.spectral_density(), 1.0, tol=1e-9).real
        dyn = rate.value(t)
        worst = max(worst, abs(dyn - quad) / gamma)
        if quad > 1e-3 * gamma:
            ratios.append(dyn / quad)
    ok = worst < 1e-5
    detail = f"max |gamma(t) - Re Gamma_quad(t)| / gamma_M = {worst:.2e} over {n} triples"
    if not ok and ratios:
        detail += f"; rate/quadrature ratio = {np.median(ratios):.6g} (factor offset, rate_convention={convention})"
    return Check("quadrature vs closed-form rate", ok, detail)


def check_contour_identity() -> Check:
    kappa = 0.0123
    J = SpectralDensity.lorentzian(0.7, kappa, 0.37)
    worst = 0.0
    for tau in (0.0, 1 / kappa, -1 / kappa, 3 / kappa, -3 / kappa):
        exact = lorentzian_fourier(tau, J)
        num = bath_kernel_quadrature(tau, J, J.center_omega0)
        worst = max(worst, abs(num - exact) / abs(exact))
    return Check("Lorentzian Fourier identity", worst < 1e-6, f"max relative deviation {worst:.2e}")


def two_level_scenario(gamma_cm: float = 35.0, kappa_cm: Optional[float] = None, horizon: float = 1000.0) -> Scenario:
    """Only e1 -> g active at zero temperature, rho_e1e1(0) = 1/2."""
    ov = {"gamma_e1g": gamma_cm, "dephasing": False, "horizon_fs": horizon}
    if kappa_cm is not None:
        ov["kappa_e1g"] = kappa_cm
    return build_scenario("custom", "nonmarkovian", ov)


def two_level_exact(t, gamma: float, kappa: float, p0: float):
    t = np.asarray(t, dtype=float)
    return p0 * np.exp(-gamma * t + (gamma / kappa) * (-np.expm1(-kappa * t)))


def check_two_level() -> Check:
    gamma_cm, kappa_cm = 35.0, 20.0
    sc = two_level_scenario(gamma_cm, kappa_cm)
    rec = extract(integrate(sc))
    g, k = wavenumber_to_angular(gamma_cm), wavenumber_to_angular(kappa_cm)
    worst = 0.0
    for t in (10.0, 100.0, 1000.0):
        i = int(np.argmin(np.abs(rec.times - t)))
        exact = two_level_exact(t, g, k, 0.5)
        worst = max(worst, abs(rec.population("e1")[i] - exact) / exact)
    return Check("two-level analytic decay", worst < 1e-6, f"max relative error {worst:.2e} at t in {{10, 100, 1000}} fs")


def check_preset(regime: Regime, values: Mapping[str, float]) -> list:
    checks = []
    name = f"preset integrity [{regime.value}]"
    try:
        kw = {k: (v if k.startswith("nbar") else wavenumber_to_angular(v)) for k, v in values.items()}
        params = Params(**kw)
    except (ConfigError, TypeError) as exc:
        return [Check(name, False, str(exc))]
    checks.append(Check(name, True, "all parameters finite and nonnegative"))
    for mode in Mode:
        sc = replace(build_scenario(regime, mode), params=params)
        try:
            rec = extract(integrate(sc))
        except Exception as exc:  # report, do not crash the suite
            checks.append(Check(f"conservation [{regime.value}/{mode.value}]", False, str(exc)))
            continue
        tr = float(rec.trace_error.max())
        herm = float(rec.hermiticity_drift.max())
        lam = float(rec.min_eigenvalue.min())
        failures = []
        if tr >= TRACE_TOL:
            failures.append(f"trace error {tr:.2e}")
        if herm >= HERMITICITY_TOL:
            failures.append(f"hermiticity drift {herm:.2e}")
        if lam < -POSITIVITY_TOL:
            failures.append(f"positivity: min eigenvalue {lam:.2e}")
        detail = "; ".join(failures) if failures else f"trace {tr:.1e}, drift {herm:.1e}, min eig {lam:.1e}"
        checks.append(Check(f"conservation [{regime.value}/{mode.value}]", not failures, detail))
    return checks


def run_validation(presets: Mapping = PRESETS, convention: str = "eq10") -> list:
    checks = [check_rate_oracle(convention), check_contour_identity(), check_two_level()]
    for regime, values in presets.items():
        checks.extend(check_preset(regime, values))
    return checks
