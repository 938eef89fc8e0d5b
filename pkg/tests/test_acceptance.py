"""Acceptance criteria, one test each, at their stated tolerances.

Run alone with ``pytest tests/test_acceptance.py -v``; the pass/fail line
of every criterion is repeated in the terminal summary.
"""

import time

import numpy as np
import pytest

from tclsim.cli import main
from tclsim.dynamics import HERMITICITY_TOL, TRACE_TOL, integrate
from tclsim.model import build_scenario, wavenumber_to_angular
from tclsim.observables import CSV_COLUMNS, REPORT_COLUMNS, compare, extract, simulate
from tclsim.rates import bath_kernel_quadrature, lorentzian_fourier, rate_closed_form, rate_quadrature
from tclsim.spectral import SpectralDensity
from tclsim.validation import two_level_exact, two_level_scenario

REGIMES = ("overdamped", "underdamped", "intermediate")


def test_01_rate_oracle(verdict):
    rng = np.random.default_rng(20240601)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(50):
        gamma = 10 ** rng.uniform(-4, -1)
        kappa = gamma * 10 ** rng.uniform(-1, 1)
        t = rng.uniform(0, 5 / kappa)
        J = SpectralDensity.lorentzian(0.0, kappa, gamma * kappa)
        worst = max(worst, abs(rate_quadrature(t, J, 0.0).real - rate_closed_form(t, gamma, kappa)) / gamma)
    elapsed = time.perf_counter() - start
    verdict("1 rate oracle", worst < 1e-5 and elapsed < 10.0,
            f"max error {worst:.2e} gamma_M (< 1e-5), runtime {elapsed:.2f} s (< 10 s)")


def test_02_contour_identity(verdict):
    J = SpectralDensity.lorentzian(0.3, 0.02, 0.011)
    worst = 0.0
    for k in (0.0, 1.0, -1.0, 3.0, -3.0):
        tau = k / J.width_kappa
        exact = lorentzian_fourier(tau, J)
        worst = max(worst, abs(bath_kernel_quadrature(tau, J, J.center_omega0) - exact) / abs(exact))
    verdict("2 contour identity", worst < 1e-6, f"max relative deviation {worst:.2e} (< 1e-6)")


def _sup_norm(a, b):
    return max(np.max(np.abs(a.populations - b.populations)), np.max(np.abs(a.re_c - b.re_c)),
               np.max(np.abs(a.im_c - b.im_c)))


def test_03_markovian_limit(verdict):
    norms = {}
    for regime in REGIMES:
        nm = simulate(build_scenario(regime, "nonmarkovian", {"kappa_scale": 1e3, "horizon_fs": 3000.0}))
        m = simulate(build_scenario(regime, "markovian", {"horizon_fs": 3000.0}))
        norms[regime] = _sup_norm(nm, m)
    detail = ", ".join(f"{r} {v:.2e}" for r, v in norms.items())
    verdict("3 Markovian limit (kappa = 1e3 gamma_M)", max(norms.values()) < 1e-3, f"sup-norm {detail} (< 1e-3)")


def test_04_conservation(verdict):
    problems, slowest = [], 0.0
    for regime in REGIMES:
        for mode in ("markovian", "nonmarkovian"):
            start = time.perf_counter()
            raw = integrate(build_scenario(regime, mode))
            slowest = max(slowest, time.perf_counter() - start)
            rec = extract(raw)
            tr, herm, lam = raw.trace_error.max(), raw.hermiticity_drift.max(), rec.min_eigenvalue.min()
            if not (tr < TRACE_TOL and herm < HERMITICITY_TOL and lam >= -1e-8):
                problems.append(f"{regime}/{mode}: trace {tr:.1e} drift {herm:.1e} min eig {lam:.1e}")
    verdict("4 conservation suite", not problems and slowest < 30.0,
            "; ".join(problems) or f"6 runs clean, slowest {slowest:.1f} s (< 30 s)")


def test_05_two_level_oracle(verdict):
    gamma_cm, kappa_cm = 35.0, 20.0
    rec = simulate(two_level_scenario(gamma_cm, kappa_cm))
    worst = 0.0
    for t in (10.0, 100.0, 1000.0):
        i = int(np.searchsorted(rec.times, t))
        exact = two_level_exact(t, wavenumber_to_angular(gamma_cm), wavenumber_to_angular(kappa_cm), 0.5)
        worst = max(worst, abs(rec.population("e1")[i] - exact) / exact)
    verdict("5 two-level analytic oracle", worst < 1e-6, f"max relative error {worst:.2e} (< 1e-6)")


@pytest.mark.parametrize("dephasing", [True, False], ids=["dephasing_on", "dephasing_off"])
def test_06_coherence_enhancement(verdict, dephasing):
    gaps = {}
    for regime in REGIMES:
        nm = simulate(build_scenario(regime, "nonmarkovian", {"dephasing": dephasing}))
        m = simulate(build_scenario(regime, "markovian", {"dephasing": dephasing}))
        gaps[regime] = float(np.min(nm.abs_c - m.abs_c))
    detail = ", ".join(f"{r} {g:+.2e}" for r, g in gaps.items())
    verdict(f"6 coherence enhancement [dephasing {'on' if dephasing else 'off'}]",
            min(gaps.values()) >= -1e-6, f"min(|c_NM| - |c_M|) {detail} (>= -1e-6)")


def test_07_slower_charge_separation(verdict):
    halves = {}
    for regime in REGIMES:
        rep = compare(simulate(build_scenario(regime, "nonmarkovian")), simulate(build_scenario(regime, "markovian")))
        halves[regime] = (rep.t_half_nm, rep.t_half_m)
    detail = ", ".join(f"{r} {a:.1f} vs {b:.1f} fs" for r, (a, b) in halves.items())
    verdict("7 slower m1 build-up", all(a > b for a, b in halves.values()), f"t_half NM vs M: {detail}")


def test_08_steady_state_timing(verdict):
    nm = simulate(build_scenario("underdamped", "nonmarkovian"))
    m = simulate(build_scenario("underdamped", "markovian"))
    rep = compare(nm, m, window=300.0, eps=0.02)
    timing_ok = rep.t_ss_nm is not None and 1200.0 <= rep.t_ss_nm <= 1800.0
    verdict("8 steady-state timing", timing_ok and rep.steady_exceeds,
            f"t_ss {rep.t_ss_nm} fs (in [1200, 1800]); steady |c| NM {rep.steady_nm:.2e} vs M {rep.steady_m:.2e}")


def test_09_rk4_order(verdict):
    ref = simulate(build_scenario("underdamped", "nonmarkovian", {"rel_tol": 1e-13, "abs_tol": 1e-15,
                                                                  "max_step": 0.25}))
    errs = []
    for h in (0.5, 0.25):
        rec = simulate(build_scenario("underdamped", "nonmarkovian", {"method": "rk4", "max_step": h}))
        errs.append(max(np.max(np.abs(rec.populations - ref.populations)), np.max(np.abs(rec.abs_c - ref.abs_c))))
    ratio = errs[0] / errs[1]
    verdict("9 RK4 convergence order", 12.0 <= ratio <= 20.0,
            f"error ratio {ratio:.2f} (in [12, 20]); errors {errs[0]:.2e}, {errs[1]:.2e}")


def test_10_determinism_and_format(verdict, tmp_path):
    outs = [tmp_path / "a", tmp_path / "b"]
    for out in outs:
        assert main(["compare", "--regime", "underdamped", "--out", str(out)]) == 0
    files = sorted(p.name for p in outs[0].iterdir())
    same = all((outs[0] / f).read_bytes() == (outs[1] / f).read_bytes() for f in files)
    headers = {f: (outs[0] / f).read_text().splitlines()[0] for f in files if f.endswith(".csv")}
    format_ok = (headers["underdamped_nonmarkovian.csv"] == ",".join(CSV_COLUMNS)
                 and headers["underdamped_markovian.csv"] == ",".join(CSV_COLUMNS)
                 and headers["underdamped_comparison.csv"] == ",".join(REPORT_COLUMNS)
                 and headers["underdamped_summary.csv"] == "metric,value")
    verdict("10 determinism and format", same and format_ok,
            f"{len(files)} files byte-identical across runs: {same}; column contract: {format_ok}")
