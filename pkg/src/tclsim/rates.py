"""Time-dependent transition rates induced by a bath spectral density.

The complex rate of a transition at angular frequency ``w_ij`` is

    Gamma(t) = int_0^t dt' int dw J(w) exp(i (w_ij - w)(t - t'))

and the dissipator uses ``gamma(t) = Re Gamma(t)``. For a resonant
Lorentzian of width kappa and weight ``gamma_M * kappa`` this is
``gamma_M * (1 - exp(-kappa t))``. ``rate_quadrature`` evaluates the double
integral numerically and serves as the independent check on that result.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import integrate

from .spectral import SpectralDensity, SpectralKind, normalization_for_target_rate

#: Factor between Re Gamma(t) and the dissipator rate: ``eq10`` uses the full
#: real part, ``eq3`` reads Gamma = gamma/2 + i lambda and halves it.
RATE_CONVENTIONS = {"eq10": 1.0, "eq3": 0.5}

# Inner (frequency) integral accuracy, in units of the Lorentzian weight.
_INNER_EPSREL = 1e-12
_INNER_EPSABS = 1e-14
# Central region of the frequency integral, in half-widths.
_CORE_HALFWIDTHS = 50.0


class QuadratureError(RuntimeError):
    """Numerical quadrature did not reach the requested accuracy."""


class RateKind(enum.Enum):
    CLOSED_FORM_LORENTZIAN = "closed_form_lorentzian"
    MARKOVIAN_CONSTANT = "markovian_constant"
    QUADRATURE_TABLE = "quadrature_table"


def rate_closed_form(t, gamma_markov: float, width_kappa: float):
    """``gamma_M * (1 - exp(-kappa t))`` for scalar or array ``t >= 0``."""
    tt = np.asarray(t, dtype=float)
    if np.any(tt < 0) or np.any(~np.isfinite(tt)):
        raise ValueError("t must be finite and nonnegative")
    if not (gamma_markov > 0 and width_kappa > 0):
        raise ValueError("gamma_markov and width_kappa must be positive")
    out = -gamma_markov * np.expm1(-width_kappa * tt)
    return float(out) if out.ndim == 0 else out


def lorentzian_fourier(tau: float, J: SpectralDensity) -> complex:
    """Closed-form ``int J(w) exp(i (w0 - w) tau) dw = N exp(-kappa |tau|)``.

    Closing the contour in the upper half plane for ``tau < 0`` and in the
    lower one for ``tau > 0`` picks the pole at ``w0 -/+ i kappa``; both give
    the same decaying exponential, so the kernel is even in ``tau``.
    """
    if J.kind is not SpectralKind.LORENTZIAN:
        raise ValueError("lorentzian_fourier needs a Lorentzian density")
    return complex(J.norm_N * math.exp(-J.width_kappa * abs(tau)), 0.0)


def _quad(func, a, b, **kw) -> tuple[float, float]:
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(func, a, b, **kw)[:2]
        except integrate.IntegrationWarning as exc:
            raise QuadratureError(f"quadrature on [{a}, {b}] failed: {exc}") from exc
    return val, err


def _unit_lorentzian_cosine(w: float) -> tuple[float, float]:
    """``(1/pi) int cos(w x) / (1 + x^2) dx`` over the real line, numerically.

    Returns (value, error estimate). The core ``|x| < 50`` uses QAWO; the
    tails use a log-substituted stretch up to one oscillation period and
    QAWF beyond it, so nothing is truncated.
    """
    w = abs(w)
    f = lambda x: 1.0 / (1.0 + x * x)
    kw = dict(epsabs=_INNER_EPSABS, epsrel=_INNER_EPSREL, limit=400)
    W = _CORE_HALFWIDTHS
    if w < _INNER_EPSABS:
        # the exact value is exp(-w); below this the w = 0 integral is as good
        core, e1 = _quad(f, 0.0, W, **kw)
        tail, e2 = _quad(f, W, np.inf, **kw)
        return 2.0 * (core + tail) / math.pi, 2.0 * (e1 + e2) / math.pi

    core, e1 = _quad(f, 0.0, W, weight="cos", wvar=w, **kw)
    total, err = core, e1
    X = max(W, 2.0 * math.pi / w)
    if X > W:
        # x = e^s; written with e^-s so large s cannot overflow
        g = lambda s: math.cos(w * math.exp(s)) * math.exp(-s) / (1.0 + math.exp(-2.0 * s))
        mid, e2 = _quad(g, math.log(W), math.log(X), **kw)
        total += mid
        err += e2
    tail, e3 = _quad(f, X, np.inf, weight="cos", wvar=w, epsabs=10 * _INNER_EPSABS, limlst=200)
    total += tail
    err += e3
    return 2.0 * total / math.pi, 2.0 * err / math.pi


def bath_kernel_quadrature(tau: float, J: SpectralDensity, transition_omega: float) -> complex:
    """Numerical ``int J(w) exp(i (w_ij - w) tau) dw`` for a Lorentzian.

    With ``w = w0 + kappa x`` the transform factors into the phase
    ``exp(i (w_ij - w0) tau)`` times a real cosine integral; the sine part
    vanishes because the Lorentzian is even about its centre.
    """
    if J.kind is not SpectralKind.LORENTZIAN:
        raise ValueError("bath_kernel_quadrature needs a Lorentzian density")
    val, _ = _unit_lorentzian_cosine(J.width_kappa * tau)
    phase = (transition_omega - J.center_omega0) * tau
    return J.norm_N * val * complex(math.cos(phase), math.sin(phase))


def rate_quadrature(t: float, J: SpectralDensity, transition_omega: float, tol: float = 1e-8) -> complex:
    """Complex rate Gamma(t) by nested adaptive quadrature.

    The outer integral runs over the memory lag ``tau = t - t'`` in
    ``[0, t]``; each integrand evaluation performs the full frequency
    integral. Raises :class:`QuadratureError` when the estimated error
    exceeds ``tol * |Gamma|``.
    """
    if not (t >= 0 and math.isfinite(t)):
        raise ValueError("t must be finite and nonnegative")
    if not (0 < tol <= 1e-2):
        raise ValueError("tol must lie in (0, 1e-2]")
    if t == 0.0:
        return 0j
    if J.kind is SpectralKind.FLAT_MARKOVIAN:
        # delta-correlated kernel: the memory integral is saturated at once
        return complex(J.norm_N, 0.0)

    value, err = _kernel_segment(J, transition_omega, 0.0, t, tol)
    if err > tol * abs(value) + 1e-3 * tol * J.norm_N / J.width_kappa:
        raise QuadratureError(
            f"rate quadrature at t={t} fs: error estimate {err:.3e} exceeds tol*|Gamma|"
        )
    return value


def cross_rate(t, rate_i: "RateFunction", rate_j: "RateFunction", p: float):
    """Interference rate ``p * sqrt(gamma_i(t) gamma_j(t))`` of two
    transitions damped by one bath."""
    if not (-1.0 <= p <= 1.0):
        raise ValueError(f"alignment p must lie in [-1, 1], got {p!r}")
    if np.any(np.asarray(t) < 0):
        raise ValueError("t must be nonnegative")
    return p * np.sqrt(rate_i.value(t) * rate_j.value(t))


@dataclass(frozen=True)
class RateFunction:
    """Rate gamma(t) of one transition.

    ``detuning`` is ``w0 - w_ij``, the offset of the bath peak from the
    transition. ``table`` holds ``(t, Re Gamma, Im Gamma)`` arrays for the
    quadrature-tabulated kind; outside the grid the last value is held.
    """

    kind: RateKind
    gamma_markov: float
    width_kappa: float = math.nan
    transition_omega: float = 0.0
    detuning: float = 0.0
    convention: str = "eq10"
    table: Optional[tuple] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if not (self.gamma_markov >= 0 and math.isfinite(self.gamma_markov)):
            raise ValueError(f"gamma_markov must be finite and >= 0, got {self.gamma_markov!r}")
        if self.convention not in RATE_CONVENTIONS:
            raise ValueError(f"unknown rate convention {self.convention!r}")
        if self.kind is RateKind.CLOSED_FORM_LORENTZIAN and self.gamma_markov > 0:
            if not (self.width_kappa > 0 and math.isfinite(self.width_kappa)):
                raise ValueError(f"width_kappa must be positive, got {self.width_kappa!r}")
        if self.kind is RateKind.QUADRATURE_TABLE and self.table is None:
            raise ValueError("quadrature-table rate needs a table")

    @classmethod
    def closed_form(cls, gamma_markov, width_kappa, transition_omega=0.0, detuning=0.0, convention="eq10"):
        return cls(RateKind.CLOSED_FORM_LORENTZIAN, float(gamma_markov), float(width_kappa),
                   float(transition_omega), float(detuning), convention)

    @classmethod
    def markovian(cls, gamma_markov, transition_omega=0.0, convention="eq10"):
        return cls(RateKind.MARKOVIAN_CONSTANT, float(gamma_markov), math.nan,
                   float(transition_omega), 0.0, convention)

    @classmethod
    def from_quadrature(cls, gamma_markov, width_kappa, transition_omega, t_grid,
                        detuning=0.0, tol=1e-8, convention="eq10"):
        """Tabulate Gamma on ``t_grid`` (ascending, starting at 0) by
        accumulating the quadrature segment by segment."""
        proto = cls.closed_form(gamma_markov, width_kappa, transition_omega, detuning, convention)
        J = proto.spectral_density()
        ts = np.asarray(t_grid, dtype=float)
        if ts.ndim != 1 or ts.size < 2 or ts[0] != 0.0 or np.any(np.diff(ts) <= 0):
            raise ValueError("t_grid must be ascending, start at 0 and hold >= 2 points")
        re = np.zeros_like(ts)
        im = np.zeros_like(ts)
        prev = 0j
        for k in range(1, ts.size):
            # Gamma(t_k) - Gamma(t_{k-1}) is the kernel integrated over
            # the lag window (t_{k-1}, t_k].
            seg, _ = _kernel_segment(J, transition_omega, ts[k - 1], ts[k], tol)
            prev = prev + seg
            re[k], im[k] = prev.real, prev.imag
        for a in (ts, re, im):
            a.setflags(write=False)
        return cls(RateKind.QUADRATURE_TABLE, float(gamma_markov), float(width_kappa),
                   float(transition_omega), float(detuning), convention, (ts, re, im))

    @property
    def factor(self) -> float:
        return RATE_CONVENTIONS[self.convention]

    def spectral_density(self) -> SpectralDensity:
        """Bath density implied by this rate (Lorentzian kinds only)."""
        if self.kind is RateKind.MARKOVIAN_CONSTANT:
            return SpectralDensity.flat(self.gamma_markov, self.transition_omega)
        return SpectralDensity.lorentzian(
            self.transition_omega + self.detuning,
            self.width_kappa,
            normalization_for_target_rate(self.gamma_markov, self.width_kappa),
        )

    def complex_rate(self, t):
        """Gamma(t) before the convention factor. Im part is the Lamb shift,
        reported for diagnostics only."""
        tt = np.asarray(t, dtype=float)
        if np.any(tt < 0):
            raise ValueError("t must be nonnegative")
        if self.gamma_markov == 0.0:
            out = np.zeros(tt.shape, dtype=complex)
        elif self.kind is RateKind.MARKOVIAN_CONSTANT:
            out = np.full(tt.shape, complex(self.gamma_markov))
        elif self.kind is RateKind.CLOSED_FORM_LORENTZIAN:
            k = self.width_kappa
            if self.detuning == 0.0:
                out = (-self.gamma_markov * np.expm1(-k * tt)).astype(complex)
            else:
                # kernel N exp(-kappa tau) exp(i (w_ij - w0) tau)
                z = k + 1j * self.detuning
                out = self.gamma_markov * k * (-np.expm1(-z * tt)) / z
        else:
            ts, re, im = self.table
            out = np.interp(tt, ts, re) + 1j * np.interp(tt, ts, im)
        return complex(out) if out.ndim == 0 else out

    def value(self, t):
        """Dissipator rate gamma(t) (rad/fs)."""
        tt = np.asarray(t, dtype=float)
        if self.gamma_markov == 0.0:
            out = np.zeros(tt.shape)
        elif self.kind is RateKind.MARKOVIAN_CONSTANT:
            if np.any(tt < 0):
                raise ValueError("t must be nonnegative")
            out = np.full(tt.shape, self.gamma_markov)
        elif self.kind is RateKind.CLOSED_FORM_LORENTZIAN and self.detuning == 0.0:
            if np.any(tt < 0):
                raise ValueError("t must be nonnegative")
            out = -self.gamma_markov * np.expm1(-self.width_kappa * tt)
        else:
            out = np.real(self.complex_rate(tt))
        out = self.factor * out
        return float(out) if np.ndim(out) == 0 else out


def _kernel_segment(J: SpectralDensity, transition_omega: float, a: float, b: float,
                    tol: float) -> tuple[complex, float]:
    """Kernel integrated over lags in ``[a, b]``; returns (value, error)."""
    detune = transition_omega - J.center_omega0
    kappa = J.width_kappa
    kw = dict(epsabs=1e-3 * tol * J.norm_N / kappa, epsrel=tol, limit=200)

    def kre(tau):
        return J.norm_N * math.cos(detune * tau) * _unit_lorentzian_cosine(kappa * tau)[0]

    def kim(tau):
        return J.norm_N * math.sin(detune * tau) * _unit_lorentzian_cosine(kappa * tau)[0]

    re, err_re = _quad(kre, a, b, **kw)
    im, err_im = (0.0, 0.0) if detune == 0.0 else _quad(kim, a, b, **kw)
    return complex(re, im), math.hypot(err_re, err_im)
