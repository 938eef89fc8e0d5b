"""Bath spectral densities.

Only two kinds ship: a normalized Lorentzian peak and a flat (white-noise)
density standing in for a memoryless bath. Frequencies are angular, rad/fs.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np


class SpectralKind(enum.Enum):
    LORENTZIAN = "lorentzian"
    FLAT_MARKOVIAN = "flat_markovian"


@dataclass(frozen=True)
class SpectralDensity:
    """Spectral density J(w) of a bosonic bath.

    Parameters
    ----------
    kind : SpectralKind
    center_omega0 : float
        Peak position (rad/fs).
    width_kappa : float
        Lorentzian half-width at half-maximum (rad/fs). Its inverse is the
        bath memory time. Ignored for the flat kind.
    norm_N : float
        Total weight, ``integral J(w) dw`` for the Lorentzian kind. For the
        flat kind it is the Markovian rate the bath induces.
    """

    kind: SpectralKind
    center_omega0: float
    width_kappa: float
    norm_N: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.center_omega0):
            raise ValueError("center_omega0 must be finite")
        if not (math.isfinite(self.norm_N) and self.norm_N > 0):
            raise ValueError(f"norm_N must be positive, got {self.norm_N!r}")
        if self.kind is SpectralKind.LORENTZIAN:
            if not (math.isfinite(self.width_kappa) and self.width_kappa > 0):
                raise ValueError(
                    f"width_kappa must be positive for a Lorentzian, got {self.width_kappa!r}"
                )

    @classmethod
    def lorentzian(cls, center_omega0: float, width_kappa: float, norm_N: float) -> "SpectralDensity":
        return cls(SpectralKind.LORENTZIAN, float(center_omega0), float(width_kappa), float(norm_N))

    @classmethod
    def flat(cls, gamma_markov: float, center_omega0: float = 0.0) -> "SpectralDensity":
        return cls(SpectralKind.FLAT_MARKOVIAN, float(center_omega0), math.inf, float(gamma_markov))

    def __call__(self, omega):
        return evaluate(self, omega)


def evaluate(J: SpectralDensity, omega):
    """Value of J at angular frequency ``omega`` (scalar or array).

    Lorentzian: ``N / (pi kappa) / (1 + ((omega - omega0) / kappa)**2)``.

    Flat: the constant ``N / pi``. Its Fourier transform is ``2 N delta(tau)``,
    and the half-weight of the delta at the end of the memory integral yields
    a constant rate ``N``.
    """
    w = np.asarray(omega, dtype=float)
    if not np.all(np.isfinite(w)):
        raise ValueError("omega must be finite")
    if J.kind is SpectralKind.FLAT_MARKOVIAN:
        out = np.full_like(w, J.norm_N / math.pi)
    else:
        x = (w - J.center_omega0) / J.width_kappa
        out = J.norm_N / (math.pi * J.width_kappa) / (1.0 + x * x)
    return float(out) if out.ndim == 0 else out


def normalization_for_target_rate(gamma_markov: float, width_kappa: float) -> float:
    """Weight N for which a resonant Lorentzian of width ``width_kappa``
    induces a rate saturating at ``gamma_markov``: ``N = gamma * kappa``."""
    if not (gamma_markov > 0 and width_kappa > 0):
        raise ValueError(
            f"gamma_markov and width_kappa must be positive, got {gamma_markov!r}, {width_kappa!r}"
        )
    return float(gamma_markov) * float(width_kappa)
