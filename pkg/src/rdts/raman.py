"""Raman channel physics.

Anti-Stokes and Stokes count rates follow the Bose-Einstein phonon occupation
``n(T) = 1 / (exp(C/T) - 1)`` with ``C = h * shift / k_B``:

    AS(T) = A * n(T) + N_AS
    S(T)  = B * (n(T) + 1) + N_S

The calibration ratio ``(AS(T) - AS(T0)) / (S(T) - N_S)`` is linear in
``exp(-C/T)``, so two constants ``C1`` and ``C2`` describe it and the
temperature follows in closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import constants as sc

from rdts.errors import DomainError, InvalidRatio

#: Raman shift between pump and anti-Stokes line, as an ordinary frequency.
DEFAULT_SPECTRAL_SHIFT = 13e12


def _positive_temperature(T):
    T = np.asarray(T, dtype=float)
    if np.any(~(T > 0)):
        raise DomainError("temperature must be positive")
    return T


def _scalar_or_array(x):
    x = np.asarray(x)
    return float(x) if x.ndim == 0 else x


@dataclass(frozen=True)
class RamanConstants:
    """Raman shift and the derived temperature scale ``C`` in kelvin."""

    spectral_shift: float = DEFAULT_SPECTRAL_SHIFT
    C: float = field(init=False)

    def __post_init__(self):
        if not self.spectral_shift > 0:
            raise DomainError("spectral shift must be positive")
        object.__setattr__(self, "C", sc.h * self.spectral_shift / sc.k)


@dataclass(frozen=True)
class ChannelCoefficients:
    """Amplitudes and noise rates of the two detection channels (counts/s)."""

    A: float
    B: float
    N_AS: float = 0.0
    N_S: float = 0.0

    def __post_init__(self):
        if not (self.A > 0 and self.B > 0):
            raise DomainError("channel amplitudes must be positive")
        if self.N_AS < 0 or self.N_S < 0:
            raise DomainError("noise rates must be non-negative")


@dataclass(frozen=True)
class CalibrationConstants:
    """Fitted constants of ``ratio = C1 * exp(-C/T) + C2``.

    ``cov_C1_C2`` is the off-diagonal term of the fit covariance; it is needed
    to propagate the fit error to a predicted ratio.
    """

    C1: float
    C2: float
    T0: float
    raman: RamanConstants = field(default_factory=RamanConstants)
    sigma_C1: float = 0.0
    sigma_C2: float = 0.0
    cov_C1_C2: float = 0.0

    def __post_init__(self):
        if not self.C1 > 0:
            raise DomainError("C1 must be positive for the ratio to be invertible")
        if not self.T0 > 0:
            raise DomainError("reference temperature must be positive")

    def ratio_sigma_at(self, T: float) -> float:
        """Standard error of the fitted ratio line at temperature ``T``."""
        x = math.exp(-self.raman.C / T)
        var = (x * self.sigma_C1) ** 2 + self.sigma_C2**2 + 2 * x * self.cov_C1_C2
        return math.sqrt(max(var, 0.0))


def bose_occupation(T, rc: RamanConstants):
    T = _positive_temperature(T)
    # expm1 overflows to inf far below C; 1/inf = 0 is the correct limit
    with np.errstate(over="ignore"):
        return 1.0 / np.expm1(rc.C / T)


def as_rate(T, ch: ChannelCoefficients, rc: RamanConstants):
    """Anti-Stokes count rate in counts/s."""
    return _scalar_or_array(ch.A * bose_occupation(T, rc) + ch.N_AS)


def s_rate(T, ch: ChannelCoefficients, rc: RamanConstants):
    """Stokes count rate in counts/s."""
    return _scalar_or_array(ch.B * (bose_occupation(T, rc) + 1.0) + ch.N_S)


def ratio_forward(T, cal: CalibrationConstants):
    """Normalized anti-Stokes variation expected at temperature ``T``."""
    T = _positive_temperature(T)
    return _scalar_or_array(cal.C1 * np.exp(-cal.raman.C / T) + cal.C2)


def invert_temperatures(r, cal: CalibrationConstants):
    """Vectorized inversion returning ``(T, valid)``.

    Bins whose ratio falls outside the invertible domain get ``nan`` and
    ``valid = False`` instead of raising.
    """
    r = np.asarray(r, dtype=float)
    arg = (r - cal.C2) / cal.C1
    valid = np.isfinite(arg) & (arg > 0) & (arg < 1)
    T = np.full(r.shape, np.nan)
    T[valid] = -cal.raman.C / np.log(arg[valid])
    return T, valid


def invert_temperature(r: float, cal: CalibrationConstants) -> float:
    """Temperature in K from a calibration ratio.

    Raises
    ------
    InvalidRatio
        If ``(r - C2) / C1`` is not inside ``(0, 1)``.
    """
    arg = (r - cal.C2) / cal.C1
    if not arg > 0:
        raise InvalidRatio(f"ratio {r!r} is at or below C2={cal.C2!r}")
    if not arg < 1:
        raise InvalidRatio(f"ratio {r!r} maps to a non-positive temperature")
    return -cal.raman.C / math.log(arg)


def temperature_uncertainty(r: float, sigma_r: float, cal: CalibrationConstants) -> float:
    """First-order propagation of a ratio error to temperature."""
    if sigma_r < 0:
        raise DomainError("sigma_r must be non-negative")
    T = invert_temperature(r, cal)
    return T * T / cal.raman.C * sigma_r / (r - cal.C2)


def temperature_uncertainties(r, sigma_r, T, cal: CalibrationConstants):
    """Vectorized counterpart of :func:`temperature_uncertainty`; nan where ``T`` is."""
    r = np.asarray(r, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.asarray(T) ** 2 / cal.raman.C * np.asarray(sigma_r) / (r - cal.C2)
