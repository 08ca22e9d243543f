"""Electro-thermal model of a serpentine copper heating element."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from rdts.errors import ConvergenceError, DegenerateFit, DomainError

ROOM_T0 = 296.0
#: Linear expansion coefficient of copper, 1/K.
COPPER_ALPHA = 17e-6
#: Temperature coefficient of resistance of annealed copper near room temperature, 1/K.
COPPER_TCR = 3.93e-3
RHO_ROOM = 1.68e-8
RHO_77K = 1.5e-9
#: Extrapolation allowed beyond the resistivity table, K.
TABLE_MARGIN = 10.0


@dataclass(frozen=True)
class HeaterGeometry:
    """Trace dimensions (m) and board placement of one heating element."""

    center: tuple[float, float]
    footprint: float = 0.01
    L0: float = 0.432
    w: float = 0.16e-3
    h: float = 35e-6

    def __post_init__(self):
        if min(self.footprint, self.L0, self.w, self.h) <= 0:
            raise DomainError("heater dimensions must be positive")

    def bounds(self) -> tuple[float, float, float, float]:
        """Closed footprint square as ``(xmin, ymin, xmax, ymax)``."""
        half = self.footprint / 2
        x, y = self.center
        return (x - half, y - half, x + half, y + half)


def _default_rho_table():
    # The third point extends the table above room temperature so heated
    # traces (up to ~400 K) stay inside the interpolation hull.
    return (
        (77.0, RHO_77K),
        (ROOM_T0, RHO_ROOM),
        (400.0, RHO_ROOM * (1 + COPPER_TCR * (400.0 - ROOM_T0))),
    )


@dataclass(frozen=True)
class CopperProperties:
    rho_table: tuple[tuple[float, float], ...] = _default_rho_table()
    alpha: float = COPPER_ALPHA
    T0: float = ROOM_T0

    def __post_init__(self):
        temps = [t for t, _ in self.rho_table]
        if len(temps) < 2 or any(b <= a for a, b in zip(temps, temps[1:])):
            raise DomainError("resistivity table must be sorted with at least two points")
        if any(rho <= 0 for _, rho in self.rho_table):
            raise DomainError("resistivity must be positive")
        if not self.alpha > 0:
            raise DomainError("expansion coefficient must be positive")

    def resistivity(self, T: float) -> float:
        """Piecewise-linear resistivity, extrapolated at most ``TABLE_MARGIN`` K."""
        temps = [t for t, _ in self.rho_table]
        rhos = [r for _, r in self.rho_table]
        if not (temps[0] - TABLE_MARGIN <= T <= temps[-1] + TABLE_MARGIN):
            raise DomainError(
                f"T={T} K outside resistivity table [{temps[0]}, {temps[-1]}] K"
            )
        if T <= temps[0]:
            i = 0
        elif T >= temps[-1]:
            i = len(temps) - 2
        else:
            i = int(np.searchsorted(temps, T)) - 1
        t0, t1 = temps[i], temps[i + 1]
        return rhos[i] + (rhos[i + 1] - rhos[i]) * (T - t0) / (t1 - t0)


@dataclass(frozen=True)
class ThermalEnvironment:
    R_th: float
    label: str = "custom"
    ambient: float = ROOM_T0
    h_conv: float | None = None

    def __post_init__(self):
        if not self.R_th > 0:
            raise DomainError("thermal resistance must be positive")


def electrical_resistance(T: float, g: HeaterGeometry, cu: CopperProperties = CopperProperties()) -> float:
    """Trace resistance in ohm including resistivity change and expansion."""
    return cu.resistivity(T) * g.L0 * (1 + cu.alpha * (T - cu.T0)) / (g.h * g.w)


def dissipated_power(I: float, T: float, g: HeaterGeometry, cu: CopperProperties = CopperProperties()) -> float:
    if I < 0:
        raise DomainError("current must be non-negative")
    return electrical_resistance(T, g, cu) * I**2


def temperature_rise(
    I: float,
    env: ThermalEnvironment,
    g: HeaterGeometry,
    cu: CopperProperties = CopperProperties(),
    mode: str = "frozen",
    tol: float = 1e-9,
    max_iter: int = 1000,
) -> float:
    """Steady-state temperature rise of the heater.

    ``frozen`` evaluates the resistance at ambient; ``self_consistent`` solves
    ``dT = R_th * R_el(ambient + dT) * I**2`` by fixed-point iteration.
    """
    if mode == "frozen":
        return env.R_th * dissipated_power(I, env.ambient, g, cu)
    if mode != "self_consistent":
        raise ValueError(f"unknown mode {mode!r}")
    dT = env.R_th * dissipated_power(I, env.ambient, g, cu)
    for _ in range(max_iter):
        nxt = env.R_th * dissipated_power(I, env.ambient + dT, g, cu)
        if abs(nxt - dT) < tol:
            return nxt
        dT = nxt
    raise ConvergenceError("self-consistent temperature rise did not converge")


def fit_quadratic_coefficient(points: Sequence[tuple[float, float]]) -> tuple[float, float]:
    """Least-squares ``K`` in ``dT = K * I**2`` (no offset) and its standard error."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    I, dT = pts[:, 0], pts[:, 1]
    if np.unique(I[I > 0]).size < 2:
        raise DegenerateFit("need at least two distinct non-zero currents")
    u = I**2
    suu = float(np.sum(u * u))
    K = float(np.sum(u * dT)) / suu
    dof = len(I) - 1
    resid = dT - K * u
    sigma = math.sqrt(float(np.sum(resid**2)) / dof / suu) if dof > 0 else 0.0
    return K, sigma


def thermal_resistance_ratio(h_hot: float, h_cold: float) -> float:
    """``R_th(cold) / R_th(hot)`` from convective coefficients, i.e. ``h_hot / h_cold``.

    ``h_hot`` belongs to the warmer environment (air), ``h_cold`` to the
    cryogenic bath.
    """
    if not (h_hot > 0 and h_cold > 0):
        raise DomainError("convective coefficients must be positive")
    return h_hot / h_cold


def thermal_resistance(K: float, R_el: float) -> float:
    """Thermal resistance (K/W) from a fitted ``R_th * R_el`` product."""
    if not R_el > 0:
        raise DomainError("electrical resistance must be positive")
    return K / R_el


# Fitted R_th * R_el products, K/A^2, for R9 in ambient air and in LN2.
K_AIR = 40.0
K_LN2 = 0.49
H_AIR = 10.0
H_LN2 = 120.0


def environment(label: str, g: HeaterGeometry | None = None, cu: CopperProperties = CopperProperties()) -> ThermalEnvironment:
    """Preset environments whose ``R_th`` reproduces the fitted ``K`` values."""
    g = g or HeaterGeometry(center=(0.0, 0.0))
    if label == "air_296K":
        return ThermalEnvironment(K_AIR / electrical_resistance(ROOM_T0, g, cu), label, ROOM_T0, H_AIR)
    if label == "LN2_77K":
        return ThermalEnvironment(K_LN2 / electrical_resistance(77.0, g, cu), label, 77.0, H_LN2)
    raise ValueError(f"unknown environment {label!r}")
