"""Thermocouple calibration of the normalized anti-Stokes ratio."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from rdts.board import FiberLayout, Heater, heater_intervals
from rdts.errors import ConfigError, DegenerateFit, DegenerateStokes, InvalidRatio
from rdts.otdr import CountHistogram
from rdts.raman import (
    CalibrationConstants,
    ChannelCoefficients,
    RamanConstants,
    as_rate,
    invert_temperature,
    s_rate,
    temperature_uncertainty,
)

MIN_REGION_BINS = 3


@dataclass(frozen=True)
class CalibrationRegion:
    """Averaging window along the fiber, in metres of arc length."""

    start: float
    end: float

    def __post_init__(self):
        if not self.end > self.start:
            raise ConfigError("calibration region end must exceed start")

    def bin_indices(self, hist: CountHistogram) -> np.ndarray:
        """Indices of the bins lying entirely inside the region."""
        edges = hist.bin_edges()
        tol = 1e-12
        inside = (edges[:-1] >= self.start - tol) & (edges[1:] <= self.end + tol)
        idx = np.flatnonzero(inside)
        if idx.size < MIN_REGION_BINS:
            raise ConfigError(
                f"region [{self.start}, {self.end}] m holds {idx.size} whole bins, "
                f"need {MIN_REGION_BINS}"
            )
        return idx


@dataclass(frozen=True)
class CalibrationPoint:
    T_cal: float
    delta_ratio: float
    sigma: float = 0.0

    def __post_init__(self):
        if self.sigma < 0:
            raise ConfigError("sigma must be non-negative")


def estimate_noise_floor(hist: CountHistogram, dark_rate: float) -> float:
    """Dark counts expected per bin over the histogram's integration."""
    return dark_rate * hist.integration_time * hist.bin_width * hist.repetition_rate


def delta_ratio_arrays(as_T, as_ref, s_T, N_S):
    """Elementwise ratio and Poisson standard error; non-positive Stokes gives nan."""
    as_T, as_ref, s_T = (np.asarray(a, dtype=float) for a in (as_T, as_ref, s_T))
    denom = s_T - N_S
    ok = denom > 0
    safe = np.where(ok, denom, 1.0)
    r = np.where(ok, (as_T - as_ref) / safe, np.nan)
    var = (as_T + as_ref + np.where(ok, r, 0.0) ** 2 * s_T) / safe**2
    return r, np.where(ok, np.sqrt(var), np.nan)


def compute_delta_ratio(as_T: CountHistogram, as_ref: CountHistogram, s_T: CountHistogram,
                        region: CalibrationRegion, N_S: float) -> tuple[float, float]:
    """Region-averaged ``(AS(T) - AS(T0)) / (S(T) - N_S)`` and its standard error.

    Each region mean is over ``n`` bins, so its Poisson variance is mean / n.
    """
    if not (as_T.compatible(as_ref) and as_T.compatible(s_T)):
        raise ConfigError("histograms do not share bin width and length")
    idx = region.bin_indices(as_T)
    n = idx.size
    m_as = float(np.mean(as_T.counts[idx]))
    m_ref = float(np.mean(as_ref.counts[idx]))
    m_s = float(np.mean(s_T.counts[idx]))
    denom = m_s - N_S
    if not denom > 0:
        raise DegenerateStokes(f"Stokes mean {m_s} does not exceed the noise floor {N_S}")
    r = (m_as - m_ref) / denom
    sigma = math.sqrt((m_as + m_ref + r * r * m_s) / n) / denom
    return r, sigma


def fit_calibration(points: Sequence[CalibrationPoint], T0: float,
                    rc: RamanConstants = RamanConstants()) -> CalibrationConstants:
    """Straight-line fit of the ratio against ``exp(-C/T)``.

    Weighted by ``1/sigma**2`` when every point carries a positive sigma (the
    covariance then uses the sigmas as absolute errors), otherwise unweighted
    with the residual variance as error scale.
    """
    if len({p.T_cal for p in points}) < 2:
        raise DegenerateFit("calibration needs at least two distinct temperatures")
    x = np.exp(-rc.C / np.array([p.T_cal for p in points]))
    y = np.array([p.delta_ratio for p in points])
    sig = np.array([p.sigma for p in points])
    weighted = bool(np.all(sig > 0))
    w = 1.0 / sig**2 if weighted else np.ones_like(x)
    X = np.column_stack([x, np.ones_like(x)])
    normal = X.T @ (w[:, None] * X)
    C1, C2 = np.linalg.solve(normal, X.T @ (w * y))
    cov = np.linalg.inv(normal)
    if not weighted:
        dof = len(x) - 2
        cov = cov * (float(np.sum((y - X @ [C1, C2]) ** 2)) / dof if dof > 0 else 0.0)
    if not C1 > 0:
        raise DegenerateFit(f"fitted slope C1={C1:.4g} is not positive")
    return CalibrationConstants(
        C1=float(C1), C2=float(C2), T0=T0, raman=rc,
        sigma_C1=math.sqrt(cov[0, 0]), sigma_C2=math.sqrt(cov[1, 1]), cov_C1_C2=float(cov[0, 1]),
    )


def calibration_report(cal: CalibrationConstants, points: Sequence[CalibrationPoint]) -> list[dict]:
    """Per-point ``T_cal``, inverted ``T_DTS``, its sigma and the residual in K."""
    rows = []
    for p in points:
        row = {"T_cal": p.T_cal, "delta_ratio": p.delta_ratio, "sigma_ratio": p.sigma}
        try:
            T = invert_temperature(p.delta_ratio, cal)
            row.update(T_DTS=T, sigma_T=temperature_uncertainty(p.delta_ratio, p.sigma, cal),
                       residual=T - p.T_cal, valid=True)
        except InvalidRatio as exc:
            row.update(T_DTS=None, sigma_T=None, residual=None, valid=False, error=str(exc))
        rows.append(row)
    return rows


def heater_core_region(layout: FiberLayout, heater: Heater, margin: float) -> CalibrationRegion:
    """Longest in-footprint fiber section of a heater, trimmed by ``margin`` at both ends.

    With ``margin`` set to the OTDR resolution the remaining section reads the
    full heater temperature.
    """
    spans = heater_intervals(layout, heater)
    if not spans:
        raise ConfigError(f"fiber does not cross heater {heater.id}")
    a, b = max(spans, key=lambda ab: ab[1] - ab[0])
    return CalibrationRegion(a + margin, b - margin)


def offset_term(T, T0: float, ch: ChannelCoefficients, rc: RamanConstants = RamanConstants()):
    """``AS(T0) / (S(T) - N_S)``, the term a constant offset stands in for."""
    return as_rate(T0, ch, rc) / (s_rate(T, ch, rc) - ch.N_S)


def offset_term_variation(T_lo: float, T_hi: float, T0: float, ch: ChannelCoefficients,
                          rc: RamanConstants = RamanConstants(), n: int = 1001) -> float:
    """Largest relative departure of :func:`offset_term` from its value at ``T0`` over ``[T_lo, T_hi]``."""
    T = np.linspace(T_lo, T_hi, n)
    ref = offset_term(T0, T0, ch, rc)
    return float(np.max(np.abs(offset_term(T, T0, ch, rc) / ref - 1.0)))
