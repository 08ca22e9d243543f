"""Figures of merit measured on reconstructed profiles."""

from __future__ import annotations

import numpy as np
from scipy.optimize import curve_fit
from scipy.special import ndtr

#: 10-90 % rise of a Gaussian-blurred step, in units of the Gaussian sigma.
SIGMA_TO_10_90 = 2.0 * 1.2815515655446004


def _edge(x, base, height, x0, sigma):
    return base + height * ndtr((x - x0) / sigma)


def fit_edge(x, y, x0_guess: float, sigma_guess: float = 0.01, sigma_y=None):
    """Least-squares fit of ``base + height * Phi((x - x0) / sigma)``.

    Returns ``(base, height, x0, sigma)``; ``sigma`` is forced positive.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ok = np.isfinite(y)
    p0 = [float(np.min(y[ok])), float(np.ptp(y[ok])), x0_guess, sigma_guess]
    popt, _ = curve_fit(_edge, x[ok], y[ok], p0=p0,
                        sigma=None if sigma_y is None else np.asarray(sigma_y)[ok])
    popt[3] = abs(popt[3])
    return tuple(float(v) for v in popt)


def edge_width_10_90(x, y, x0_guess: float, sigma_guess: float = 0.01, sigma_y=None) -> float:
    """10-90 % width of a rising edge from a blurred-step fit."""
    return SIGMA_TO_10_90 * fit_edge(x, y, x0_guess, sigma_guess, sigma_y)[3]


def _box(x, base, height, a, b, sigma):
    return base + height * (ndtr((x - a) / sigma) - ndtr((x - b) / sigma))


def fit_box(x, y, a_guess: float, b_guess: float, sigma_guess: float = 0.01, sigma_y=None):
    """Fit of a blurred box whose two edges share one ``sigma``.

    Returns ``(base, height, a, b, sigma)``. Using both edges of a heated
    section halves the variance of ``sigma`` compared with a single edge.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ok = np.isfinite(y)
    p0 = [float(np.min(y[ok])), float(np.ptp(y[ok])), a_guess, b_guess, sigma_guess]
    popt, _ = curve_fit(_box, x[ok], y[ok], p0=p0,
                        sigma=None if sigma_y is None else np.asarray(sigma_y)[ok])
    popt[4] = abs(popt[4])
    return tuple(float(v) for v in popt)


def box_width_10_90(x, y, a_guess: float, b_guess: float, sigma_guess: float = 0.01, sigma_y=None) -> float:
    """10-90 % edge width shared by both edges of a blurred box."""
    return SIGMA_TO_10_90 * fit_box(x, y, a_guess, b_guess, sigma_guess, sigma_y)[4]

