"""Trace inversion and two-dimensional thermogram reconstruction.

A thermogram is built in four steps: sample the fiber path every centimetre,
map each sample to its reporting bin, stamp a Gaussian hot spot of the bin's
temperature rise at the sample position, then smooth the map with a Gaussian
filter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from rdts.board import BoardModel, FiberLayout
from rdts.calibration import CalibrationRegion, compute_delta_ratio, delta_ratio_arrays
from rdts.errors import ConfigError, DomainError, InvalidRatio, ShapeError
from rdts.otdr import FWHM_TO_SIGMA, CountHistogram
from rdts.raman import (
    CalibrationConstants,
    invert_temperature,
    invert_temperatures,
    temperature_uncertainties,
    temperature_uncertainty,
)

REPORTING_LENGTH = 0.01
#: Gaussian hot spots are truncated at this many FWHM from their centre.
SPLAT_RADIUS_FWHM = 3.0


@dataclass
class TemperatureProfile:
    bin_length: float
    temperatures: np.ndarray
    sigmas: np.ndarray
    valid: np.ndarray
    ratios: np.ndarray | None = None

    def __post_init__(self):
        n = len(self.temperatures)
        if len(self.sigmas) != n or len(self.valid) != n:
            raise ShapeError("profile arrays differ in length")

    def __len__(self):
        return len(self.temperatures)

    def positions(self) -> np.ndarray:
        """Fiber position of each bin centre, m."""
        return (np.arange(len(self)) + 0.5) * self.bin_length


@dataclass(frozen=True)
class SamplePoint:
    arc_length: float
    board_xy: tuple[float, float]
    bin_index: int
    color_tag: int


@dataclass
class ThermogramGrid:
    """Temperature raster; ``values[j, i]`` is the pixel whose lower-left corner
    sits at ``origin + (i, j) * resolution``."""

    resolution: float
    values: np.ndarray
    origin: tuple[float, float] = (0.0, 0.0)

    @property
    def shape(self):
        return self.values.shape

    def pixel_centers(self):
        ny, nx = self.values.shape
        xs = self.origin[0] + (np.arange(nx) + 0.5) * self.resolution
        ys = self.origin[1] + (np.arange(ny) + 0.5) * self.resolution
        return xs, ys

    def value_at(self, x: float, y: float) -> float:
        i = int((x - self.origin[0]) / self.resolution)
        j = int((y - self.origin[1]) / self.resolution)
        return float(self.values[j, i])


def aggregation_factor(raw_bin_length: float, reporting_length: float = REPORTING_LENGTH) -> int:
    """Raw bins summed into one reporting bin (nearest integer, at least one)."""
    return max(1, int(round(reporting_length / raw_bin_length)))


def _aggregate(counts: np.ndarray, k: int) -> np.ndarray:
    n = len(counts) // k
    return counts[: n * k].reshape(n, k).sum(axis=1)


def invert_profile(as_T: CountHistogram, as_ref: CountHistogram, s_T: CountHistogram,
                   cal: CalibrationConstants, layout: FiberLayout, N_S: float,
                   reporting_length: float = REPORTING_LENGTH) -> TemperatureProfile:
    """Per-bin DTS temperature along the whole fiber.

    Raw counts are summed into reporting bins before forming ratios. Bins with
    a non-positive Stokes signal, a non-invertible ratio or lying beyond the
    fiber end are flagged invalid and carry ``nan``.
    """
    if not (as_T.compatible(as_ref) and as_T.compatible(s_T)):
        raise ShapeError("histograms are not aligned")
    k = aggregation_factor(as_T.bin_length, reporting_length)
    a, ref, s = (_aggregate(h.counts, k) for h in (as_T, as_ref, s_T))
    r, sigma_r = delta_ratio_arrays(a, ref, s, k * N_S)
    T, valid = invert_temperatures(r, cal)
    bin_length = k * as_T.bin_length
    on_fiber = (np.arange(len(T)) + 1) * bin_length <= layout.total_length + 1e-12
    valid &= on_fiber
    T[~valid] = np.nan
    sig_T = np.where(valid, temperature_uncertainties(r, sigma_r, T, cal), np.nan)
    return TemperatureProfile(bin_length, T, sig_T, valid, r)


def region_temperature(as_T: CountHistogram, as_ref: CountHistogram, s_T: CountHistogram,
                       cal: CalibrationConstants, region: CalibrationRegion, N_S: float) -> tuple[float, float]:
    """Temperature and sigma of a fiber section from region-averaged counts."""
    r, sigma = compute_delta_ratio(as_T, as_ref, s_T, region, N_S)
    return invert_temperature(r, cal), temperature_uncertainty(r, sigma, cal)


def sample_path(layout: FiberLayout, spacing: float = REPORTING_LENGTH,
                bin_length: float | None = None) -> list[SamplePoint]:
    """Points every ``spacing`` along the on-board path with their profile bin.

    ``bin_index`` counts reporting bins from the fiber input, so it indexes the
    :class:`TemperatureProfile` directly.
    """
    if not spacing > 0:
        raise DomainError("spacing must be positive")
    if spacing > layout.path_length:
        raise ConfigError("spacing exceeds the on-board path length")
    bin_length = spacing if bin_length is None else bin_length
    n = int(math.floor(layout.path_length / spacing + 1e-9)) + 1
    s = layout.lead_in + np.arange(n) * spacing
    xy = layout.point_at(np.minimum(s, layout.path_end))
    return [
        SamplePoint(float(si), (float(p[0]), float(p[1])), int(math.floor(si / bin_length + 1e-9)), i)
        for i, (si, p) in enumerate(zip(s, xy))
    ]


def _empty_grid(board: BoardModel, resolution: float) -> ThermogramGrid:
    nx = int(round(board.width / resolution))
    ny = int(round(board.height / resolution))
    return ThermogramGrid(resolution, np.full((ny, nx), float(board.ambient)))


def splat_gaussians(points, profile: TemperatureProfile, board: BoardModel,
                    fwhm: float = 0.01, resolution: float = 1e-3) -> ThermogramGrid:
    """Stamp a Gaussian of peak ``T_bin - ambient`` at every valid sample point.

    Overlapping stamps combine by taking the largest contribution at each
    pixel. Pixels outside every stamp stay at ambient.
    """
    if not fwhm > 0:
        raise DomainError("fwhm must be positive")
    grid = _empty_grid(board, resolution)
    xs, ys = grid.pixel_centers()
    best = np.full(grid.shape, -np.inf)
    radius = SPLAT_RADIUS_FWHM * fwhm
    k = 4.0 * math.log(2.0) / fwhm**2
    for p in points:
        if not (0 <= p.bin_index < len(profile)) or not profile.valid[p.bin_index]:
            continue
        rise = profile.temperatures[p.bin_index] - board.ambient
        x, y = p.board_xy
        i0, i1 = np.searchsorted(xs, [x - radius, x + radius])
        j0, j1 = np.searchsorted(ys, [y - radius, y + radius])
        if i0 >= i1 or j0 >= j1:
            continue
        d2 = (xs[i0:i1][None, :] - x) ** 2 + (ys[j0:j1][:, None] - y) ** 2
        stamp = np.where(d2 <= radius**2, rise * np.exp(-k * d2), -np.inf)
        np.maximum(best[j0:j1, i0:i1], stamp, out=best[j0:j1, i0:i1])
    grid.values = np.where(np.isfinite(best), board.ambient + best, board.ambient)
    return grid


def gaussian_filter(grid: ThermogramGrid, fwhm: float = 0.01) -> ThermogramGrid:
    """Separable normalized Gaussian smoothing with replicated edges."""
    if not fwhm > 0:
        raise DomainError("fwhm must be positive")
    sigma = fwhm * FWHM_TO_SIGMA / grid.resolution
    out = ndimage.gaussian_filter(grid.values, sigma, mode="nearest", truncate=4.0)
    return ThermogramGrid(grid.resolution, out, grid.origin)


@dataclass(frozen=True)
class Hotspot:
    peak: float
    x: float
    y: float
    area: float
    nearest_heater: str | None = None
    distance: float | None = None


def find_hotspots(grid: ThermogramGrid, threshold: float, board: BoardModel | None = None) -> list[Hotspot]:
    """Connected regions above ``threshold`` with their maximum and its location.

    Hotspots are sorted by decreasing peak temperature.
    """
    labels, n = ndimage.label(grid.values > threshold)
    if n == 0:
        return []
    idx = np.arange(1, n + 1)
    maxima = ndimage.maximum(grid.values, labels, idx)
    positions = ndimage.maximum_position(grid.values, labels, idx)
    sizes = ndimage.sum_labels(np.ones_like(grid.values), labels, idx)
    xs, ys = grid.pixel_centers()
    spots = []
    for peak, (j, i), size in zip(maxima, positions, sizes):
        x, y = float(xs[i]), float(ys[j])
        nearest, dist = None, None
        if board is not None and board.heaters:
            h = min(board.heaters, key=lambda h: math.dist(h.geometry.center, (x, y)))
            nearest, dist = h.id, math.dist(h.geometry.center, (x, y))
        spots.append(Hotspot(float(peak), x, y, float(size) * grid.resolution**2, nearest, dist))
    return sorted(spots, key=lambda s: -s.peak)


def noise_level(profile: TemperatureProfile, points) -> float:
    """Median propagated sigma over the valid bins visited by the sample points."""
    idx = [p.bin_index for p in points if 0 <= p.bin_index < len(profile) and profile.valid[p.bin_index]]
    if not idx:
        return float("nan")
    return float(np.median(profile.sigmas[idx]))


def reconstruct_thermogram(points, profile: TemperatureProfile, board: BoardModel,
                           splat_fwhm: float = 0.01, filter_fwhm: float = 0.01,
                           resolution: float = 1e-3) -> ThermogramGrid:
    return gaussian_filter(splat_gaussians(points, profile, board, splat_fwhm, resolution), filter_fwhm)
