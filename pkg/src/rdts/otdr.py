"""Photon-counting OTDR trace synthesis for the anti-Stokes and Stokes channels.

The expected counts per time bin are built on a supersampled time grid:
temperature along the fiber -> Raman rate (with polarization modulation) ->
Gaussian pulse+jitter blur (circular, so counts are conserved over one
repetition period) -> bin average -> dark counts -> integration scaling.
A trace is an independent Poisson draw per bin around that expectation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
from scipy import constants as sc
from scipy.ndimage import gaussian_filter1d

from rdts.board import BoardModel, FiberLayout, FiberTemperature, temperature_along_fiber
from rdts.errors import ConfigError, DomainError, RangeError
from rdts.raman import DEFAULT_SPECTRAL_SHIFT, ChannelCoefficients, RamanConstants

FWHM_TO_SIGMA = 1.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))
CHANNELS = ("AS", "S")
#: Sub-samples per time bin used to integrate the signal inside each bin.
SUPERSAMPLE = 16
#: Bins per random substream; substreams depend only on (seed, channel, block).
BLOCK_SIZE = 64


@dataclass(frozen=True)
class PolarizationModel:
    """Slow modulation ``p(x) = 1 + depth * sin(2 pi x / period + phase)``."""

    modulation_depth: float = 0.3
    spatial_period: float = 2.0
    phase: float = 0.0

    def __post_init__(self):
        if not 0 <= self.modulation_depth < 1:
            raise ConfigError("modulation depth must lie in [0, 1)")
        if not self.spatial_period > 0:
            raise ConfigError("modulation period must be positive")

    def factor(self, x):
        return 1.0 + self.modulation_depth * np.sin(2 * np.pi * np.asarray(x) / self.spatial_period + self.phase)


@dataclass(frozen=True)
class InstrumentConfig:
    amplitude_A: float
    amplitude_B: float
    repetition_rate: float = 2.5e6
    pulse_fwhm: float = 250e-12
    jitter_fwhm: float = 40e-12
    bin_width: float = 100e-12
    integration_time: float = 300.0
    group_index: float = 1.468
    dark_rate_AS: float = 100.0
    dark_rate_S: float = 100.0
    spectral_shift: float = DEFAULT_SPECTRAL_SHIFT
    polarization: PolarizationModel = field(default_factory=PolarizationModel)

    def __post_init__(self):
        for name in ("repetition_rate", "bin_width", "group_index", "pulse_fwhm"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        for name in ("jitter_fwhm", "integration_time", "dark_rate_AS", "dark_rate_S",
                     "amplitude_A", "amplitude_B"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")

    @property
    def period(self) -> float:
        return 1.0 / self.repetition_rate

    @property
    def n_bins(self) -> int:
        return math.ceil(round(self.period / self.bin_width, 9))

    @property
    def duty_factor(self) -> float:
        """Fraction of each repetition period covered by one bin."""
        return self.bin_width * self.repetition_rate

    @property
    def kernel_fwhm_time(self) -> float:
        return math.hypot(self.pulse_fwhm, self.jitter_fwhm)

    @property
    def kernel_fwhm_position(self) -> float:
        """Spatial FWHM of the combined pulse and jitter blur, m."""
        return time_to_position(self.kernel_fwhm_time, self.group_index)

    @property
    def bin_length(self) -> float:
        return time_to_position(self.bin_width, self.group_index)

    @property
    def raman(self) -> RamanConstants:
        return RamanConstants(self.spectral_shift)

    def channels(self) -> ChannelCoefficients:
        """Channel amplitudes and dark rates as rate-law coefficients, counts/s."""
        return ChannelCoefficients(self.amplitude_A, self.amplitude_B, self.dark_rate_AS, self.dark_rate_S)

    def dark_rate(self, channel: str) -> float:
        return self.dark_rate_AS if channel == "AS" else self.dark_rate_S

    def counts_per_rate(self) -> float:
        """Counts per bin accumulated by a 1 count/s rate."""
        return self.integration_time * self.duty_factor


def scaled_amplitudes(ambient: float, bin_width: float = 100e-12, repetition_rate: float = 2.5e6,
                      integration_time: float = 300.0, as_counts: float = 1e4, c1: float = 81.0,
                      c1_reference: float = 296.0, spectral_shift: float = DEFAULT_SPECTRAL_SHIFT):
    """Amplitudes giving ``as_counts`` anti-Stokes counts per bin at ``ambient``.

    ``B`` is tied to ``A`` so the calibration slope equals ``c1`` at
    ``c1_reference``; the ratio ``A/B`` is an instrument property and does not
    change with the ambient temperature.
    """
    if min(ambient, bin_width, repetition_rate, integration_time) <= 0:
        raise ConfigError("amplitude scaling needs positive ambient, bin width, rate and integration")
    C = RamanConstants(spectral_shift).C
    occ = 1.0 / math.expm1(C / ambient)
    A = as_counts / (occ * integration_time * bin_width * repetition_rate)
    a_over_b = c1 * (1.0 - math.exp(-C / c1_reference))
    return A, A / a_over_b


def room_instrument(**overrides) -> InstrumentConfig:
    """Default instrument at 296 K ambient."""
    return instrument_for(296.0, **overrides)


def cryo_instrument(**overrides) -> InstrumentConfig:
    """Instrument rescaled to keep the same anti-Stokes counts per bin at 77 K."""
    return instrument_for(77.0, **overrides)


def instrument_for(ambient: float, **overrides) -> InstrumentConfig:
    """Instrument whose amplitudes give the default count level at ``ambient``.

    Amplitudes are rates, so they are scaled against the default 300 s
    integration: a shorter ``integration_time`` override collects fewer counts.
    """
    keys = ("bin_width", "repetition_rate", "spectral_shift")
    scale_args = {k: overrides[k] for k in keys if k in overrides}
    A, B = scaled_amplitudes(ambient, **scale_args)
    params = {"amplitude_A": A, "amplitude_B": B}
    params.update(overrides)
    return InstrumentConfig(**params)


def time_to_position(t, group_index: float = 1.468):
    """Round-trip time of flight to fiber position, ``c t / (2 n_g)``."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise DomainError("time must be non-negative")
    x = sc.c * t_arr / (2.0 * group_index)
    return float(x) if x.ndim == 0 else x


def check_range(instrument: InstrumentConfig, layout: FiberLayout) -> None:
    transit = 2.0 * instrument.group_index * layout.total_length / sc.c
    if transit >= instrument.period:
        raise RangeError(
            f"fiber of {layout.total_length} m needs {transit * 1e9:.1f} ns round trip, "
            f"pulse period is {instrument.period * 1e9:.1f} ns (unambiguous range "
            f"{range_limit(instrument):.2f} m)"
        )


def range_limit(instrument: InstrumentConfig) -> float:
    """Longest fiber whose round trip fits in one pulse period, m."""
    return instrument.period * sc.c / (2.0 * instrument.group_index)


@dataclass
class CountHistogram:
    """Photon counts per time bin for one channel and acquisition."""

    counts: np.ndarray
    bin_width: float
    channel: str
    integration_time: float
    seed: int | None = None
    repetition_rate: float = 2.5e6
    group_index: float = 1.468

    def __post_init__(self):
        self.counts = np.asarray(self.counts)
        if self.channel not in CHANNELS:
            raise ConfigError(f"unknown channel {self.channel!r}")
        if np.any(self.counts < 0):
            raise ConfigError("counts must be non-negative")

    def __len__(self):
        return len(self.counts)

    @property
    def bin_length(self) -> float:
        return time_to_position(self.bin_width, self.group_index)

    def bin_edges(self) -> np.ndarray:
        """Fiber positions of the bin edges, m."""
        return np.arange(len(self.counts) + 1) * self.bin_length

    def bin_centers(self) -> np.ndarray:
        return (np.arange(len(self.counts)) + 0.5) * self.bin_length

    def compatible(self, other: "CountHistogram") -> bool:
        return (len(self) == len(other) and math.isclose(self.bin_width, other.bin_width)
                and math.isclose(self.group_index, other.group_index))


def _gaussian_blur(signal, sigma_samples):
    if sigma_samples <= 0:
        return signal
    return gaussian_filter1d(signal, sigma_samples, mode="wrap", truncate=6.0)


def expected_rate_profile(T_of_x: FiberTemperature, instrument: InstrumentConfig, channel: str) -> np.ndarray:
    """Expected counts per bin for one channel."""
    if channel not in CHANNELS:
        raise ConfigError(f"unknown channel {channel!r}")
    n = instrument.n_bins
    dt = instrument.bin_width / SUPERSAMPLE
    t = (np.arange(n * SUPERSAMPLE) + 0.5) * dt
    x = time_to_position(t, instrument.group_index)
    on_fiber = x <= T_of_x.total_length
    signal = np.zeros_like(x)
    if np.any(on_fiber):
        xs = x[on_fiber]
        occ = 1.0 / np.expm1(instrument.raman.C / T_of_x(xs))
        amp = instrument.amplitude_A if channel == "AS" else instrument.amplitude_B
        rate = amp * occ if channel == "AS" else amp * (occ + 1.0)
        signal[on_fiber] = instrument.polarization.factor(xs) * rate
    sigma = instrument.kernel_fwhm_time * FWHM_TO_SIGMA / dt
    blurred = _gaussian_blur(signal, sigma)
    per_bin = blurred.reshape(n, SUPERSAMPLE).mean(axis=1)
    return (per_bin + instrument.dark_rate(channel)) * instrument.counts_per_rate()


@lru_cache(maxsize=256)
def _expected_cached(board: BoardModel, layout: FiberLayout, instrument: InstrumentConfig, channel: str):
    check_range(instrument, layout)
    out = expected_rate_profile(temperature_along_fiber(board, layout), instrument, channel)
    out.setflags(write=False)
    return out


def expected_counts(board: BoardModel, layout: FiberLayout, instrument: InstrumentConfig, channel: str) -> np.ndarray:
    """Cached expected counts for a board state; the returned array is read-only."""
    return _expected_cached(board, layout, instrument, channel)


def poisson_counts(expected: np.ndarray, seed: int, channel: str) -> np.ndarray:
    """Poisson draw per bin from substreams keyed by ``(seed, channel, block)``.

    Each block of ``BLOCK_SIZE`` bins has its own generator, so any block can
    be drawn independently and the result does not depend on evaluation order.
    """
    expected = np.asarray(expected, dtype=float)
    out = np.empty(expected.shape, dtype=np.int64)
    code = CHANNELS.index(channel)
    for start in range(0, expected.size, BLOCK_SIZE):
        ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(code, start // BLOCK_SIZE))
        rng = np.random.Generator(np.random.Philox(ss))
        out[start:start + BLOCK_SIZE] = rng.poisson(expected[start:start + BLOCK_SIZE])
    return out


def simulate_trace(board: BoardModel, layout: FiberLayout, instrument: InstrumentConfig,
                   channel: str, seed: int) -> CountHistogram:
    """Seeded photon-count histogram of one channel."""
    mean = expected_counts(board, layout, instrument, channel)
    return CountHistogram(
        counts=poisson_counts(mean, seed, channel),
        bin_width=instrument.bin_width,
        channel=channel,
        integration_time=instrument.integration_time,
        seed=int(seed),
        repetition_rate=instrument.repetition_rate,
        group_index=instrument.group_index,
    )


def with_integration(instrument: InstrumentConfig, seconds: float) -> InstrumentConfig:
    return replace(instrument, integration_time=seconds)
