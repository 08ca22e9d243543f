"""End-to-end runs: acquisitions, calibration and thermogram reconstruction."""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from rdts.board import BoardModel, FiberLayout, pcb15_board, serpentine_layout
from rdts.calibration import (
    CalibrationPoint,
    CalibrationRegion,
    calibration_report,
    compute_delta_ratio,
    estimate_noise_floor,
    fit_calibration,
    heater_core_region,
)
from rdts.errors import ConfigError, InvalidRatio
from rdts.otdr import CountHistogram, InstrumentConfig, check_range, room_instrument, simulate_trace
from rdts.raman import CalibrationConstants
from rdts.reconstruction import (
    REPORTING_LENGTH,
    Hotspot,
    SamplePoint,
    TemperatureProfile,
    ThermogramGrid,
    aggregation_factor,
    find_hotspots,
    invert_profile,
    noise_level,
    reconstruct_thermogram,
    region_temperature,
    sample_path,
)


@dataclass(frozen=True)
class CalibrationPlan:
    """Heater and temperature rises used to calibrate against a thermocouple."""

    heater: str = "R9"
    rises: tuple[float, ...] = (0.0, 7.0, 14.0, 21.0, 28.0, 35.0, 42.0)
    region: CalibrationRegion | None = None


@dataclass(frozen=True)
class HeaterState:
    name: str
    rises: tuple[tuple[str, float], ...] = ()

    @classmethod
    def of(cls, name: str, rises: Mapping[str, float]) -> "HeaterState":
        return cls(name, tuple(sorted((k, float(v)) for k, v in rises.items())))


@dataclass(frozen=True)
class ReconstructionSettings:
    spacing: float = REPORTING_LENGTH
    splat_fwhm: float = 0.01
    filter_fwhm: float = 0.01
    resolution: float = 1e-3
    color_scale: tuple[float, float] | None = None
    #: Hotspot threshold above ambient is max(min_rise, sigma_factor * noise sigma).
    min_rise: float = 0.0
    sigma_factor: float = 3.0


@dataclass(frozen=True)
class Scenario:
    name: str
    board: BoardModel
    layout: FiberLayout
    instrument: InstrumentConfig
    calibration: CalibrationPlan = CalibrationPlan()
    states: tuple[HeaterState, ...] = ()
    recon: ReconstructionSettings = ReconstructionSettings()
    seed: int = 0

    def __post_init__(self):
        self.layout.check_on_board(self.board)
        check_range(self.instrument, self.layout)
        self.board.heater(self.calibration.heater)
        for st in self.states:
            self.board.with_rises(dict(st.rises))

    def calibration_region(self) -> CalibrationRegion:
        if self.calibration.region is not None:
            return self.calibration.region
        return heater_core_region(self.layout, self.board.heater(self.calibration.heater),
                                  self.instrument.kernel_fwhm_position)


def default_scenario(name: str = "default", ambient: float = 296.0, instrument=None,
                     states=(), **kwargs) -> Scenario:
    board = pcb15_board(ambient)
    return Scenario(name, board, serpentine_layout(board), instrument or room_instrument(),
                    states=tuple(states), **kwargs)


def derive_seed(base: int, label: str) -> int:
    """Acquisition seed from a base seed and an acquisition label."""
    ss = np.random.SeedSequence(entropy=(int(base), zlib.crc32(label.encode())))
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))


@dataclass
class Acquisition:
    label: str
    board: BoardModel
    as_hist: CountHistogram
    s_hist: CountHistogram


def acquire(scenario: Scenario, rises: Mapping[str, float], label: str, seed: int) -> Acquisition:
    """Simulated AS and S traces for one heater state."""
    board = scenario.board.with_rises(rises)
    acq_seed = derive_seed(seed, label)
    return Acquisition(
        label, board,
        simulate_trace(board, scenario.layout, scenario.instrument, "AS", acq_seed),
        simulate_trace(board, scenario.layout, scenario.instrument, "S", acq_seed),
    )


def calibration_acquisitions(scenario: Scenario, seed: int) -> tuple[Acquisition, list[tuple[float, Acquisition]]]:
    """Reference run plus one run per calibration temperature."""
    plan = scenario.calibration
    ref = acquire(scenario, {}, "reference", seed)
    runs = [
        (scenario.board.ambient + rise, acquire(scenario, {plan.heater: rise}, f"cal_{i:02d}", seed))
        for i, rise in enumerate(plan.rises)
    ]
    return ref, runs


@dataclass
class CalibrationResult:
    constants: CalibrationConstants
    points: list[CalibrationPoint]
    report: list[dict]
    region: CalibrationRegion
    noise_floor: float
    reference: Acquisition


def calibrate(reference: Acquisition, runs, region: CalibrationRegion, dark_rate_s: float,
              T0: float, raman) -> CalibrationResult:
    N_S = estimate_noise_floor(reference.s_hist, dark_rate_s)
    points = []
    for T_cal, acq in runs:
        r, sigma = compute_delta_ratio(acq.as_hist, reference.as_hist, acq.s_hist, region, N_S)
        points.append(CalibrationPoint(T_cal, r, sigma))
    cal = fit_calibration(points, T0, raman)
    return CalibrationResult(cal, points, calibration_report(cal, points), region, N_S, reference)


def run_calibration(scenario: Scenario, seed: int) -> CalibrationResult:
    ref, runs = calibration_acquisitions(scenario, seed)
    return calibrate(ref, runs, scenario.calibration_region(), scenario.instrument.dark_rate_S,
                     scenario.board.ambient, scenario.instrument.raman)


@dataclass
class Reconstruction:
    profile: TemperatureProfile
    points: list[SamplePoint]
    grid: ThermogramGrid
    hotspots: list[Hotspot]
    threshold: float
    sigma: float
    readouts: dict[str, tuple[float, float] | None] = field(default_factory=dict)


def heater_readouts(scenario: Scenario, acq_as, ref_as, acq_s, cal, N_S) -> dict:
    """Core-section temperature of every heater, ``None`` where it cannot be formed."""
    out = {}
    margin = scenario.instrument.kernel_fwhm_position
    for h in scenario.board.heaters:
        try:
            region = heater_core_region(scenario.layout, h, margin)
            out[h.id] = region_temperature(acq_as, ref_as, acq_s, cal, region, N_S)
        except (ConfigError, InvalidRatio, ValueError):
            out[h.id] = None
    return out


def reconstruct(scenario: Scenario, as_T: CountHistogram, as_ref: CountHistogram, s_T: CountHistogram,
                cal: CalibrationConstants, N_S: float, board: BoardModel | None = None,
                readouts: bool = True) -> Reconstruction:
    settings = scenario.recon
    board = board or scenario.board
    profile = invert_profile(as_T, as_ref, s_T, cal, scenario.layout, N_S, settings.spacing)
    points = sample_path(scenario.layout, settings.spacing, profile.bin_length)
    grid = reconstruct_thermogram(points, profile, board, settings.splat_fwhm,
                                  settings.filter_fwhm, settings.resolution)
    sigma = noise_level(profile, points)
    threshold = board.ambient + max(settings.min_rise, settings.sigma_factor * sigma)
    spots = find_hotspots(grid, threshold, board)
    rec = Reconstruction(profile, points, grid, spots, threshold, sigma)
    if readouts:
        rec.readouts = heater_readouts(scenario, as_T, as_ref, s_T, cal, N_S)
    return rec


@dataclass
class PipelineResult:
    calibration: CalibrationResult
    states: dict[str, tuple[Acquisition, Reconstruction]]


def run_pipeline(scenario: Scenario, seed: int | None = None) -> PipelineResult:
    """Calibrate, then acquire and reconstruct every configured heater state."""
    seed = scenario.seed if seed is None else seed
    calib = run_calibration(scenario, seed)
    states = {}
    for st in scenario.states:
        acq = acquire(scenario, dict(st.rises), f"state_{st.name}", seed)
        rec = reconstruct(scenario, acq.as_hist, calib.reference.as_hist, acq.s_hist,
                          calib.constants, calib.noise_floor, board=acq.board)
        states[st.name] = (acq, rec)
    return PipelineResult(calib, states)


def reporting_factor(scenario: Scenario) -> int:
    return aggregation_factor(scenario.instrument.bin_length, scenario.recon.spacing)
