import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rdts.board import heater_intervals, pcb15_board, serpentine_layout
from rdts.calibration import (
    CalibrationPoint,
    CalibrationRegion,
    calibration_report,
    compute_delta_ratio,
    delta_ratio_arrays,
    estimate_noise_floor,
    fit_calibration,
    heater_core_region,
    offset_term,
    offset_term_variation,
)
from rdts.errors import ConfigError, DegenerateFit, DegenerateStokes
from rdts.otdr import CountHistogram, cryo_instrument, poisson_counts, room_instrument
from rdts.raman import CalibrationConstants, ChannelCoefficients, RamanConstants, ratio_forward

RC = RamanConstants()
GEN = CalibrationConstants(C1=81.0, C2=-9.8, T0=296.0)
TEMPS = (296.0, 310.0, 320.0, 334.0)


def hist(values, channel="AS", n=400, integration=300.0):
    counts = np.broadcast_to(np.asarray(values), (n,)).copy()
    return CountHistogram(counts, 100e-12, channel, integration)


def test_noise_floor_examples():
    h = hist(0, "S")
    assert estimate_noise_floor(h, 100.0) == pytest.approx(7.5, rel=1e-12)
    assert estimate_noise_floor(h, 0.0) == 0.0
    assert estimate_noise_floor(hist(0, "S", integration=600.0), 100.0) == pytest.approx(15.0, rel=1e-12)


def test_region_bins_whole_bins_only():
    h = hist(0)
    L = h.bin_length
    idx = CalibrationRegion(2.5 * L, 7.5 * L).bin_indices(h)
    assert idx.tolist() == [3, 4, 5, 6]
    assert CalibrationRegion(2 * L, 5 * L).bin_indices(h).tolist() == [2, 3, 4]
    with pytest.raises(ConfigError):
        CalibrationRegion(0.5 * L, 3.5 * L).bin_indices(h)
    with pytest.raises(ConfigError):
        CalibrationRegion(1.0, 1.0)


def test_delta_ratio_arithmetic_example():
    region = CalibrationRegion(0.1, 0.5)
    r, sigma = compute_delta_ratio(hist(1200), hist(1100), hist(8000, "S"), region, 7.5)
    assert r == pytest.approx(100 / 7992.5, rel=1e-12)
    assert r == pytest.approx(0.012512, abs=1e-6)
    n = region.bin_indices(hist(0)).size
    assert sigma == pytest.approx(math.sqrt((1200 + 1100 + r * r * 8000) / n) / 7992.5, rel=1e-12)


def test_reference_identity_and_antisymmetry():
    rng = np.random.default_rng(0)
    a = hist(rng.poisson(1000, 400))
    b = hist(rng.poisson(1100, 400))
    s = hist(rng.poisson(8000, 400), "S")
    region = CalibrationRegion(0.5, 3.0)
    assert compute_delta_ratio(a, a, s, region, 7.5)[0] == 0.0
    r_ab, s_ab = compute_delta_ratio(a, b, s, region, 7.5)
    r_ba, s_ba = compute_delta_ratio(b, a, s, region, 7.5)
    assert r_ab == -r_ba and s_ab == pytest.approx(s_ba)


def test_degenerate_stokes():
    region = CalibrationRegion(0.1, 0.5)
    with pytest.raises(DegenerateStokes):
        compute_delta_ratio(hist(10), hist(10), hist(7, "S"), region, 7.5)


def test_mismatched_histograms():
    with pytest.raises(ConfigError):
        compute_delta_ratio(hist(1), hist(1, n=300), hist(1, "S"), CalibrationRegion(0.1, 0.5), 0.0)


def test_delta_ratio_sigma_matches_monte_carlo():
    # region means of Poisson counts; spread over seeds equals the propagated sigma
    region = CalibrationRegion(0.5, 0.9)
    rs, sigmas = [], []
    for seed in range(400):
        a = hist(poisson_counts(np.full(400, 1200.0), seed, "AS"))
        ref = hist(poisson_counts(np.full(400, 1100.0), seed + 10_000, "AS"))
        s = hist(poisson_counts(np.full(400, 8000.0), seed, "S"), "S")
        r, sig = compute_delta_ratio(a, ref, s, region, 7.5)
        rs.append(r)
        sigmas.append(sig)
    assert np.std(rs, ddof=1) == pytest.approx(np.mean(sigmas), rel=0.1)


def test_delta_ratio_arrays_flag_bad_stokes():
    r, s = delta_ratio_arrays([10, 10, 10], [5, 5, 5], [100, 7, 50], 7.5)
    assert np.isnan(r[1]) and np.isnan(s[1])
    assert r[0] == pytest.approx(5 / 92.5) and r[2] == pytest.approx(5 / 42.5)


def synthetic_points(cal, temps=TEMPS, sigma=None):
    return [CalibrationPoint(T, ratio_forward(T, cal), 0.0 if sigma is None else sigma) for T in temps]


def test_noiseless_round_trip():
    for sigma in (None, 0.05):
        fit = fit_calibration(synthetic_points(GEN, sigma=sigma), 296.0, RC)
        assert abs(fit.C1 - 81.0) / 81.0 < 1e-10
        assert abs(fit.C2 + 9.8) / 9.8 < 1e-10


def test_two_points_interpolate_exactly():
    pts = [CalibrationPoint(300.0, 0.5), CalibrationPoint(330.0, 3.0)]
    fit = fit_calibration(pts, 296.0, RC)
    for p in pts:
        assert ratio_forward(p.T_cal, fit) == pytest.approx(p.delta_ratio, abs=1e-12)
    assert fit.sigma_C1 == 0.0


def test_degenerate_fits():
    with pytest.raises(DegenerateFit):
        fit_calibration([CalibrationPoint(300.0, 0.1), CalibrationPoint(300.0, 0.2)], 296.0, RC)
    with pytest.raises(DegenerateFit):
        fit_calibration([CalibrationPoint(300.0, 0.1)], 296.0, RC)
    # falling ratio means a negative slope, which cannot be inverted
    with pytest.raises(DegenerateFit):
        fit_calibration([CalibrationPoint(300.0, 0.5), CalibrationPoint(330.0, 0.1)], 296.0, RC)


def test_weighted_fit_matches_polyfit():
    rng = np.random.default_rng(1)
    T = np.array([296.0, 303.0, 310.0, 317.0, 324.0, 331.0, 338.0])
    sig = np.linspace(0.02, 0.06, T.size)
    y = ratio_forward(T, GEN) + sig * rng.standard_normal(T.size)
    fit = fit_calibration([CalibrationPoint(*v) for v in zip(T, y, sig)], 296.0, RC)
    x = np.exp(-RC.C / T)
    coef, cov = np.polyfit(x, y, 1, w=1 / sig, cov="unscaled")
    assert (fit.C1, fit.C2) == pytest.approx(tuple(coef), rel=1e-9)
    assert fit.sigma_C1 == pytest.approx(math.sqrt(cov[0, 0]), rel=1e-7)
    assert fit.sigma_C2 == pytest.approx(math.sqrt(cov[1, 1]), rel=1e-7)
    assert fit.cov_C1_C2 == pytest.approx(cov[0, 1], rel=1e-7)


def test_unweighted_fallback_matches_polyfit():
    rng = np.random.default_rng(2)
    T = np.linspace(296.0, 340.0, 8)
    y = ratio_forward(T, GEN) + 0.03 * rng.standard_normal(T.size)
    sig = np.full(T.size, 0.03)
    sig[3] = 0.0  # one missing sigma disables weighting
    fit = fit_calibration([CalibrationPoint(*v) for v in zip(T, y, sig)], 296.0, RC)
    coef, cov = np.polyfit(np.exp(-RC.C / T), y, 1, cov=True)
    # numpy scales by chi2/(n-2) with unit weights, the same as the fallback
    assert (fit.C1, fit.C2) == pytest.approx(tuple(coef), rel=1e-9)
    assert fit.sigma_C1 == pytest.approx(math.sqrt(cov[0, 0]), rel=1e-7)


@settings(max_examples=50)
@given(k=st.floats(0.1, 10.0))
def test_fit_is_scale_consistent(k):
    rng = np.random.default_rng(3)
    T = np.linspace(296.0, 340.0, 6)
    y = ratio_forward(T, GEN) + 0.02 * rng.standard_normal(T.size)
    base = fit_calibration([CalibrationPoint(t, v) for t, v in zip(T, y)], 296.0, RC)
    scaled = fit_calibration([CalibrationPoint(t, k * v) for t, v in zip(T, y)], 296.0, RC)
    assert scaled.C1 == pytest.approx(k * base.C1, rel=1e-9)
    assert scaled.C2 == pytest.approx(k * base.C2, rel=1e-9)


def test_reference_zero_on_noisy_synthetic_data():
    # generator satisfying ratio(T0) = 0 exactly
    c2 = -81.0 * math.exp(-RC.C / 296.0)
    gen = CalibrationConstants(81.0, c2, 296.0)
    T = np.array([296.0, 303.0, 310.0, 317.0, 324.0, 331.0, 338.0])
    ok = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        y = ratio_forward(T, gen) + 0.03 * rng.standard_normal(T.size)
        fit = fit_calibration([CalibrationPoint(t, v, 0.03) for t, v in zip(T, y)], 296.0, RC)
        ok += abs(ratio_forward(296.0, fit)) < 3 * fit.ratio_sigma_at(296.0)
    assert ok >= 95


def test_report_noiseless_and_invalid_points():
    pts = synthetic_points(GEN, sigma=0.01)
    rows = calibration_report(GEN, pts)
    assert all(row["valid"] and abs(row["residual"]) < 1e-6 for row in rows)
    rows = calibration_report(GEN, [CalibrationPoint(300.0, -20.0, 0.01)])
    assert rows[0]["valid"] is False and rows[0]["T_DTS"] is None


def test_heater_core_region():
    board = pcb15_board()
    lay = serpentine_layout(board)
    (a, b), = heater_intervals(lay, board.heater("R9"))
    region = heater_core_region(lay, board.heater("R9"), 0.025)
    assert (region.start, region.end) == pytest.approx((a + 0.025, b - 0.025))


def test_offset_term_variation_closed_form():
    # AS(T0) is fixed, so the term scales as 1/(n(T) + 1); the largest
    # departure over a rising interval is at its hot end
    for inst, T0, T1 in ((room_instrument(), 296.0, 346.0), (cryo_instrument(), 77.0, 81.0)):
        C = inst.raman.C
        n0, n1 = 1 / math.expm1(C / T0), 1 / math.expm1(C / T1)
        expected = 1 - (1 + n0) / (1 + n1)
        assert offset_term_variation(T0, T1, T0, inst.channels(), inst.raman) == pytest.approx(expected, rel=1e-12)
    assert offset_term_variation(296.0, 346.0, 296.0, room_instrument().channels()) == pytest.approx(0.0492, abs=1e-4)
    ch = ChannelCoefficients(2.0, 1.0, 5.0, 3.0)
    assert offset_term(296.0, 296.0, ch) == pytest.approx(
        (2.0 / math.expm1(RC.C / 296.0) + 5.0) / (1.0 + 1 / math.expm1(RC.C / 296.0)), rel=1e-14)
