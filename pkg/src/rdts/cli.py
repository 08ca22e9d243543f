"""Command-line interface.

Subcommands ``simulate``, ``calibrate``, ``invert``, ``thermogram``,
``heatmodel`` and ``pipeline`` chain the library stages through files.
Exit codes: 0 success, 2 invalid input, 3 degenerate computation.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from rdts import heat
from rdts.calibration import estimate_noise_floor
from rdts.config import bundled_scenarios, build_scenario, load_config, output_formats
from rdts.errors import (
    ConfigError,
    ConvergenceError,
    DegenerateFit,
    DegenerateStokes,
    DomainError,
    RangeError,
    ShapeError,
)
from rdts.io import (
    constants_dict,
    manifest_dict,
    read_constants,
    read_current_rise_csv,
    read_manifest,
    read_trace,
    write_grid,
    write_json,
    write_profile,
    write_trace,
)
from rdts.pipeline import Acquisition, Scenario, acquire, calibrate, calibration_acquisitions, reconstruct
from rdts.raman import RamanConstants
from rdts.reconstruction import invert_profile
from rdts.render import render_thermogram, write_ppm

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_DEGENERATE = 3

FORMATS = ("csv", "ppm", "json")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _out_dir(args, doc=None) -> Path:
    d = args.out_dir or (doc or {}).get("output", {}).get("dir") or "out"
    path = Path(d)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _scenario(args) -> tuple[dict, Scenario]:
    doc = load_config(args.config)
    return doc, build_scenario(doc, args.seed)


def _rel(path: Path, base: Path) -> str:
    return Path(path).relative_to(base).as_posix()


# ---------------------------------------------------------------- simulate

def simulate_to(scenario: Scenario, out: Path) -> Path:
    """Write every trace of a scenario and the calibration manifest; return the manifest path."""
    traces = out / "traces"
    traces.mkdir(parents=True, exist_ok=True)

    def dump(acq):
        pa = write_trace(traces / f"{acq.label}_AS.csv", acq.as_hist)
        ps = write_trace(traces / f"{acq.label}_S.csv", acq.s_hist)
        return _rel(pa, out), _rel(ps, out)

    ref, runs = calibration_acquisitions(scenario, scenario.seed)
    ref_paths = dump(ref)
    run_rows = [(acq.label, T_cal, *dump(acq)) for T_cal, acq in runs]
    for st in scenario.states:
        dump(acquire(scenario, dict(st.rises), f"state_{st.name}", scenario.seed))
    manifest = manifest_dict(scenario.board.ambient, scenario.instrument.dark_rate_S,
                             scenario.calibration_region(), ref_paths, run_rows,
                             scenario.instrument.spectral_shift)
    return write_json(out / "calibration_manifest.json", manifest)


def cmd_simulate(args) -> int:
    doc, scenario = _scenario(args)
    out = _out_dir(args, doc)
    manifest = simulate_to(scenario, out)
    n = 2 * (1 + len(scenario.calibration.rises) + len(scenario.states))
    print(f"scenario {scenario.name}: seed {scenario.seed}, {n} traces written to {out / 'traces'}")
    print(f"calibration manifest: {manifest}")
    return EXIT_OK


# ---------------------------------------------------------------- calibrate

def calibrate_manifest(manifest_path) -> dict:
    """Constants document (with residual report) from a calibration manifest."""
    m = read_manifest(manifest_path)
    if len(m["runs"]) < 2:
        raise DegenerateFit("calibration needs at least two runs besides the reference")

    def load(pair, label):
        return Acquisition(label, None, read_trace(pair["as"]), read_trace(pair["s"]))

    ref = load(m["reference"], "reference")
    runs = [(float(r["T_cal"]), load(r, r.get("label", f"run{i}"))) for i, r in enumerate(m["runs"])]
    rc = RamanConstants(m.get("spectral_shift_hz", RamanConstants().spectral_shift))
    res = calibrate(ref, runs, m["region"], m["dark_rate_s"], m["T0"], rc)
    return constants_dict(res.constants, m["dark_rate_s"], res.noise_floor, res.region, res.report)


def _print_calibration(doc: dict) -> None:
    print(f"C1 = {doc['C1']:.6g} +/- {doc['sigma_C1']:.2g}")
    print(f"C2 = {doc['C2']:.6g} +/- {doc['sigma_C2']:.2g}")
    print(f"{'T_cal K':>9} {'T_DTS K':>9} {'sigma K':>8} {'resid K':>8}")
    for row in doc["report"]:
        if row["valid"]:
            print(f"{row['T_cal']:9.2f} {row['T_DTS']:9.2f} {row['sigma_T']:8.2f} {row['residual']:8.2f}")
        else:
            print(f"{row['T_cal']:9.2f} {'invalid':>9}")


def cmd_calibrate(args) -> int:
    doc = calibrate_manifest(args.manifest)
    out = _out_dir(args)
    path = write_json(out / "calibration.json", doc)
    _print_calibration(doc)
    print(f"constants written to {path}")
    return EXIT_OK


# ---------------------------------------------------------------- invert / thermogram

def _load_triplet(args):
    as_T, s_T, as_ref = (read_trace(p) for p in (args.trace_as, args.trace_s, args.reference_as))
    if (as_T.channel, s_T.channel, as_ref.channel) != ("AS", "S", "AS"):
        raise ConfigError("expected anti-Stokes, Stokes and anti-Stokes reference traces")
    if not (as_T.compatible(s_T) and as_T.compatible(as_ref)):
        raise ShapeError("traces differ in bin width, group index or length")
    cal, dark_rate = read_constants(args.constants)
    return as_T, s_T, as_ref, cal, estimate_noise_floor(s_T, dark_rate)


def cmd_invert(args) -> int:
    doc, scenario = _scenario(args)
    out = _out_dir(args, doc)
    as_T, s_T, as_ref, cal, N_S = _load_triplet(args)
    profile = invert_profile(as_T, as_ref, s_T, cal, scenario.layout, N_S, scenario.recon.spacing)
    path = write_profile(out / "profile.csv", profile)
    T = profile.temperatures[profile.valid]
    print(f"{profile.valid.sum()} valid bins of {len(profile)}, "
          f"T range {T.min():.2f} .. {T.max():.2f} K" if T.size else "no valid bins")
    print(f"profile written to {path}")
    return EXIT_OK


def heater_peaks(grid, board) -> list[tuple[str, float, float, float]]:
    """Maximum thermogram value inside each heater footprint and its position."""
    xs, ys = grid.pixel_centers()
    rows = []
    for h in board.heaters:
        x0, y0, x1, y1 = h.geometry.bounds()
        mi = (xs >= x0) & (xs <= x1)
        mj = (ys >= y0) & (ys <= y1)
        sub = grid.values[np.ix_(mj, mi)]
        j, i = np.unravel_index(np.argmax(sub), sub.shape)
        rows.append((h.id, float(sub[j, i]), float(xs[mi][i]), float(ys[mj][j])))
    return rows


def thermogram_outputs(scenario: Scenario, rec, out: Path, formats, overlay=None) -> dict:
    """Write profile, grid and image; return the peak summary document."""
    board = scenario.board
    grid = rec.grid
    if "csv" in formats:
        write_profile(out / "profile.csv", rec.profile)
        write_grid(out / "grid.csv", grid)
    if "ppm" in formats:
        scale = scenario.recon.color_scale or (board.ambient, max(float(grid.values.max()), board.ambient + 1.0))
        heaters = board.heaters if overlay is None else [board.heater(h) for h in overlay]
        write_ppm(out / "thermogram.ppm", render_thermogram(grid, scale, heaters))
    summary = {
        "ambient_K": board.ambient,
        "noise_sigma_K": rec.sigma,
        "threshold_K": rec.threshold,
        "hotspots": [
            {"peak_K": s.peak, "x_m": s.x, "y_m": s.y, "area_m2": s.area,
             "nearest_heater": s.nearest_heater, "distance_m": s.distance}
            for s in rec.hotspots
        ],
        "heaters": [
            {"id": hid, "max_K": T, "x_m": x, "y_m": y,
             "readout_K": None if rec.readouts.get(hid) is None else rec.readouts[hid][0],
             "readout_sigma_K": None if rec.readouts.get(hid) is None else rec.readouts[hid][1]}
            for hid, T, x, y in heater_peaks(grid, board)
        ],
    }
    if "json" in formats:
        write_json(out / "summary.json", summary)
    return summary


def print_summary(summary: dict) -> None:
    print(f"ambient {summary['ambient_K']:.2f} K, noise sigma {summary['noise_sigma_K']:.3f} K, "
          f"threshold {summary['threshold_K']:.2f} K")
    print(f"{len(summary['hotspots'])} hotspot(s) above threshold")
    for k, s in enumerate(summary["hotspots"], 1):
        print(f"  hotspot {k}: peak {s['peak_K']:.2f} K at ({100 * s['x_m']:.1f}, {100 * s['y_m']:.1f}) cm, "
              f"nearest {s['nearest_heater']} ({1000 * s['distance_m']:.1f} mm)")
    print(f"{'heater':>6} {'max K':>8} {'x cm':>6} {'y cm':>6} {'readout K':>10}")
    for h in summary["heaters"]:
        ro = "n/a" if h["readout_K"] is None else f"{h['readout_K']:.2f}"
        print(f"{h['id']:>6} {h['max_K']:8.2f} {100 * h['x_m']:6.1f} {100 * h['y_m']:6.1f} {ro:>10}")


def cmd_thermogram(args) -> int:
    doc, scenario = _scenario(args)
    out = _out_dir(args, doc)
    as_T, s_T, as_ref, cal, N_S = _load_triplet(args)
    rec = reconstruct(scenario, as_T, as_ref, s_T, cal, N_S)
    summary = thermogram_outputs(scenario, rec, out, output_formats(doc, args.format), args.overlay)
    print_summary(summary)
    return EXIT_OK


# ---------------------------------------------------------------- heat model

def cmd_heatmodel(args) -> int:
    fit = None
    if args.data:
        points = read_current_rise_csv(args.data)
        fit = (points, *heat.fit_quadratic_coefficient(points))
    g = heat.HeaterGeometry(center=(0.0, 0.0))
    envs = [heat.environment(label, g) for label in ("air_296K", "LN2_77K")]
    doc: dict = {"environments": []}
    print(f"{'environment':>12} {'T0 K':>6} {'R_el ohm':>9} {'K K/A^2':>8} {'R_th K/W':>9} {'h W/m2K':>8}")
    for env in envs:
        R_el = heat.electrical_resistance(env.ambient, g)
        row = {"label": env.label, "ambient_K": env.ambient, "R_el_ohm": R_el,
               "K": env.R_th * R_el, "R_th": env.R_th, "h_conv": env.h_conv}
        doc["environments"].append(row)
        print(f"{env.label:>12} {env.ambient:6.1f} {R_el:9.4f} {row['K']:8.3f} {env.R_th:9.3f} {env.h_conv:8.1f}")
    ratio = heat.thermal_resistance_ratio(heat.H_AIR, heat.H_LN2)
    doc["convective_ratio"] = ratio
    print(f"R_th ratio LN2/air from convection: {ratio:.4f}; from fits: "
          f"{envs[1].R_th / envs[0].R_th:.4f}")
    if fit is not None:
        points, K, sK = fit
        R_el = args.r_el if args.r_el is not None else heat.electrical_resistance(args.ambient, g)
        R_th = heat.thermal_resistance(K, R_el)
        doc["fit"] = {"n_points": len(points), "K": K, "sigma_K": sK, "R_el_ohm": R_el,
                      "R_th": R_th, "sigma_R_th": sK / R_el}
        print(f"fit of {len(points)} points: K = {K:.4f} +/- {sK:.4f} K/A^2")
        print(f"R_th = K / R_el = {R_th:.3f} +/- {sK / R_el:.3f} K/W (R_el = {R_el:.4f} ohm)")
    if args.current:
        env = heat.environment(args.environment, g)
        doc["rises"] = []
        for I in args.current:
            frozen = heat.temperature_rise(I, env, g, mode="frozen")
            sc = heat.temperature_rise(I, env, g, mode="self_consistent")
            doc["rises"].append({"I_A": I, "frozen_K": frozen, "self_consistent_K": sc})
            print(f"I = {I:.3f} A in {env.label}: dT = {frozen:.3f} K (frozen), {sc:.3f} K (self-consistent)")
    if args.out_dir and "json" in output_formats({}, args.format):
        write_json(_out_dir(args) / "heatmodel.json", doc)
    return EXIT_OK


# ---------------------------------------------------------------- pipeline

def cmd_pipeline(args) -> int:
    doc, scenario = _scenario(args)
    out = _out_dir(args, doc)
    formats = output_formats(doc, args.format)
    manifest = simulate_to(scenario, out)
    cal_doc = calibrate_manifest(manifest)
    write_json(out / "calibration.json", cal_doc)
    _print_calibration(cal_doc)
    cal, dark_rate = read_constants(out / "calibration.json")
    ref_as = read_trace(out / "traces" / "reference_AS.csv")
    result = {"scenario": scenario.name, "seed": scenario.seed, "states": {}}
    for st in scenario.states:
        label = f"state_{st.name}"
        as_T = read_trace(out / "traces" / f"{label}_AS.csv")
        s_T = read_trace(out / "traces" / f"{label}_S.csv")
        board = scenario.board.with_rises(dict(st.rises))
        rec = reconstruct(scenario, as_T, ref_as, s_T, cal, estimate_noise_floor(s_T, dark_rate), board)
        sdir = out / st.name
        sdir.mkdir(exist_ok=True)
        active = [hid for hid, rise in st.rises if rise > 0]
        summary = thermogram_outputs(scenario, rec, sdir, formats, active)
        result["states"][st.name] = {"rises": dict(st.rises), "hotspots": summary["hotspots"]}
        print(f"state {st.name}:")
        print_summary(summary)
    if "json" in formats:
        write_json(out / "pipeline.json", result)
    return EXIT_OK


def cmd_scenarios(args) -> int:
    for name in bundled_scenarios():
        print(name)
    return EXIT_OK


# ---------------------------------------------------------------- entry point

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="rdts", description="Raman DTS simulation, calibration and thermograms.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", required=True, help="config JSON or bundled scenario name")
            sp.add_argument("--seed", type=int, default=None, help="overrides the config seed")
        sp.add_argument("--out-dir", default=None)
        sp.add_argument("--format", action="append", choices=FORMATS,
                        help="output formats to write (repeatable); default all")

    sp = sub.add_parser("simulate", help="write AS/S count traces for every acquisition")
    common(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("calibrate", help="fit calibration constants from a manifest")
    sp.add_argument("manifest")
    common(sp, config=False)
    sp.set_defaults(func=cmd_calibrate)

    for name, func, text in (("invert", cmd_invert, "temperature profile along the fiber"),
                             ("thermogram", cmd_thermogram, "profile, grid and image of the board")):
        sp = sub.add_parser(name, help=text)
        common(sp)
        sp.add_argument("--trace-as", required=True)
        sp.add_argument("--trace-s", required=True)
        sp.add_argument("--reference-as", required=True)
        sp.add_argument("--constants", required=True)
        if name == "thermogram":
            sp.add_argument("--overlay", nargs="*", default=None, help="heater ids to outline")
        sp.set_defaults(func=func)

    sp = sub.add_parser("heatmodel", help="quadratic heating fit and environment table")
    sp.add_argument("--data", help="CSV of current (A), temperature rise (K)")
    sp.add_argument("--r-el", type=float, default=None, help="electrical resistance for R_th, ohm")
    sp.add_argument("--ambient", type=float, default=heat.ROOM_T0,
                    help="temperature for the computed R_el when --r-el is absent")
    sp.add_argument("--environment", choices=("air_296K", "LN2_77K"), default="air_296K")
    sp.add_argument("--current", type=float, nargs="*", default=None)
    common(sp, config=False)
    sp.set_defaults(func=cmd_heatmodel)

    sp = sub.add_parser("pipeline", help="simulate, calibrate and reconstruct every state")
    common(sp)
    sp.set_defaults(func=cmd_pipeline)

    sp = sub.add_parser("scenarios", help="list bundled scenarios")
    sp.set_defaults(func=cmd_scenarios)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (DegenerateFit, DegenerateStokes, ConvergenceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (ConfigError, RangeError, DomainError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
