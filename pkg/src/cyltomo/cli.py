"""Command-line harness: presets, datasets, conversion, reconstruction, sweeps and plots.

Every subcommand writes into ``--out`` (default: $CYLTOMO_OUT or ./cyltomo_out).
Failures leave an ``error.json`` record there and exit nonzero:

    1  invalid input or I/O problem
    3  reconstruction produced flagged (failed) grid points
    4  calibration failed
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .acquisition import DatasetError, NoiseSpec, ScatteringMatrix, acquire, add_noise, rms_scattered
from .metrics import MetricsError, ReconReport, delta_v, spectrum_cross_section, write_sweep_csv
from .nearfar import AliasingError, amplitude_norm, load_amplitude, save_amplitude, to_amplitude
from .recon import (
    DERIVED_CONSTANTS,
    CalibrationConstants,
    CalibrationError,
    PointSolveError,
    calibrate_conventions,
    flagged_coordinates,
    lowpass_2k0,
    measured_amplitude,
    reconstruct_grid,
    run_pipeline,
    save_field,
    truth_fields,
)
from .scene import PRESETS, GridSpec, Scene, SceneError, load_scene, phase_shift_cylinder, preset

OUT_ENV = "CYLTOMO_OUT"
EXIT_INPUT, EXIT_FLAGGED, EXIT_CALIBRATION = 1, 3, 4


class FlaggedPointsError(RuntimeError):
    def __init__(self, points):
        super().__init__(f"{len(points)} grid points failed to reconstruct")
        self.points = points


# ---- plotting (SVG line plots, PGM maps) ------------------------------------

_COLORS = ("#000000", "#d62728", "#1f77b4", "#2ca02c")


def write_svg_lines(path, x, series: dict, title: str, xlabel: str, ylabel: str) -> None:
    """Minimal SVG line plot; ``series`` maps legend label to y values."""
    W, H, m = 640, 400, 50
    x = np.asarray(x, float)
    ys = [np.asarray(v, float) for v in series.values()]
    finite = np.concatenate([y[np.isfinite(y)] for y in ys])
    # a flagged (NaN) sample spreads through filtering; plot whatever is finite
    lo, hi = (float(finite.min()), float(finite.max())) if finite.size else (0.0, 1.0)
    if hi == lo:
        hi = lo + 1.0
    pad = 0.05 * (hi - lo)
    lo, hi = lo - pad, hi + pad

    def sx(v):
        return m + (v - x[0]) / (x[-1] - x[0]) * (W - 2 * m)

    def sy(v):
        return H - m - (v - lo) / (hi - lo) * (H - 2 * m)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" '
           f'font-size="12">',
           f'<rect x="{m}" y="{m}" width="{W - 2 * m}" height="{H - 2 * m}" fill="none" stroke="#888"/>',
           f'<text x="{W / 2}" y="{m / 2}" text-anchor="middle">{title}</text>',
           f'<text x="{W / 2}" y="{H - 10}" text-anchor="middle">{xlabel}</text>',
           f'<text x="14" y="{H / 2}" transform="rotate(-90 14 {H / 2})" text-anchor="middle">{ylabel}</text>',
           f'<text x="{m - 4}" y="{sy(hi) + 4:.1f}" text-anchor="end">{hi:.3g}</text>',
           f'<text x="{m - 4}" y="{sy(lo):.1f}" text-anchor="end">{lo:.3g}</text>',
           f'<text x="{m}" y="{H - m + 14}" text-anchor="middle">{x[0]:.3g}</text>',
           f'<text x="{W - m}" y="{H - m + 14}" text-anchor="middle">{x[-1]:.3g}</text>']
    if lo < 0 < hi:
        out.append(f'<line x1="{m}" x2="{W - m}" y1="{sy(0):.1f}" y2="{sy(0):.1f}" stroke="#ccc"/>')
    for i, (label, y) in enumerate(zip(series, ys)):
        c = _COLORS[i % len(_COLORS)]
        pts = " ".join(f"{sx(a):.1f},{sy(b):.1f}" for a, b in zip(x, y) if np.isfinite(b))
        out.append(f'<polyline fill="none" stroke="{c}" stroke-width="1.5" points="{pts}"/>')
        out.append(f'<text x="{W - m - 4}" y="{m + 16 + 14 * i}" text-anchor="end" fill="{c}">{label}</text>')
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n")


def write_pgm(path, values: np.ndarray) -> None:
    """8-bit binary PGM of a real map, min to black and max to white; row 0 is +y."""
    v = np.nan_to_num(np.asarray(values, float))[::-1]
    lo, hi = float(v.min()), float(v.max())
    g = np.zeros(v.shape, np.uint8) if hi == lo else np.round(255 * (v - lo) / (hi - lo)).astype(np.uint8)
    Path(path).write_bytes(f"P5\n{v.shape[1]} {v.shape[0]}\n255\n".encode() + g.tobytes())


# ---- config helpers ----------------------------------------------------------

def _scene_from_args(args) -> Scene:
    if getattr(args, "scene", None):
        s = load_scene(args.scene)
    else:
        s = preset(args.preset)
    if getattr(args, "epsilon", None) is not None:
        s = s.with_epsilon(args.epsilon)
    if getattr(args, "grid_step", None) is not None:
        s = replace(s, grid=GridSpec(args.grid_step, s.grid.half_extent))
    return s


def _constants(args) -> CalibrationConstants:
    return CalibrationConstants.load(args.constants) if getattr(args, "constants", None) else DERIVED_CONSTANTS


def _noise(args) -> NoiseSpec | None:
    return NoiseSpec(args.alpha, args.seed) if args.alpha > 0 else None


def _out(args) -> Path:
    p = Path(args.out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _write_json(path, doc) -> None:
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _emit_fields(out: Path, est, truth, tag: str, manifest: dict) -> None:
    save_field(est, out / f"estimate{tag}.bin", manifest)
    save_field(truth, out / f"truth{tag}.bin", {"kind_of_truth": tag or "raw"})
    x, e = est.cross_section()
    _, t = truth.cross_section()
    rows = np.column_stack([x, t.real, t.imag, e.real, e.imag])
    np.savetxt(out / f"cross_section{tag}.csv", rows, delimiter=",", fmt="%.10g",
               header="x,truth_re,truth_im,estimate_re,estimate_im", comments="")
    write_svg_lines(out / f"cross_section{tag}.svg", x, {"true v": t.real, "estimate": e.real},
                    f"{manifest['scene']} {manifest['engine']} cross-section y = 0{' (filtered)' if tag else ''}",
                    "x [l.s.u.]", "Re v")
    write_pgm(out / f"estimate{tag}.pgm", est.values.real)
    write_pgm(out / f"truth{tag}.pgm", truth.values.real)


# ---- subcommands ---------------------------------------------------------------

def cmd_calibrate(args) -> int:
    out = _out(args)
    path = out / "constants.json"
    try:
        consts = calibrate_conventions(search_samples=args.search_samples, threads=args.threads, log=print)
    except CalibrationError as exc:
        if exc.constants is not None:
            exc.constants.save(path)
        raise
    consts.save(path)
    for name in ("fig3", "fig4"):
        f, _ = measured_amplitude(preset(name), None, consts)
        print(f"{name}: ||f|| = {amplitude_norm(f)[1]:.3f}/(3 pi)")
    print(f"wrote {path}")
    return 0


def cmd_simulate(args) -> int:
    out = _out(args)
    scene = _scene_from_args(args)
    data = acquire(scene)
    gbar = rms_scattered(data["scattered"])
    if args.alpha > 0:
        data["scattered"] = add_noise(data["scattered"], NoiseSpec(args.alpha, args.seed))
    for kind, m in data.items():
        m.save(out / f"{kind}.bin")
    scene.save(out / "scene.json")
    print(f"rms G_sc = {gbar:.6g}; wrote {out}")
    return 0


def cmd_convert(args) -> int:
    out = _out(args)
    scene = _scene_from_args(args)
    sc = ScatteringMatrix.load(args.dataset)
    consts = _constants(args)
    cyl = scene.cylinder
    f = to_amplitude(sc, scene.array, scene.medium, consts.c_f, scatterer_extent=cyl.offset + cyl.radius)
    save_amplitude(f, out / "amplitude.bin")
    print(f"||f|| = {amplitude_norm(f)[1]:.4f}/(3 pi); wrote {out / 'amplitude.bin'}")
    return 0


def _reconstruct_from_amplitude(args, scene, consts):
    f = load_amplitude(args.amplitude)
    R = scene.array.radius
    est = reconstruct_grid(f, scene.grid, scene.medium, R, consts, args.engine, threads=args.threads)
    est_f = lowpass_2k0(est, scene.medium)
    raw_t, filt_t = truth_fields(scene)
    rep = ReconReport(scene.name, args.engine, delta_v(est, raw_t, R), delta_v(est_f, filt_t, R),
                      amplitude_norm(f)[1], phase_shift_cylinder(scene.cylinder, scene.medium), 0.0,
                      flagged_points=flagged_coordinates(est), constants=consts.to_dict())
    return rep, {"estimate": est, "estimate_filtered": est_f, "truth": raw_t, "truth_filtered": filt_t}


def cmd_reconstruct(args) -> int:
    out = _out(args)
    scene = _scene_from_args(args)
    consts = _constants(args)
    if args.amplitude:
        rep, prod = _reconstruct_from_amplitude(args, scene, consts)
    else:
        run = run_pipeline(scene, args.engine, _noise(args), consts, threads=args.threads)
        rep, prod = run.report, run.products
    manifest = {"scene": scene.name, "engine": args.engine, "constants": consts.to_dict(),
                "alpha": args.alpha, "seed": args.seed if args.alpha > 0 else None}
    _emit_fields(out, prod["estimate"], prod["truth"], "", {**manifest, "filtered": False})
    if args.filter == "on":
        _emit_fields(out, prod["estimate_filtered"], prod["truth_filtered"], "_filtered",
                     {**manifest, "filtered": True})
    rep.save(out / "report.json")
    shown = rep.delta_v_filtered if args.filter == "on" else rep.delta_v_raw
    print(f"{scene.name} {args.engine}: delta_v = {shown:.4f} ({'filtered' if args.filter == 'on' else 'raw'}); "
          f"raw {rep.delta_v_raw:.4f}, filtered {rep.delta_v_filtered:.4f}, ||f|| = {rep.norm_f_over_3pi:.3f}/(3 pi)")
    if rep.flagged_points:
        raise FlaggedPointsError(rep.flagged_points)
    return 0


def cmd_noise_sweep(args) -> int:
    out = _out(args)
    scene = _scene_from_args(args)
    consts = _constants(args)
    rows = []
    for a in args.alphas:
        for seed in args.seeds:
            noise = NoiseSpec(a, seed) if a > 0 else None
            rep = run_pipeline(scene, args.engine, noise, consts, threads=args.threads).report
            rep.alpha, rep.seed = a, seed
            rows.append(rep)
            print(f"alpha={a:g} seed={seed}: filtered delta_v = {rep.delta_v_filtered:.4f}")
            if rep.flagged_points:
                raise FlaggedPointsError(rep.flagged_points)
    write_sweep_csv(out / "sweep.csv", rows)
    with open(out / "sweep_summary.csv", "w") as fh:
        fh.write("alpha,n_seeds,mean_delta_v_filtered,mean_delta_v_raw\n")
        for a in args.alphas:
            sel = [r for r in rows if r.alpha == a]
            fh.write(f"{a!r},{len(sel)},{np.mean([r.delta_v_filtered for r in sel])!r},"
                     f"{np.mean([r.delta_v_raw for r in sel])!r}\n")
            print(f"alpha={a:g}: mean filtered delta_v = {np.mean([r.delta_v_filtered for r in sel]):.4f}")
    return 0


def cmd_spectrum(args) -> int:
    out = _out(args)
    scene = _scene_from_args(args)
    run = run_pipeline(scene, args.engine, _noise(args), _constants(args), threads=args.threads)
    kx, st = spectrum_cross_section(run.products["truth"])
    _, se = spectrum_cross_section(run.products["estimate"])
    k0 = scene.medium.k0
    np.savetxt(out / "spectrum.csv", np.column_stack([kx, kx / k0, st, se]), delimiter=",", fmt="%.10g",
               header="kx,kx_over_k0,truth,estimate", comments="")
    write_svg_lines(out / "spectrum.svg", kx / k0, {"true |v~|": st, "estimate |v~|": se},
                    f"{scene.name}: normalized |v~(kx, 0)|", "kx / k0", "normalized modulus")
    edge = np.isclose(np.abs(kx), 2 * k0)
    print(f"truth spectrum at |kx| = 2 k0: {st[edge].min():.4f}; estimate: {se[edge].min():.4f}")
    return 0


def cmd_scenario(args) -> int:
    out = _out(args)
    scene = _scene_from_args(args)
    consts = _constants(args)
    rows = []
    for engine in ("born", "novikov"):
        run = run_pipeline(scene, engine, _noise(args), consts, threads=args.threads)
        sub = out / engine
        sub.mkdir(exist_ok=True)
        manifest = {"scene": scene.name, "engine": engine, "constants": consts.to_dict(),
                    "alpha": args.alpha, "seed": args.seed if args.alpha > 0 else None}
        _emit_fields(sub, run.products["estimate"], run.products["truth"], "", {**manifest, "filtered": False})
        _emit_fields(sub, run.products["estimate_filtered"], run.products["truth_filtered"], "_filtered",
                     {**manifest, "filtered": True})
        run.report.save(sub / "report.json")
        rows.append(run.report)
        r = run.report
        print(f"{scene.name} {engine}: raw {r.delta_v_raw:.4f}, filtered {r.delta_v_filtered:.4f}, "
              f"||f|| = {r.norm_f_over_3pi:.3f}/(3 pi), |dpsi|/pi = {r.delta_psi_over_pi:.3f}")
        if r.flagged_points:
            raise FlaggedPointsError(r.flagged_points)
    write_sweep_csv(out / "summary.csv", rows)
    return 0


# ---- argument parsing ----------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cyltomo", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, scene=True, engine=False, noise=False):
        sp.add_argument("--out", default=os.environ.get(OUT_ENV, "cyltomo_out"), help="output directory")
        sp.add_argument("--threads", type=int, default=None)
        if scene:
            g = sp.add_mutually_exclusive_group()
            g.add_argument("--preset", choices=PRESETS, default="fig2")
            g.add_argument("--scene", help="scene JSON file")
            sp.add_argument("--epsilon", type=float, help="override the cylinder contrast")
            sp.add_argument("--grid-step", type=float, help="reconstruction grid step [l.s.u.]")
            sp.add_argument("--constants", help="calibrated constants JSON (default: built-in)")
        if engine:
            sp.add_argument("--engine", choices=("born", "novikov"), default="novikov")
        if noise:
            sp.add_argument("--alpha", type=float, default=0.0, help="noise level relative to rms G_sc")
            sp.add_argument("--seed", type=int, default=0)

    c = sub.add_parser("calibrate", help="fix the convention constants on the fig2 scene")
    common(c, scene=False)
    c.add_argument("--search-samples", type=int, default=64)
    c.set_defaults(func=cmd_calibrate)

    s = sub.add_parser("simulate", help="write total/free/scattered matrices")
    common(s, noise=True)
    s.set_defaults(func=cmd_simulate)

    v = sub.add_parser("convert", help="scattered matrix to far-field amplitude")
    common(v)
    v.add_argument("--dataset", required=True, help="scattered.bin written by simulate")
    v.set_defaults(func=cmd_convert)

    r = sub.add_parser("reconstruct", help="reconstruct, filter and score one scene")
    common(r, engine=True, noise=True)
    r.add_argument("--filter", choices=("on", "off"), default="on")
    r.add_argument("--amplitude", help="use this amplitude file instead of simulating")
    r.set_defaults(func=cmd_reconstruct)

    n = sub.add_parser("noise-sweep", help="filtered discrepancy over noise levels and seeds")
    common(n, engine=True)
    n.add_argument("--alphas", type=float, nargs="+", required=True)
    n.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    n.set_defaults(func=cmd_noise_sweep)

    sp = sub.add_parser("spectrum", help="normalized |v~(kx, 0)| of truth and estimate")
    common(sp, engine=True, noise=True)
    sp.set_defaults(func=cmd_spectrum)

    sc = sub.add_parser("scenario", help="run a preset end to end with both engines")
    sc.add_argument("name", choices=PRESETS)
    common(sc, scene=False, noise=True)
    sc.add_argument("--constants")
    sc.add_argument("--grid-step", type=float)
    sc.set_defaults(func=cmd_scenario, engine=None)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "scenario":
        args.preset, args.scene, args.epsilon = args.name, None, None
    code, record = 0, None
    try:
        code = args.func(args)
    except FlaggedPointsError as exc:
        code, record = EXIT_FLAGGED, {"error": "flagged_points", "message": str(exc),
                                      "points": [list(p) for p in exc.points]}
    except CalibrationError as exc:
        code, record = EXIT_CALIBRATION, {"error": "calibration", "message": str(exc)}
    except (SceneError, DatasetError, AliasingError, MetricsError, PointSolveError,
            np.linalg.LinAlgError, ValueError, OSError) as exc:
        code, record = EXIT_INPUT, {"error": type(exc).__name__, "message": str(exc)}
    if record is not None:
        record["command"] = args.command
        try:
            _write_json(_out(args) / "error.json", record)
        except OSError:
            pass
        print(f"error: {record['message']}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
