"""Command-line front end.

    phonon-laser steady [--drive 3e-2] [--json]
    phonon-laser stability --which nonzero --drive 3e-2
    phonon-laser spectrum --mode both --drive 5e-3 --nbar 100
    phonon-laser sweep --kind drive --grid 5e-3,1.2e-2,5e-2
    phonon-laser fig1 ... fig5

Parameters resolve as: recipe defaults < ``--config`` file < explicit flags.
Exit status: 0 success, 2 validation error, 3 numerical failure, 4 partial sweep.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import dataclasses
import json
import logging
import math
import os
import sys
import time
from importlib import metadata
from pathlib import Path

import numpy as np

from . import recipes
from .langevin import ConfigError, DivergenceError, EnsembleError, InitialState, SimConfig
from .linewidth import (
    DRIVE_GRID_FACTORS,
    SweepKind,
    SweepTable,
    knee_fit,
    nbar_exponent,
    sweep_drive,
    sweep_nbar,
)
from .model import (
    FIGURE_PARAMS,
    BelowThresholdError,
    ParameterError,
    SystemParams,
    existence_amplitude,
    nonzero_state,
    phonon_frequency_pulling,
    threshold_amplitude,
    validate_params,
    zero_state,
)
from .spectrum import SpectrumData, UnstableLinearizationError, Window
from .stability import EigenSolveError, build_nonzero_jacobian, build_zero_jacobian, eigen_solve

log = logging.getLogger("phonon_laser")

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_PARTIAL = 0, 2, 3, 4
OUT_ENV = "PHONON_LASER_OUT"

# flag name -> dataclass field
PARAM_FLAGS = {
    "gamma1": "gamma1",
    "gamma2": "gamma2",
    "gammab": "gammaB",
    "domega2": "domega2",
    "omegab": "omegaB",
    "g": "g",
    "drive": "drive",
    "nbar": "nbar",
}
CONFIG_FLAGS = {
    "dt": "dt",
    "steps": "steps",
    "transient": "transientSteps",
    "stride": "sampleStride",
    "trajectories": "nTrajectories",
    "seed": "masterSeed",
}
INT_FIELDS = {"steps", "transientSteps", "sampleStride", "nTrajectories", "masterSeed", "segment_length"}

SPECTRUM_COLUMNS = [
    "omega [w0]",
    "s_a1 [1/w0]",
    "s_a2 [1/w0]",
    "s_b [1/w0]",
    "stderr_a1 [1/w0]",
    "stderr_a2 [1/w0]",
    "stderr_b [1/w0]",
]
SWEEP_COLUMNS = [
    "swept_value [{unit}]",
    "I_a1 [1]",
    "I_a2 [1]",
    "I_b [1]",
    "peak_count_a2 [1]",
    "fwhm_a2 [w0]",
    "fwhm_b [w0]",
    "peak_freq [w0]",
    "resolved [bool]",
    "fwhm_a2_err [w0]",
    "fwhm_b_err [w0]",
    "separation_a2 [w0]",
    "status",
]


def _num(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def write_csv(path: Path, header, rows) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter=",", lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else _num(v) for v in row])
    return path


def write_spectrum_csv(path: Path, spec: SpectrumData) -> Path:
    err = spec.stderr if spec.stderr is not None else np.zeros_like(spec.psd)
    rows = zip(spec.omega, *spec.psd, *err)
    return write_csv(path, SPECTRUM_COLUMNS, rows)


def sweep_rows(table: SweepTable):
    for r in table.rows:
        lw_a2, lw_b = r.linewidths.get("a2"), r.linewidths.get("b")
        resolved = all(lw is not None and lw.resolved for lw in (lw_a2, lw_b))
        yield [
            r.sweptValue,
            *r.intensities,
            r.peakCount,
            lw_a2.fwhm if lw_a2 else math.nan,
            lw_b.fwhm if lw_b else math.nan,
            r.peakFrequency,
            resolved,
            lw_a2.uncertainty if lw_a2 else math.nan,
            lw_b.uncertainty if lw_b else math.nan,
            r.separation,
            "ok" if r.ok else r.error.replace(",", ";"),
        ]


def write_sweep_csv(path: Path, table: SweepTable) -> Path:
    unit = "w0" if table.kind is SweepKind.DRIVE else "1"
    header = [SWEEP_COLUMNS[0].format(unit=unit)] + SWEEP_COLUMNS[1:]
    return write_csv(path, header, sweep_rows(table))


def sweep_summary(table: SweepTable) -> list[tuple[str, float]]:
    """Fitted exponent (nbar sweep) or non-monotonicity witness (drive sweep)."""
    out = []
    if table.kind is SweepKind.NBAR:
        for mode in ("a2", "b"):
            try:
                fit = nbar_exponent(table, mode)
                out += [(f"exponent_{mode}", fit.exponent), (f"exponent_{mode}_stderr", fit.stderr)]
            except ValueError:
                out += [(f"exponent_{mode}", math.nan), (f"exponent_{mode}_stderr", math.nan)]
        return out
    th = threshold_amplitude(table.params)
    x = table.values()
    w, u = table.widths("b"), table.uncertainties("b")
    for label, target in (("below", 0.5 * th), ("near", 1.2 * th), ("far", 5.0 * th)):
        k = int(np.argmin(np.abs(x - target)))
        out += [(f"drive_{label}", x[k]), (f"fwhm_b_{label}", w[k]), (f"fwhm_b_{label}_err", u[k])]
    ib = table.intensity("b")
    ok = np.isfinite(ib)
    out.append(("threshold", th))
    out.append(("knee_drive", knee_fit(x[ok], ib[ok]) if ok.sum() >= 4 else math.nan))
    return out


def write_summary_csv(path: Path, items) -> Path:
    return write_csv(path, ["quantity", "value"], items)


PLOT_STUB = '''"""Plot stub generated by phonon-laser; edit freely."""
import sys

import matplotlib.pyplot as plt
import pandas as pd

for path in sys.argv[1:] or {files!r}:
    df = pd.read_csv(path)
    x = df.columns[0]
    df.plot(x=x, y=[c for c in df.columns[1:4]], logy=True, title=path)
plt.show()
'''


# ---------------------------------------------------------------- resolution


def _read_config_file(path: str) -> dict:
    parser = configparser.ConfigParser()
    text = Path(path).read_text(encoding="utf-8")
    parser.read_string("[run]\n" + text)
    return dict(parser["run"])


def _coerce(field: str, value):
    return int(value) if field in INT_FIELDS else float(value)


def resolve(args, base_params: SystemParams, base_config: SimConfig, base_segment: int):
    """Merge defaults, the config file and explicit flags."""
    file_values = _read_config_file(args.config) if args.config else {}
    params, config = {}, {}
    segment = base_segment
    window = None
    param_fields = {f.name for f in dataclasses.fields(SystemParams)}
    config_fields = {f.name for f in dataclasses.fields(SimConfig)}
    for key, raw in file_values.items():
        # configparser lowercases keys
        name = {f.lower(): f for f in param_fields | config_fields}.get(key, key)
        if name in param_fields:
            params[name] = _coerce(name, raw)
        elif name in config_fields and name not in ("initialState", "customState"):
            config[name] = _coerce(name, raw)
        elif key in ("segment_length", "segmentlength"):
            segment = int(raw)
        elif key == "window":
            window = Window(raw.strip().lower())
        else:
            raise ParameterError(f"unknown config key {key!r}")
    for flag, field in PARAM_FLAGS.items():
        v = getattr(args, flag, None)
        if v is not None:
            params[field] = v
    for flag, field in CONFIG_FLAGS.items():
        v = getattr(args, flag, None)
        if v is not None:
            config[field] = v
    if getattr(args, "segment_length", None) is not None:
        segment = args.segment_length
    if getattr(args, "window", None) is not None:
        window = Window(args.window)
    p = validate_params(base_params.replace(**params))
    c = base_config.replace(**config)
    return p, c, segment, window


def out_dir(args) -> Path:
    path = Path(args.out_dir or os.environ.get(OUT_ENV) or "out")
    path.mkdir(parents=True, exist_ok=True)
    return path


def artifact_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def write_manifest(directory: Path, command: str, params, config, segment, files, started, extra=None) -> Path:
    manifest = {
        "command": command,
        "version": artifact_version(),
        "params": params.as_dict(),
        "config": config.as_dict() if config is not None else None,
        "segment_length": segment,
        "masterSeed": config.masterSeed if config is not None else None,
        "outputs": [Path(f).name for f in files],
        "duration_s": round(time.perf_counter() - started, 3),
    }
    if extra:
        manifest.update(extra)
    path = directory / f"{command}_manifest.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return path


def _maybe_plot_stub(args, directory: Path, command: str, files) -> list[Path]:
    if not getattr(args, "plot_stub", False):
        return []
    path = directory / f"plot_{command}.py"
    path.write_text(PLOT_STUB.format(files=[Path(f).name for f in files if str(f).endswith(".csv")]), encoding="utf-8")
    return [path]


# ---------------------------------------------------------------- commands


def _complex_pair(z: complex) -> list[float]:
    return [z.real, z.imag]


def cmd_steady(args) -> int:
    p, _, _, _ = resolve(args, FIGURE_PARAMS, SimConfig(), 0)
    report = {
        "threshold": threshold_amplitude(p),
        "existence": existence_amplitude(p),
        "deltaOmega": phonon_frequency_pulling(p),
        "zero": {"intensities": list(zero_state(p).intensities)},
    }
    try:
        nz = nonzero_state(p)
        report["nonzero"] = {
            "intensities": list(nz.intensities),
            "amplitudes": [_complex_pair(z) for z in nz.amplitudes],
        }
    except BelowThresholdError:
        report["nonzero"] = "does not exist"
    if args.json:
        print(json.dumps(report, indent=2))
        return EXIT_OK
    print(f"threshold drive      {report['threshold']:.6e} w0")
    print(f"existence drive      {report['existence']:.6e} w0")
    print(f"phonon frequency dw  {report['deltaOmega']:.6e} w0")
    i1, i2, ib = report["zero"]["intensities"]
    print(f"zero state           |a1|^2={i1:.6g} |a2|^2={i2:.6g} |b|^2={ib:.6g}")
    if report["nonzero"] == "does not exist":
        print("nonzero state        does not exist (drive below threshold)")
    else:
        i1, i2, ib = report["nonzero"]["intensities"]
        print(f"nonzero state        |a1|^2={i1:.6g} |a2|^2={i2:.6g} |b|^2={ib:.6g}")
    return EXIT_OK


def cmd_stability(args) -> int:
    p, _, _, _ = resolve(args, FIGURE_PARAMS, SimConfig(), 0)
    lin = build_zero_jacobian(p) if args.which == "zero" else build_nonzero_jacobian(p)
    rep = eigen_solve(lin)
    data = {
        "which": args.which,
        "eigenvalues": [_complex_pair(z) for z in rep.eigenvalues],
        "maxRealPart": rep.max_real_part,
        "zeroModes": rep.zero_modes,
        "stable": rep.stable,
    }
    if args.json:
        print(json.dumps(data, indent=2))
        return EXIT_OK
    print(f"{args.which} state linearization over {', '.join(lin.basis_labels)}")
    for z in rep.eigenvalues:
        print(f"  lambda = {z.real:+.6e} {z.imag:+.6e}i")
    print(f"max Re lambda {rep.max_real_part:+.3e}; zero modes {rep.zero_modes}; {'stable' if rep.stable else 'unstable'}")
    return EXIT_OK


def cmd_spectrum(args) -> int:
    started = time.perf_counter()
    base = recipes.RECIPES["fig2"]
    p, c, seg, win = resolve(args, FIGURE_PARAMS, base.config, base.segment_length)
    if win is None:
        win = Window.HANN if p.drive >= threshold_amplitude(p) else Window.RECTANGULAR
    if p.drive >= threshold_amplitude(p):
        c = c.replace(initialState=InitialState.AT_NONZERO)
    directory = out_dir(args)
    spectra = recipes.run_spectra(p, c, seg, win, args.mode, args.workers)
    files = [write_spectrum_csv(directory / f"spectrum_{kind}.csv", s) for kind, s in spectra.items()]
    files += _maybe_plot_stub(args, directory, "spectrum", files)
    write_manifest(directory, "spectrum", p, c, seg, files, started, {"window": win.value, "mode": args.mode})
    return EXIT_OK


def _parse_grid(text: str | None) -> list[float]:
    if not text:
        return []
    return [float(v) for v in text.split(",") if v.strip()]


def cmd_sweep(args) -> int:
    started = time.perf_counter()
    base = recipes.RECIPES["fig5" if args.kind == "drive" else "fig4"]
    p, c, seg, win = resolve(args, base.params, base.config, base.segment_length)
    grid = _parse_grid(args.grid)
    if args.grid is not None and not grid:
        raise ParameterError("empty sweep grid")
    if args.kind == "drive":
        table = sweep_drive(p, grid or recipes.drive_grid(p), c, seg, win, args.workers)
    else:
        table = sweep_nbar(p, grid or list(recipes.NBAR_GRID), c, seg, win, args.workers)
    return _emit_sweep(args, out_dir(args), "sweep", table, seg, started)


def _emit_sweep(args, directory, name, table, seg, started) -> int:
    files = [write_sweep_csv(directory / f"{name}_{table.kind.value}.csv", table)]
    files.append(write_summary_csv(directory / f"{name}_{table.kind.value}_summary.csv", sweep_summary(table)))
    files += _maybe_plot_stub(args, directory, name, files)
    write_manifest(
        directory, name, table.params, table.config, seg, files, started, {"kind": table.kind.value, "complete": table.complete}
    )
    return EXIT_OK if table.complete else EXIT_PARTIAL


def cmd_recipe(args) -> int:
    started = time.perf_counter()
    name = args.command
    recipe = recipes.RECIPES[name]
    p, c, seg, win = resolve(args, recipe.params, recipe.config, recipe.segment_length)
    recipe = dataclasses.replace(recipe, params=p, config=c, segment_length=seg)
    directory = out_dir(args)
    files = []
    if name == "fig1":
        for label, data in recipes.run_traces(recipe).items():
            files.append(write_csv(directory / f"fig1_{label}.csv", ["time [1/w0]", "I_a1 [1]", "I_a2 [1]", "I_b [1]"], data))
    elif name in ("fig2", "fig3"):
        runner = recipes.run_fig2 if name == "fig2" else recipes.run_fig3
        for label, spec in runner(recipe, args.workers).items():
            files.append(write_spectrum_csv(directory / f"{name}_{label}.csv", spec))
    else:
        table = recipes.run_fig4(recipe, args.workers) if name == "fig4" else recipes.run_fig5(recipe, args.workers)
        return _emit_sweep(args, directory, name, table, seg, started)
    files += _maybe_plot_stub(args, directory, name, files)
    write_manifest(directory, name, p, c, seg, files, started, {"values": list(recipe.values)})
    return EXIT_OK


# ---------------------------------------------------------------- parser


def _add_common(sp: argparse.ArgumentParser, sim: bool) -> None:
    for flag in PARAM_FLAGS:
        sp.add_argument(f"--{flag}", type=float, default=None)
    sp.add_argument("--config", default=None, help="flat key = value file with SystemParams/SimConfig fields")
    sp.add_argument("--json", action="store_true", help="machine-readable report")
    if sim:
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--dt", type=float, default=None)
        sp.add_argument("--steps", type=int, default=None)
        sp.add_argument("--transient", type=int, default=None)
        sp.add_argument("--stride", type=int, default=None)
        sp.add_argument("--trajectories", type=int, default=None)
        sp.add_argument("--segment-length", dest="segment_length", type=int, default=None)
        sp.add_argument("--window", choices=[w.value for w in Window], default=None)
        sp.add_argument("--out-dir", dest="out_dir", default=None)
        sp.add_argument("--workers", type=int, default=1, help="trajectory threads (results do not depend on it)")
        sp.add_argument("--plot-stub", dest="plot_stub", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="phonon-laser", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("steady", help="thresholds and stationary states")
    _add_common(sp, sim=False)
    sp.set_defaults(func=cmd_steady)

    sp = sub.add_parser("stability", help="eigenvalues of a linearization")
    _add_common(sp, sim=False)
    sp.add_argument("--which", choices=["zero", "nonzero"], default="zero")
    sp.set_defaults(func=cmd_stability)

    sp = sub.add_parser("spectrum", help="analytic and/or simulated spectra as CSV")
    _add_common(sp, sim=True)
    sp.add_argument("--mode", choices=["analytic", "simulated", "both"], default="both")
    sp.set_defaults(func=cmd_spectrum)

    sp = sub.add_parser("sweep", help="linewidth sweep over drive or nbar")
    _add_common(sp, sim=True)
    sp.add_argument("--kind", choices=["drive", "nbar"], required=True)
    sp.add_argument(
        "--grid",
        default=None,
        help=f"comma-separated values; default {DRIVE_GRID_FACTORS} x threshold (drive) or {recipes.NBAR_GRID} (nbar)",
    )
    sp.set_defaults(func=cmd_sweep)

    for name in recipes.RECIPES:
        sp = sub.add_parser(name, help=f"reproduce {name}")
        _add_common(sp, sim=True)
        sp.set_defaults(func=cmd_recipe)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ParameterError, ConfigError, BelowThresholdError, UnstableLinearizationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (DivergenceError, EnsembleError, EigenSolveError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
