"""Reproduction recipes fig1 to fig5: parameter sets, run configurations and drivers.

Every recipe returns plain data (spectra, sweep tables, traces) keyed by a
short label; writing files is left to the CLI.
"""
from __future__ import annotations

import dataclasses

import numpy as np

from .langevin import InitialState, SimConfig, ensemble, simulate
from .linewidth import DRIVE_GRID_FACTORS, NBAR_GRID, SweepTable, sweep_drive, sweep_nbar
from .model import FIGURE_PARAMS, SystemParams, threshold_amplitude
from .spectrum import SpectrumData, Window, analytic_spectrum, welch_spectrum

TRANSIENT = 50_000
STRIDE = 20


def _steps_for(segments_per_trajectory: int, segment_length: int, stride: int = STRIDE) -> int:
    return TRANSIENT + segments_per_trajectory * segment_length * stride


@dataclasses.dataclass(frozen=True)
class Recipe:
    name: str
    params: SystemParams
    config: SimConfig
    segment_length: int
    values: tuple[float, ...] = ()


SPECTRUM_SEGMENT = 8192
SWEEP_SEGMENT = 4096

RECIPES = {
    "fig1": Recipe(
        "fig1",
        FIGURE_PARAMS.replace(nbar=100.0),
        SimConfig(dt=0.5, steps=400_000, transientSteps=0, sampleStride=200, nTrajectories=1),
        0,
        (5e-3, 1.5e-2, 5e-2),
    ),
    "fig2": Recipe(
        "fig2",
        FIGURE_PARAMS.replace(drive=5e-3),
        SimConfig(
            dt=0.5,
            steps=_steps_for(16, SPECTRUM_SEGMENT),
            transientSteps=TRANSIENT,
            sampleStride=STRIDE,
            nTrajectories=32,
        ),
        SPECTRUM_SEGMENT,
        (10.0, 100.0),
    ),
    "fig3": Recipe(
        "fig3",
        FIGURE_PARAMS.replace(drive=3e-2),
        SimConfig(
            dt=0.5,
            steps=_steps_for(16, SPECTRUM_SEGMENT),
            transientSteps=TRANSIENT,
            sampleStride=STRIDE,
            nTrajectories=32,
            initialState=InitialState.AT_NONZERO,
        ),
        SPECTRUM_SEGMENT,
        (10.0, 100.0),
    ),
    "fig4": Recipe(
        "fig4",
        FIGURE_PARAMS.replace(drive=5e-2),
        SimConfig(
            dt=0.5,
            steps=_steps_for(32, SWEEP_SEGMENT),
            transientSteps=TRANSIENT,
            sampleStride=STRIDE,
            nTrajectories=16,
        ),
        SWEEP_SEGMENT,
        NBAR_GRID,
    ),
    "fig5": Recipe(
        "fig5",
        FIGURE_PARAMS.replace(nbar=100.0),
        SimConfig(
            dt=0.5,
            steps=_steps_for(32, SWEEP_SEGMENT),
            transientSteps=TRANSIENT,
            sampleStride=STRIDE,
            nTrajectories=16,
        ),
        SWEEP_SEGMENT,
    ),
}


def drive_grid(params: SystemParams, factors=DRIVE_GRID_FACTORS) -> list[float]:
    th = threshold_amplitude(params)
    return [f * th for f in factors]


def run_traces(recipe: Recipe, drives=None) -> dict[str, np.ndarray]:
    """Time series of (t, |a1|^2, |a2|^2, |b|^2) started from the zero state."""
    out = {}
    cfg = recipe.config.replace(initialState=InitialState.AT_ZERO)
    times = (cfg.transientSteps + np.arange(1, cfg.n_samples + 1) * cfg.sampleStride) * cfg.dt
    for drive in drives or recipe.values:
        y = simulate(recipe.params.replace(drive=drive), cfg, 0)
        out[f"drive{drive:g}"] = np.column_stack([times, np.abs(y) ** 2])
    return out


def run_spectra(
    params: SystemParams,
    config: SimConfig,
    segment_length: int,
    window: Window,
    mode: str = "both",
    workers: int = 1,
) -> dict[str, SpectrumData]:
    """Simulated and/or analytic spectra on a common grid."""
    out = {}
    if mode in ("simulated", "both"):
        ens = ensemble(params, config, workers=workers)
        out["simulated"] = welch_spectrum(ens, segment_length, window)
    if mode in ("analytic", "both"):
        if "simulated" in out:
            grid = out["simulated"].omega
        else:
            n = segment_length
            grid = np.fft.fftshift(2 * np.pi * np.fft.fftfreq(n, config.sample_dt))
        out["analytic"] = analytic_spectrum(params, grid)
    return out


def run_fig2(recipe: Recipe = RECIPES["fig2"], workers: int = 1) -> dict[str, SpectrumData]:
    out = {}
    for nbar in recipe.values:
        spectra = run_spectra(
            recipe.params.replace(nbar=nbar), recipe.config, recipe.segment_length, Window.RECTANGULAR, "both", workers
        )
        for kind, spec in spectra.items():
            out[f"nbar{nbar:g}_{kind}"] = spec
    return out


def run_fig3(recipe: Recipe = RECIPES["fig3"], workers: int = 1) -> dict[str, SpectrumData]:
    out = {}
    for nbar in recipe.values:
        spectra = run_spectra(
            recipe.params.replace(nbar=nbar), recipe.config, recipe.segment_length, Window.HANN, "simulated", workers
        )
        out[f"nbar{nbar:g}_simulated"] = spectra["simulated"]
    return out


def run_fig4(recipe: Recipe = RECIPES["fig4"], workers: int = 1) -> SweepTable:
    return sweep_nbar(recipe.params, recipe.values, recipe.config, recipe.segment_length, workers=workers)


def run_fig5(recipe: Recipe = RECIPES["fig5"], workers: int = 1) -> SweepTable:
    grid = list(recipe.values) or drive_grid(recipe.params)
    return sweep_drive(recipe.params, grid, recipe.config, recipe.segment_length, workers=workers)
