"""Three-mode phonon laser: stationary states, stability, Langevin simulation and linewidths."""
from .langevin import InitialState, SimConfig, TrajectoryEnsemble, ensemble, simulate
from .linewidth import fwhm, lorentzian_linewidth, powerlaw_fit, sweep_drive, sweep_nbar
from .model import (
    FIGURE_PARAMS,
    SystemParams,
    existence_amplitude,
    nonzero_state,
    phonon_frequency_pulling,
    threshold_amplitude,
    zero_state,
)
from .spectrum import SpectrumData, Window, analytic_spectrum, welch_spectrum
from .stability import build_nonzero_jacobian, build_zero_jacobian, eigen_solve, goldstone_mode, threshold_bisect

__all__ = [
    "FIGURE_PARAMS",
    "InitialState",
    "SimConfig",
    "SpectrumData",
    "SystemParams",
    "TrajectoryEnsemble",
    "Window",
    "analytic_spectrum",
    "build_nonzero_jacobian",
    "build_zero_jacobian",
    "eigen_solve",
    "ensemble",
    "existence_amplitude",
    "fwhm",
    "goldstone_mode",
    "lorentzian_linewidth",
    "nonzero_state",
    "phonon_frequency_pulling",
    "powerlaw_fit",
    "simulate",
    "sweep_drive",
    "sweep_nbar",
    "threshold_amplitude",
    "threshold_bisect",
    "welch_spectrum",
    "zero_state",
]
