"""Mode spectra, analytic (linearized zero state) and simulated (Welch).

Frequency convention: every reported axis is the offset ``nu = omega - w1``
from the drive frequency, oriented so that a component ``exp(-i*nu*t)`` of a
w1-frame amplitude shows up at ``+nu``. An isolated phonon mode therefore
peaks at ``+omegaB`` and the driven a1 carrier sits at 0.

PSDs are normalized so that their integral over ``nu`` equals the mean
square amplitude of the mode.
"""
from __future__ import annotations

import dataclasses
import enum
import warnings

import numpy as np

from .langevin import TrajectoryEnsemble
from .model import SystemParams, phonon_frequency_pulling, threshold_amplitude, validate_params
from .stability import build_zero_jacobian

MODES = ("a1", "a2", "b")


class Source(enum.Enum):
    ANALYTIC = "analytic"
    SIMULATED = "simulated"


class Window(enum.Enum):
    RECTANGULAR = "rectangular"
    HANN = "hann"


class UnstableLinearizationError(ValueError):
    pass


class InsufficientSegmentsError(ValueError):
    pass


class UnresolvedLineWarning(UserWarning):
    pass


@dataclasses.dataclass(frozen=True)
class SpectrumData:
    """Per-mode PSDs on a uniform, increasing grid of offsets from w1.

    ``psd`` and ``stderr`` have shape (3, len(omega)) in mode order a1, a2, b.
    ``stderr`` is None for analytic spectra; ``singular`` flags excluded
    analytic bins (their PSD is NaN).
    """

    omega: np.ndarray
    psd: np.ndarray
    source: Source
    stderr: np.ndarray | None = None
    singular: np.ndarray | None = None

    @property
    def resolution(self) -> float:
        return float(self.omega[1] - self.omega[0])

    @property
    def sA1(self) -> np.ndarray:
        return self.psd[0]

    @property
    def sA2(self) -> np.ndarray:
        return self.psd[1]

    @property
    def sB(self) -> np.ndarray:
        return self.psd[2]

    def mode(self, name: str) -> np.ndarray:
        return self.psd[mode_index(name)]

    def mode_stderr(self, name: str) -> np.ndarray:
        if self.stderr is None:
            return np.zeros_like(self.omega)
        return self.stderr[mode_index(name)]

    def integral(self) -> np.ndarray:
        """Integrated power per mode (mean square amplitude)."""
        return np.nansum(self.psd, axis=1) * self.resolution


def mode_index(name: str) -> int:
    try:
        return MODES.index(name)
    except ValueError:
        raise ValueError(f"unknown mode {name!r}; expected one of {MODES}") from None


def _matrix_spectrum(m: np.ndarray, d: np.ndarray, omega: np.ndarray) -> np.ndarray:
    """Diagonal of (1/pi) (M* + i w)^-1 D (M^T - i w)^-1 for each w."""
    eye = np.eye(m.shape[0])
    w = omega[:, None, None]
    left = np.linalg.inv(m.conj()[None] + 1j * w * eye)
    right = np.linalg.inv(m.T[None] - 1j * w * eye)
    s = left @ d @ right / np.pi
    return np.real(np.diagonal(s, axis1=1, axis2=2)).T


def analytic_spectrum(params: SystemParams, omega, deltaOmega: float | None = None) -> SpectrumData:
    """Linearized spectra around the zero state.

    The matrix formula acts on (da1, da2, db*) in the frame co-rotating with
    ``deltaOmega`` and reports the e^{+i w t} convention; each mode is mapped
    back to the common axis (see module docstring), which makes the result
    independent of ``deltaOmega``.
    """
    p = validate_params(params)
    om_th = threshold_amplitude(p)
    if p.drive >= om_th:
        raise UnstableLinearizationError(
            f"unstable linearization: drive {p.drive:.6g} >= threshold {om_th:.6g}. Above threshold the "
            "lasing state is phase degenerate, the zero eigenvalue makes the linearized spectrum diverge "
            "at the carrier; use simulated spectra instead"
        )
    nu = np.asarray(omega, dtype=float)
    if nu.ndim != 1 or nu.size < 2 or not np.all(np.diff(nu) > 0):
        raise ValueError("omega grid must be one-dimensional and strictly increasing")
    dw = phonon_frequency_pulling(p) if deltaOmega is None else deltaOmega
    m = build_zero_jacobian(p, dw).matrix
    d = np.diag([0.0, 0.0, p.gammaB * p.nbar])
    psd = np.empty((3, nu.size))
    with np.errstate(all="ignore"):
        psd[0] = _matrix_spectrum(m, d, -nu)[0]
        psd[1] = _matrix_spectrum(m, d, -nu - dw)[1]
        psd[2] = _matrix_spectrum(m, d, nu - dw)[2]
    singular = ~np.all(np.isfinite(psd), axis=0)
    psd[:, singular] = np.nan
    return SpectrumData(nu, psd, Source.ANALYTIC, None, singular)


def _window(kind: Window, n: int) -> np.ndarray:
    if kind is Window.HANN:
        # Periodic Hann: exact power compensation for any n.
        return 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(n) / n)
    return np.ones(n)


def segment_periodograms(x: np.ndarray, dt: float, segment_length: int, window: Window = Window.RECTANGULAR):
    """Windowed periodograms of non-overlapping segments along the last axis.

    Returns (nu, P) where P has shape (..., n_segments, segment_length) on
    the increasing offset grid ``nu``.
    """
    n = segment_length
    n_seg = x.shape[-1] // n
    segs = x[..., : n_seg * n].reshape(*x.shape[:-1], n_seg, n)
    w = _window(window, n)
    u = np.mean(w**2)
    # ifft carries exp(+i*2*pi*k*m/n): a component exp(-i*nu*t) lands at +nu.
    spec = np.fft.ifft(segs * w, axis=-1) * n
    p = dt / (2 * np.pi * n * u) * np.abs(spec) ** 2
    nu = 2 * np.pi * np.fft.fftfreq(n, dt)
    return np.fft.fftshift(nu), np.fft.fftshift(p, axes=-1)


def welch_spectrum(
    ens: TrajectoryEnsemble,
    segment_length: int,
    window: Window = Window.RECTANGULAR,
    min_segments: int = 8,
) -> SpectrumData:
    """Segment-averaged periodogram of every mode over all trajectories.

    The a1 carrier is kept, so the a1 spectrum contains the driven line at 0.
    """
    n_traj, n_samples, _ = ens.samples.shape
    if segment_length > n_samples:
        raise InsufficientSegmentsError(f"segment length {segment_length} exceeds {n_samples} samples per trajectory")
    n_seg = n_traj * (n_samples // segment_length)
    if n_seg < min_segments:
        raise InsufficientSegmentsError(f"insufficient segments: {n_seg} < {min_segments}")
    x = np.moveaxis(ens.samples, -1, 0)  # (3, traj, samples)
    nu, p = segment_periodograms(x, ens.config.sample_dt, segment_length, window)
    p = p.reshape(3, n_seg, segment_length)
    psd = p.mean(axis=1)
    stderr = p.std(axis=1, ddof=1) / np.sqrt(n_seg)
    return SpectrumData(nu, psd, Source.SIMULATED, stderr)


def warn_if_unresolved(spec: SpectrumData, fwhm: float, min_bins: int = 5) -> bool:
    if fwhm < min_bins * spec.resolution:
        warnings.warn(
            f"unresolved line: FWHM {fwhm:.3g} < {min_bins} bins ({spec.resolution:.3g} each)",
            UnresolvedLineWarning,
            stacklevel=2,
        )
        return True
    return False


def peak_band(spec: SpectrumData, mode: str, fraction: float = 0.01) -> np.ndarray:
    """Mask of bins where ``mode`` exceeds ``fraction`` of its maximum."""
    y = np.nan_to_num(spec.mode(mode), nan=0.0)
    return y >= fraction * y.max()


def relative_l2(estimate: SpectrumData, reference: SpectrumData, mode: str, mask: np.ndarray | None = None) -> float:
    """||estimate - reference|| / ||reference|| over ``mask`` (default: reference peak band)."""
    if not np.array_equal(estimate.omega, reference.omega):
        raise ValueError("spectra live on different frequency grids")
    m = peak_band(reference, mode) if mask is None else mask
    m = m & np.isfinite(reference.mode(mode))
    ref = reference.mode(mode)[m]
    return float(np.linalg.norm(estimate.mode(mode)[m] - ref) / np.linalg.norm(ref))
