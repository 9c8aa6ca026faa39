"""Peak finding, linewidths, scaling fits and parameter sweeps."""
from __future__ import annotations

import dataclasses
import enum
import logging
import math
import warnings
from typing import Sequence

import numpy as np
from scipy import optimize, signal, stats

from .langevin import DivergenceError, EnsembleError, InitialState, SimConfig, ensemble
from .model import SystemParams, threshold_amplitude, validate_params
from .spectrum import InsufficientSegmentsError, SpectrumData, Window, welch_spectrum

log = logging.getLogger(__name__)

DEFAULT_PROMINENCE = 0.1
MIN_RESOLVED_BINS = 5
MAX_DOUBLINGS = 3
PEAK_SIGMAS = 3.0

DRIVE_GRID_FACTORS = (0.3, 0.5, 0.8, 0.95, 1.05, 1.2, 1.5, 2.0, 3.0, 5.0)
NBAR_GRID = (10.0, 30.0, 100.0, 300.0, 1000.0)


class OverlappingPeaksError(ValueError):
    pass


class FitError(RuntimeError):
    pass


class Method(enum.Enum):
    HALF_MAX = "half-max-interpolation"
    LORENTZIAN = "lorentzian-fit"


@dataclasses.dataclass(frozen=True)
class Peak:
    index: int
    frequency: float
    height: float
    prominence: float


@dataclasses.dataclass(frozen=True)
class LinewidthResult:
    peakFrequency: float
    fwhm: float
    method: Method
    uncertainty: float
    resolved: bool


@dataclasses.dataclass(frozen=True)
class LorentzianFit:
    center: float
    half_width: float
    amplitude: float
    residual: float

    @property
    def fwhm(self) -> float:
        return 2.0 * self.half_width


def _values(spec: SpectrumData, mode: str) -> np.ndarray:
    return np.nan_to_num(spec.mode(mode), nan=0.0)


def find_peaks(spec: SpectrumData, mode: str, min_prominence: float = DEFAULT_PROMINENCE) -> list[Peak]:
    """Local maxima whose prominence is at least ``min_prominence`` of the global maximum.

    For estimated spectra a peak must also stand ``PEAK_SIGMAS`` standard
    errors above its surroundings, so noise on a broad line is not mistaken
    for structure.
    """
    y = _values(spec, mode)
    top = y.max()
    if not top > 0:
        return []
    idx, props = signal.find_peaks(y, prominence=min_prominence * top)
    prom = props["prominences"]
    if spec.stderr is not None:
        keep = prom >= PEAK_SIGMAS * spec.mode_stderr(mode)[idx]
        idx, prom = idx[keep], prom[keep]
    return [Peak(int(i), float(spec.omega[i]), float(y[i]), float(pr)) for i, pr in zip(idx, prom)]


def dominant_peak(spec: SpectrumData, mode: str, min_prominence: float = DEFAULT_PROMINENCE) -> Peak | None:
    peaks = find_peaks(spec, mode, min_prominence)
    return max(peaks, key=lambda pk: pk.height) if peaks else None


def _crossing(nu, y, i, level, direction, blockers):
    """Interpolated position where ``y`` first drops below ``level`` walking from ``i``."""
    j = i
    while True:
        k = j + direction
        if k < 0 or k >= y.size:
            return None
        if k in blockers:
            raise OverlappingPeaksError(f"overlapping peaks: no half-maximum crossing before the peak at {nu[k]:.6g}")
        if y[k] < level:
            return nu[j] + (level - y[j]) / (y[k] - y[j]) * (nu[k] - nu[j])
        j = k


def fwhm(
    spec: SpectrumData,
    mode: str,
    peak: Peak,
    min_prominence: float = DEFAULT_PROMINENCE,
) -> LinewidthResult:
    """Full width at half maximum by linear interpolation of the two crossings.

    The uncertainty is one grid bin plus half the spread of widths obtained
    from the PSD shifted by +-1 standard error. Lines narrower than five bins
    come back with ``resolved=False``.
    """
    nu = spec.omega
    y = _values(spec, mode)
    err = spec.mode_stderr(mode)
    others = {pk.index for pk in find_peaks(spec, mode, min_prominence)} - {peak.index}
    i = peak.index

    def width(curve):
        level = curve[i] / 2
        lo = _crossing(nu, curve, i, level, -1, others)
        hi = _crossing(nu, curve, i, level, +1, others)
        if lo is None or hi is None:
            raise OverlappingPeaksError("half-maximum crossing falls outside the frequency grid")
        return hi - lo

    w = width(y)
    spread = 0.0
    if np.any(err > 0):
        # Broadest and narrowest plausible lines: peak up / wings down and the reverse.
        band = []
        for sign in (-1.0, 1.0):
            shifted = y + sign * err
            shifted[i] = y[i] - sign * err[i]
            try:
                band.append(width(shifted))
            except OverlappingPeaksError:
                pass
        if band:
            spread = (max(band + [w]) - min(band + [w])) / 2
    res = spec.resolution
    return LinewidthResult(peak.frequency, w, Method.HALF_MAX, res + spread, w >= MIN_RESOLVED_BINS * res)


def _lorentzian(x, amplitude, center, half_width):
    return amplitude * half_width**2 / ((x - center) ** 2 + half_width**2)


def lorentzian_fit(spec: SpectrumData, mode: str, peak: Peak, window_bins: int) -> LorentzianFit:
    """Least-squares Lorentzian over ``peak.index +- window_bins``."""
    lo = max(peak.index - window_bins, 0)
    hi = min(peak.index + window_bins + 1, spec.omega.size)
    if hi - lo < 7:
        raise FitError("ill-conditioned window: fewer than 7 bins")
    x = spec.omega[lo:hi]
    y = _values(spec, mode)[lo:hi]
    guess_width = max(abs(x[-1] - x[0]) / 4, spec.resolution)
    try:
        with warnings.catch_warnings():
            # parameter covariance is unused; a poor fit shows up in the residual
            warnings.simplefilter("ignore", optimize.OptimizeWarning)
            popt, _ = optimize.curve_fit(
                _lorentzian, x, y, p0=(peak.height, peak.frequency, guess_width), maxfev=10_000
            )
    except RuntimeError as exc:
        raise FitError(f"Lorentzian fit did not converge: {exc}") from exc
    amp, center, hw = popt
    resid = float(np.linalg.norm(y - _lorentzian(x, *popt)) / np.linalg.norm(y))
    return LorentzianFit(float(center), float(abs(hw)), float(amp), resid)


def lorentzian_linewidth(spec: SpectrumData, mode: str, peak: Peak, window_bins: int) -> LinewidthResult:
    fit = lorentzian_fit(spec, mode, peak, window_bins)
    res = spec.resolution
    return LinewidthResult(fit.center, fit.fwhm, Method.LORENTZIAN, res, fit.fwhm >= MIN_RESOLVED_BINS * res)


@dataclasses.dataclass(frozen=True)
class PowerLaw:
    exponent: float
    prefactor: float
    stderr: float


def powerlaw_fit(xs: Sequence[float], ys: Sequence[float]) -> PowerLaw:
    """Straight-line fit of log(ys) against log(xs)."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.size < 3 or x.size != y.size:
        raise ValueError("need at least 3 (x, y) pairs")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("power-law fit needs strictly positive input")
    fit = stats.linregress(np.log(x), np.log(y))
    return PowerLaw(float(fit.slope), float(math.exp(fit.intercept)), float(fit.stderr))


class SweepKind(enum.Enum):
    DRIVE = "drive"
    NBAR = "nbar"


@dataclasses.dataclass(frozen=True)
class SweepRow:
    sweptValue: float
    intensities: tuple[float, float, float]
    linewidths: dict
    peakCount: int
    peakFrequency: float
    separation: float
    segmentLength: int
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclasses.dataclass(frozen=True)
class SweepTable:
    kind: SweepKind
    params: SystemParams
    config: SimConfig
    rows: list

    @property
    def complete(self) -> bool:
        return all(r.ok for r in self.rows)

    def values(self) -> np.ndarray:
        return np.array([r.sweptValue for r in self.rows])

    def widths(self, mode: str) -> np.ndarray:
        return np.array([r.linewidths[mode].fwhm if r.linewidths.get(mode) else np.nan for r in self.rows])

    def uncertainties(self, mode: str) -> np.ndarray:
        return np.array([r.linewidths[mode].uncertainty if r.linewidths.get(mode) else np.nan for r in self.rows])

    def intensity(self, mode: str) -> np.ndarray:
        k = ("a1", "a2", "b").index(mode)
        return np.array([r.intensities[k] for r in self.rows])


def default_window(params: SystemParams) -> Window:
    return Window.HANN if params.drive >= threshold_amplitude(params) else Window.RECTANGULAR


def default_initial(params: SystemParams) -> InitialState:
    return InitialState.AT_NONZERO if params.drive >= threshold_amplitude(params) else InitialState.AT_ZERO


def measure_row(
    params: SystemParams,
    config: SimConfig,
    segment_length: int,
    swept_value: float,
    window: Window | None = None,
    modes: Sequence[str] = ("a2", "b"),
    workers: int = 1,
) -> tuple[SweepRow, SpectrumData | None]:
    """Simulate one parameter point and reduce it to a sweep row.

    The segment length doubles (at most three times) while the dominant line
    of any requested mode is unresolved and enough segments remain.
    """
    cfg = config.replace(initialState=default_initial(params))
    win = default_window(params) if window is None else window
    try:
        ens = ensemble(params, cfg, workers=workers)
    except (EnsembleError, DivergenceError) as exc:
        return _failed_row(swept_value, segment_length, str(exc)), None

    n_traj, n_samples, _ = ens.samples.shape
    length = segment_length
    try:
        spec = welch_spectrum(ens, length, win)
    except InsufficientSegmentsError as exc:
        return _failed_row(swept_value, length, str(exc)), None
    widths, err = _row_widths(spec, modes)
    for _ in range(MAX_DOUBLINGS):
        unresolved = any(lw is not None and not lw.resolved for lw in widths.values())
        if not unresolved or err or n_traj * (n_samples // (2 * length)) < 8:
            break
        length *= 2
        spec = welch_spectrum(ens, length, win)
        widths, err = _row_widths(spec, modes)
    peaks_a2 = find_peaks(spec, "a2")
    sep = peaks_a2[-1].frequency - peaks_a2[0].frequency if len(peaks_a2) >= 2 else 0.0
    main_b = dominant_peak(spec, "b")
    row = SweepRow(
        sweptValue=swept_value,
        intensities=tuple(float(v) for v in ens.intensities),
        linewidths=widths,
        peakCount=len(peaks_a2),
        peakFrequency=main_b.frequency if main_b else float("nan"),
        separation=sep,
        segmentLength=length,
        error=err,
    )
    return row, spec


def _row_widths(spec: SpectrumData, modes):
    widths, errors = {}, []
    for mode in modes:
        pk = dominant_peak(spec, mode)
        if pk is None:
            widths[mode] = None
            errors.append(f"{mode}: no peak")
            continue
        try:
            widths[mode] = fwhm(spec, mode, pk)
        except OverlappingPeaksError as exc:
            widths[mode] = None
            errors.append(f"{mode}: {exc}")
    return widths, "; ".join(errors) or None


def _failed_row(value, length, message) -> SweepRow:
    log.warning("sweep row %.6g failed: %s", value, message)
    return SweepRow(value, (math.nan,) * 3, {}, 0, math.nan, math.nan, length, message)


def _check_grid(grid) -> list[float]:
    values = [float(v) for v in grid]
    if not values:
        raise ValueError("empty sweep grid")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ValueError("sweep grid must be strictly increasing")
    return values


def sweep_drive(
    params: SystemParams,
    drive_grid: Sequence[float],
    config: SimConfig,
    segment_length: int,
    window: Window | None = None,
    workers: int = 1,
) -> SweepTable:
    """Linewidth, intensity and peak structure against the drive amplitude.

    Every row reuses ``config.masterSeed`` (common random numbers), so
    differences between rows are not masked by independent noise.
    """
    p = validate_params(params)
    rows = []
    for drive in _check_grid(drive_grid):
        row, _ = measure_row(p.replace(drive=drive), config, segment_length, drive, window, workers=workers)
        rows.append(row)
    return SweepTable(SweepKind.DRIVE, p, config, rows)


def sweep_nbar(
    params: SystemParams,
    nbar_grid: Sequence[float],
    config: SimConfig,
    segment_length: int,
    window: Window | None = None,
    workers: int = 1,
) -> SweepTable:
    p = validate_params(params)
    if p.drive <= threshold_amplitude(p):
        raise ValueError("an nbar sweep needs a drive above threshold")
    rows = []
    for nbar in _check_grid(nbar_grid):
        row, _ = measure_row(p.replace(nbar=nbar), config, segment_length, nbar, window, workers=workers)
        rows.append(row)
    return SweepTable(SweepKind.NBAR, p, config, rows)


def nbar_exponent(table: SweepTable, mode: str = "a2") -> PowerLaw:
    x, w = table.values(), table.widths(mode)
    ok = np.isfinite(w) & (w > 0)
    return powerlaw_fit(x[ok], w[ok])


def knee_fit(x: Sequence[float], y: Sequence[float]) -> float:
    """Breakpoint of a continuous two-segment linear fit (least squares)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)

    def sse(k):
        a = np.column_stack([np.ones_like(x), x, np.maximum(x - k, 0.0)])
        coef, *_ = np.linalg.lstsq(a, y, rcond=None)
        return float(np.sum((a @ coef - y) ** 2))

    candidates = np.linspace(x[1], x[-2], 400)
    k0 = candidates[np.argmin([sse(k) for k in candidates])]
    step = candidates[1] - candidates[0]
    out = optimize.minimize_scalar(sse, bounds=(k0 - step, k0 + step), method="bounded")
    return float(out.x)
