import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phonon_laser.langevin import SimConfig
from phonon_laser.linewidth import (
    FitError,
    OverlappingPeaksError,
    SweepKind,
    dominant_peak,
    find_peaks,
    fwhm,
    knee_fit,
    lorentzian_fit,
    lorentzian_linewidth,
    powerlaw_fit,
    sweep_drive,
    sweep_nbar,
)
from phonon_laser.model import FIGURE_PARAMS, threshold_amplitude
from phonon_laser.spectrum import Source, SpectrumData

NU = np.linspace(-1e-2, 1e-2, 4001)


def lorentz(nu, center, hw, amp=1.0):
    return amp * hw**2 / ((nu - center) ** 2 + hw**2)


def spectrum_of(y, stderr=None):
    psd = np.vstack([np.zeros_like(y), y, y])
    err = None if stderr is None else np.vstack([stderr] * 3)
    return SpectrumData(NU, psd, Source.SIMULATED, err)


@settings(max_examples=50, deadline=None)
@given(st.floats(-5e-3, 5e-3), st.floats(1e-4, 1e-3))
def test_fwhm_of_lorentzian(center, hw):
    spec = spectrum_of(lorentz(NU, center, hw))
    pk = dominant_peak(spec, "b")
    res = fwhm(spec, "b", pk)
    assert res.fwhm == pytest.approx(2 * hw, rel=0.005)
    assert res.resolved
    assert abs(res.peakFrequency - center) <= spec.resolution


def test_lorentzian_fit_with_noise():
    rng = np.random.default_rng(0)
    y = lorentz(NU, 1e-3, 3e-4) * (1 + 0.01 * rng.standard_normal(NU.size))
    spec = spectrum_of(y)
    pk = dominant_peak(spec, "b")
    fit = lorentzian_fit(spec, "b", pk, 300)
    assert fit.fwhm == pytest.approx(6e-4, rel=0.02)
    assert fit.center == pytest.approx(1e-3, abs=spec.resolution)
    assert fit.residual < 0.05
    assert lorentzian_linewidth(spec, "b", pk, 300).fwhm == pytest.approx(fit.fwhm)


def test_fit_window_too_small():
    spec = spectrum_of(lorentz(NU, 0.0, 3e-4))
    with pytest.raises(FitError, match="ill-conditioned"):
        lorentzian_fit(spec, "b", dominant_peak(spec, "b"), 2)


def test_unresolved_line_is_flagged():
    spec = spectrum_of(lorentz(NU, 0.0, 1.5 * (NU[1] - NU[0])))
    res = fwhm(spec, "b", dominant_peak(spec, "b"))
    assert not res.resolved


def test_overlapping_doublet():
    y = lorentz(NU, -4e-4, 3e-4) + lorentz(NU, 4e-4, 3e-4)
    spec = spectrum_of(y)
    peaks = find_peaks(spec, "b")
    assert len(peaks) == 2
    with pytest.raises(OverlappingPeaksError, match="overlapping peaks"):
        fwhm(spec, "b", peaks[0])


def test_separated_doublet():
    y = lorentz(NU, -4e-3, 2e-4) + 0.5 * lorentz(NU, 4e-3, 2e-4)
    spec = spectrum_of(y)
    pk = dominant_peak(spec, "b")
    assert pk.frequency == pytest.approx(-4e-3, abs=spec.resolution)
    assert fwhm(spec, "b", pk).fwhm == pytest.approx(4e-4, rel=0.01)


def test_uncertainty_grows_with_stderr():
    y = lorentz(NU, 0.0, 3e-4)
    quiet = fwhm(spectrum_of(y, 0.001 * y + 1e-6), "b", dominant_peak(spectrum_of(y), "b"))
    noisy = fwhm(spectrum_of(y, 0.1 * y + 1e-6), "b", dominant_peak(spectrum_of(y), "b"))
    assert quiet.uncertainty >= spectrum_of(y).resolution
    assert noisy.uncertainty > quiet.uncertainty


def test_no_peak_in_flat_spectrum():
    assert find_peaks(spectrum_of(np.zeros_like(NU)), "b") == []


@settings(max_examples=50, deadline=None)
@given(st.floats(-2.0, 2.0), st.floats(1e-3, 1e3))
def test_powerlaw_exact(k, c):
    x = np.array([10.0, 30.0, 100.0, 300.0, 1000.0])
    fit = powerlaw_fit(x, c * x**k)
    assert fit.exponent == pytest.approx(k, abs=1e-9)
    assert fit.prefactor == pytest.approx(c, rel=1e-8)


def test_powerlaw_rejects_bad_input():
    with pytest.raises(ValueError):
        powerlaw_fit([1.0, 2.0], [1.0, 2.0])
    with pytest.raises(ValueError):
        powerlaw_fit([1.0, 2.0, 3.0], [1.0, -2.0, 3.0])


@settings(max_examples=30, deadline=None)
@given(st.floats(0.3, 0.7), st.floats(0.5, 5.0))
def test_knee_recovers_breakpoint(knee, slope):
    x = np.linspace(0.0, 1.0, 21)
    y = 0.1 * x + slope * np.maximum(x - knee, 0.0)
    assert knee_fit(x, y) == pytest.approx(knee, abs=0.01)


TINY = SimConfig(dt=0.5, steps=10_000 + 8 * 1024 * 10, transientSteps=10_000, sampleStride=10, nTrajectories=1)


def test_drive_sweep_smoke():
    th = threshold_amplitude(FIGURE_PARAMS)
    table = sweep_drive(FIGURE_PARAMS.replace(nbar=1.0), [0.5 * th, 3 * th], TINY, 1024)
    assert table.kind is SweepKind.DRIVE and len(table.rows) == 2
    np.testing.assert_allclose(table.values(), [0.5 * th, 3 * th])
    assert np.all(np.isfinite(table.intensity("b")))
    # above threshold a1 is clamped near its threshold value
    assert table.intensity("a1")[1] == pytest.approx((th / FIGURE_PARAMS.gamma1) ** 2, rel=0.1)


def test_sweep_grid_validation():
    with pytest.raises(ValueError, match="empty"):
        sweep_drive(FIGURE_PARAMS, [], TINY, 1024)
    with pytest.raises(ValueError, match="increasing"):
        sweep_drive(FIGURE_PARAMS, [2e-2, 1e-2], TINY, 1024)
    with pytest.raises(ValueError, match="above threshold"):
        sweep_nbar(FIGURE_PARAMS.replace(drive=5e-3), [1.0, 10.0, 100.0], TINY, 1024)


def test_powerlaw_constant_has_zero_exponent():
    fit = powerlaw_fit([10.0, 100.0, 1000.0], [3.0, 3.0, 3.0])
    assert abs(fit.exponent) <= max(fit.stderr, 1e-12)


def test_doublet_gives_large_fit_residual():
    y = lorentz(NU, -6e-4, 2e-4) + lorentz(NU, 6e-4, 2e-4)
    spec = spectrum_of(y)
    pk = dominant_peak(spec, "b")
    clean = lorentzian_fit(spectrum_of(lorentz(NU, 0.0, 3e-4)), "b", dominant_peak(spectrum_of(lorentz(NU, 0.0, 3e-4)), "b"), 200)
    assert lorentzian_fit(spec, "b", pk, 200).residual > 10 * max(clean.residual, 1e-3)


WEAK = SimConfig(
    dt=0.5, steps=50_000 + 32 * 4096 * 20, transientSteps=50_000, sampleStride=20, nTrajectories=16, masterSeed=3
)


def test_linewidth_peaks_near_threshold_at_weak_noise():
    # at nbar = 1 the linearized picture holds and the width is non-monotonic in the drive
    th = threshold_amplitude(FIGURE_PARAMS)
    table = sweep_drive(FIGURE_PARAMS.replace(nbar=1.0), [0.5 * th, 1.2 * th, 5 * th], WEAK, 4096)
    below, near, far = table.rows
    w, u = table.widths("b"), table.uncertainties("b")
    assert w[1] - w[0] > np.hypot(u[1], u[0])
    assert w[1] - w[2] > np.hypot(u[1], u[2])
    # a2 doublet collapses into a single line above threshold
    assert below.peakCount == 2 and near.peakCount == 1 and far.peakCount == 1
    assert below.separation == pytest.approx(8.66e-3, abs=2 * 2 * np.pi / (4096 * 10))
    assert abs(far.peakFrequency) <= 2 * np.pi / (far.segmentLength * 10)


def test_linewidth_grows_with_weak_noise():
    p = FIGURE_PARAMS.replace(drive=3e-2)
    table = sweep_nbar(p, [0.3, 1.0, 3.0], WEAK, 4096)
    w = table.widths("a2")
    assert np.all(np.diff(w) > 0)
    assert all(r.peakCount == 1 for r in table.rows)
