import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phonon_laser.model import FIGURE_PARAMS, BelowThresholdError, SystemParams, drift, nonzero_state, threshold_amplitude
from phonon_laser.stability import (
    build_nonzero_jacobian,
    build_zero_jacobian,
    eigen_solve,
    eigenvalues_closed_form,
    goldstone_mode,
    goldstone_tangent,
    max_growth_rate,
    threshold_bisect,
)


@st.composite
def lasing_params(draw):
    p = SystemParams(
        gamma1=draw(st.floats(5e-5, 1e-3)),
        gamma2=draw(st.floats(5e-5, 1e-3)),
        gammaB=draw(st.floats(5e-5, 1e-3)),
        domega2=draw(st.floats(-1e-2, 1e-2)),
        omegaB=draw(st.floats(1e-3, 1e-2)),
        g=draw(st.floats(3e-5, 3e-4)),
    )
    return p.replace(drive=draw(st.floats(1.05, 10.0)) * threshold_amplitude(p))


def test_zero_state_eigenvalues_example():
    lam = eigenvalues_closed_form(FIGURE_PARAMS.replace(drive=5e-3))
    assert lam[0] == pytest.approx(-2e-4)
    pair = sorted(lam[1:], key=lambda z: z.imag)
    assert pair[0] == pytest.approx(-2e-4 - 4.330127e-3j, rel=1e-6)
    assert pair[1] == pytest.approx(-2e-4 + 4.330127e-3j, rel=1e-6)
    rep = eigen_solve(build_zero_jacobian(FIGURE_PARAMS.replace(drive=5e-3)))
    assert rep.stable and rep.zero_modes == 0


def test_zero_state_unstable_above_threshold():
    rep = eigen_solve(build_zero_jacobian(FIGURE_PARAMS.replace(drive=1.5e-2)))
    assert not rep.stable and rep.max_real_part > 0


@settings(max_examples=100, deadline=None)
@given(lasing_params(), st.floats(0.05, 3.0), st.floats(-1e-2, 1e-2))
def test_closed_form_matches_eig(p, f, dw):
    p = p.replace(drive=f * threshold_amplitude(p))
    num = np.linalg.eigvals(build_zero_jacobian(p, dw).matrix)
    ref = np.array(eigenvalues_closed_form(p, dw))
    gap = np.abs(num[:, None] - ref[None, :]).min(axis=0)
    assert gap.max() < 1e-12 * np.abs(ref).max() + 1e-14
    # real parts do not depend on the rotating frame
    other = np.sort(np.array(eigenvalues_closed_form(p, 0.0)).real)
    np.testing.assert_allclose(np.sort(ref.real), other, atol=1e-14)


@settings(max_examples=50, deadline=None)
@given(lasing_params())
def test_threshold_is_sign_change(p):
    th = threshold_amplitude(p)
    assert max_growth_rate(p.replace(drive=0.999 * th)) < 0
    assert max_growth_rate(p.replace(drive=1.001 * th)) > 0


def test_bisect_matches_closed_form():
    assert threshold_bisect(FIGURE_PARAMS) == pytest.approx(threshold_amplitude(FIGURE_PARAMS), rel=1e-6)
    # doubling g halves the threshold
    doubled = FIGURE_PARAMS.replace(g=2e-4)
    assert threshold_bisect(doubled) == pytest.approx(threshold_amplitude(FIGURE_PARAMS) / 2, rel=1e-6)
    # exact resonance domega2 = -omegaB
    res = FIGURE_PARAMS.replace(domega2=-5e-3)
    assert threshold_bisect(res) == pytest.approx(4e-4, rel=1e-6)


def _real_jacobian(p, y0, h=1e-6):
    """Finite-difference Jacobian of the co-rotating drift in (Re, Im) coordinates."""
    dw = nonzero_state(p).deltaOmega
    x0 = np.concatenate([y0.real, y0.imag])

    def f(x):
        d = drift(x[:3] + 1j * x[3:], p, dw)
        return np.concatenate([d.real, d.imag])

    jac = np.empty((6, 6))
    for k in range(6):
        e = np.zeros(6)
        e[k] = h * max(1.0, abs(x0[k]))
        jac[:, k] = (f(x0 + e) - f(x0 - e)) / (2 * e[k])
    return jac


@settings(max_examples=30, deadline=None)
@given(lasing_params())
def test_nonzero_jacobian_matches_finite_differences(p):
    y0 = np.array(nonzero_state(p).amplitudes)
    jac = _real_jacobian(p, y0)
    m = build_nonzero_jacobian(p).matrix
    # (z, z*) -> (Re z, Im z): T maps complex pairs to real coordinates
    t = np.zeros((6, 6), dtype=complex)
    for k in range(3):
        t[k, 2 * k] = t[k, 2 * k + 1] = 0.5
        t[3 + k, 2 * k] = -0.5j
        t[3 + k, 2 * k + 1] = 0.5j
    mapped = t @ m @ np.linalg.inv(t)
    assert np.max(np.abs(mapped.imag)) < 1e-12
    scale = np.abs(jac).max()
    np.testing.assert_allclose(mapped.real, jac, atol=1e-6 * scale)


@settings(max_examples=50, deadline=None)
@given(lasing_params())
def test_single_zero_mode_and_goldstone(p):
    lin = build_nonzero_jacobian(p)
    rep = eigen_solve(lin)
    assert rep.zero_modes == 1
    v = goldstone_tangent(p)
    assert np.linalg.norm(lin.matrix @ v) < 1e-10 * np.linalg.norm(lin.matrix, 2)
    lam, vec = goldstone_mode(p)
    assert abs(lam.real) < 1e-8 * p.max_rate
    assert vec[2].imag == pytest.approx(0, abs=1e-12) and vec[2].real > 0
    assert abs(abs(np.vdot(vec, v)) - 1) < 1e-6


def test_nonzero_stable_with_one_zero_mode_example():
    rep = eigen_solve(build_nonzero_jacobian(FIGURE_PARAMS.replace(drive=3e-2)))
    assert rep.stable and rep.zero_modes == 1


def test_goldstone_below_threshold():
    with pytest.raises(BelowThresholdError):
        goldstone_mode(FIGURE_PARAMS.replace(drive=5e-3))
