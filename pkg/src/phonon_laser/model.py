"""Parameters, rotating-frame equations and stationary states of the
three-mode optomechanical phonon laser.

Two optical modes ``a1``, ``a2`` exchange energy through a phonon mode ``b``;
mode 1 is driven resonantly with amplitude ``drive``. All frequencies and
rates are in units of a reference frequency w0, time in units of 1/w0.

Dynamics are written in the frame rotating at the drive frequency w1, in
which the optical amplitudes lose their carrier and the phonon amplitude is
left in the lab frame:

    da1/dt = -gamma1*a1 - i*g*a2*b - i*drive
    da2/dt = (-gamma2 - i*domega2)*a2 - i*g*a1*conj(b)
    db/dt  = (-gammaB - i*omegaB)*b - i*g*a1*conj(a2) + xi(t)
"""
from __future__ import annotations

import dataclasses
import enum
import math
from typing import NamedTuple

import numpy as np


class ParameterError(ValueError):
    """Raised when a parameter set violates a physical invariant."""


class BelowThresholdError(ValueError):
    """Raised when a lasing quantity is requested below the threshold drive."""


@dataclasses.dataclass(frozen=True)
class SystemParams:
    """Physical parameters in units of w0.

    gamma1, gamma2, gammaB are amplitude decay rates, domega2 = w2 - w1,
    omegaB the phonon frequency, g the (real, positive) coupling, drive the
    external wave amplitude and nbar the mean thermal phonon number.
    """

    gamma1: float = 2e-4
    gamma2: float = 2e-4
    gammaB: float = 2e-4
    domega2: float = 5e-3
    omegaB: float = 5e-3
    g: float = 1e-4
    drive: float = 5e-3
    nbar: float = 100.0

    def replace(self, **changes) -> "SystemParams":
        return dataclasses.replace(self, **changes)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)

    @property
    def max_rate(self) -> float:
        return max(self.gamma1, self.gamma2, self.gammaB)


# Reference parameter set; drive and nbar vary between recipes.
FIGURE_PARAMS = SystemParams()


class ModeState(NamedTuple):
    """Complex amplitudes (a1, a2, b) in the frame rotating at w1."""

    a1: complex
    a2: complex
    b: complex


class StateKind(enum.Enum):
    ZERO = "zero"
    NONZERO = "nonzero"


@dataclasses.dataclass(frozen=True)
class StationaryState:
    kind: StateKind
    amplitudes: ModeState
    deltaOmega: float

    @property
    def intensities(self) -> tuple[float, float, float]:
        return tuple(abs(z) ** 2 for z in self.amplitudes)


def validate_params(raw: SystemParams) -> SystemParams:
    """Return ``raw`` unchanged if it is a valid parameter set.

    Raises
    ------
    ParameterError
        Naming the first violated invariant.
    """
    for name in ("gamma1", "gamma2", "gammaB", "domega2", "omegaB", "g", "drive", "nbar"):
        value = getattr(raw, name)
        if not isinstance(value, (int, float)) or not math.isfinite(value):
            raise ParameterError(f"{name} must be a finite number")
    for name in ("gamma1", "gamma2", "gammaB", "g", "omegaB"):
        if getattr(raw, name) <= 0:
            raise ParameterError(f"{name} must be positive")
    for name in ("drive", "nbar"):
        if getattr(raw, name) < 0:
            raise ParameterError(f"{name} must be nonnegative")
    return raw


def _detuning_ratio(p: SystemParams) -> float:
    return (p.domega2 + p.omegaB) / (p.gamma2 + p.gammaB)


def _rate_prefactor(p: SystemParams) -> float:
    return p.gamma1 * p.gamma2 / p.g * math.sqrt(p.gammaB / p.gamma2)


def threshold_amplitude(params: SystemParams) -> float:
    """Drive amplitude at which the zero solution loses stability."""
    p = validate_params(params)
    return _rate_prefactor(p) * math.sqrt(1.0 + _detuning_ratio(p) ** 2)


def existence_amplitude(params: SystemParams) -> float:
    """Drive above which the nonzero family is linearly stable.

    Always below :func:`threshold_amplitude`; kept for reference only since
    the nonzero solution itself only exists from the threshold upwards.
    """
    p = validate_params(params)
    return _rate_prefactor(p) * _detuning_ratio(p)


def phonon_frequency_pulling(params: SystemParams) -> float:
    """Self-consistent frequency of the generated phonons.

    Damping-weighted mean of omegaB and -domega2; the only frequency for which
    the stationary lasing ansatz closes.
    """
    p = validate_params(params)
    return (p.gamma2 * p.omegaB - p.gammaB * p.domega2) / (p.gamma2 + p.gammaB)


def zero_state(params: SystemParams) -> StationaryState:
    p = validate_params(params)
    a1 = -1j * p.drive / p.gamma1
    return StationaryState(
        StateKind.ZERO, ModeState(a1, 0j, 0j), phonon_frequency_pulling(p)
    )


def nonzero_intensities(params: SystemParams) -> tuple[float, float, float]:
    """Closed-form |a1|^2, |a2|^2, |b|^2 of the lasing state.

    The a2 and b values go negative below threshold; callers that need a
    physical state should use :func:`nonzero_state`.
    """
    p = validate_params(params)
    om_th = threshold_amplitude(p)
    om_ex = existence_amplitude(p)
    root = math.sqrt(max(p.drive**2 - om_ex**2, 0.0))
    i1 = om_th**2 / p.gamma1**2
    i2 = math.sqrt(p.gammaB / p.gamma2) * root / p.g - p.gamma1 * p.gammaB / p.g**2
    ib = math.sqrt(p.gamma2 / p.gammaB) * root / p.g - p.gamma1 * p.gamma2 / p.g**2
    return i1, i2, ib


def nonzero_state(params: SystemParams) -> StationaryState:
    """Representative of the phase-degenerate lasing family.

    The phase of a2 is fixed real and positive; a1 and b follow from the
    stationarity conditions. In the w1 frame a2 then rotates as
    ``exp(+i*dw*t)`` and b as ``exp(-i*dw*t)`` with ``dw`` the pulled
    phonon frequency.
    """
    p = validate_params(params)
    om_th = threshold_amplitude(p)
    if p.drive < om_th:
        raise BelowThresholdError(
            f"below threshold: drive {p.drive:.6g} < {om_th:.6g}; the nonzero solution does not exist"
        )
    dw = phonon_frequency_pulling(p)
    _, i2, _ = nonzero_intensities(p)
    a2 = math.sqrt(max(i2, 0.0)) + 0j
    c = p.gammaB + 1j * (p.omegaB - dw)
    a1 = -1j * p.drive / (p.gamma1 + p.g**2 * abs(a2) ** 2 / c)
    b = -1j * p.g * a1 * a2.conjugate() / c
    return StationaryState(StateKind.NONZERO, ModeState(a1, a2, b), dw)


def drift(state, params: SystemParams, frame_frequency: float = 0.0) -> np.ndarray:
    """Noiseless time derivative of (a1, a2, b).

    ``frame_frequency`` moves a2 and b to the frame co-rotating with the
    generated phonons (a2 shifted by -dw, b by +dw); 0 gives the w1 frame.
    Broadcasts over leading axes of ``state`` (last axis of length 3).
    """
    y = np.asarray(state, dtype=complex)
    a1, a2, b = y[..., 0], y[..., 1], y[..., 2]
    p = params
    dw = frame_frequency
    da1 = -p.gamma1 * a1 - 1j * p.g * a2 * b - 1j * p.drive
    da2 = (-p.gamma2 - 1j * (p.domega2 + dw)) * a2 - 1j * p.g * a1 * np.conj(b)
    db = (-p.gammaB - 1j * (p.omegaB - dw)) * b - 1j * p.g * a1 * np.conj(a2)
    return np.stack([da1, da2, db], axis=-1)


def rotation_generator(state, frame_frequency: float) -> np.ndarray:
    """Drift of a state that orbits the w1 frame at ``frame_frequency``.

    A stationary point of the co-rotating frame satisfies
    ``drift(y) == rotation_generator(y, dw)`` in the w1 frame.
    """
    y = np.asarray(state, dtype=complex)
    return np.array([0.0, 1j * frame_frequency * y[1], -1j * frame_frequency * y[2]])
