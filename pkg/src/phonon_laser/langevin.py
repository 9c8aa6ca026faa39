"""Stochastic integration of the rotating-frame Langevin equations.

Thermal noise acts on the phonon mode only. Each step adds a circular
complex Gaussian increment with ``<|dW|^2> = 2*gammaB*nbar*dt`` to ``b``;
with this normalization an isolated phonon mode relaxes to ``<|b|^2> = nbar``.

Trajectories are integrated with the stochastic Heun scheme. Every
trajectory draws its noise from its own generator seeded by
``(master_seed, trajectory_index)``, so an ensemble is a pure function of its
inputs regardless of the order in which trajectories are computed.
"""
from __future__ import annotations

import dataclasses
import enum
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Sequence

import numba
import numpy as np

from .model import ModeState, SystemParams, nonzero_state, threshold_amplitude, validate_params, zero_state

DIVERGENCE_LIMIT = 1e6
ACCURACY_GUARD = 0.05
_CHUNK = 1 << 16


class DivergenceError(FloatingPointError):
    """A trajectory left the physical amplitude range."""


class EnsembleError(RuntimeError):
    def __init__(self, failures: dict[int, Exception]):
        self.failures = failures
        lines = ", ".join(f"#{i}: {e}" for i, e in sorted(failures.items()))
        super().__init__(f"{len(failures)} trajectories failed ({lines})")


class ConfigError(ValueError):
    pass


class InitialState(enum.Enum):
    AT_ZERO = "zero"
    AT_NONZERO = "nonzero"
    CUSTOM = "custom"


@dataclasses.dataclass(frozen=True)
class SimConfig:
    dt: float = 0.5
    steps: int = 400_000
    transientSteps: int = 50_000
    sampleStride: int = 1
    nTrajectories: int = 1
    masterSeed: int = 0
    initialState: InitialState = InitialState.AT_ZERO
    customState: ModeState | None = None

    def replace(self, **changes) -> "SimConfig":
        return dataclasses.replace(self, **changes)

    @property
    def n_samples(self) -> int:
        return (self.steps - self.transientSteps) // self.sampleStride

    @property
    def sample_dt(self) -> float:
        return self.dt * self.sampleStride

    def as_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["initialState"] = self.initialState.value
        if self.customState is not None:
            d["customState"] = [[z.real, z.imag] for z in self.customState]
        return d


def default_transient(params: SystemParams, dt: float) -> int:
    """Five slowest linear relaxation times, in steps."""
    return int(math.ceil(5.0 / min(params.gamma1, params.gamma2, params.gammaB) / dt))


def fastest_rate(params: SystemParams) -> float:
    p = params
    if p.drive >= threshold_amplitude(p):
        amp = max(abs(z) for z in nonzero_state(p).amplitudes)
    else:
        amp = p.drive / p.gamma1
    amp = max(amp, math.sqrt(max(p.nbar, 1.0)))
    return max(abs(p.domega2), p.omegaB, p.gamma1, p.gamma2, p.gammaB, p.g * amp)


def validate_config(config: SimConfig, params: SystemParams) -> SimConfig:
    c = config
    if not c.dt > 0:
        raise ConfigError("dt must be positive")
    if not 0 <= c.transientSteps < c.steps:
        raise ConfigError("need steps > transientSteps >= 0")
    if c.sampleStride < 1:
        raise ConfigError("sampleStride must be >= 1")
    if c.nTrajectories < 1:
        raise ConfigError("nTrajectories must be >= 1")
    if c.initialState is InitialState.CUSTOM and c.customState is None:
        raise ConfigError("custom initial state requires customState")
    phase = c.dt * fastest_rate(params)
    if phase > ACCURACY_GUARD:
        raise ConfigError(f"dt too large: dt*max_rate = {phase:.3g} > {ACCURACY_GUARD}")
    return c


@dataclasses.dataclass(frozen=True)
class TrajectoryEnsemble:
    """Decimated samples of shape (nTrajectories, nSamples, 3)."""

    times: np.ndarray
    samples: np.ndarray
    config: SimConfig
    params: SystemParams

    @property
    def intensities(self) -> np.ndarray:
        """Time- and ensemble-averaged |a1|^2, |a2|^2, |b|^2."""
        return np.mean(np.abs(self.samples) ** 2, axis=(0, 1))


def trajectory_rng(master_seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(master_seed, spawn_key=(index,))))


def noise_increment(rng: np.random.Generator, gammaB: float, nbar: float, dt: float) -> complex:
    """One circular complex Gaussian increment of the phonon noise."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    x, y = rng.standard_normal(2) * math.sqrt(gammaB * nbar * dt)
    return complex(x, y)


def _noise_block(rng: np.random.Generator, n: int, scale: float) -> np.ndarray:
    # Same draw order as repeated noise_increment calls.
    z = rng.standard_normal((n, 2)) * scale
    return z[:, 0] + 1j * z[:, 1]


@numba.njit(cache=True, nogil=True)
def _drift3(a1, a2, b, g1, g2, gb, dw2, wb, g, drive):
    da1 = -g1 * a1 - 1j * g * a2 * b - 1j * drive
    da2 = (-g2 - 1j * dw2) * a2 - 1j * g * a1 * b.conjugate()
    db = (-gb - 1j * wb) * b - 1j * g * a1 * a2.conjugate()
    return da1, da2, db


@numba.njit(cache=True, nogil=True)
def _heun(a1, a2, b, pr, dt, dW):
    g1, g2, gb, dw2, wb, g, drive = pr[0], pr[1], pr[2], pr[3], pr[4], pr[5], pr[6]
    k1, k2, k3 = _drift3(a1, a2, b, g1, g2, gb, dw2, wb, g, drive)
    p1 = a1 + dt * k1
    p2 = a2 + dt * k2
    p3 = b + dt * k3 + dW
    m1, m2, m3 = _drift3(p1, p2, p3, g1, g2, gb, dw2, wb, g, drive)
    h = 0.5 * dt
    return a1 + h * (k1 + m1), a2 + h * (k2 + m2), b + h * (k3 + m3) + dW


@numba.njit(cache=True, nogil=True)
def _integrate(y, pr, dt, noise, stride, phase, out, limit):
    """Advance ``y`` in place over ``noise``; record every ``stride``-th state.

    ``phase`` counts steps since the last record. Returns (new phase, number
    of samples written, diverged flag).
    """
    a1, a2, b = y[0], y[1], y[2]
    written = 0
    for k in range(noise.shape[0]):
        a1, a2, b = _heun(a1, a2, b, pr, dt, noise[k])
        phase += 1
        if phase == stride:
            phase = 0
            if written < out.shape[0]:
                out[written, 0] = a1
                out[written, 1] = a2
                out[written, 2] = b
            written += 1
        if abs(a1) > limit or abs(a2) > limit or abs(b) > limit or a1 != a1 or a2 != a2 or b != b:
            y[0], y[1], y[2] = a1, a2, b
            return phase, written, True
    y[0], y[1], y[2] = a1, a2, b
    return phase, written, False


def _param_vector(p: SystemParams) -> np.ndarray:
    return np.array([p.gamma1, p.gamma2, p.gammaB, p.domega2, p.omegaB, p.g, p.drive], dtype=float)


def step(state, params: SystemParams, dt: float, dW: complex) -> ModeState:
    """One stochastic Heun step in the w1 frame; noise enters b only."""
    a1, a2, b = (complex(z) for z in state)
    out = _heun(a1, a2, b, _param_vector(params), dt, complex(dW))
    if not all(math.isfinite(abs(z)) and abs(z) <= DIVERGENCE_LIMIT for z in out):
        raise DivergenceError("trajectory diverged (dt too large?)")
    return ModeState(*out)


def initial_condition(params: SystemParams, config: SimConfig) -> np.ndarray:
    if config.initialState is InitialState.AT_ZERO:
        amps = zero_state(params).amplitudes
    elif config.initialState is InitialState.AT_NONZERO:
        amps = nonzero_state(params).amplitudes
    else:
        amps = config.customState
    return np.array(amps, dtype=complex)


def simulate(params: SystemParams, config: SimConfig, trajectory_index: int = 0) -> np.ndarray:
    """Integrate one trajectory; returns decimated samples of shape (nSamples, 3)."""
    p = validate_params(params)
    c = validate_config(config, p)
    rng = trajectory_rng(c.masterSeed, trajectory_index)
    scale = math.sqrt(p.gammaB * p.nbar * c.dt)
    pr = _param_vector(p)
    y = initial_condition(p, c)
    out = np.empty((c.n_samples, 3), dtype=complex)
    scratch = np.empty((0, 3), dtype=complex)

    done = 0
    while done < c.transientSteps:
        n = min(_CHUNK, c.transientSteps - done)
        _, _, bad = _integrate(y, pr, c.dt, _noise_block(rng, n, scale), 1 << 62, 0, scratch, DIVERGENCE_LIMIT)
        if bad:
            raise DivergenceError(f"trajectory {trajectory_index} diverged during transient")
        done += n

    phase, filled = 0, 0
    remaining = c.steps - c.transientSteps
    while remaining > 0 and filled < c.n_samples:
        n = min(_CHUNK, remaining)
        phase, written, bad = _integrate(
            y, pr, c.dt, _noise_block(rng, n, scale), c.sampleStride, phase, out[filled:], DIVERGENCE_LIMIT
        )
        if bad:
            raise DivergenceError(f"trajectory {trajectory_index} diverged at t={(c.steps - remaining) * c.dt:.6g}")
        filled += written
        remaining -= n
    return out


def sample_times(config: SimConfig) -> np.ndarray:
    k = np.arange(1, config.n_samples + 1)
    return (config.transientSteps + k * config.sampleStride) * config.dt


def ensemble(
    params: SystemParams,
    config: SimConfig,
    indices: Sequence[int] | None = None,
    workers: int = 1,
) -> TrajectoryEnsemble:
    """Run ``config.nTrajectories`` independent trajectories.

    ``indices`` may permute or subset the trajectory indices; each
    trajectory depends only on its own index, so neither the order nor the
    number of worker threads changes the result.
    """
    p = validate_params(params)
    c = validate_config(config, p)
    idx = list(range(c.nTrajectories)) if indices is None else list(indices)
    samples = np.empty((len(idx), c.n_samples, 3), dtype=complex)
    failures: dict[int, Exception] = {}

    def run(row_index):
        row, i = row_index
        try:
            samples[row] = simulate(p, c, i)
        except DivergenceError as exc:
            failures[i] = exc

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, enumerate(idx)))
    else:
        for item in enumerate(idx):
            run(item)
    if failures:
        raise EnsembleError(failures)
    return TrajectoryEnsemble(sample_times(c), samples, c, p)
