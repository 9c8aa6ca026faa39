"""Linear stability of the zero and lasing states.

The zero state is linearized in the variables (da1, da2, db*), giving the
3x3 matrix whose lower block couples the second optical mode to the
conjugated phonon. The lasing state needs the full 6x6 real-linear
structure over (da1, da1*, da2, da2*, db, db*) and always carries one
neutral (Goldstone) direction along its phase family.
"""
from __future__ import annotations

import cmath
import dataclasses

import numpy as np
from scipy import optimize

from .model import (
    BelowThresholdError,
    SystemParams,
    nonzero_state,
    phonon_frequency_pulling,
    threshold_amplitude,
    validate_params,
)

ZERO_BASIS = ("da1", "da2", "db*")
NONZERO_BASIS = ("da1", "da1*", "da2", "da2*", "db", "db*")

# Relative to the largest damping rate.
ZERO_MODE_TOL = 1e-8
RESIDUAL_TOL = 1e-10


class EigenSolveError(RuntimeError):
    pass


class DegenerateModeError(RuntimeError):
    pass


@dataclasses.dataclass(frozen=True)
class Linearization:
    matrix: np.ndarray
    basis_labels: tuple[str, ...]
    frame_frequency: float
    rate_scale: float

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclasses.dataclass(frozen=True)
class StabilityReport:
    eigenvalues: np.ndarray
    max_real_part: float
    zero_modes: int
    stable: bool

    def __post_init__(self):
        object.__setattr__(self, "eigenvalues", np.asarray(self.eigenvalues, dtype=complex))


def build_zero_jacobian(params: SystemParams, deltaOmega: float | None = None) -> Linearization:
    p = validate_params(params)
    dw = phonon_frequency_pulling(p) if deltaOmega is None else deltaOmega
    k = p.g * p.drive / p.gamma1
    m = np.array(
        [
            [-p.gamma1, 0.0, 0.0],
            [0.0, -1j * (p.domega2 + dw) - p.gamma2, -k],
            [0.0, -k, 1j * (p.omegaB - dw) - p.gammaB],
        ],
        dtype=complex,
    )
    return Linearization(m, ZERO_BASIS, dw, p.max_rate)


def eigenvalues_closed_form(params: SystemParams, deltaOmega: float | None = None) -> tuple[complex, complex, complex]:
    """Eigenvalues of the zero-state linearization in closed form.

    The square-root branch is chosen so that ``lambda2`` has the larger real
    part. Only the imaginary parts depend on ``deltaOmega``.
    """
    p = validate_params(params)
    dw = phonon_frequency_pulling(p) if deltaOmega is None else deltaOmega
    centre = -(p.gamma2 + p.gammaB + 1j * ((p.domega2 + dw) - (p.omegaB - dw))) / 2
    disc = ((p.gamma2 - p.gammaB) + 1j * (p.domega2 + p.omegaB)) ** 2 + 4 * p.g**2 * p.drive**2 / p.gamma1**2
    root = cmath.sqrt(disc) / 2
    if root.real < 0:
        root = -root
    return -p.gamma1 + 0j, centre + root, centre - root


def max_growth_rate(params: SystemParams) -> float:
    """Largest real part of the zero-state spectrum (frame independent)."""
    return max(lam.real for lam in eigenvalues_closed_form(params, 0.0))


def build_nonzero_jacobian(params: SystemParams) -> Linearization:
    """6x6 linearization of the co-rotating equations at the lasing state."""
    p = validate_params(params)
    state = nonzero_state(p)
    a1, a2, b = state.amplitudes
    dw = state.deltaOmega
    g = p.g
    d2 = -p.gamma2 - 1j * (p.domega2 + dw)
    db = -p.gammaB - 1j * (p.omegaB - dw)
    c = np.conj
    m = np.array(
        [
            # a1      a1*          a2          a2*          b            b*
            [-p.gamma1, 0, -1j * g * b, 0, -1j * g * a2, 0],
            [0, -p.gamma1, 0, 1j * g * c(b), 0, 1j * g * c(a2)],
            [-1j * g * c(b), 0, d2, 0, 0, -1j * g * a1],
            [0, 1j * g * b, 0, c(d2), 1j * g * c(a1), 0],
            [-1j * g * c(a2), 0, 0, -1j * g * a1, db, 0],
            [0, 1j * g * a2, 1j * g * c(a1), 0, 0, c(db)],
        ],
        dtype=complex,
    )
    return Linearization(m, NONZERO_BASIS, dw, p.max_rate)


def conjugation_permutation(dim: int = 6) -> np.ndarray:
    """Permutation swapping each variable with its conjugate partner."""
    perm = np.zeros((dim, dim))
    for i in range(0, dim, 2):
        perm[i, i + 1] = perm[i + 1, i] = 1.0
    return perm


def eigen_solve(lin: Linearization) -> StabilityReport:
    m = np.asarray(lin.matrix, dtype=complex)
    if not np.all(np.isfinite(m)):
        raise EigenSolveError("matrix has non-finite entries")
    try:
        vals, vecs = np.linalg.eig(m)
    except np.linalg.LinAlgError as exc:
        raise EigenSolveError(f"eigensolver did not converge: {exc}") from exc
    norm = np.linalg.norm(m, 2)
    resid = np.linalg.norm(m @ vecs - vecs * vals, axis=0)
    if np.any(resid > RESIDUAL_TOL * max(norm, 1e-300)):
        raise EigenSolveError(f"eigenpair residual too large: {resid.max():.3g}")
    zero = np.abs(vals.real) < ZERO_MODE_TOL * lin.rate_scale
    others = vals.real[~zero]
    max_re = float(vals.real.max())
    stable = bool(others.size == 0 or others.max() < 0)
    order = np.argsort(-vals.real, kind="stable")
    return StabilityReport(vals[order], max_re, int(zero.sum()), stable)


def threshold_bisect(params: SystemParams, rtol: float = 1e-8) -> float:
    """Numerical threshold: root of the zero-state growth rate in the drive.

    Uses the generic eigensolver on the 3x3 matrix, independent of the
    closed-form eigenvalues.
    """
    p = validate_params(params)
    hi = 10.0 * threshold_amplitude(p)

    def growth(drive):
        m = build_zero_jacobian(p.replace(drive=drive), 0.0).matrix
        return float(np.linalg.eigvals(m).real.max())

    if not growth(0.0) < 0 < growth(hi):
        raise ValueError(f"bracketing failure: growth rate does not change sign on [0, {hi:.6g}]")
    return optimize.bisect(growth, 0.0, hi, xtol=1e-300, rtol=rtol, maxiter=400)


def goldstone_tangent(params: SystemParams) -> np.ndarray:
    """Generator of the phase family (a2 -> a2 e^{i phi}, b -> b e^{-i phi})."""
    _, a2, b = nonzero_state(params).amplitudes
    v = np.array([0, 0, 1j * a2, -1j * np.conj(a2), -1j * b, 1j * np.conj(b)], dtype=complex)
    return v / np.linalg.norm(v)


def goldstone_mode(params: SystemParams) -> tuple[complex, np.ndarray]:
    """Neutral eigenpair of the lasing linearization.

    Returns the eigenvalue and the unit eigenvector, phased so that its
    da2 component is real and positive.
    """
    p = validate_params(params)
    if p.drive <= threshold_amplitude(p):
        raise BelowThresholdError("below threshold: the Goldstone mode needs drive > threshold")
    lin = build_nonzero_jacobian(p)
    vals, vecs = np.linalg.eig(lin.matrix)
    near = np.abs(vals.real) < ZERO_MODE_TOL * lin.rate_scale
    if near.sum() > 1:
        raise DegenerateModeError(f"{int(near.sum())} eigenvalues inside the zero-mode tolerance")
    k = int(np.argmin(np.abs(vals.real)))
    v = vecs[:, k] / np.linalg.norm(vecs[:, k])
    if abs(v[2]) > 0:
        v = v * np.exp(-1j * np.angle(v[2]))
    return complex(vals[k]), v
