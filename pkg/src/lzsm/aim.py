"""Adiabatic-impulse model of a single linear passage through the anticrossing.

The passage from ``tau_i < 0`` to ``tau_f > 0`` is approximated by adiabatic phase
accumulation, an instantaneous transition at ``tau = 0`` and adiabatic phase
accumulation again.  All matrices act on column spinors ``(a0, a1)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .core import (
    Basis,
    BasisMismatchError,
    DomainError,
    Spinor,
    SystemParams,
    arg_gamma_one_minus_i_delta,
    lz_probability,
    stokes_phase,
)

UNITARY_TOL = 1e-10
ASYMPTOTIC_GUARD = 5.0
ZETA_MODES = ("exact", "asymptotic")


class NonUnitaryError(ValueError):
    pass


class AsymptoticRegimeWarning(UserWarning):
    """|tau| is too small for the adiabatic-impulse picture to be accurate."""


@dataclass(frozen=True)
class TransferMatrix:
    """A 2x2 unitary acting on spinors written in ``basis``."""

    matrix: np.ndarray
    basis: Basis = Basis.DIABATIC

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.shape != (2, 2):
            raise ValueError(f"transfer matrix must be 2x2, got shape {m.shape}")
        dev = unitarity_defect(m)
        if dev > UNITARY_TOL:
            raise NonUnitaryError(f"matrix is not unitary (|M^dag M - I| = {dev:.3e})")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def __matmul__(self, other):
        if isinstance(other, TransferMatrix):
            if other.basis is not self.basis:
                raise BasisMismatchError("cannot compose matrices written in different bases")
            return TransferMatrix(self.matrix @ other.matrix, self.basis)
        if isinstance(other, Spinor):
            return propagate(other, self)
        return NotImplemented

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.matrix, dtype=dtype)

    def __getitem__(self, idx):
        return self.matrix[idx]

    @property
    def dagger(self) -> TransferMatrix:
        return TransferMatrix(self.matrix.conj().T, self.basis)

    @classmethod
    def identity(cls, basis: Basis = Basis.DIABATIC) -> TransferMatrix:
        return cls(np.eye(2, dtype=complex), basis)


def unitarity_defect(m) -> float:
    m = np.asarray(m)
    return float(np.max(np.abs(m.conj().T @ m - np.eye(2))))


@dataclass(frozen=True)
class PassageConfig:
    """One linear passage with adiabaticity ``adiabaticity`` from ``tau_i`` to ``tau_f``."""

    adiabaticity: float
    tau_i: float
    tau_f: float

    def __post_init__(self):
        if self.adiabaticity < 0:
            raise DomainError(f"adiabaticity must be non-negative, got {self.adiabaticity}")
        if not self.tau_i < 0 < self.tau_f:
            raise DomainError(f"need tau_i < 0 < tau_f, got tau_i={self.tau_i}, tau_f={self.tau_f}")
        _guard_asymptotic(self.tau_i, self.tau_f)

    @classmethod
    def from_params(cls, params: SystemParams, tau_i: float, tau_f: float) -> PassageConfig:
        return cls(params.adiabaticity, tau_i, tau_f)

    @classmethod
    def symmetric(cls, adiabaticity: float, tau_a: float) -> PassageConfig:
        return cls(adiabaticity, -abs(tau_a), abs(tau_a))


@dataclass(frozen=True)
class Theta:
    """Interference phase, kept as its separate contributions."""

    value: float
    components: dict = field(default_factory=dict)


def _guard_asymptotic(*taus):
    small = [t for t in taus if abs(t) < ASYMPTOTIC_GUARD]
    if small:
        warnings.warn(
            f"|tau| = {min(abs(t) for t in small):g} < {ASYMPTOTIC_GUARD:g}: "
            "adiabatic-impulse accuracy degrades close to the anticrossing",
            AsymptoticRegimeWarning,
            stacklevel=3,
        )


def _check_mode(zeta_mode):
    if zeta_mode not in ZETA_MODES:
        raise ValueError(f"zeta_mode must be one of {ZETA_MODES}, got {zeta_mode!r}")


def zeta_exact(tau, delta):
    """Adiabatic phase ``int_0^tau sqrt(2 delta + s^2) ds`` (odd in ``tau``)."""
    tau = np.asarray(tau, dtype=float)
    delta = np.asarray(delta, dtype=float)
    if np.any(delta < 0):
        raise DomainError(f"delta must be non-negative, got {delta}")
    a2 = 2.0 * delta
    root = np.sqrt(a2 + tau * tau)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_term = np.where(delta > 0, a2 * np.arcsinh(tau / np.sqrt(np.where(delta > 0, a2, 1.0))), 0.0)
    out = 0.5 * (tau * root + log_term)
    return float(out) if out.ndim == 0 else out


def zeta_asymptotic(tau_a, delta):
    """Large-``tau_a`` form ``tau^2/2 + delta/2 - (delta/2) ln delta + delta ln(sqrt2 tau)``.

    The neglected terms are O(delta^2 / tau_a^2).
    """
    tau_a = np.asarray(tau_a, dtype=float)
    delta = np.asarray(delta, dtype=float)
    if np.any(tau_a <= 0):
        raise DomainError(f"tau_a must be positive, got {tau_a}")
    if np.any(delta < 0):
        raise DomainError(f"delta must be non-negative, got {delta}")
    with np.errstate(divide="ignore", invalid="ignore"):
        dlogd = np.where(delta > 0, delta * np.log(np.where(delta > 0, delta, 1.0)), 0.0)
    out = 0.5 * tau_a ** 2 + 0.5 * delta - 0.5 * dlogd + delta * np.log(math.sqrt(2.0) * tau_a)
    return float(out) if out.ndim == 0 else out


def _zeta(tau_abs, delta, zeta_mode):
    _check_mode(zeta_mode)
    if zeta_mode == "exact":
        return zeta_exact(tau_abs, delta)
    return zeta_asymptotic(tau_abs, delta)


def lzsm_transfer_matrix(delta: float) -> TransferMatrix:
    """Transition matrix at the crossing; the off-diagonal carries ``exp(+-i phi_S)``."""
    if delta < 0:
        raise DomainError(f"delta must be non-negative, got {delta}")
    p = lz_probability(delta)
    sq_r = math.sqrt(p)
    sq_t = math.sqrt(1.0 - p) * np.exp(1j * stokes_phase(delta))
    return TransferMatrix(np.array([[sq_r, sq_t], [-np.conj(sq_t), sq_r]]))


def adiabatic_stage(zeta: float, before: bool) -> TransferMatrix:
    """Diagonal phase matrix for the stage before (``exp(-i zeta), exp(i zeta)``) or after the crossing."""
    s = -1.0 if before else 1.0
    return TransferMatrix(np.diag([np.exp(1j * s * zeta), np.exp(-1j * s * zeta)]))


def single_passage_matrix(config: PassageConfig, zeta_mode: str = "exact") -> TransferMatrix:
    """Full single-passage matrix ``U_ad(tau_f, 0) N U_ad(0, tau_i)``.

    ``zeta`` is evaluated at ``|tau_i|`` and ``tau_f``; the result only depends on
    ``tau_f`` through a diagonal phase, so occupations do not.
    """
    d = config.adiabaticity
    zi = _zeta(abs(config.tau_i), d, zeta_mode)
    zf = _zeta(config.tau_f, d, zeta_mode)
    p = lz_probability(d)
    phi_s = stokes_phase(d)
    n11 = np.exp(1j * (zf - zi)) * math.sqrt(p)
    n12 = np.exp(1j * (zf + zi + phi_s)) * math.sqrt(1.0 - p)
    return TransferMatrix(np.array([[n11, n12], [-np.conj(n12), np.conj(n11)]]))


def propagate(spinor: Spinor, matrix: TransferMatrix) -> Spinor:
    if spinor.basis is not matrix.basis:
        raise BasisMismatchError(
            f"{spinor.basis.value} spinor cannot be propagated by a {matrix.basis.value} matrix"
        )
    out = matrix.matrix @ spinor.vector
    # Rounding in long products can nudge the norm past the 1e-12 construction check.
    return Spinor.from_vector(out, spinor.basis, renormalize=True)


def theta(delta: float, tau_i: float, phi_i: float, zeta_mode: str = "exact") -> Theta:
    """Phase ``theta`` controlling the interference term of the final occupation.

    In ``"asymptotic"`` mode this is ``pi/4 + Arg Gamma(1 - i delta) + tau^2 +
    2 delta ln(sqrt2 tau) + phi_i`` with ``tau = |tau_i|``.  ``"exact"`` mode adds
    ``2 (zeta_exact - zeta_asymptotic)`` so that ``theta`` equals the relative
    phase built into :func:`single_passage_matrix`.
    """
    _check_mode(zeta_mode)
    tau = abs(tau_i)
    if tau == 0:
        raise DomainError("tau_i must be non-zero")
    if delta < 0:
        raise DomainError(f"delta must be non-negative, got {delta}")
    comps = {
        "quarter_pi": math.pi / 4.0,
        "arg_gamma": arg_gamma_one_minus_i_delta(delta),
        "tau_squared": tau * tau,
        "log": 2.0 * delta * math.log(math.sqrt(2.0) * tau) if delta > 0 else 0.0,
        "phi_i": float(phi_i),
        "zeta_correction": 0.0,
    }
    if zeta_mode == "exact":
        comps["zeta_correction"] = 2.0 * (zeta_exact(tau, delta) - zeta_asymptotic(tau, delta))
    return Theta(sum(comps.values()), comps)


def theta_offset(delta, tau_i, zeta_mode: str = "exact"):
    """``theta`` without the ``phi_i`` contribution; vectorized over ``delta`` and ``tau_i``."""
    _check_mode(zeta_mode)
    tau = np.abs(np.asarray(tau_i, dtype=float))
    if np.any(tau == 0):
        raise DomainError("tau_i must be non-zero")
    delta = np.asarray(delta, dtype=float)
    return 2.0 * _zeta(tau, delta, zeta_mode) + stokes_phase(delta)


def _check_amplitude(name, value):
    v = np.asarray(value)
    if np.any((v < 0) | (v > 1)) or np.any(np.isnan(v)):
        raise DomainError(f"{name} must lie in [0, 1], got {value}")


def final_probability_diabatic(alpha_i, phi_i, delta, tau_i, zeta_mode: str = "exact"):
    """Final occupation of ``|0>`` after one passage.

    The initial spinor is ``(alpha_i, sqrt(1 - alpha_i^2) exp(i phi_i))`` at ``tau_i``.
    Broadcasts over array arguments.
    """
    _check_amplitude("alpha_i", alpha_i)
    alpha = np.asarray(alpha_i, dtype=float)
    p = lz_probability(delta)
    beta = np.sqrt(1.0 - alpha ** 2)
    th = theta_offset(delta, tau_i, zeta_mode) + np.asarray(phi_i, dtype=float)
    out = alpha ** 2 * p + beta ** 2 * (1.0 - p) + 2.0 * alpha * beta * np.sqrt(p * (1.0 - p)) * np.cos(th)
    out = np.clip(out, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def adiabatic_transfer_matrix(delta: float, tau_a: float, zeta_mode: str = "exact") -> TransferMatrix:
    """Symmetric-passage matrix acting on adiabatic amplitudes ``(b1, b2)``.

    Obtained from the diabatic one by the far-from-crossing basis maps (identity
    before the crossing, ``[[0, -1], [1, 0]]`` after it).
    """
    if tau_a <= 0:
        raise DomainError(f"tau_a must be positive, got {tau_a}")
    p = lz_probability(delta)
    ph = 2.0 * _zeta(tau_a, delta, zeta_mode) + stokes_phase(delta)
    sq_t = math.sqrt(1.0 - p)
    sq_r = math.sqrt(p)
    return TransferMatrix(
        np.array([[sq_t * np.exp(-1j * ph), -sq_r], [sq_r, sq_t * np.exp(1j * ph)]]),
        Basis.ADIABATIC,
    )


FAR_BASIS_BEFORE = np.eye(2)
FAR_BASIS_AFTER = np.array([[0.0, -1.0], [1.0, 0.0]])


def final_probability_adiabatic(b1_i, phi_i, delta, tau_a, zeta_mode: str = "exact"):
    """Final upper-level occupation for the adiabatic spinor ``(b1_i, sqrt(1 - b1_i^2) exp(i phi_i))``.

    The interference term enters with a minus sign relative to the diabatic
    formula; this is what :func:`adiabatic_transfer_matrix` implies.
    """
    _check_amplitude("b1_i", b1_i)
    b1 = np.asarray(b1_i, dtype=float)
    b2 = np.sqrt(1.0 - b1 ** 2)
    p = lz_probability(delta)
    th = theta_offset(delta, tau_a, zeta_mode) + np.asarray(phi_i, dtype=float)
    out = (1.0 - p) * b1 ** 2 + p * b2 ** 2 - 2.0 * np.sqrt(p * (1.0 - p)) * b1 * b2 * np.cos(th)
    out = np.clip(out, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def generalized_composition(n_generic, zeta1: float, zeta2: float, spinor: Spinor):
    """Three-stage evolution through an arbitrary transition matrix.

    Returns the final spinor ``U_ad(zeta2) N U_ad(zeta1) psi`` and the closed-form
    occupation of ``|0>``::

        |N11|^2 a^2 + |N12|^2 (1 - a^2) + 2 a sqrt(1 - a^2) |N11||N12| cos(2 zeta1 + phi_i + arg N12 - arg N11)

    where ``a = |a0|`` and ``phi_i = arg a1 - arg a0``.
    """
    if not isinstance(n_generic, TransferMatrix):
        n_generic = TransferMatrix(np.asarray(n_generic, dtype=complex))
    if spinor.basis is not Basis.DIABATIC or n_generic.basis is not Basis.DIABATIC:
        raise BasisMismatchError("generalized composition acts on diabatic spinors")
    total = adiabatic_stage(zeta2, before=False) @ n_generic @ adiabatic_stage(zeta1, before=True)
    out = propagate(spinor, total)

    n11, n12 = n_generic.matrix[0, 0], n_generic.matrix[0, 1]
    a = abs(spinor.a0)
    b = math.sqrt(max(0.0, 1.0 - a * a))
    phi_i = np.angle(spinor.a1) - np.angle(spinor.a0)
    prob = (
        abs(n11) ** 2 * a * a
        + abs(n12) ** 2 * b * b
        + 2.0 * a * b * abs(n11) * abs(n12) * math.cos(2.0 * zeta1 + phi_i + np.angle(n12) - np.angle(n11))
    )
    return out, float(prob)
