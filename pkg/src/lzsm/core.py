"""Basic types and elementary quantities for a linearly driven qubit.

Conventions used throughout the package:

* hbar = 1, so energies and angular frequencies share units.
* The Hamiltonian in the diabatic basis is ``H = -(Delta sigma_x + eps sigma_z) / 2``.
* Dimensionless time is ``tau = sqrt(v / 2) t``.
* Diabatic amplitudes are ``(a0, a1)`` for ``|0>, |1>``; adiabatic amplitudes are
  ``(b1, b2)`` for the upper and lower instantaneous eigenstates.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import zeta as hurwitz_zeta

NORM_TOL = 1e-12
EULER_GAMMA = 0.57721566490153286060651209008240243


class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class DegeneratePointError(DomainError):
    """Raised at Delta = eps = 0, where the adiabatic basis is undefined."""


class BasisMismatchError(ValueError):
    """Objects tagged with different bases were combined."""


class Basis(enum.Enum):
    DIABATIC = "diabatic"
    ADIABATIC = "adiabatic"


@dataclass(frozen=True)
class Spinor:
    """Normalized two-component state tagged with the basis it is written in."""

    a0: complex
    a1: complex
    basis: Basis = Basis.DIABATIC

    def __post_init__(self):
        object.__setattr__(self, "a0", complex(self.a0))
        object.__setattr__(self, "a1", complex(self.a1))
        if not isinstance(self.basis, Basis):
            raise TypeError(f"basis must be a Basis, got {self.basis!r}")
        norm = abs(self.a0) ** 2 + abs(self.a1) ** 2
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"spinor is not normalized: |a0|^2 + |a1|^2 = {norm!r}")

    @classmethod
    def from_vector(cls, vec, basis: Basis = Basis.DIABATIC, renormalize: bool = False) -> Spinor:
        vec = np.asarray(vec, dtype=complex).reshape(2)
        if renormalize:
            vec = vec / np.linalg.norm(vec)
        return cls(vec[0], vec[1], basis)

    @classmethod
    def from_population(cls, p0: float, phase: float = 0.0, basis: Basis = Basis.DIABATIC) -> Spinor:
        """Real first component ``sqrt(p0)``, second ``sqrt(1 - p0) exp(i phase)``."""
        if not 0.0 <= p0 <= 1.0:
            raise DomainError(f"population must lie in [0, 1], got {p0}")
        return cls(math.sqrt(p0), math.sqrt(1.0 - p0) * np.exp(1j * phase), basis)

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.a0, self.a1], dtype=complex)

    @property
    def populations(self) -> tuple[float, float]:
        return abs(self.a0) ** 2, abs(self.a1) ** 2

    @property
    def relative_phase(self) -> float:
        """``arg(a1) - arg(a0)`` reduced to (-pi, pi]."""
        return wrap_phase(np.angle(self.a1) - np.angle(self.a0))

    def overlap(self, other: Spinor) -> complex:
        """Inner product ``<self|other>``; both spinors must share a basis."""
        if other.basis is not self.basis:
            raise BasisMismatchError(f"cannot combine {self.basis.value} and {other.basis.value} spinors")
        return complex(np.vdot(self.vector, other.vector))


@dataclass(frozen=True)
class SystemParams:
    """Gap ``delta_gap`` and sweep velocity ``velocity`` (eps = velocity * t)."""

    delta_gap: float
    velocity: float

    def __post_init__(self):
        if not self.velocity > 0:
            raise DomainError(f"velocity must be positive, got {self.velocity}")
        if self.delta_gap < 0:
            raise DomainError(f"delta_gap must be non-negative, got {self.delta_gap}")

    @classmethod
    def from_adiabaticity(cls, adiabaticity: float, velocity: float = 1.0) -> SystemParams:
        if adiabaticity < 0:
            raise DomainError(f"adiabaticity must be non-negative, got {adiabaticity}")
        return cls(2.0 * math.sqrt(velocity * adiabaticity), velocity)

    @property
    def adiabaticity(self) -> float:
        return adiabaticity(self.delta_gap, self.velocity)

    def tau_to_time(self, tau):
        return tau_to_time(tau, self.velocity)

    def time_to_tau(self, t):
        return time_to_tau(t, self.velocity)


def tau_to_time(tau, velocity: float):
    """Physical time for dimensionless ``tau``: ``t = tau sqrt(2 / v)``."""
    if not velocity > 0:
        raise DomainError(f"velocity must be positive, got {velocity}")
    return tau * math.sqrt(2.0 / velocity)


def time_to_tau(t, velocity: float):
    if not velocity > 0:
        raise DomainError(f"velocity must be positive, got {velocity}")
    return t * math.sqrt(velocity / 2.0)


@dataclass(frozen=True)
class DimensionlessTime:
    tau: float

    def to_time(self, velocity: float) -> float:
        return tau_to_time(self.tau, velocity)

    @classmethod
    def from_time(cls, t: float, velocity: float) -> DimensionlessTime:
        return cls(time_to_tau(t, velocity))


@dataclass(frozen=True)
class BlochVector:
    x: float
    y: float
    z: float

    @property
    def norm(self) -> float:
        return math.sqrt(self.x ** 2 + self.y ** 2 + self.z ** 2)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])


def wrap_phase(phi):
    """Reduce angles to the principal interval (-pi, pi]."""
    out = np.pi - np.mod(np.pi - np.asarray(phi, dtype=float), 2.0 * np.pi)
    return float(out) if np.ndim(out) == 0 else out


def adiabaticity(delta_gap, velocity):
    """Adiabaticity ``Delta^2 / (4 v)``."""
    if np.any(np.asarray(velocity) <= 0):
        raise DomainError(f"velocity must be positive, got {velocity}")
    return np.multiply(delta_gap, delta_gap) / (4.0 * np.asarray(velocity, dtype=float))[()]


def _check_nonnegative(name, value):
    if np.any(np.asarray(value) < 0):
        raise DomainError(f"{name} must be non-negative, got {value}")


def lz_probability(delta):
    """Probability ``exp(-2 pi delta)`` of staying in the initial diabatic state."""
    _check_nonnegative("delta", delta)
    return np.exp(-2.0 * np.pi * delta)


# Stirling coefficients B_2k / (2k (2k - 1)) for k = 1..8.
_STIRLING = (
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360360.0,
    1.0 / 156.0,
    -3617.0 / 122400.0,
)
_STIRLING_SHIFT = 16.0


def complex_log_gamma(z):
    """Principal-branch ``log Gamma(z)`` for ``Re z > 0``.

    Shifts the argument upward until ``|z| >= 16`` and applies the Stirling
    series there; the branch is the one continuous from the positive real axis.
    """
    z = np.asarray(z, dtype=complex)
    if np.any(z.real <= 0):
        raise DomainError("complex_log_gamma is only implemented for Re z > 0")
    shift = np.zeros(z.shape, dtype=complex)
    w = z.copy()
    while True:
        small = np.abs(w) < _STIRLING_SHIFT
        if not np.any(small):
            break
        shift = np.where(small, shift + np.log(w), shift)
        w = np.where(small, w + 1.0, w)
    inv = 1.0 / w
    inv2 = inv * inv
    series = np.zeros(z.shape, dtype=complex)
    power = inv
    for c in _STIRLING:
        series = series + c * power
        power = power * inv2
    out = (w - 0.5) * np.log(w) - w + 0.5 * math.log(2.0 * math.pi) + series - shift
    return complex(out) if out.ndim == 0 else out


def arg_gamma_one_minus_i_delta(delta):
    """Continuous-branch ``Arg Gamma(1 - i delta)``; zero at ``delta = 0``."""
    _check_nonnegative("delta", delta)
    val = np.imag(complex_log_gamma(1.0 - 1j * np.asarray(delta, dtype=float)))
    return float(val) if np.ndim(val) == 0 else val


def arg_gamma_series(delta, n_terms: int = 4000) -> float:
    """Independent evaluation of ``Arg Gamma(1 - i delta)`` from the product formula.

    ``Arg Gamma(1 + i d) = -gamma d + sum_k (d / k - arctan(d / k))``; the first
    ``n_terms`` terms are summed directly and the tail through the expansion of
    ``x - arctan x`` in odd powers with Hurwitz zeta sums.
    """
    d = float(delta)
    if d < 0:
        raise DomainError(f"delta must be non-negative, got {delta}")
    n = max(n_terms, int(math.ceil(20.0 * d)))
    k = np.arange(1, n + 1, dtype=float)
    head = np.sum(d / k - np.arctan(d / k))
    # x - arctan x = sum_{m>=1} (-1)^(m+1) x^(2m+1) / (2m+1), with x = d / k <= 1/20.
    tail = 0.0
    for m in range(1, 12):
        p = 2 * m + 1
        tail += (-1) ** (m + 1) * d ** p / p * float(hurwitz_zeta(p, n + 1))
    return -(-EULER_GAMMA * d + head + tail)


def stokes_phase(delta):
    """Stokes phase ``pi/4 + Arg Gamma(1 - i delta) + delta (ln delta - 1)``.

    ``delta ln delta`` is taken as 0 at ``delta = 0``, giving ``pi/4``.
    """
    _check_nonnegative("delta", delta)
    d = np.asarray(delta, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        dlog = np.where(d > 0, d * (np.log(np.where(d > 0, d, 1.0)) - 1.0), 0.0)
    val = np.pi / 4.0 + arg_gamma_one_minus_i_delta(d) + dlog
    return float(val) if np.ndim(val) == 0 else val


def gamma_pm(epsilon: float, delta_gap: float) -> tuple[float, float]:
    """Mixing coefficients ``gamma_+-`` with ``gamma_+-^2 = (1 +- eps / sqrt(Delta^2 + eps^2)) / 2``."""
    if epsilon == 0 and delta_gap == 0:
        raise DegeneratePointError("adiabatic basis undefined at Delta = eps = 0")
    r = math.hypot(delta_gap, epsilon)
    # The small coefficient is formed without cancellation.
    small = delta_gap ** 2 / (2.0 * r * (r + abs(epsilon)))
    large = 1.0 - small
    if epsilon >= 0:
        return math.sqrt(large), math.sqrt(small)
    return math.sqrt(small), math.sqrt(large)


def basis_matrix(epsilon: float, delta_gap: float) -> np.ndarray:
    """Real orthogonal map from diabatic to adiabatic amplitudes at bias ``epsilon``."""
    gp, gm = gamma_pm(epsilon, delta_gap)
    return np.array([[gm, -gp], [gp, gm]])


def basis_transform(spinor: Spinor, epsilon: float, delta_gap: float, direction: Basis) -> Spinor:
    """Rewrite ``spinor`` in the basis ``direction`` at bias ``epsilon``."""
    source = Basis.ADIABATIC if direction is Basis.DIABATIC else Basis.DIABATIC
    if spinor.basis is not source:
        raise BasisMismatchError(
            f"cannot transform a {spinor.basis.value} spinor to the {direction.value} basis"
        )
    m = basis_matrix(epsilon, delta_gap)
    if direction is Basis.DIABATIC:
        m = m.T
    return Spinor.from_vector(m @ spinor.vector, direction, renormalize=True)


def bloch(spinor: Spinor) -> BlochVector:
    a0, a1 = spinor.a0, spinor.a1
    c = a0.conjugate() * a1
    return BlochVector(2.0 * c.real, 2.0 * c.imag, abs(a0) ** 2 - abs(a1) ** 2)


def bloch_components(states: np.ndarray) -> np.ndarray:
    """Bloch vectors for an array of spinors of shape (n, 2); returns (n, 3)."""
    a0 = states[:, 0]
    a1 = states[:, 1]
    c = np.conj(a0) * a1
    return np.column_stack([2.0 * c.real, 2.0 * c.imag, np.abs(a0) ** 2 - np.abs(a1) ** 2])
