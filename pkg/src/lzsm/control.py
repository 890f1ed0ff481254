"""Choosing the initial phase (and adiabaticity) to reach a control objective.

Everything here inverts the single-passage occupation

    P_f = a^2 P + b^2 (1 - P) + 2 a b sqrt(P (1 - P)) cos(theta),   b = sqrt(1 - a^2),

where ``theta = theta_offset(delta, tau_i) + phi_i``.  Feasibility is always decided
from the primitive requirement ``|cos theta| <= 1``; the logarithmic bounds on the
adiabaticity are derived from it and only reported.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .aim import final_probability_adiabatic, final_probability_diabatic, theta_offset
from .core import Basis, DomainError, lz_probability, wrap_phase

# Slack on |cos theta| <= 1 that absorbs rounding at the window edges.
COS_SLACK = 1e-12
EPS = float(np.finfo(float).eps)


class Objective(enum.Enum):
    ZERO_INTERFERENCE = "zero-interference"
    CONSTRUCTIVE = "constructive"
    DESTRUCTIVE = "destructive"
    TARGET_PROBABILITY = "target"
    TRANSITIONLESS = "transitionless"
    DCL = "dcl"
    CCL = "ccl"


@dataclass(frozen=True)
class InterferenceWindow:
    """Range ``[p_min, p_max]`` of final occupations reachable by varying the phase."""

    p_min: float
    p_max: float

    def __post_init__(self):
        if not 0.0 <= self.p_min <= self.p_max <= 1.0:
            raise ValueError(f"invalid window [{self.p_min}, {self.p_max}]")

    @property
    def width(self) -> float:
        return self.p_max - self.p_min

    def contains(self, p: float, tol: float = 0.0) -> bool:
        return self.p_min - tol <= p <= self.p_max + tol

    def margin(self, p: float) -> float:
        """Distance of ``p`` from the nearest edge; negative outside the window."""
        return min(p - self.p_min, self.p_max - p)

    def to_dict(self) -> dict:
        return {"p_min": self.p_min, "p_max": self.p_max, "width": self.width}


@dataclass(frozen=True)
class PhaseSolution:
    """Result of a phase solve.

    ``phi_i`` is the principal-value phase (``None`` when infeasible);
    ``branches`` holds every solution in (-pi, pi], the first being ``phi_i``.
    ``constraint`` is a bound on (or the exact value of) the adiabaticity and
    ``constraint_kind`` says which.  Any multiple of ``period`` may be added to a phase.
    """

    objective: Objective
    feasible: bool
    phi_i: float | None = None
    branches: tuple = ()
    cos_theta: float | None = None
    predicted: float | None = None
    delta: float | None = None
    constraint: float | None = None
    constraint_kind: str | None = None
    window: InterferenceWindow | None = None
    basis: Basis = Basis.DIABATIC
    period: float = 2.0 * math.pi
    notes: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "objective": self.objective.value,
            "feasible": self.feasible,
            "phi_i": self.phi_i,
            "branches": list(self.branches),
            "cos_theta": self.cos_theta,
            "predicted_probability": self.predicted,
            "delta": self.delta,
            "constraint": self.constraint,
            "constraint_kind": self.constraint_kind,
            "window": None if self.window is None else self.window.to_dict(),
            "basis": self.basis.value,
            "period": self.period,
        }


def _check_unit(name, value, open_=False):
    if not (0.0 <= value <= 1.0) or (open_ and value in (0.0, 1.0)):
        interval = "(0, 1)" if open_ else "[0, 1]"
        raise DomainError(f"{name} must lie in {interval}, got {value}")


def _check_delta(delta):
    if not delta >= 0:
        raise DomainError(f"delta must be non-negative, got {delta}")


def _coefficients(alpha_i: float, delta: float):
    """``(base, amplitude)`` with ``P_f = base + amplitude * cos(theta)``."""
    p = float(lz_probability(delta))
    a2 = alpha_i * alpha_i
    base = a2 * p + (1.0 - a2) * (1.0 - p)
    amp = 2.0 * alpha_i * math.sqrt(1.0 - a2) * math.sqrt(p * (1.0 - p))
    return base, amp


def _predict(alpha_i, phi, delta, tau_i, zeta_mode):
    return None if alpha_i is None else float(final_probability_diabatic(alpha_i, phi, delta, tau_i, zeta_mode))


def phi_zero_interference(delta: float, tau_i: float, alpha_i: float | None = None,
                          zeta_mode: str = "exact") -> PhaseSolution:
    """Phase for which ``cos theta = 0``, i.e. the interference term vanishes."""
    _check_delta(delta)
    phi = wrap_phase(math.pi / 2.0 - float(theta_offset(delta, tau_i, zeta_mode)))
    return PhaseSolution(Objective.ZERO_INTERFERENCE, True, phi, (phi,), 0.0,
                         _predict(alpha_i, phi, delta, tau_i, zeta_mode), delta)


def phi_constructive(delta: float, tau_i: float, alpha_i: float | None = None,
                     zeta_mode: str = "exact") -> PhaseSolution:
    """``phi_i0 - pi/2``: the interference term is maximal (``cos theta = 1``)."""
    phi0 = phi_zero_interference(delta, tau_i, zeta_mode=zeta_mode).phi_i
    phi = wrap_phase(phi0 - math.pi / 2.0)
    return PhaseSolution(Objective.CONSTRUCTIVE, True, phi, (phi,), 1.0,
                         _predict(alpha_i, phi, delta, tau_i, zeta_mode), delta)


def phi_destructive(delta: float, tau_i: float, alpha_i: float | None = None,
                    zeta_mode: str = "exact") -> PhaseSolution:
    """``phi_i0 + pi/2``: the interference term is minimal (``cos theta = -1``)."""
    phi0 = phi_zero_interference(delta, tau_i, zeta_mode=zeta_mode).phi_i
    phi = wrap_phase(phi0 + math.pi / 2.0)
    return PhaseSolution(Objective.DESTRUCTIVE, True, phi, (phi,), -1.0,
                         _predict(alpha_i, phi, delta, tau_i, zeta_mode), delta)


def interference_window(alpha_i: float, delta: float) -> InterferenceWindow:
    """Extremes ``(alpha sqrt(P) +- sqrt(1 - alpha^2) sqrt(1 - P))^2`` of the final occupation."""
    _check_unit("alpha_i", alpha_i)
    _check_delta(delta)
    p = float(lz_probability(delta))
    x = alpha_i * math.sqrt(p)
    y = math.sqrt(1.0 - alpha_i * alpha_i) * math.sqrt(1.0 - p)
    return InterferenceWindow(min(1.0, (x - y) ** 2), min(1.0, (x + y) ** 2))


def width_max_over_alpha(delta: float) -> float:
    """Largest window width over ``alpha_i``, reached at ``alpha_i = 1/sqrt(2)``."""
    _check_delta(delta)
    p = float(lz_probability(delta))
    return 2.0 * math.sqrt(p) * math.sqrt(1.0 - p)


def _solve_cos(objective, cos_theta, offset, alpha_i, delta, tau_i, zeta_mode, **extra):
    """Phases realizing ``cos theta = cos_theta``, or an infeasible record."""
    window = extra.pop("window", None)
    if abs(cos_theta) > 1.0 + COS_SLACK or not math.isfinite(cos_theta):
        return PhaseSolution(objective, False, cos_theta=cos_theta, delta=delta, window=window, **extra)
    arc = math.acos(max(-1.0, min(1.0, cos_theta)))
    plus = wrap_phase(arc - offset)
    minus = wrap_phase(-arc - offset)
    branches = (plus,) if abs(wrap_phase(plus - minus)) < 1e-15 else (plus, minus)
    return PhaseSolution(objective, True, plus, branches, cos_theta,
                         _predict(alpha_i, plus, delta, tau_i, zeta_mode), delta, window=window, **extra)


def solve_phase_for_target(alpha_i: float, delta: float, tau_i: float, p_target: float,
                           zeta_mode: str = "exact") -> PhaseSolution:
    """Initial phase giving final occupation ``p_target`` after one passage.

    Feasible iff ``p_target`` lies in :func:`interference_window`.  When the
    interference amplitude vanishes (``alpha_i`` in {0, 1} or ``delta`` = 0)
    every phase gives the same result and ``phi_i`` is the constructive phase.
    """
    _check_unit("alpha_i", alpha_i)
    _check_unit("p_target", p_target)
    _check_delta(delta)
    window = interference_window(alpha_i, delta)
    offset = float(theta_offset(delta, tau_i, zeta_mode))
    base, amp = _coefficients(alpha_i, delta)
    if amp == 0.0:
        if abs(p_target - base) > 1e-12:
            return PhaseSolution(Objective.TARGET_PROBABILITY, False, delta=delta, window=window)
        phi = wrap_phase(-offset)
        return PhaseSolution(Objective.TARGET_PROBABILITY, True, phi, (phi,), None,
                             _predict(alpha_i, phi, delta, tau_i, zeta_mode), delta, window=window)
    return _solve_cos(Objective.TARGET_PROBABILITY, (p_target - base) / amp, offset,
                      alpha_i, delta, tau_i, zeta_mode, window=window)


def _balance(alpha_i: float) -> float:
    """``|2 alpha^2 - 1|`` with rounding noise at ``alpha = 1/sqrt(2)`` snapped to zero."""
    x = abs(2.0 * alpha_i * alpha_i - 1.0)
    return 0.0 if x <= 4.0 * EPS else x


def delta_feasibility_bound(alpha_i: float) -> float:
    """Largest adiabaticity for which the occupation can return to ``alpha_i^2``.

    From ``|cos theta| <= 1`` one gets ``exp(-2 pi delta) >= (2 alpha^2 - 1)^2``,
    i.e. ``delta <= -ln|2 alpha^2 - 1| / pi``.
    """
    _check_unit("alpha_i", alpha_i)
    x = _balance(alpha_i)
    if x == 0.0:
        return math.inf
    return max(0.0, -math.log(x) / math.pi)


def transitionless_cos_theta(alpha_i: float, delta: float) -> float:
    """``cos theta`` required for ``P_f = alpha_i^2``; ``inf`` when no phase can work."""
    p = float(lz_probability(delta))
    a2 = alpha_i * alpha_i
    num = math.copysign(_balance(alpha_i), a2 - 0.5) * math.sqrt(1.0 - p)
    den = 2.0 * alpha_i * math.sqrt(1.0 - a2) * math.sqrt(p)
    if den == 0.0:
        return 0.0 if num == 0.0 else math.copysign(math.inf, num)
    return num / den


def transitionless_phase(alpha_i: float, delta: float, tau_i: float, zeta_mode: str = "exact") -> PhaseSolution:
    """Initial phase for which one passage leaves the occupation unchanged."""
    _check_unit("alpha_i", alpha_i)
    _check_delta(delta)
    bound = delta_feasibility_bound(alpha_i)
    offset = float(theta_offset(delta, tau_i, zeta_mode))
    c = transitionless_cos_theta(alpha_i, delta)
    extra = {"constraint": bound, "constraint_kind": "delta_max",
             "window": interference_window(alpha_i, delta)}
    if _coefficients(alpha_i, delta)[1] == 0.0 and math.isfinite(c):
        # delta = 0: every phase is transitionless.
        phi = wrap_phase(math.pi / 2.0 - offset)
        return PhaseSolution(Objective.TRANSITIONLESS, True, phi, (phi,), c,
                             _predict(alpha_i, phi, delta, tau_i, zeta_mode), delta, **extra)
    return _solve_cos(Objective.TRANSITIONLESS, c, offset, alpha_i, delta, tau_i, zeta_mode, **extra)


def delta_complete_localization(alpha_i: float, kind) -> float:
    """Adiabaticity at which the window reaches 0 (destructive) or 1 (constructive).

    Destructive: ``-ln(1 - alpha^2) / (2 pi)``; constructive: ``-ln(alpha) / pi``.
    """
    kind = _cl_kind(kind)
    if not 0.0 < alpha_i < 1.0:
        raise DomainError(f"complete localization needs 0 < alpha_i < 1 (delta would be 0 or infinite), got {alpha_i}")
    if kind is Objective.DCL:
        return -math.log1p(-alpha_i * alpha_i) / (2.0 * math.pi)
    return -math.log(alpha_i) / math.pi


def _cl_kind(kind) -> Objective:
    if isinstance(kind, Objective):
        if kind in (Objective.DCL, Objective.DESTRUCTIVE):
            return Objective.DCL
        if kind in (Objective.CCL, Objective.CONSTRUCTIVE):
            return Objective.CCL
    elif isinstance(kind, str):
        k = kind.lower()
        if k in ("dcl", "destructive"):
            return Objective.DCL
        if k in ("ccl", "constructive"):
            return Objective.CCL
    raise ValueError(f"kind must be destructive or constructive, got {kind!r}")


def complete_localization(alpha_i: float, kind, tau_i: float, zeta_mode: str = "exact") -> PhaseSolution:
    """Adiabaticity and phase driving the final occupation to exactly 0 or 1."""
    kind = _cl_kind(kind)
    delta = delta_complete_localization(alpha_i, kind)
    solver = phi_destructive if kind is Objective.DCL else phi_constructive
    sol = solver(delta, tau_i, alpha_i, zeta_mode)
    return PhaseSolution(kind, True, sol.phi_i, sol.branches, sol.cos_theta, sol.predicted, delta,
                         delta, "delta_exact", interference_window(alpha_i, delta))


def delta_feasibility_bound_adiabatic(b1_i: float) -> float:
    """Smallest adiabaticity for which the upper-level occupation can return to ``b1_i^2``.

    The requirement ``P <= 4 b^2 (1 - b^2)`` gives ``delta >= -ln(4 b^2 (1 - b^2)) / (2 pi)``.
    """
    _check_unit("b1_i", b1_i, open_=True)
    q = 4.0 * b1_i * b1_i * (1.0 - b1_i * b1_i)
    return max(0.0, -math.log(q) / (2.0 * math.pi))


def transitionless_phase_adiabatic(b1_i: float, delta: float, tau_a: float = 20.0,
                                   zeta_mode: str = "exact") -> PhaseSolution:
    """Adiabatic-basis analogue of :func:`transitionless_phase` for a symmetric passage.

    Requires ``cos theta = -(2 b^2 - 1) sqrt(P) / (2 b sqrt(1 - b^2) sqrt(1 - P))``,
    which is attainable only for large enough ``delta``.
    """
    _check_unit("b1_i", b1_i, open_=True)
    _check_delta(delta)
    p = float(lz_probability(delta))
    b2 = b1_i * b1_i
    num = -(2.0 * b2 - 1.0) * math.sqrt(p)
    den = 2.0 * b1_i * math.sqrt(1.0 - b2) * math.sqrt(1.0 - p)
    c = (0.0 if num == 0.0 else math.copysign(math.inf, num)) if den == 0.0 else num / den
    offset = float(theta_offset(delta, tau_a, zeta_mode))
    extra = {"constraint": delta_feasibility_bound_adiabatic(b1_i), "constraint_kind": "delta_min",
             "basis": Basis.ADIABATIC}
    sol = _solve_cos(Objective.TRANSITIONLESS, c, offset, None, delta, -tau_a, zeta_mode, **extra)
    if sol.feasible:
        pred = float(final_probability_adiabatic(b1_i, sol.phi_i, delta, tau_a, zeta_mode))
        sol = PhaseSolution(**{**sol.__dict__, "predicted": pred})
    return sol


def phase_grid_extrema(alpha_i, delta, tau_i, n_phi: int = 720, n_refine: int = 721) -> tuple[np.ndarray, np.ndarray]:
    """Numerical min and max of the final occupation over the initial phase.

    The extremum is located on an ``n_phi``-point grid and then refined on a
    finer grid spanning the neighbouring cells.  ``alpha_i`` and ``delta`` may
    be arrays of equal shape.
    """
    alpha = np.asarray(alpha_i, dtype=float)[..., None]
    delta = np.asarray(delta, dtype=float)[..., None]
    h = 2.0 * np.pi / n_phi
    phis = -np.pi + h * np.arange(n_phi)
    coarse = final_probability_diabatic(alpha, phis, delta, tau_i)
    local = np.linspace(-h, h, n_refine)
    out = []
    for pick, reduce in ((np.argmin, np.min), (np.argmax, np.max)):
        centre = phis[pick(coarse, axis=-1)][..., None]
        fine = final_probability_diabatic(alpha, centre + local, delta, tau_i)
        out.append(reduce(fine, axis=-1))
    return out[0], out[1]
