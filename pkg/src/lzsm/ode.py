"""Brute-force integration of the time-dependent Schrodinger equation.

This is the reference the closed-form results are checked against, so it shares
nothing with :mod:`lzsm.aim` beyond the Hamiltonian.  Drives are piecewise:
linear sweeps ``eps = v t`` on a sweep-local clock (crossing at ``t = 0``) and
constant-bias waits.  Bias steps between segments are instantaneous.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from . import _rk
from .aim import final_probability_diabatic, theta_offset
from .core import (
    Basis,
    BasisMismatchError,
    BlochVector,
    DomainError,
    Spinor,
    bloch_components,
    gamma_pm,
)

log = logging.getLogger(__name__)

TRAJECTORY_SCHEMA = 1


class IntegrationError(RuntimeError):
    """The integrator could not meet its tolerances within the step budget."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


@dataclass(frozen=True)
class LinearSweep:
    """``eps(t) = velocity * t`` for sweep-local ``t`` in ``[t_start, t_end]``."""

    velocity: float
    t_start: float
    t_end: float
    annotation: str = ""

    def __post_init__(self):
        if self.velocity == 0:
            raise DomainError("sweep velocity must be non-zero")
        if not self.t_end > self.t_start:
            raise DomainError(f"need t_end > t_start, got [{self.t_start}, {self.t_end}]")

    @classmethod
    def from_tau(cls, velocity: float, tau_start: float, tau_end: float, annotation: str = "") -> LinearSweep:
        s = math.sqrt(2.0 / abs(velocity))
        return cls(velocity, tau_start * s, tau_end * s, annotation)

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start

    def bias(self, t_local):
        return self.velocity * np.asarray(t_local)

    def kernel_args(self):
        return 0.0, float(self.velocity), float(self.t_start), float(self.t_end)

    def reversed(self) -> LinearSweep:
        return LinearSweep(-self.velocity, -self.t_end, -self.t_start, self.annotation)

    @property
    def tau_start(self) -> float:
        return self.t_start * math.sqrt(abs(self.velocity) / 2.0)

    @property
    def tau_end(self) -> float:
        return self.t_end * math.sqrt(abs(self.velocity) / 2.0)


@dataclass(frozen=True)
class ConstantWait:
    """``eps(t) = epsilon0`` for ``duration``."""

    epsilon0: float
    duration: float
    annotation: str = ""

    def __post_init__(self):
        if self.duration < 0:
            raise DomainError(f"wait duration must be non-negative, got {self.duration}")

    def bias(self, t_local):
        return np.full(np.shape(t_local), float(self.epsilon0))

    def kernel_args(self):
        return float(self.epsilon0), 0.0, 0.0, float(self.duration)

    def reversed(self) -> ConstantWait:
        return self


DriveSegment = Union[LinearSweep, ConstantWait]


def reversed_drive(drive: Sequence[DriveSegment]) -> list[DriveSegment]:
    """The drive played backwards in time."""
    return [seg.reversed() for seg in reversed(list(drive))]


@dataclass(frozen=True)
class IntegratorConfig:
    """Tolerances for the adaptive integrator.

    ``fixed_step`` switches to classical RK4 with that step size, which is
    bit-reproducible and used for golden files.  ``sample_stride`` keeps every
    n-th accepted step in the trajectory (0 keeps segment endpoints only).
    """

    rtol: float = 1e-13
    atol: float = 1e-15
    max_step: float = math.inf
    sample_stride: int = 0
    max_steps: int = 20_000_000
    fixed_step: float | None = None

    def __post_init__(self):
        if not (self.rtol > 0 and self.atol > 0):
            raise DomainError("tolerances must be positive")
        if self.max_step <= 0:
            raise DomainError("max_step must be positive")
        if self.fixed_step is not None and self.fixed_step <= 0:
            raise DomainError("fixed_step must be positive")

    def halved(self) -> IntegratorConfig:
        return IntegratorConfig(self.rtol / 2, self.atol / 2, self.max_step, self.sample_stride,
                                self.max_steps, None if self.fixed_step is None else self.fixed_step / 2)


@dataclass
class Trajectory:
    """Samples of the evolution on a global clock.

    ``t`` starts at the first segment's local start time, so a single sweep
    keeps its own clock; ``tau = t sqrt(|v_ref| / 2)`` with the first sweep's
    velocity as reference (1 if there is none).
    """

    t: np.ndarray
    states: np.ndarray
    epsilon: np.ndarray
    segment: np.ndarray
    velocity_ref: float = 1.0
    norm_drift: float = 0.0
    n_steps: int = 0

    @property
    def tau(self) -> np.ndarray:
        return self.t * math.sqrt(abs(self.velocity_ref) / 2.0)

    @property
    def populations(self) -> np.ndarray:
        return np.abs(self.states) ** 2

    @property
    def bloch(self) -> np.ndarray:
        return bloch_components(self.states)

    def __len__(self):
        return len(self.t)

    def samples(self):
        """Yield ``(t, Spinor, BlochVector, epsilon)`` tuples."""
        for t, s, b, e in zip(self.t, self.states, self.bloch, self.epsilon):
            yield float(t), Spinor.from_vector(s, renormalize=True), BlochVector(*map(float, b)), float(e)

    def table(self) -> dict[str, np.ndarray]:
        pops = self.populations
        b = self.bloch
        return {
            "t": self.t,
            "tau": self.tau,
            "re_a0": self.states[:, 0].real,
            "im_a0": self.states[:, 0].imag,
            "re_a1": self.states[:, 1].real,
            "im_a1": self.states[:, 1].imag,
            "P0": pops[:, 0],
            "P1": pops[:, 1],
            "x": b[:, 0],
            "y": b[:, 1],
            "z": b[:, 2],
            "epsilon": self.epsilon,
        }

    def to_csv(self, path, extra_columns: dict[str, np.ndarray] | None = None) -> None:
        write_csv(path, self.table() | (extra_columns or {}), "lzsm-trajectory")

    def to_json(self, path) -> None:
        doc = {"schema": "lzsm-trajectory", "schema_version": TRAJECTORY_SCHEMA,
               "velocity_ref": self.velocity_ref, "norm_drift": self.norm_drift,
               "columns": {k: [float(x) for x in v] for k, v in self.table().items()}}
        atomic_write_text(path, json.dumps(doc, indent=1))


def fmt(x) -> str:
    return format(float(x), ".17g")


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".partial")
    try:
        tmp.write_text(text, encoding="utf-8")
        tmp.replace(path)
    finally:
        tmp.unlink(missing_ok=True)


def write_csv(path, columns: dict[str, np.ndarray], schema: str, version: int = TRAJECTORY_SCHEMA) -> None:
    """CSV with a ``# schema vN`` comment line; written atomically."""
    path = Path(path)
    tmp = path.with_name(path.name + ".partial")
    names = list(columns)
    n = len(next(iter(columns.values()))) if names else 0
    try:
        with tmp.open("w", newline="", encoding="utf-8") as fh:
            fh.write(f"# {schema} v{version}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(names)
            for i in range(n):
                w.writerow([_cell(v[i]) for v in columns.values()])
        tmp.replace(path)
    finally:
        tmp.unlink(missing_ok=True)


def _cell(x) -> str:
    if isinstance(x, (str, bool, np.bool_)):
        return str(x).lower() if not isinstance(x, str) else x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return fmt(x)


def _integrate(y0: np.ndarray, segment: DriveSegment, delta_gap: float, config: IntegratorConfig):
    e0, e1, t0, t1 = segment.kernel_args()
    y0 = np.ascontiguousarray(y0, dtype=np.complex128)
    if config.fixed_step is not None:
        n = int(math.ceil(abs(t1 - t0) / config.fixed_step)) if t1 != t0 else 0
        if n > config.max_steps:
            raise IntegrationError("fixed-step run exceeds the step budget",
                                   {"n_steps": n, "max_steps": config.max_steps})
        out = _rk.rk4_fixed(y0, t0, t1, float(delta_gap), e0, e1, n, int(config.sample_stride))
    else:
        out = _rk.dopri5(y0, t0, t1, float(delta_gap), e0, e1, config.rtol, config.atol,
                         config.max_step, int(config.max_steps), int(config.sample_stride))
    y, ts, ys, n_samples, n_steps, status = out
    if status != _rk.STATUS_OK:
        reason = "step budget exhausted" if status == _rk.STATUS_MAX_STEPS else "step size underflow"
        raise IntegrationError(
            f"integration failed on {segment!r}: {reason}",
            {"status": int(status), "n_steps": int(n_steps), "t_reached": float(ts[n_samples - 1]),
             "t_target": t1, "rtol": config.rtol, "atol": config.atol},
        )
    return y, ts[:n_samples] - t0, ys[:n_samples], int(n_steps)


def evolve(spinor: Spinor, drive: Sequence[DriveSegment], delta_gap: float,
           config: IntegratorConfig | None = None) -> tuple[Spinor, Trajectory]:
    """Integrate ``i d/dt psi = -(Delta sigma_x + eps(t) sigma_z) psi / 2`` over ``drive``.

    The state is renormalized at segment boundaries only; the largest norm
    drift seen is stored on the trajectory.
    """
    if spinor.basis is not Basis.DIABATIC:
        raise BasisMismatchError("the ODE oracle works in the diabatic basis")
    if delta_gap < 0:
        raise DomainError(f"delta_gap must be non-negative, got {delta_gap}")
    config = config or IntegratorConfig()
    drive = list(drive)
    v_ref = next((s.velocity for s in drive if isinstance(s, LinearSweep)), 1.0)
    clock = drive[0].kernel_args()[2] if drive else 0.0

    y = spinor.vector.reshape(2, 1)
    ts, states, eps, segs = [np.array([clock])], [y.T.copy()], [], []
    eps.append(drive[0].bias(np.array([drive[0].kernel_args()[2]])) if drive else np.array([0.0]))
    segs.append(np.array([-1]))
    drift = 0.0
    n_total = 0
    for k, seg in enumerate(drive):
        y, t_loc, ys, n = _integrate(y, seg, delta_gap, config)
        n_total += n
        norm = float(np.linalg.norm(y))
        drift = max(drift, abs(norm - 1.0))
        if abs(norm - 1.0) > 0:
            log.debug("segment %d: renormalizing, norm drift %.3e", k, norm - 1.0)
        y = y / norm
        t_abs = clock + t_loc
        ts.append(t_abs[1:])
        states.append(ys[1:, :, 0])
        eps.append(seg.bias(t_loc[1:] + seg.kernel_args()[2]))
        segs.append(np.full(len(t_loc) - 1, k))
        clock += seg.kernel_args()[3] - seg.kernel_args()[2]
    traj = Trajectory(np.concatenate(ts), np.concatenate(states), np.concatenate(eps),
                      np.concatenate(segs), float(v_ref), drift, n_total)
    return Spinor.from_vector(y[:, 0], renormalize=True), traj


def propagator(drive: Sequence[DriveSegment], delta_gap: float,
               config: IntegratorConfig | None = None) -> np.ndarray:
    """Numerical 2x2 propagator of the whole drive (columns evolved together)."""
    config = config or IntegratorConfig()
    u = np.eye(2, dtype=np.complex128)
    for seg in drive:
        u, _, _, _ = _integrate(u, seg, delta_gap, IntegratorConfig(
            config.rtol, config.atol, config.max_step, 0, config.max_steps, config.fixed_step))
    return u


def passage_propagator(delta: float, tau_i: float, tau_f: float,
                       config: IntegratorConfig | None = None) -> np.ndarray:
    """Propagator of one forward sweep from ``tau_i`` to ``tau_f`` in units with ``v = 1``."""
    sweep = LinearSweep.from_tau(1.0, tau_i, tau_f)
    return propagator([sweep], 2.0 * math.sqrt(delta), config)


def constant_drive_matrix(epsilon0: float, delta_gap: float, t_wait: float) -> np.ndarray:
    """Closed-form diabatic propagator of a constant bias, ``M^T diag(e^{-iwt}, e^{iwt}) M``."""
    if epsilon0 == 0 and delta_gap == 0:
        return np.eye(2, dtype=complex)
    gp, gm = gamma_pm(epsilon0, delta_gap)
    w = 0.5 * math.hypot(delta_gap, epsilon0)
    em, ep = np.exp(-1j * w * t_wait), np.exp(1j * w * t_wait)
    off = gm * gp * (ep - em)
    return np.array([[gm * gm * em + gp * gp * ep, off], [off, gp * gp * em + gm * gm * ep]])


def evolve_constant(spinor: Spinor, epsilon0: float, delta_gap: float, t_wait: float) -> Spinor:
    if spinor.basis is not Basis.DIABATIC:
        raise BasisMismatchError("evolve_constant expects a diabatic spinor")
    return Spinor.from_vector(constant_drive_matrix(epsilon0, delta_gap, t_wait) @ spinor.vector,
                              renormalize=True)


@dataclass(frozen=True)
class ComparisonReport:
    p_aim: np.ndarray | float
    p_ode: np.ndarray | float
    error: np.ndarray | float
    runtime: float
    details: dict = field(default_factory=dict)

    @property
    def max_error(self) -> float:
        return float(np.max(self.error))


def compare_aim_vs_ode(alpha_i, phi_i, delta: float, tau_a: float,
                       config: IntegratorConfig | None = None, tau_f: float | None = None) -> ComparisonReport:
    """Closed-form final occupation against direct integration for one passage.

    The sweep runs from ``-tau_a`` to ``tau_f`` (default ``tau_a``); ``alpha_i`` and
    ``phi_i`` broadcast, sharing one numerical propagator.
    """
    tau_f = tau_a if tau_f is None else tau_f
    start = time.perf_counter()
    u = passage_propagator(delta, -abs(tau_a), tau_f, config)
    alpha = np.asarray(alpha_i, dtype=float)
    phi = np.asarray(phi_i, dtype=float)
    alpha, phi = np.broadcast_arrays(alpha, phi)
    beta = np.sqrt(1.0 - alpha ** 2) * np.exp(1j * phi)
    a0_final = u[0, 0] * alpha + u[0, 1] * beta
    p_ode = np.abs(a0_final) ** 2
    runtime = time.perf_counter() - start
    p_aim = final_probability_diabatic(alpha, phi, delta, -abs(tau_a))
    err = np.abs(np.asarray(p_aim) - p_ode)
    if err.ndim == 0:
        p_ode, err = float(p_ode), float(err)
    return ComparisonReport(p_aim, p_ode, err, runtime,
                            {"delta": delta, "tau_a": tau_a, "tau_f": tau_f,
                             "theta_offset": float(theta_offset(delta, -abs(tau_a)))})
