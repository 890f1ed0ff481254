"""Pulse programs made of sweeps and waits, and two-passage planning.

A program is a list of :class:`~lzsm.ode.LinearSweep` and
:class:`~lzsm.ode.ConstantWait` segments sharing one gap ``delta_gap``.  A wait
far from the anticrossing only rotates the relative phase of the two diabatic
amplitudes, which is how the initial phase of the next passage is set.

Two simulation engines are provided.  :func:`simulate_sequence_aim` uses the
adiabatic-impulse matrices; with ``dressed=True`` it also applies the exact
diabatic/adiabatic basis maps at the true segment biases and exact wait
propagators, which removes the O(Delta / eps) mismatch of the bare model at
finite sweep amplitude.  :func:`simulate_sequence_ode` integrates the
Schrodinger equation.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from . import ode
from .aim import (
    FAR_BASIS_AFTER,
    PassageConfig,
    adiabatic_stage,
    lzsm_transfer_matrix,
    single_passage_matrix,
    zeta_exact,
)
from .control import (
    InterferenceWindow,
    PhaseSolution,
    interference_window,
    solve_phase_for_target,
)
from .core import Basis, BasisMismatchError, DomainError, Spinor, basis_matrix, lz_probability, wrap_phase
from .ode import ConstantWait, IntegratorConfig, LinearSweep, constant_drive_matrix

SEQUENCE_SCHEMA = 1
SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]])
# Waits closer to the anticrossing than this many gaps are not pure phase rotations.
FAR_FIELD_RATIO = 10.0
PLAN_TOL = 1e-12


class WaitRegimeWarning(UserWarning):
    """A wait sits too close to the anticrossing for the pure-phase approximation."""


def wait_phase(epsilon0: float, delta_gap: float, t_wait: float) -> float:
    """Change of ``arg a1 - arg a0`` during a far-field wait: ``-sgn(eps0) sqrt(Delta^2 + eps0^2) t``."""
    if t_wait < 0:
        raise DomainError(f"t_wait must be non-negative, got {t_wait}")
    if epsilon0 == 0:
        raise DomainError("wait phase sign is undefined at eps0 = 0; use evolve_constant")
    return -math.copysign(1.0, epsilon0) * math.hypot(delta_gap, epsilon0) * t_wait


def wait_duration_for_phase(phase: float, epsilon0: float, delta_gap: float, extra_periods: int = 0) -> float:
    """Smallest non-negative wait realizing ``phase`` modulo 2 pi, plus ``extra_periods`` full turns."""
    if epsilon0 == 0:
        raise DomainError("a wait at eps0 = 0 does not produce a pure phase")
    if extra_periods < 0:
        raise DomainError("extra_periods must be non-negative")
    rate = math.hypot(delta_gap, epsilon0)
    turns = math.fmod(-math.copysign(1.0, epsilon0) * phase, 2.0 * math.pi)
    if turns < 0:
        turns += 2.0 * math.pi
    return (turns + 2.0 * math.pi * extra_periods) / rate


def _segment_to_dict(seg) -> dict:
    if isinstance(seg, LinearSweep):
        d = {"kind": "sweep", "velocity": seg.velocity, "t_start": seg.t_start, "t_end": seg.t_end}
    elif isinstance(seg, ConstantWait):
        d = {"kind": "wait", "epsilon0": seg.epsilon0, "duration": seg.duration}
    else:
        raise TypeError(f"unknown segment {seg!r}")
    if seg.annotation:
        d["annotation"] = seg.annotation
    return d


def _segment_from_dict(d: dict):
    kind = d.get("kind")
    note = d.get("annotation", "")
    if kind == "sweep":
        if "tau_start" in d:
            return LinearSweep.from_tau(float(d["velocity"]), float(d["tau_start"]), float(d["tau_end"]), note)
        return LinearSweep(float(d["velocity"]), float(d["t_start"]), float(d["t_end"]), note)
    if kind == "wait":
        return ConstantWait(float(d["epsilon0"]), float(d["duration"]), note)
    raise ValueError(f"unknown segment kind {kind!r}")


@dataclass(frozen=True)
class PulseSequence:
    """Ordered drive segments played back to back with gap ``delta_gap``."""

    delta_gap: float
    segments: tuple = ()

    def __post_init__(self):
        if self.delta_gap < 0:
            raise DomainError(f"delta_gap must be non-negative, got {self.delta_gap}")
        segs = tuple(self.segments)
        for seg in segs:
            if isinstance(seg, LinearSweep):
                if not seg.t_start < 0 < seg.t_end:
                    raise DomainError(f"sweep must cross eps = 0 exactly once, got {seg!r}")
            elif not isinstance(seg, ConstantWait):
                raise TypeError(f"unknown segment {seg!r}")
        object.__setattr__(self, "segments", segs)

    def __len__(self):
        return len(self.segments)

    def __add__(self, other: PulseSequence) -> PulseSequence:
        if other.delta_gap != self.delta_gap:
            raise ValueError("cannot join sequences with different gaps")
        return PulseSequence(self.delta_gap, self.segments + other.segments)

    @property
    def duration(self) -> float:
        return sum(seg.duration for seg in self.segments)

    def to_dict(self, initial: Spinor | None = None) -> dict:
        doc = {
            "schema": "lzsm-pulse-sequence",
            "schema_version": SEQUENCE_SCHEMA,
            "delta_gap": self.delta_gap,
            "segments": [_segment_to_dict(s) for s in self.segments],
        }
        if initial is not None:
            doc["initial"] = {"a0": [initial.a0.real, initial.a0.imag], "a1": [initial.a1.real, initial.a1.imag]}
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> tuple[PulseSequence, Spinor | None]:
        version = doc.get("schema_version")
        if version != SEQUENCE_SCHEMA:
            raise ValueError(f"unsupported pulse-sequence schema version {version!r}")
        seq = cls(float(doc["delta_gap"]), tuple(_segment_from_dict(d) for d in doc.get("segments", [])))
        init = doc.get("initial")
        spinor = None
        if init is not None:
            spinor = Spinor.from_vector([complex(*init["a0"]), complex(*init["a1"])], renormalize=True)
        return seq, spinor

    def to_json(self, path, initial: Spinor | None = None) -> None:
        ode.atomic_write_text(path, json.dumps(self.to_dict(initial), indent=2))

    @classmethod
    def from_json(cls, path) -> tuple[PulseSequence, Spinor | None]:
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass(frozen=True)
class SegmentRecord:
    """State after one segment, with the phase bookkeeping used by the planner."""

    index: int
    kind: str
    spinor: Spinor
    relative_phase: float
    wait_phase: float | None = None

    @property
    def p0(self) -> float:
        return self.spinor.populations[0]


def _sweep_matrix(seg: LinearSweep, delta_gap: float, dressed: bool) -> np.ndarray:
    speed = abs(seg.velocity)
    delta = delta_gap * delta_gap / (4.0 * speed)
    tau_i, tau_f = seg.tau_start, seg.tau_end
    u = single_passage_matrix(PassageConfig(delta, tau_i, tau_f)).matrix
    if dressed:
        eps_i, eps_f = speed * seg.t_start, speed * seg.t_end
        u = basis_matrix(eps_f, delta_gap).T @ FAR_BASIS_AFTER @ u @ basis_matrix(eps_i, delta_gap)
    if seg.velocity < 0:
        # eps -> -eps is conjugation by sigma_x.
        u = SIGMA_X @ u @ SIGMA_X
    return u


def _wait_matrix(seg: ConstantWait, delta_gap: float, dressed: bool) -> np.ndarray:
    eps = seg.epsilon0
    if dressed:
        return constant_drive_matrix(eps, delta_gap, seg.duration)
    if eps == 0 or abs(eps) < FAR_FIELD_RATIO * delta_gap:
        warnings.warn(
            f"wait at eps0 = {eps:g} is within {FAR_FIELD_RATIO:g} gaps of the anticrossing; "
            "using the exact constant-bias propagator",
            WaitRegimeWarning,
            stacklevel=3,
        )
        return constant_drive_matrix(eps, delta_gap, seg.duration)
    half = 0.5 * math.copysign(1.0, eps) * math.hypot(delta_gap, eps) * seg.duration
    return np.diag([np.exp(1j * half), np.exp(-1j * half)])


def segment_matrix(seg, delta_gap: float, dressed: bool = False) -> np.ndarray:
    """Adiabatic-impulse propagator of one segment in the diabatic basis."""
    if isinstance(seg, LinearSweep):
        return _sweep_matrix(seg, delta_gap, dressed)
    return _wait_matrix(seg, delta_gap, dressed)


def simulate_sequence_aim(spinor: Spinor, sequence: PulseSequence,
                          dressed: bool = False) -> tuple[Spinor, list[SegmentRecord]]:
    """Propagate ``spinor`` through ``sequence`` with adiabatic-impulse matrices."""
    if spinor.basis is not Basis.DIABATIC:
        raise BasisMismatchError("pulse sequences act on diabatic spinors")
    records = []
    vec = spinor.vector
    for k, seg in enumerate(sequence.segments):
        vec = segment_matrix(seg, sequence.delta_gap, dressed) @ vec
        vec = vec / np.linalg.norm(vec)
        state = Spinor.from_vector(vec)
        if isinstance(seg, ConstantWait):
            wp = wait_phase(seg.epsilon0, sequence.delta_gap, seg.duration) if seg.epsilon0 != 0 else None
            records.append(SegmentRecord(k, "wait", state, state.relative_phase, wp))
        else:
            records.append(SegmentRecord(k, "sweep", state, state.relative_phase))
    return Spinor.from_vector(vec), records


def simulate_sequence_ode(spinor: Spinor, sequence: PulseSequence,
                          config: IntegratorConfig | None = None) -> tuple[Spinor, ode.Trajectory]:
    """Integrate the Schrodinger equation through ``sequence``."""
    return ode.evolve(spinor, sequence.segments, sequence.delta_gap, config)


@dataclass(frozen=True)
class Geometry:
    """Drive layout for planning.

    Sweeps cover ``tau`` in ``[-tau_a, tau_a]`` at speed ``velocity``; waits sit at
    ``eps0 = -/+ wait_bias_ratio * Delta`` before/after the first passage, and
    each lasts ``extra_periods`` full phase turns longer than necessary.
    """

    tau_a: float = 20.0
    wait_bias_ratio: float = 20.0
    extra_periods: int = 0
    velocity: float = 1.0

    def __post_init__(self):
        if not self.tau_a > 0 or not self.velocity > 0 or not self.wait_bias_ratio > 0:
            raise DomainError("tau_a, velocity and wait_bias_ratio must be positive")


@dataclass
class PlanResult:
    """Outcome of :func:`plan_two_passage`.

    ``intermediate`` and ``predicted`` come from the bare adiabatic-impulse
    model; ``predicted_dressed`` from the dressed model the wait durations were
    tuned against (equal to ``predicted`` when ``refined`` is false).
    """

    feasible: bool
    p_initial: float
    p_target: float
    delta: float
    geometry: Geometry
    initial: Spinor
    sequence: PulseSequence | None = None
    intermediate: tuple = ()
    solutions: tuple = ()
    predicted: float | None = None
    predicted_dressed: float | None = None
    windows: tuple = ()
    reachable: tuple | None = None
    best_window: InterferenceWindow | None = None
    refined: bool = False
    notes: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "feasible": self.feasible,
            "p_initial": self.p_initial,
            "p_target": self.p_target,
            "delta": self.delta,
            "geometry": self.geometry.__dict__,
            "intermediate": list(self.intermediate),
            "predicted": self.predicted,
            "predicted_dressed": self.predicted_dressed,
            "windows": [w.to_dict() for w in self.windows],
            "reachable": None if self.reachable is None else list(self.reachable),
            "best_window": None if self.best_window is None else self.best_window.to_dict(),
            "solutions": [s.to_dict() for s in self.solutions],
            "refined": self.refined,
            "sequence": None if self.sequence is None else self.sequence.to_dict(self.initial),
        }


def _choose_intermediate(alpha1: float, p_target: float, delta: float, requested: float | None):
    """Pick the post-passage-1 occupation that leaves ``p_target`` deepest inside the second window.

    A return sweep starting from ``|a0|^2 = p`` reaches the same window as a
    forward sweep from ``alpha = sqrt(p)``.
    """
    w1 = interference_window(alpha1, delta)
    if requested is not None:
        if not w1.contains(requested, PLAN_TOL):
            return None, w1, [requested]
        cands = np.array([min(max(requested, w1.p_min), w1.p_max)])
    else:
        p = float(lz_probability(delta))
        special = [p, 1.0 - p, alpha1 * alpha1]
        cands = np.concatenate([np.linspace(w1.p_min, w1.p_max, 2001),
                                [c for c in special if w1.contains(c)]])
    margins = np.array([interference_window(math.sqrt(c), delta).margin(p_target) for c in cands])
    best = int(np.argmax(margins))
    return (float(cands[best]), float(margins[best])), w1, cands


def _tune(fn: Callable[[float], float], target: float, guess: float, n_grid: int = 256) -> float:
    """Wait phase in [0, 2 pi) making ``fn`` hit ``target``, preferring the root nearest ``guess``."""
    grid = np.linspace(0.0, 2.0 * math.pi, n_grid + 1)
    vals = np.array([fn(x) for x in grid]) - target
    roots = []
    for k in range(n_grid):
        if vals[k] == 0.0:
            roots.append(grid[k])
        elif vals[k] * vals[k + 1] < 0:
            roots.append(brentq(lambda x: fn(x) - target, grid[k], grid[k + 1], xtol=1e-14, rtol=1e-14))
    if roots:
        dist = [abs(wrap_phase(r - guess)) for r in roots]
        return float(roots[int(np.argmin(dist))]) % (2.0 * math.pi)
    k = int(np.argmin(np.abs(vals)))
    h = grid[1] - grid[0]
    res = minimize_scalar(lambda x: (fn(x) - target) ** 2, bounds=(grid[k] - h, grid[k] + h),
                          method="bounded", options={"xatol": 1e-12})
    return float(res.x) % (2.0 * math.pi)


def plan_two_passage(p_initial: float, p_target: float, delta: float, geometry: Geometry | None = None,
                     phi_initial: float = 0.0, p_intermediate: float | None = None,
                     refine: bool = True) -> PlanResult:
    """Wait, forward sweep, wait, return sweep: steer ``|a0|^2`` from ``p_initial`` to ``p_target``.

    The initial spinor is ``(sqrt(p_initial), sqrt(1 - p_initial) exp(i phi_initial))``
    at the start of the first wait.  The occupation after the first passage is
    chosen inside its window so that ``p_target`` sits as far inside the second
    window as possible (or fixed by ``p_intermediate``).  Wait durations follow
    from the closed-form phases; with ``refine`` they are then re-tuned against
    the dressed model so the finite sweep amplitude does not bias the result.
    Infeasible targets give ``feasible=False`` and the best window found.
    """
    for name, val in (("p_initial", p_initial), ("p_target", p_target)):
        if not 0.0 <= val <= 1.0:
            raise DomainError(f"{name} must lie in [0, 1], got {val}")
    if p_intermediate is not None and not 0.0 <= p_intermediate <= 1.0:
        raise DomainError(f"p_intermediate must lie in [0, 1], got {p_intermediate}")
    if not delta > 0:
        raise DomainError(f"delta must be positive, got {delta}")
    geo = geometry or Geometry()
    initial = Spinor.from_population(p_initial, phi_initial)
    alpha1 = math.sqrt(p_initial)

    choice, w1, cands = _choose_intermediate(alpha1, p_target, delta, p_intermediate)
    windows2 = [interference_window(math.sqrt(min(max(c, 0.0), 1.0)), delta) for c in cands]
    reachable = (min(w.p_min for w in windows2), max(w.p_max for w in windows2))
    base = PlanResult(False, p_initial, p_target, delta, geo, initial, reachable=reachable)
    if choice is None:
        base.windows = (w1,)
        base.notes["reason"] = "requested intermediate occupation is outside the first window"
        return base
    p_mid, margin = choice
    w2 = interference_window(math.sqrt(p_mid), delta)
    if margin < -PLAN_TOL:
        base.windows = (w1, w2)
        base.best_window = w2
        base.intermediate = (p_mid,)
        base.notes["reason"] = "target outside every reachable second-passage window"
        return base

    v = geo.velocity
    gap = 2.0 * math.sqrt(v * delta)
    bias = geo.wait_bias_ratio * gap
    fwd = LinearSweep.from_tau(v, -geo.tau_a, geo.tau_a, "passage 1")
    rev = LinearSweep.from_tau(-v, -geo.tau_a, geo.tau_a, "passage 2 (return)")

    sol1 = solve_phase_for_target(alpha1, delta, -geo.tau_a, p_mid)
    t1 = wait_duration_for_phase(sol1.phi_i - phi_initial, -bias, gap, geo.extra_periods)
    pre = ConstantWait(-bias, t1, "set phase for passage 1")
    state1, _ = simulate_sequence_aim(initial, PulseSequence(gap, (pre, fwd)))

    # The return sweep is a forward sweep in the sigma_x-swapped frame.
    alpha2 = min(1.0, abs(state1.a1))
    sol2 = solve_phase_for_target(alpha2, delta, -geo.tau_a, 1.0 - p_target)
    needed = -sol2.phi_i
    t2 = wait_duration_for_phase(needed - state1.relative_phase, bias, gap, geo.extra_periods)
    mid = ConstantWait(bias, t2, "set phase for passage 2")
    seq = PulseSequence(gap, (pre, fwd, mid, rev))
    final, _ = simulate_sequence_aim(initial, seq)
    predicted = final.populations[0]
    predicted_dressed = predicted

    if refine:
        rate = math.hypot(gap, bias)
        turns = 2.0 * math.pi * geo.extra_periods

        def make_pre(x):
            return ConstantWait(-bias, (x + turns) / rate, pre.annotation)

        def after_first(x):
            return simulate_sequence_aim(initial, PulseSequence(gap, (make_pre(x), fwd)), dressed=True)[0]

        x1 = _tune(lambda x: after_first(x).populations[0], p_mid, rate * t1 - turns)
        pre = make_pre(x1)
        head = simulate_sequence_aim(initial, PulseSequence(gap, (pre, fwd)), dressed=True)[0]

        def make_mid(x):
            return ConstantWait(bias, (x + turns) / rate, mid.annotation)

        def final_p(x):
            return simulate_sequence_aim(head, PulseSequence(gap, (make_mid(x), rev)), dressed=True)[0].populations[0]

        x2 = _tune(final_p, p_target, rate * t2 - turns)
        mid = make_mid(x2)
        seq = PulseSequence(gap, (pre, fwd, mid, rev))
        predicted = simulate_sequence_aim(initial, seq)[0].populations[0]
        predicted_dressed = simulate_sequence_aim(initial, seq, dressed=True)[0].populations[0]

    return PlanResult(True, p_initial, p_target, delta, geo, initial, seq,
                      (p_mid, float(predicted)), (sol1, sol2), float(predicted), float(predicted_dressed),
                      (w1, w2), reachable, w2, refine, {"margin": margin})


def aim_trajectory(spinor: Spinor, sequence: PulseSequence) -> ode.Trajectory:
    """Adiabatic-impulse states at segment edges and just before/after each crossing.

    Uses the same global clock as :func:`lzsm.ode.evolve`; populations are
    piecewise constant in this picture, so these samples describe the whole curve.
    """
    if spinor.basis is not Basis.DIABATIC:
        raise BasisMismatchError("pulse sequences act on diabatic spinors")
    segs = sequence.segments
    clock = segs[0].kernel_args()[2] if segs else 0.0
    vec = spinor.vector
    first_eps = segs[0].bias(segs[0].kernel_args()[2]) if segs else 0.0
    t, states, eps, idx = [clock], [vec], [float(first_eps)], [-1]
    for k, seg in enumerate(segs):
        start, stop = seg.kernel_args()[2:]
        if isinstance(seg, LinearSweep):
            speed = abs(seg.velocity)
            delta = sequence.delta_gap ** 2 / (4.0 * speed)
            tau_i, tau_f = seg.tau_start, seg.tau_end
            flip = SIGMA_X if seg.velocity < 0 else np.eye(2)
            z_i = float(zeta_exact(abs(tau_i), delta))
            z_f = float(zeta_exact(tau_f, delta))
            before = flip @ adiabatic_stage(z_i, before=True).matrix @ flip @ vec
            after = flip @ lzsm_transfer_matrix(delta).matrix @ flip @ before
            vec = flip @ adiabatic_stage(z_f, before=False).matrix @ flip @ after
            for local, state in ((0.0, before), (0.0, after), (stop, vec)):
                t.append(clock + local - start)
                states.append(state)
                eps.append(float(seg.bias(local)))
                idx.append(k)
        else:
            vec = segment_matrix(seg, sequence.delta_gap) @ vec
            t.append(clock + stop - start)
            states.append(vec)
            eps.append(float(seg.epsilon0))
            idx.append(k)
        clock += stop - start
    v_ref = next((s.velocity for s in segs if isinstance(s, LinearSweep)), 1.0)
    states = np.array(states)
    states /= np.linalg.norm(states, axis=1)[:, None]
    return ode.Trajectory(np.array(t), states, np.array(eps), np.array(idx), float(v_ref))
