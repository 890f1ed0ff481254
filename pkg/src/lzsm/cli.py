"""Command-line front end.

Subcommands: ``simulate``, ``solve-phase``, ``window``, ``sweep``, ``plan`` and
``validate``.  Exit codes: 0 success, 1 tolerance violation (``validate``),
2 usage or domain error, 3 infeasible objective, 4 integration failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import aim, control, ode, sequencer
from .core import DomainError, Spinor, lz_probability, time_to_tau

EXIT_OK = 0
EXIT_TOLERANCE = 1
EXIT_USAGE = 2
EXIT_INFEASIBLE = 3
EXIT_INTEGRATION = 4
THREADS_ENV = "LZSM_THREADS"

log = logging.getLogger("lzsm")


class UsageError(Exception):
    pass


# --- shared argument handling -------------------------------------------------


def _add_system(p):
    g = p.add_argument_group("system (give --delta, or --gap with --velocity)")
    g.add_argument("--delta", type=float, help="adiabaticity Delta^2 / (4 v)")
    g.add_argument("--gap", type=float, help="gap Delta (hbar = 1)")
    g.add_argument("--velocity", type=float, default=1.0, help="sweep velocity v (default 1)")


def _add_state(p):
    g = p.add_argument_group("initial state (alpha = |a0|)")
    x = g.add_mutually_exclusive_group()
    x.add_argument("--alpha", type=float)
    x.add_argument("--alpha2", type=float, help="initial occupation alpha^2 of |0>")


def _add_time(p, default=20.0):
    g = p.add_argument_group("sweep half-width (give tau or physical time)")
    x = g.add_mutually_exclusive_group()
    x.add_argument("--tau", type=float, help=f"dimensionless half-width tau_a (default {default:g})")
    x.add_argument("--time", type=float, help="physical half-width t_a, converted with --velocity")
    p.set_defaults(_tau_default=default)


def _delta(args) -> float:
    if args.delta is not None:
        if args.gap is not None:
            raise UsageError("give either --delta or --gap, not both")
        if args.delta < 0:
            raise UsageError("--delta must be non-negative")
        return args.delta
    if args.gap is None:
        raise UsageError("one of --delta or --gap is required")
    if not args.velocity > 0 or args.gap < 0:
        raise UsageError("need --gap >= 0 and --velocity > 0")
    return args.gap ** 2 / (4.0 * args.velocity)


def _alpha(args, default=None) -> float:
    if args.alpha is not None:
        a = args.alpha
    elif args.alpha2 is not None:
        if not 0.0 <= args.alpha2 <= 1.0:
            raise UsageError("--alpha2 must lie in [0, 1]")
        a = math.sqrt(args.alpha2)
    elif default is not None:
        a = default
    else:
        raise UsageError("one of --alpha or --alpha2 is required")
    if not 0.0 <= a <= 1.0:
        raise UsageError("--alpha must lie in [0, 1]")
    return a


def _tau(args) -> float:
    if getattr(args, "time", None) is not None:
        if not args.velocity > 0:
            raise UsageError("--velocity must be positive")
        return float(time_to_tau(args.time, args.velocity))
    tau = args.tau if args.tau is not None else args._tau_default
    if not tau > 0:
        raise UsageError("the sweep half-width must be positive")
    return tau


def _phase(text: str, delta: float, tau: float) -> float:
    """A float in radians or one of zero / constructive / destructive."""
    named = {
        "zero": control.phi_zero_interference,
        "constructive": control.phi_constructive,
        "destructive": control.phi_destructive,
    }
    if text in named:
        return named[text](delta, -tau).phi_i
    try:
        return float(text)
    except ValueError:
        raise UsageError(f"--phi must be a number or one of {sorted(named)}, got {text!r}") from None


def _grid(text: str | None, name: str) -> np.ndarray | None:
    """``a,b,c`` or ``start:stop:num`` (inclusive linspace)."""
    if text is None:
        return None
    try:
        if ":" in text:
            start, stop, num = text.split(":")
            vals = np.linspace(float(start), float(stop), int(num))
        else:
            vals = np.array([float(x) for x in text.split(",") if x.strip()])
    except ValueError:
        raise UsageError(f"cannot parse --{name} {text!r}") from None
    if vals.size == 0:
        raise UsageError(f"--{name} is empty")
    return vals


def _emit_json(doc: dict, out: str | None) -> None:
    text = json.dumps(doc, indent=2, default=_json_default)
    if out:
        ode.atomic_write_text(out, text + "\n")
    else:
        print(text)


def _json_default(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.bool_):
        return bool(x)
    raise TypeError(f"not JSON serializable: {type(x).__name__}")


def _integrator(args) -> ode.IntegratorConfig:
    return ode.IntegratorConfig(rtol=args.rtol, atol=args.atol, sample_stride=getattr(args, "stride", 0),
                                fixed_step=args.fixed_step)


def _add_integrator(p):
    g = p.add_argument_group("integrator")
    g.add_argument("--rtol", type=float, default=1e-13)
    g.add_argument("--atol", type=float, default=1e-15)
    g.add_argument("--fixed-step", type=float, default=None,
                   help="use fixed-step RK4 with this step (bit-reproducible golden mode)")


def _threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    return max(1, n)


def ordered_map(fn, items, threads: int | None = None) -> list:
    """``[fn(x) for x in items]``, computed on a thread pool; output order follows input order."""
    items = list(items)
    threads = _threads() if threads is None else threads
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# --- simulate -----------------------------------------------------------------


def cmd_simulate(args) -> int:
    if args.pulse:
        seq, spinor = sequencer.PulseSequence.from_json(args.pulse)
        if spinor is None or args.alpha is not None or args.alpha2 is not None:
            sweep = next((s for s in seq.segments if isinstance(s, ode.LinearSweep)), None)
            if sweep is None:
                phi = _phase(args.phi, 0.0, 1.0) if args.phi[0] in "+-.0123456789" else None
                if phi is None:
                    raise UsageError("named phases need a sweep in the pulse program")
            else:
                delta = seq.delta_gap ** 2 / (4.0 * abs(sweep.velocity))
                phi = _phase(args.phi, delta, abs(sweep.tau_start))
            spinor = Spinor.from_population(_alpha(args, 1.0) ** 2, phi)
    else:
        delta = _delta(args)
        velocity = args.velocity
        gap = 2.0 * math.sqrt(velocity * delta)
        if args.tau_i is not None or args.tau_f is not None:
            tau_i = args.tau_i if args.tau_i is not None else -_tau(args)
            tau_f = args.tau_f if args.tau_f is not None else _tau(args)
        else:
            tau_i, tau_f = -_tau(args), _tau(args)
        if args.no_sweep:
            segments = ()
        else:
            if not tau_i < 0 < tau_f:
                raise UsageError("need tau_i < 0 < tau_f")
            segments = (ode.LinearSweep.from_tau(velocity, tau_i, tau_f),)
        seq = sequencer.PulseSequence(gap, segments)
        alpha = _alpha(args, 1.0)
        spinor = Spinor.from_population(alpha * alpha, _phase(args.phi, delta, abs(tau_i)))

    columns = None
    summary = {"initial": {"p0": spinor.populations[0], "relative_phase": spinor.relative_phase}}
    if args.engine in ("ode", "both"):
        final, traj = sequencer.simulate_sequence_ode(spinor, seq, _integrator(args))
        columns = traj.table()
        summary["ode"] = {"p0": final.populations[0], "norm_drift": traj.norm_drift, "steps": traj.n_steps}
    if args.engine in ("aim", "both"):
        atraj = sequencer.aim_trajectory(spinor, seq)
        final_aim = atraj.states[-1]
        summary["aim"] = {"p0": float(abs(final_aim[0]) ** 2)}
        if columns is None:
            columns = atraj.table()
        else:
            # Populations are piecewise constant in the impulse picture: sample the step curve.
            idx = np.searchsorted(atraj.t, columns["t"], side="right") - 1
            idx = np.clip(idx, 0, len(atraj.t) - 1)
            columns["P0_aim"] = atraj.populations[idx, 0]
            summary["difference"] = abs(summary["aim"]["p0"] - summary["ode"]["p0"])
    if args.out:
        if args.format == "json":
            doc = {"schema": "lzsm-trajectory", "schema_version": ode.TRAJECTORY_SCHEMA, "summary": summary,
                   "columns": {k: [float(x) for x in v] for k, v in columns.items()}}
            ode.atomic_write_text(args.out, json.dumps(doc, indent=1, default=_json_default))
        else:
            ode.write_csv(args.out, columns, "lzsm-trajectory")
    print(json.dumps(summary, indent=2, default=_json_default))
    return EXIT_OK


# --- solve-phase / window -----------------------------------------------------

MODES = ("zero", "constructive", "destructive", "target", "returning", "returning-adiabatic", "dcl", "ccl")


def solve_mode(mode: str, alpha: float, delta: float | None, tau: float, target: float | None = None):
    """Dispatch one control objective; returns a :class:`~lzsm.control.PhaseSolution`."""
    if mode in ("dcl", "ccl"):
        return control.complete_localization(alpha, mode, -tau)
    if delta is None:
        raise UsageError(f"mode {mode} needs the adiabaticity")
    if mode == "zero":
        return control.phi_zero_interference(delta, -tau, alpha)
    if mode == "constructive":
        return control.phi_constructive(delta, -tau, alpha)
    if mode == "destructive":
        return control.phi_destructive(delta, -tau, alpha)
    if mode == "returning":
        return control.transitionless_phase(alpha, delta, -tau)
    if mode == "returning-adiabatic":
        return control.transitionless_phase_adiabatic(alpha, delta, tau)
    if target is None:
        raise UsageError("mode target needs --target")
    return control.solve_phase_for_target(alpha, delta, -tau, target)


def cmd_solve_phase(args) -> int:
    alpha = _alpha(args)
    tau = _tau(args)
    delta = None if args.mode in ("dcl", "ccl") else _delta(args)
    sol = solve_mode(args.mode, alpha, delta, tau, args.target)
    doc = {"mode": args.mode, "alpha": alpha, "tau_a": tau} | sol.to_dict()
    if sol.delta is not None:
        doc["lz_probability"] = float(lz_probability(sol.delta))
    _emit_json(doc, args.out)
    return EXIT_OK if sol.feasible else EXIT_INFEASIBLE


def cmd_window(args) -> int:
    alpha = _alpha(args)
    delta = _delta(args)
    w = control.interference_window(alpha, delta)
    doc = {"alpha": alpha, "delta": delta, "lz_probability": float(lz_probability(delta))} | w.to_dict()
    doc["width_max_over_alpha"] = control.width_max_over_alpha(delta)
    _emit_json(doc, args.out)
    return EXIT_OK


# --- sweep --------------------------------------------------------------------


def _sweep_row(cell):
    alpha, delta, phi, tau, with_ode, cfg = cell
    w = control.interference_window(alpha, delta)
    row = {
        "alpha": alpha,
        "alpha2": alpha * alpha,
        "delta": delta,
        "lz_probability": float(lz_probability(delta)),
        "p_min": w.p_min,
        "p_max": w.p_max,
        "width": w.width,
        "width_max_over_alpha": control.width_max_over_alpha(delta),
        "delta_star": control.delta_feasibility_bound(alpha),
        "transitionless_feasible": control.transitionless_phase(alpha, delta, -tau).feasible,
        "delta_dcl": control.delta_complete_localization(alpha, "dcl") if 0 < alpha < 1 else float("nan"),
        "delta_ccl": control.delta_complete_localization(alpha, "ccl") if 0 < alpha < 1 else float("nan"),
        "dcl_reached": bool(w.p_min <= 1e-12),
        "ccl_reached": bool(w.p_max >= 1 - 1e-12),
    }
    if phi is not None:
        row["phi"] = phi
        row["p_final"] = float(aim.final_probability_diabatic(alpha, phi, delta, -tau))
        if with_ode:
            row["p_ode"] = float(ode.compare_aim_vs_ode(alpha, phi, delta, tau, cfg).p_ode)
    return row


def cmd_sweep(args) -> int:
    deltas = _grid(args.deltas, "deltas")
    alphas = _grid(args.alphas, "alphas")
    if args.alpha2s is not None:
        if alphas is not None:
            raise UsageError("give --alphas or --alpha2s, not both")
        a2 = _grid(args.alpha2s, "alpha2s")
        if np.any((a2 < 0) | (a2 > 1)):
            raise UsageError("--alpha2s values must lie in [0, 1]")
        alphas = np.sqrt(a2)
    phis = _grid(args.phis, "phis")
    if deltas is None or alphas is None:
        raise UsageError("sweep needs --deltas and one of --alphas / --alpha2s")
    if np.any(deltas < 0) or np.any((alphas < 0) | (alphas > 1)):
        raise UsageError("grid values out of range")
    tau = _tau(args)
    cfg = ode.IntegratorConfig(rtol=args.rtol, atol=args.atol, fixed_step=args.fixed_step)
    cells = [(float(a), float(d), None if phis is None else float(p), tau, args.ode, cfg)
             for a in alphas for d in deltas for p in ([None] if phis is None else phis)]
    rows = ordered_map(_sweep_row, cells)
    columns = {k: [r[k] for r in rows] for k in rows[0]}
    if args.out:
        ode.write_csv(args.out, columns, "lzsm-sweep")
    else:
        sys.stdout.write(",".join(columns) + "\n")
        for r in rows:
            sys.stdout.write(",".join(ode._cell(v) for v in r.values()) + "\n")
    return EXIT_OK


# --- plan ---------------------------------------------------------------------


def cmd_plan(args) -> int:
    delta = _delta(args)
    geo = sequencer.Geometry(tau_a=_tau(args), wait_bias_ratio=args.wait_ratio,
                             extra_periods=args.extra_periods, velocity=args.velocity)
    plan = sequencer.plan_two_passage(args.p_initial, args.p_target, delta, geo, args.phi_initial,
                                      args.p_intermediate, refine=not args.no_refine)
    doc = plan.to_dict()
    if plan.feasible and args.verify:
        final, traj = sequencer.simulate_sequence_ode(plan.initial, plan.sequence, _integrator(args))
        doc["ode"] = {"p0": final.populations[0], "error": abs(final.populations[0] - args.p_target),
                      "norm_drift": traj.norm_drift}
    if plan.feasible and args.pulse_out:
        plan.sequence.to_json(args.pulse_out, plan.initial)
    _emit_json(doc, args.out)
    return EXIT_OK if plan.feasible else EXIT_INFEASIBLE


# --- validate -----------------------------------------------------------------

DEFAULT_VALIDATE_DELTAS = "0,0.05,0.110318,0.5,1"
DEFAULT_VALIDATE_ALPHAS = "0.2,0.4,0.6,0.8,1"
DEFAULT_VALIDATE_PHIS = "0:5.497787143782138:8"


def validation_table(deltas, alphas, phis, tau, config=None) -> list[dict]:
    """AIM-vs-ODE probabilities on the grid; one numerical propagator per adiabaticity."""
    def per_delta(delta):
        rep = ode.compare_aim_vs_ode(alphas[:, None], phis[None, :], delta, tau, config)
        rows = []
        for i, a in enumerate(alphas):
            for j, p in enumerate(phis):
                rows.append({"delta": delta, "alpha": a, "phi": p, "p_aim": float(rep.p_aim[i, j]),
                             "p_ode": float(rep.p_ode[i, j]), "error": float(rep.error[i, j])})
        return rows

    out = []
    for rows in ordered_map(per_delta, [float(d) for d in deltas]):
        out.extend(rows)
    return out


def cmd_validate(args) -> int:
    deltas = _grid(args.deltas, "deltas")
    alphas = _grid(args.alphas, "alphas")
    phis = _grid(args.phis, "phis")
    if np.any(deltas < 0) or np.any((alphas < 0) | (alphas > 1)):
        raise UsageError("grid values out of range")
    tau = _tau(args)
    start = time.perf_counter()
    rows = validation_table(deltas, alphas, phis, tau, ode.IntegratorConfig(rtol=args.rtol, atol=args.atol))
    elapsed = time.perf_counter() - start
    columns = {k: [r[k] for r in rows] for k in rows[0]}
    if args.out:
        ode.write_csv(args.out, columns, "lzsm-validate")
    worst = max(rows, key=lambda r: r["error"])
    ok = worst["error"] <= args.tol
    print(json.dumps({"tau_a": tau, "cells": len(rows), "max_error": worst["error"], "tolerance": args.tol,
                      "passed": ok, "worst": worst, "runtime_s": elapsed}, indent=2))
    return EXIT_OK if ok else EXIT_TOLERANCE


# --- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lzsm", description="Single-passage phase control of a swept qubit.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="trajectory of a sweep or pulse program")
    _add_system(p)
    _add_state(p)
    _add_time(p)
    _add_integrator(p)
    p.add_argument("--phi", default="0", help="initial phase: radians or zero/constructive/destructive")
    p.add_argument("--tau-i", type=float, help="sweep start (overrides -tau)")
    p.add_argument("--tau-f", type=float, help="sweep end (overrides +tau)")
    p.add_argument("--no-sweep", action="store_true", help="empty drive: echo the initial state")
    p.add_argument("--pulse", help="pulse-program JSON instead of a single sweep")
    p.add_argument("--engine", choices=("ode", "aim", "both"), default="ode")
    p.add_argument("--stride", type=int, default=20, help="keep every n-th integrator step")
    p.add_argument("--out", help="output file")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("solve-phase", help="initial phase for a control objective")
    _add_system(p)
    _add_state(p)
    _add_time(p)
    p.add_argument("--mode", choices=MODES, required=True)
    p.add_argument("--target", type=float, help="target occupation for --mode target")
    p.add_argument("--out")
    p.set_defaults(func=cmd_solve_phase)

    p = sub.add_parser("window", help="reachable range of final occupations")
    _add_system(p)
    _add_state(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_window)

    p = sub.add_parser("sweep", help="window / feasibility table over a parameter grid")
    _add_system(p)
    _add_time(p)
    _add_integrator(p)
    p.add_argument("--deltas", help="a,b,c or start:stop:num")
    p.add_argument("--alphas")
    p.add_argument("--alpha2s")
    p.add_argument("--phis")
    p.add_argument("--ode", action="store_true", help="add ODE-oracle probabilities (needs --phis)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("plan", help="two-passage program reaching a target occupation")
    _add_system(p)
    _add_time(p)
    _add_integrator(p)
    p.add_argument("--p-initial", type=float, required=True)
    p.add_argument("--p-target", type=float, required=True)
    p.add_argument("--p-intermediate", type=float)
    p.add_argument("--phi-initial", type=float, default=0.0)
    p.add_argument("--wait-ratio", type=float, default=20.0, help="wait bias in units of the gap")
    p.add_argument("--extra-periods", type=int, default=0)
    p.add_argument("--no-refine", action="store_true", help="keep the closed-form wait durations")
    p.add_argument("--verify", action="store_true", help="run the plan through the ODE oracle")
    p.add_argument("--pulse-out", help="write the pulse program JSON here")
    p.add_argument("--out")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("validate", help="AIM-vs-ODE error report")
    _add_time(p)
    p.add_argument("--deltas", default=DEFAULT_VALIDATE_DELTAS)
    p.add_argument("--alphas", default=DEFAULT_VALIDATE_ALPHAS)
    p.add_argument("--phis", default=DEFAULT_VALIDATE_PHIS)
    p.add_argument("--tol", type=float, default=1e-2)
    p.add_argument("--rtol", type=float, default=1e-12)
    p.add_argument("--atol", type=float, default=1e-14)
    p.add_argument("--velocity", type=float, default=1.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, DomainError, ValueError) as exc:
        print(f"lzsm {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ode.IntegrationError as exc:
        print(f"lzsm {args.command}: integration failed: {exc}", file=sys.stderr)
        print(json.dumps(exc.diagnostics, default=_json_default), file=sys.stderr)
        return EXIT_INTEGRATION
    except OSError as exc:
        print(f"lzsm {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
