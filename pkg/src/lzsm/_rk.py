"""Compiled Runge-Kutta kernels for the driven two-level Schrodinger equation.

The right-hand side is fixed to

    i d/dt psi = -1/2 (Delta sigma_x + eps(t) sigma_z) psi,   eps(t) = e0 + e1 t

with hbar = 1.  ``y`` has shape (2, k): k independent columns are propagated
together, so k = 1 evolves a spinor and k = 2 builds the full propagator.
"""

from __future__ import annotations

import numba
import numpy as np

# Dormand-Prince 5(4) tableau.
_C2, _C3, _C4, _C5 = 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0
_A21 = 1.0 / 5.0
_A31, _A32 = 3.0 / 40.0, 9.0 / 40.0
_A41, _A42, _A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
_A51, _A52, _A53, _A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
_A61, _A62, _A63, _A64, _A65 = (
    9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0,
)
_B1, _B3, _B4, _B5, _B6 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
_E1 = _B1 - 5179.0 / 57600.0
_E3 = _B3 - 7571.0 / 16695.0
_E4 = _B4 - 393.0 / 640.0
_E5 = _B5 - -92097.0 / 339200.0
_E6 = _B6 - 187.0 / 2100.0
_E7 = -1.0 / 40.0

STATUS_OK = 0
STATUS_MAX_STEPS = 1
STATUS_STEP_UNDERFLOW = 2


@numba.njit(cache=True, nogil=True)
def _rhs(t, y, delta_gap, e0, e1, out):
    eps = e0 + e1 * t
    for j in range(y.shape[1]):
        a = y[0, j]
        b = y[1, j]
        out[0, j] = 0.5j * (delta_gap * b + eps * a)
        out[1, j] = 0.5j * (delta_gap * a - eps * b)


@numba.njit(cache=True, nogil=True)
def dopri5(y0, t0, t1, delta_gap, e0, e1, rtol, atol, h_max, max_steps, stride):
    """Adaptive Dormand-Prince 5(4) from ``t0`` to ``t1``.

    Returns ``(y, ts, ys, n_samples, n_steps, status)``; samples are taken every
    ``stride`` accepted steps (``stride <= 0`` keeps only the endpoints).
    """
    ncol = y0.shape[1]
    cap = 2
    if stride > 0:
        cap = max_steps // stride + 2
    ts = np.empty(cap)
    ys = np.empty((cap, 2, ncol), dtype=np.complex128)
    y = y0.copy()
    ts[0] = t0
    ys[0] = y
    n_samples = 1

    span = t1 - t0
    if span == 0.0:
        return y, ts, ys, n_samples, 0, STATUS_OK
    direction = 1.0 if span > 0 else -1.0

    k1 = np.empty_like(y)
    k2 = np.empty_like(y)
    k3 = np.empty_like(y)
    k4 = np.empty_like(y)
    k5 = np.empty_like(y)
    k6 = np.empty_like(y)
    k7 = np.empty_like(y)
    tmp = np.empty_like(y)
    ynew = np.empty_like(y)

    scale = 0.5 * np.sqrt(delta_gap ** 2 + max((e0 + e1 * t0) ** 2, (e0 + e1 * t1) ** 2)) + 1e-300
    h = min(abs(span), h_max, 0.05 / scale)

    t = t0
    _rhs(t, y, delta_gap, e0, e1, k1)
    n_steps = 0
    status = STATUS_OK
    while direction * (t1 - t) > 0.0:
        if n_steps >= max_steps:
            status = STATUS_MAX_STEPS
            break
        if h < 1e-14 * max(1.0, abs(t)):
            status = STATUS_STEP_UNDERFLOW
            break
        last = False
        if h >= abs(t1 - t):
            h = abs(t1 - t)
            last = True
        hs = direction * h

        tmp[:] = y + hs * _A21 * k1
        _rhs(t + _C2 * hs, tmp, delta_gap, e0, e1, k2)
        tmp[:] = y + hs * (_A31 * k1 + _A32 * k2)
        _rhs(t + _C3 * hs, tmp, delta_gap, e0, e1, k3)
        tmp[:] = y + hs * (_A41 * k1 + _A42 * k2 + _A43 * k3)
        _rhs(t + _C4 * hs, tmp, delta_gap, e0, e1, k4)
        tmp[:] = y + hs * (_A51 * k1 + _A52 * k2 + _A53 * k3 + _A54 * k4)
        _rhs(t + _C5 * hs, tmp, delta_gap, e0, e1, k5)
        tmp[:] = y + hs * (_A61 * k1 + _A62 * k2 + _A63 * k3 + _A64 * k4 + _A65 * k5)
        _rhs(t + hs, tmp, delta_gap, e0, e1, k6)
        ynew[:] = y + hs * (_B1 * k1 + _B3 * k3 + _B4 * k4 + _B5 * k5 + _B6 * k6)
        t_new = t1 if last else t + hs
        _rhs(t_new, ynew, delta_gap, e0, e1, k7)

        err = 0.0
        for i in range(2):
            for j in range(ncol):
                e = hs * (_E1 * k1[i, j] + _E3 * k3[i, j] + _E4 * k4[i, j]
                          + _E5 * k5[i, j] + _E6 * k6[i, j] + _E7 * k7[i, j])
                sc = atol + rtol * max(abs(y[i, j]), abs(ynew[i, j]))
                err += (abs(e) / sc) ** 2
        err = np.sqrt(err / (2 * ncol))

        if err <= 1.0:
            t = t_new
            y[:] = ynew
            k1[:] = k7
            n_steps += 1
            if stride > 0 and n_steps % stride == 0 and n_samples < cap - 1:
                ts[n_samples] = t
                ys[n_samples] = y
                n_samples += 1
            factor = 5.0 if err == 0.0 else min(5.0, 0.9 * err ** -0.2)
        else:
            factor = max(0.2, 0.9 * err ** -0.2)
        h = min(h * factor, h_max)

    if ts[n_samples - 1] != t:
        ts[n_samples] = t
        ys[n_samples] = y
        n_samples += 1
    return y, ts, ys, n_samples, n_steps, status


@numba.njit(cache=True, nogil=True)
def rk4_fixed(y0, t0, t1, delta_gap, e0, e1, n_steps, stride):
    """Classical RK4 with ``n_steps`` equal steps; bit-reproducible."""
    ncol = y0.shape[1]
    cap = 2
    if stride > 0:
        cap = n_steps // stride + 2
    ts = np.empty(cap)
    ys = np.empty((cap, 2, ncol), dtype=np.complex128)
    y = y0.copy()
    ts[0] = t0
    ys[0] = y
    n_samples = 1
    if n_steps <= 0 or t1 == t0:
        return y, ts, ys, n_samples, 0, STATUS_OK

    h = (t1 - t0) / n_steps
    k1 = np.empty_like(y)
    k2 = np.empty_like(y)
    k3 = np.empty_like(y)
    k4 = np.empty_like(y)
    tmp = np.empty_like(y)
    for n in range(n_steps):
        t = t0 + n * h
        _rhs(t, y, delta_gap, e0, e1, k1)
        tmp[:] = y + 0.5 * h * k1
        _rhs(t + 0.5 * h, tmp, delta_gap, e0, e1, k2)
        tmp[:] = y + 0.5 * h * k2
        _rhs(t + 0.5 * h, tmp, delta_gap, e0, e1, k3)
        tmp[:] = y + h * k3
        _rhs(t + h, tmp, delta_gap, e0, e1, k4)
        y[:] = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if stride > 0 and (n + 1) % stride == 0 and n_samples < cap - 1:
            ts[n_samples] = t0 + (n + 1) * h
            ys[n_samples] = y
            n_samples += 1
    if ts[n_samples - 1] != t1:
        ts[n_samples] = t1
        ys[n_samples] = y
        n_samples += 1
    return y, ts, ys, n_samples, n_steps, STATUS_OK
