"""Dormand-Prince 5(4) integrator with step rejection and Hermite dense output.

Small and dependency-free on purpose: the fluid solver needs hooks that a
black-box solver does not offer (stop on a state predicate, project after
each accepted step, certified runtime bounds).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ToleranceNotMet

_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 5.0


@dataclass
class OdeSolution:
    """Accepted steps of an integration, with cubic Hermite interpolation."""

    t: np.ndarray
    y: np.ndarray
    dydt: np.ndarray
    stopped: bool = False

    def __call__(self, t):
        return hermite(self.t, self.y, self.dydt, t)


def hermite(ts, ys, dys, t):
    """Piecewise cubic Hermite interpolant through ``(ts, ys, dys)``.

    ``t`` may be a scalar or an array; the result has shape ``t.shape + y.shape[1:]``.
    Queries outside ``[ts[0], ts[-1]]`` raise ``ValueError``.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < ts[0]) or np.any(t > ts[-1]):
        raise ValueError(f"query outside [{ts[0]}, {ts[-1]}]")
    flat = np.atleast_1d(t).ravel()
    idx = np.clip(np.searchsorted(ts, flat, side="right") - 1, 0, len(ts) - 2)
    t0, t1 = ts[idx], ts[idx + 1]
    h = t1 - t0
    s = ((flat - t0) / h)[:, None]
    h = h[:, None]
    y0, y1, d0, d1 = ys[idx], ys[idx + 1], dys[idx], dys[idx + 1]
    h00 = (1 + 2 * s) * (1 - s) ** 2
    h10 = s * (1 - s) ** 2
    h01 = s * s * (3 - 2 * s)
    h11 = s * s * (s - 1)
    out = h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1
    return out.reshape(t.shape + ys.shape[1:])


def dopri5(f: Callable[[float, np.ndarray], np.ndarray], y0, t_end: float, *,
           rtol: float, atol: float, h0: float | None = None,
           stop: Callable[[float, np.ndarray], bool] | None = None,
           project: Callable[[np.ndarray], np.ndarray] | None = None,
           max_steps: int = 1_000_000) -> OdeSolution:
    """Integrate ``y' = f(t, y)`` from ``t = 0`` to ``t_end``.

    ``stop(t, y)`` ends the integration after the first accepted step where it
    returns True.  ``project(y)`` maps each accepted state back onto a
    constraint set before the next step.
    """
    y = np.array(y0, dtype=float)
    t = 0.0
    k1 = f(t, y)
    ts, ys, ds = [t], [y.copy()], [k1.copy()]
    if h0 is None:
        scale = atol + rtol * np.abs(y)
        d0 = np.sqrt(np.mean((y / scale) ** 2))
        d1 = np.sqrt(np.mean((k1 / scale) ** 2))
        h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
        h0 = min(h0, t_end)
    h = h0
    stopped = False
    ks = np.empty((7,) + y.shape)
    for _ in range(max_steps):
        if t >= t_end:
            break
        h = min(h, t_end - t)
        if h <= 1e-14 * max(1.0, abs(t)):
            raise ToleranceNotMet(f"step size underflow at t={t}")
        ks[0] = k1
        for s in range(1, 7):
            ks[s] = f(t + _C[s] * h, y + h * np.tensordot(_A[s], ks[:s], axes=1))
        y_new = y + h * np.tensordot(_B5, ks, axes=1)
        err = h * np.tensordot(_E, ks, axes=1)
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err_norm = float(np.sqrt(np.mean((err / scale) ** 2)))
        if not np.isfinite(err_norm):
            h *= MIN_FACTOR
            continue
        if err_norm <= 1.0:
            t = t + h if t + h < t_end else t_end
            y = y_new
            k1 = ks[6].copy()
            if project is not None:
                y = project(y)
                k1 = f(t, y)
            ts.append(t)
            ys.append(y.copy())
            ds.append(k1.copy())
            factor = MAX_FACTOR if err_norm == 0 else min(MAX_FACTOR, SAFETY * err_norm ** -0.2)
            h *= factor
            if stop is not None and stop(t, y):
                stopped = True
                break
        else:
            h *= max(MIN_FACTOR, SAFETY * err_norm ** -0.2)
    else:
        raise ToleranceNotMet(f"maximum number of steps ({max_steps}) reached at t={t}")
    return OdeSolution(np.array(ts), np.array(ys), np.array(ds), stopped)
