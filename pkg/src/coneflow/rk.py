"""Dormand-Prince 5(4) embedded Runge-Kutta pair with adaptive steps.

Kept deliberately small: fixed-length state vectors, max-norm error control
with ``atol + rtol * max(|y_old|, |y_new|)``, standard I-controller with a
safety factor. The fifth-order solution is propagated (local extrapolation).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

# Butcher tableau
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0)
# fifth-order minus embedded fourth-order weights
_E = (
    71 / 57600,
    0.0,
    -71 / 16695,
    71 / 1920,
    -17253 / 339200,
    22 / 525,
    -1 / 40,
)

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 5.0


@dataclass
class Step:
    t: float
    y: np.ndarray
    f: np.ndarray  # derivative at (t, y), reusable as the next first stage


class StepUnderflow(RuntimeError):
    pass


def _initial_step(fun, t0, y0, f0, rtol, atol, direction):
    scale = atol + rtol * np.abs(y0)
    d0 = np.max(np.abs(y0) / scale)
    d1 = np.max(np.abs(f0) / scale)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    y1 = y0 + direction * h0 * f0
    f1 = fun(t0 + direction * h0, y1)
    d2 = np.max(np.abs(f1 - f0) / scale) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1)


def dopri5(
    fun: Callable[[float, np.ndarray], np.ndarray],
    t0: float,
    y0: Sequence[float],
    t_end: float,
    rtol: float,
    atol: float,
    stop: Callable[[Step], bool] | None = None,
    h_min: float = 1e-14,
    max_steps: int = 1_000_000,
) -> tuple[list[Step], str]:
    """Integrate ``y' = fun(t, y)`` from ``t0`` toward ``t_end``.

    Returns the accepted steps (starting with the initial point) and a stop
    reason: ``"t_end"``, ``"event"`` (``stop`` returned True after an accepted
    step) or ``"step_underflow"``.
    """
    direction = 1.0 if t_end >= t0 else -1.0
    y = np.asarray(y0, dtype=float).copy()
    t = float(t0)
    f = fun(t, y)
    steps = [Step(t, y.copy(), f.copy())]
    span = abs(t_end - t0)
    if span == 0.0:
        return steps, "t_end"
    h = min(_initial_step(fun, t, y, f, rtol, atol, direction), span)
    k = [None] * 7
    for _ in range(max_steps):
        if direction * (t_end - t) <= 0:
            return steps, "t_end"
        last = False
        if h >= abs(t_end - t):
            h = abs(t_end - t)
            last = True
        if h < h_min * max(1.0, abs(t)):
            return steps, "step_underflow"
        hs = direction * h
        k[0] = f
        for i in range(1, 7):
            yi = y.copy()
            for j, a in enumerate(_A[i]):
                if a != 0.0:
                    yi += hs * a * k[j]
            if i == 6:
                y_new = yi
            k[i] = fun(t + _C[i] * hs, yi)
        err_vec = hs * sum(e * kk for e, kk in zip(_E, k) if e != 0.0)
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err = float(np.max(np.abs(err_vec) / scale))
        if not np.all(np.isfinite(y_new)) or not np.isfinite(err):
            h *= MIN_FACTOR
            continue
        if err <= 1.0:
            t = t_end if last else t + hs
            y = y_new
            f = k[6]
            step = Step(t, y.copy(), f.copy())
            steps.append(step)
            if stop is not None and stop(step):
                return steps, "event"
            factor = MAX_FACTOR if err == 0.0 else min(MAX_FACTOR, SAFETY * err ** -0.2)
            h *= max(factor, MIN_FACTOR)
        else:
            h *= max(MIN_FACTOR, SAFETY * err ** -0.2)
    raise StepUnderflow("maximum number of steps exceeded")
