"""Fixed-step classic Runge-Kutta integration."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def step_grid(length: float, step: float) -> tuple[int, float]:
    """Number of steps and the uniform step that land exactly on ``length``."""
    if step <= 0:
        raise ValueError("step must be positive")
    if length < 0:
        raise ValueError("length must be non-negative")
    if length == 0:
        return 0, 0.0
    n = max(1, math.ceil(length / step - 1e-9))
    return n, length / n


@dataclass
class RK4Result:
    s: np.ndarray
    y: np.ndarray
    failed: bool = False
    message: str = ""


def rk4(f, y0, s0: float, length: float, step: float) -> RK4Result:
    """Integrate ``dy/ds = f(s, y)`` over ``[s0, s0 + length]``.

    Stops early, keeping the last finite sample, if ``f`` raises an
    arithmetic error or the state stops being finite.
    """
    n, h = step_grid(length, step)
    y = np.asarray(y0, dtype=float)
    ys = np.empty((n + 1, y.size))
    ss = s0 + h * np.arange(n + 1)
    ys[0] = y
    for k in range(n):
        s = ss[k]
        try:
            k1 = f(s, y)
            k2 = f(s + 0.5 * h, y + 0.5 * h * k1)
            k3 = f(s + 0.5 * h, y + 0.5 * h * k2)
            k4 = f(s + h, y + h * k3)
        except (ZeroDivisionError, ValueError, OverflowError, ArithmeticError) as exc:
            return RK4Result(ss[: k + 1], ys[: k + 1], True, f"step {k}: {exc}")
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(y)):
            return RK4Result(ss[: k + 1], ys[: k + 1], True, f"step {k}: non-finite state")
        ys[k + 1] = y
    return RK4Result(ss, ys)
