"""Adaptive Dormand-Prince 5(4) integrator for complex linear systems.

Step size is governed by a PI controller (Gustafsson). The solver lands
exactly on every requested output time, so results on a grid do not depend
on interpolation.
"""
from __future__ import annotations

import functools
from fractions import Fraction as F
from typing import Callable, Optional, Sequence

import numpy as np


class IntegrationError(RuntimeError):
    """The integrator could not reach the requested time."""

    def __init__(self, message: str, t_reached: float):
        super().__init__(f"{message} (reached t={t_reached!r})")
        self.t_reached = t_reached


class StepSizeUnderflow(IntegrationError):
    pass


# Dormand-Prince tableau, kept exact so it can be rendered in any precision.
_C = [F(0), F(1, 5), F(3, 10), F(4, 5), F(8, 9), F(1), F(1)]
_A = [
    [],
    [F(1, 5)],
    [F(3, 40), F(9, 40)],
    [F(44, 45), F(-56, 15), F(32, 9)],
    [F(19372, 6561), F(-25360, 2187), F(64448, 6561), F(-212, 729)],
    [F(9017, 3168), F(-355, 33), F(46732, 5247), F(49, 176), F(-5103, 18656)],
    [F(35, 384), F(0), F(500, 1113), F(125, 192), F(-2187, 6784), F(11, 84)],
]
_B = _A[6] + [F(0)]
_B_LOW = [F(5179, 57600), F(0), F(7571, 16695), F(393, 640),
          F(-92097, 339200), F(187, 2100), F(1, 40)]


@functools.lru_cache(maxsize=None)
def _tableau(real_dtype):
    def conv(xs):
        return np.array([real_dtype(x.numerator) / real_dtype(x.denominator) for x in xs],
                        dtype=real_dtype)
    return conv(_C), [conv(row) for row in _A], conv(_B), conv([b - bl for b, bl in zip(_B, _B_LOW)])


# PI controller constants for a 5th order method.
_ALPHA = 0.7 / 5
_BETA = 0.4 / 5
_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 5.0


def _initial_step(fun, t0, y0, f0, rtol, atol):
    # Hairer, Norsett & Wanner, Solving ODEs I, II.4.
    scale = atol + rtol * np.abs(y0)
    d0 = np.sqrt(np.mean(np.abs(y0 / scale) ** 2))
    d1 = np.sqrt(np.mean(np.abs(f0 / scale) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    y1 = y0 + h0 * f0
    f1 = fun(t0 + h0, y1)
    d2 = np.sqrt(np.mean(np.abs((f1 - f0) / scale) ** 2)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1)


def solve(
    fun: Callable[[float, np.ndarray], np.ndarray],
    t0: float,
    y0: np.ndarray,
    t_eval: Sequence[float],
    rtol: float = 1e-10,
    atol: float = 1e-12,
    post_step: Optional[Callable[[float, np.ndarray], np.ndarray]] = None,
    max_steps: int = 1_000_000,
    dtype=complex,
) -> np.ndarray:
    """Integrate ``y' = fun(t, y)`` from ``t0`` and return y at each of ``t_eval``.

    Parameters
    ----------
    fun : callable
        Right-hand side, ``fun(t, y) -> dy/dt``. Complex arrays are fine.
    t0 : float
        Initial time.
    y0 : ndarray
        Initial state (any shape; flattened internally).
    t_eval : sequence of float
        Non-decreasing output times, all >= t0.
    rtol, atol : float
        Local error tolerances, weighted per component.
    post_step : callable, optional
        ``post_step(t, y) -> y`` applied after every accepted step, e.g. to
        project back onto a constraint manifold.
    dtype : numpy complex dtype
        Working precision; ``np.clongdouble`` gives x87 extended precision.

    Returns
    -------
    ndarray of shape ``(len(t_eval),) + y0.shape``
    """
    if rtol <= 0 or atol <= 0:
        raise ValueError("tolerances must be positive")
    t_eval = np.asarray(t_eval, dtype=float)
    if t_eval.ndim != 1:
        raise ValueError("t_eval must be one-dimensional")
    if t_eval.size and (t_eval[0] < t0 or np.any(np.diff(t_eval) < 0)):
        raise ValueError("t_eval must be non-decreasing and start at or after t0")

    shape = np.shape(y0)
    dtype = np.dtype(dtype)
    real_dtype = np.finfo(dtype).dtype.type
    c_, a_, b_, e_ = _tableau(real_dtype)
    y = np.array(y0, dtype=dtype).ravel()

    def f(t, y):
        return np.asarray(fun(t, y.reshape(shape)), dtype=dtype).ravel()

    out = np.empty((t_eval.size, y.size), dtype=dtype)
    t = float(t0)
    fy = f(t, y)
    h = None
    err_prev = 1e-4
    steps = 0
    k = np.empty((7, y.size), dtype=dtype)

    for i, t_target in enumerate(t_eval):
        while t < t_target:
            if h is None:
                h = _initial_step(f, t, y, fy, rtol, atol)
            span = t_target - t
            landing = h >= span
            h_step = span if landing else h
            if h_step <= 10 * np.spacing(t if t else 1.0):
                raise StepSizeUnderflow("step size underflow", t)

            k[0] = fy
            for s in range(1, 7):
                k[s] = f(t + c_[s] * h_step, y + h_step * (a_[s] @ k[:s]))
            y_new = y + h_step * (b_ @ k)
            err_vec = h_step * (e_ @ k)
            scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
            err = np.sqrt(np.mean(np.abs(err_vec / scale) ** 2))

            if err <= 1.0:
                t = t_target if landing else t + h_step
                if post_step is not None:
                    y_new = np.asarray(post_step(t, y_new.reshape(shape)), dtype=dtype).ravel()
                    fy = f(t, y_new)
                else:
                    fy = k[6]
                y = y_new
                if err == 0.0:
                    factor = _MAX_FACTOR
                else:
                    factor = _SAFETY * err ** -_ALPHA * err_prev ** _BETA
                    factor = min(_MAX_FACTOR, max(_MIN_FACTOR, factor))
                err_prev = max(err, 1e-4)
                # A shortened landing step says nothing about the natural step.
                h = max(h, h_step * factor) if landing else h_step * factor
            else:
                factor = max(_MIN_FACTOR, _SAFETY * err ** -(1 / 5))
                h = h_step * factor

            steps += 1
            if steps > max_steps:
                raise IntegrationError(f"exceeded {max_steps} steps", t)
        out[i] = y
    return out.reshape((t_eval.size,) + shape)
