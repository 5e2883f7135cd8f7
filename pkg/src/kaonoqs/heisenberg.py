"""Heisenberg-picture evolution of observables bilinear in a, a+, b, b+.

An observable

    Omega = w_aa a+a + w_ab a+b + w_ba b+a + w_bb b+b

is stored as its coefficient vector, always in the order
(w_aa, w_ab, w_ba, w_bb). The Lindblad generator maps this four dimensional
space into itself, so evolution is a 4x4 linear problem with a closed-form
solution.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .integrate import solve
from .params import DomainError, PhysParams

MAX_ABS_A_L = 0.999


@dataclass(frozen=True)
class BilinearObservable:
    w_aa: complex = 0j
    w_ab: complex = 0j
    w_ba: complex = 0j
    w_bb: complex = 0j

    @classmethod
    def from_vector(cls, v) -> "BilinearObservable":
        v = np.asarray(v, dtype=complex).reshape(4)
        return cls(*(complex(x) for x in v))

    def as_vector(self) -> np.ndarray:
        return np.array([self.w_aa, self.w_ab, self.w_ba, self.w_bb], dtype=complex)

    def as_matrix(self) -> np.ndarray:
        """One-body matrix [[w_aa, w_ab], [w_ba, w_bb]] in the (K0, K0bar) basis."""
        return np.array([[self.w_aa, self.w_ab], [self.w_ba, self.w_bb]], dtype=complex)

    def hermitian_defect(self) -> float:
        return max(abs(self.w_ab - self.w_ba.conjugate()),
                   abs(self.w_aa.imag), abs(self.w_bb.imag))

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        return self.hermitian_defect() <= tol

    def __add__(self, other):
        if not isinstance(other, BilinearObservable):
            return NotImplemented
        return BilinearObservable.from_vector(self.as_vector() + other.as_vector())

    def __sub__(self, other):
        if not isinstance(other, BilinearObservable):
            return NotImplemented
        return BilinearObservable.from_vector(self.as_vector() - other.as_vector())

    def __mul__(self, scalar):
        if isinstance(scalar, BilinearObservable):
            return NotImplemented
        return BilinearObservable.from_vector(complex(scalar) * self.as_vector())

    __rmul__ = __mul__


@dataclass(frozen=True)
class Propagator:
    """4x4 map taking coefficient vectors at time 0 to time t."""

    m: np.ndarray
    t: float

    def apply(self, obs: BilinearObservable) -> BilinearObservable:
        return BilinearObservable.from_vector(self.m @ obs.as_vector())


def _check_params(params: PhysParams) -> None:
    if abs(params.A_L) > MAX_ABS_A_L:
        raise DomainError("A_L", f"|A_L| must not exceed {MAX_ABS_A_L} for p/q to stay finite")


def _check_time(t: float) -> None:
    if not t >= 0:
        raise ValueError(f"t must be non-negative (forward-only semigroup), got {t!r}")


def generator_matrix(params: PhysParams) -> np.ndarray:
    """Matrix G with d/dt (w_aa, w_ab, w_ba, w_bb) = G @ w.

    Column j holds the coefficients of L[e_j] for the monomials
    a+a, a+b, b+a, b+b.
    """
    _check_params(params)
    p, q, A = params.p, params.q, params.A_L
    pq_ = p * q.conjugate()
    qp_ = q * p.conjugate()
    minus = 0.5 * params.delta_gamma - 1j * params.delta_m
    plus = 0.5 * params.delta_gamma + 1j * params.delta_m
    g = params.gamma
    return np.array([
        [-g, -qp_ / (1 + A) * minus, -pq_ / (1 + A) * plus, 0],
        [-pq_ / (1 - A) * minus, -g, 0, -pq_ / (1 + A) * plus],
        [-qp_ / (1 - A) * plus, 0, -g, -qp_ / (1 + A) * minus],
        [0, -qp_ / (1 - A) * plus, -pq_ / (1 - A) * minus, -g],
    ], dtype=complex)


def generator_apply(params: PhysParams, obs: BilinearObservable) -> BilinearObservable:
    return BilinearObservable.from_vector(generator_matrix(params) @ obs.as_vector())


def _closed_form_matrices(params: PhysParams, t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    # e^{-Gamma t} cosh(dG t / 2) and e^{-Gamma t} sinh(dG t / 2) from the two
    # pure exponentials; avoids overflow and cancellation at large t.
    e_s = np.exp(-params.gamma_S * t)
    e_l = np.exp(-params.gamma_L * t)
    e_g = np.exp(-params.gamma * t)
    ch = 0.5 * (e_s + e_l)
    sh = 0.5 * (e_l - e_s)
    co = e_g * np.cos(params.delta_m * t)
    si = e_g * np.sin(params.delta_m * t)

    A = params.A_L
    r = (1 - A) / (1 + A)
    rr = (1 + A) / (1 - A)
    pq = params.p / params.q
    qp = params.q / params.p

    cp = ch + co
    cm = ch - co
    s_minus = sh - 1j * si
    s_plus = sh + 1j * si
    m = np.empty(t.shape + (4, 4), dtype=complex)
    m[..., 0, 0] = cp
    m[..., 0, 1] = -qp * s_minus
    m[..., 0, 2] = -r * pq * s_plus
    m[..., 0, 3] = r * cm
    m[..., 1, 0] = -pq * s_minus
    m[..., 1, 1] = cp
    m[..., 1, 2] = r * pq ** 2 * cm
    m[..., 1, 3] = -r * pq * s_plus
    m[..., 2, 0] = -rr * qp * s_plus
    m[..., 2, 1] = rr * qp ** 2 * cm
    m[..., 2, 2] = cp
    m[..., 2, 3] = -qp * s_minus
    m[..., 3, 0] = rr * cm
    m[..., 3, 1] = -rr * qp * s_plus
    m[..., 3, 2] = -pq * s_minus
    m[..., 3, 3] = cp
    return 0.5 * m


def propagator_matrix(params: PhysParams, t: float) -> Propagator:
    _check_params(params)
    _check_time(t)
    return Propagator(m=_closed_form_matrices(params, t), t=float(t))


def propagator_series(params: PhysParams, times: Sequence[float]) -> np.ndarray:
    """Stack of closed-form propagators, shape (len(times), 4, 4)."""
    _check_params(params)
    times = np.asarray(times, dtype=float)
    if np.any(~(times >= 0)):
        raise ValueError("all times must be non-negative")
    return _closed_form_matrices(params, times)


def propagate_closed_form(params: PhysParams, obs0: BilinearObservable,
                          t: float) -> BilinearObservable:
    return propagator_matrix(params, t).apply(obs0)


def propagate_ode_series(params: PhysParams, obs0: BilinearObservable,
                         times: Sequence[float], rel_tol: float = 1e-10,
                         abs_tol: float = 1e-12) -> np.ndarray:
    """Numerically integrated coefficient vectors, shape (len(times), 4).

    `times` must be non-decreasing; the integration starts at t = 0.
    """
    times = np.asarray(times, dtype=float)
    if np.any(~(times >= 0)):
        raise ValueError("all times must be non-negative")
    gen = generator_matrix(params)
    return solve(lambda t, w: gen @ w, 0.0, obs0.as_vector(), times,
                 rtol=rel_tol, atol=abs_tol)


def propagate_ode(params: PhysParams, obs0: BilinearObservable, t: float,
                  rel_tol: float = 1e-10, abs_tol: float = 1e-12) -> BilinearObservable:
    _check_time(t)
    w = propagate_ode_series(params, obs0, [t], rel_tol, abs_tol)[0]
    return BilinearObservable.from_vector(w)
