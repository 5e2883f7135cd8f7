"""Mean values of particle-number and strangeness observables.

States are described by their one-body matrix G[i, j] = <c_i+ c_j> over the
flavor modes (a, b), which is all a bilinear observable can see:
<Omega> = sum_ij w_ij G[i, j].
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Union

import numpy as np

from .heisenberg import BilinearObservable, propagator_series
from .params import DomainError, PhysParams


class ObservableKind(enum.Enum):
    TotalNumber = "total-number"
    Strangeness = "strangeness"
    NumberK0 = "number-k0"
    NumberK0bar = "number-k0bar"
    NumberKS = "number-ks"
    NumberKL = "number-kl"

    @classmethod
    def parse(cls, text: str) -> "ObservableKind":
        key = text.strip().lower().replace("_", "-")
        for kind in cls:
            if key in (kind.value, kind.name.lower()):
                return kind
        raise ValueError(f"unknown observable {text!r}; expected one of "
                         + ", ".join(k.value for k in cls))


@dataclass(frozen=True)
class FlavorCount:
    """Fock state |n, n_bar> with n K0 and n_bar anti-K0."""

    n: int
    n_bar: int

    def __post_init__(self):
        for name in ("n", "n_bar"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 0:
                raise DomainError(name, f"must be a non-negative integer, got {v!r}")

    @property
    def total(self) -> int:
        return self.n + self.n_bar


@dataclass(frozen=True)
class KShortState:
    """|n_S> = (c_S+)^n / sqrt(n!) |0>."""

    n: int

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n < 0:
            raise DomainError("n", f"must be a non-negative integer, got {self.n!r}")

    @property
    def total(self) -> int:
        return self.n


@dataclass(frozen=True)
class KLongState:
    """|n_L> = (c_L+)^n / sqrt(n!) |0>."""

    n: int

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n < 0:
            raise DomainError("n", f"must be a non-negative integer, got {self.n!r}")

    @property
    def total(self) -> int:
        return self.n


@dataclass(frozen=True)
class MixedSingle:
    """p1|K0><K0| + p2|K0bar><K0bar| + w|K0><K0bar| + h.c. + (1-p1-p2)|0><0|."""

    p1: float
    p2: float
    w: complex = 0j

    def __post_init__(self):
        eps = 1e-12
        if not 0 <= self.p1 <= 1:
            raise DomainError("p1", f"must lie in [0, 1], got {self.p1!r}")
        if not 0 <= self.p2 <= 1:
            raise DomainError("p2", f"must lie in [0, 1], got {self.p2!r}")
        if self.p1 + self.p2 > 1 + eps:
            raise DomainError("p1+p2", f"must not exceed 1, got {self.p1 + self.p2!r}")
        if abs(self.w) ** 2 > self.p1 * self.p2 + eps:
            raise DomainError("w", "|w|^2 must not exceed p1*p2")

    @property
    def total(self) -> int:
        return 1


State = Union[FlavorCount, KShortState, KLongState, MixedSingle]


def make_initial(kind: ObservableKind, params: PhysParams) -> BilinearObservable:
    """Coefficient vector of the observable at t = 0."""
    if kind is ObservableKind.TotalNumber:
        return BilinearObservable(1, 0, 0, 1)
    if kind is ObservableKind.Strangeness:
        return BilinearObservable(1, 0, 0, -1)
    if kind is ObservableKind.NumberK0:
        return BilinearObservable(1, 0, 0, 0)
    if kind is ObservableKind.NumberK0bar:
        return BilinearObservable(0, 0, 0, 1)
    p, q, A = params.p, params.q, params.A_L
    if p == 0 or q == 0:
        raise DomainError("p" if p == 0 else "q", "mixing amplitude must be nonzero")
    sign = 1 if kind is ObservableKind.NumberKS else -1
    return BilinearObservable(
        (1 + A) / 2,
        sign * (1 - A) / 2 * p / q,
        sign * (1 + A) / 2 * q / p,
        (1 - A) / 2,
    )


def one_body_matrix(state: State, params: PhysParams) -> np.ndarray:
    """G[i, j] = <c_i+ c_j> with c_0 = a, c_1 = b."""
    if isinstance(state, FlavorCount):
        return np.diag([float(state.n), float(state.n_bar)]).astype(complex)
    if isinstance(state, (KShortState, KLongState)):
        sign = 1 if isinstance(state, KShortState) else -1
        v = np.array([params.p, sign * params.q])
        return state.n * np.outer(v.conj(), v)
    if isinstance(state, MixedSingle):
        w = complex(state.w)
        return np.array([[state.p1, w.conjugate()], [w, state.p2]], dtype=complex)
    raise TypeError(f"unsupported state {state!r}")


def expectation(obs: BilinearObservable, state: State, params: PhysParams) -> float:
    """<Omega> in any supported state; the observable must be Hermitian."""
    value = np.sum(obs.as_matrix() * one_body_matrix(state, params))
    return _real(value)


def expectation_flavor(obs: BilinearObservable, state: FlavorCount) -> float:
    # Off-diagonal monomials have vanishing diagonal elements in |n, n_bar>.
    return _real(obs.w_aa * state.n + obs.w_bb * state.n_bar)


def _real(value: complex, rtol: float = 1e-9) -> float:
    value = complex(value)
    if abs(value.imag) > rtol * max(1.0, abs(value.real)):
        raise ValueError(f"expectation has imaginary part {value.imag!r}; "
                         "observable is not Hermitian")
    return value.real


def closed_form_series(kind: ObservableKind, params: PhysParams, state: State,
                       times) -> np.ndarray:
    """<O(t)> on a time grid by propagating the coefficient vector exactly."""
    ms = propagator_series(params, np.atleast_1d(times))
    w = ms @ make_initial(kind, params).as_vector()
    g = one_body_matrix(state, params).reshape(4)
    values = w @ g
    return np.array([_real(v) for v in values])


# Displayed closed forms. All accept scalar or array t. The occupation
# arguments enter only linearly through their sum and difference.

def _envelopes(params: PhysParams, t):
    t = np.asarray(t, dtype=float)
    e_g = np.exp(-params.gamma * t)
    ch = 0.5 * (np.exp(-params.gamma_S * t) + np.exp(-params.gamma_L * t))
    co = e_g * np.cos(params.delta_m * t)
    return ch, co


def _total_number(params, n, n_bar, t):
    A = params.A_L
    ch, co = _envelopes(params, t)
    return ((ch - A ** 2 * co) * (n + n_bar) - A * (ch - co) * (n - n_bar)) / (1 - A ** 2)


def _strangeness(params, n, n_bar, t):
    A = params.A_L
    ch, co = _envelopes(params, t)
    return ((co - A ** 2 * ch) * (n - n_bar) + A * (ch - co) * (n + n_bar)) / (1 - A ** 2)


def _number_k0(params, n, n_bar, t):
    A = params.A_L
    ch, co = _envelopes(params, t)
    return 0.5 * ((ch + co) * n + (1 + A) / (1 - A) * (ch - co) * n_bar)


def _number_k0bar(params, n, n_bar, t):
    A = params.A_L
    ch, co = _envelopes(params, t)
    return 0.5 * ((1 - A) / (1 + A) * (ch - co) * n + (ch + co) * n_bar)


def _total_number_cp(params, n, n_bar, t):
    ch, _ = _envelopes(params, t)
    return ch * (n + n_bar)


def _strangeness_cp(params, n, n_bar, t):
    _, co = _envelopes(params, t)
    return co * (n - n_bar)


def _number_k0_cp(params, n, n_bar, t):
    ch, co = _envelopes(params, t)
    return ch * (n + n_bar) / 2 + co * (n - n_bar) / 2


def _number_k0bar_cp(params, n, n_bar, t):
    ch, co = _envelopes(params, t)
    return ch * (n + n_bar) / 2 - co * (n - n_bar) / 2


def mean_total_number(params: PhysParams, state: FlavorCount, t):
    return _total_number(params, state.n, state.n_bar, t)


def mean_strangeness(params: PhysParams, state: FlavorCount, t):
    return _strangeness(params, state.n, state.n_bar, t)


def mean_number_K0(params: PhysParams, state: FlavorCount, t):
    return _number_k0(params, state.n, state.n_bar, t)


def mean_number_K0bar(params: PhysParams, state: FlavorCount, t):
    return _number_k0bar(params, state.n, state.n_bar, t)


def mean_total_number_cp(params: PhysParams, state: FlavorCount, t):
    """CP-preserved <N(t)>: the lifetimes of `params` with A_L ignored."""
    return _total_number_cp(params, state.n, state.n_bar, t)


def mean_strangeness_cp(params: PhysParams, state: FlavorCount, t):
    return _strangeness_cp(params, state.n, state.n_bar, t)


def mean_number_K0_cp(params: PhysParams, state: FlavorCount, t):
    return _number_k0_cp(params, state.n, state.n_bar, t)


def mean_number_K0bar_cp(params: PhysParams, state: FlavorCount, t):
    return _number_k0bar_cp(params, state.n, state.n_bar, t)


_DISPLAYED = {
    ObservableKind.TotalNumber: (_total_number, _total_number_cp),
    ObservableKind.Strangeness: (_strangeness, _strangeness_cp),
    ObservableKind.NumberK0: (_number_k0, _number_k0_cp),
    ObservableKind.NumberK0bar: (_number_k0bar, _number_k0bar_cp),
}


def mean_value(kind: ObservableKind, params: PhysParams, state: State, t):
    """Closed-form <O(t)>.

    Uses the displayed formulas for the four flavor-diagonal observables in
    flavor states and exact propagation of the coefficient vector otherwise.
    """
    if isinstance(state, FlavorCount) and kind in _DISPLAYED:
        return _DISPLAYED[kind][0](params, state.n, state.n_bar, t)
    if isinstance(state, KShortState) and kind is ObservableKind.NumberKS:
        return mean_KS_in_nS(params, state.n, t)
    if isinstance(state, KLongState) and kind is ObservableKind.NumberKL:
        return mean_KL_in_nL(params, state.n, t)
    if isinstance(state, KLongState) and kind is ObservableKind.NumberKS:
        return mean_KS_in_nL(params, state.n, t)
    if isinstance(state, KShortState) and kind is ObservableKind.NumberKL:
        return mean_KL_in_nS(params, state.n, t)
    values = closed_form_series(kind, params, state, t)
    return values if np.ndim(t) else values[0]


def mean_value_cp(kind: ObservableKind, params: PhysParams, state: FlavorCount, t):
    if kind not in _DISPLAYED:
        raise ValueError(f"no CP-preserved display for {kind.name}")
    return _DISPLAYED[kind][1](params, state.n, state.n_bar, t)


_LEADING_SIGN_WEIGHT = {
    ObservableKind.TotalNumber: (-1, lambda n, nb: n - nb),
    ObservableKind.Strangeness: (+1, lambda n, nb: n + nb),
    ObservableKind.NumberK0: (+1, lambda n, nb: nb),
    ObservableKind.NumberK0bar: (-1, lambda n, nb: n),
}


def _cp_difference_leading(kind, params, n, n_bar, t):
    sign, weight = _LEADING_SIGN_WEIGHT[kind]
    ch, co = _envelopes(params, t)
    return sign * params.A_L * (ch - co) * weight(n, n_bar)


def cp_difference_leading(kind: ObservableKind, params: PhysParams,
                          state: FlavorCount, t):
    """First-order-in-A_L part of <O(t)> - <O(t)>_CP."""
    if kind not in _LEADING_SIGN_WEIGHT:
        raise ValueError(f"no leading CP difference for {kind.name}")
    return _cp_difference_leading(kind, params, state.n, state.n_bar, t)


def cp_difference_exact(kind: ObservableKind, params: PhysParams,
                        state: FlavorCount, t):
    return mean_value(kind, params, state, t) - mean_value_cp(kind, params, state, t)


# Geiger-Nuttall law and the order-A_L^2 cross fractions.

def mean_KS_in_nS(params: PhysParams, n: int, t):
    return n * np.exp(-params.gamma_S * np.asarray(t, dtype=float))


def mean_KL_in_nL(params: PhysParams, n: int, t):
    return n * np.exp(-params.gamma_L * np.asarray(t, dtype=float))


def mean_KS_in_nL(params: PhysParams, n: int, t):
    return n * params.A_L ** 2 * np.exp(-params.gamma_L * np.asarray(t, dtype=float))


def mean_KL_in_nS(params: PhysParams, n: int, t):
    return n * params.A_L ** 2 * np.exp(-params.gamma_S * np.asarray(t, dtype=float))


def mean_value_occupations(kind: ObservableKind, params: PhysParams, n: float,
                           n_bar: float, t, cp: bool = False):
    """Displayed <O(t)> for real-valued occupations.

    The flavor-state formulas are linear in n and n_bar, so curves labelled
    by n + n_bar and n - n_bar of opposite parity (half-integer n) are still
    well defined; figure datasets use this.
    """
    if kind not in _DISPLAYED:
        raise ValueError(f"no displayed formula for {kind.name}")
    return _DISPLAYED[kind][1 if cp else 0](params, n, n_bar, t)
