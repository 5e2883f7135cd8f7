"""Physical constants for the neutral kaon system.

Units: time in ns, decay widths and the mass difference in ns^-1 (hbar = 1).
The mean mass is kept in MeV/c^2 and never enters the dynamics of bilinear
observables.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import asdict, dataclass


class DomainError(ValueError):
    """Raised when an input lies outside the physically meaningful domain."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


# Experimental inputs (PDG 2014).
PDG_TAU_S = 0.08954  # ns
PDG_TAU_L = 51.16  # ns
PDG_DELTA_M = 5.293  # ns^-1
PDG_A_L = 0.00332
PDG_MASS_MEAN = 497.614  # MeV/c^2
PDG_ABS_EPSILON = 2.228e-3  # documentation only


@dataclass(frozen=True)
class PhysParams:
    tau_S: float
    tau_L: float
    gamma_S: float
    gamma_L: float
    gamma: float
    delta_gamma: float
    delta_m: float
    mass_mean: float
    A_L: float
    p: complex
    q: complex

    @property
    def phase_pq(self) -> float:
        """arg(p/q) in [0, 2*pi)."""
        phase = cmath.phase(self.p / self.q) % (2 * math.pi)
        # A tiny negative angle wraps to exactly 2*pi in floating point.
        return 0.0 if phase >= 2 * math.pi else phase

    def raw(self) -> dict:
        """The inputs that reproduce this parameter set through `from_raw`."""
        return {
            "tau_S_ns": self.tau_S,
            "tau_L_ns": self.tau_L,
            "delta_m_per_ns": self.delta_m,
            "A_L": self.A_L,
            "phase_pq_rad": self.phase_pq,
        }

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("p", "q"):
            z = d.pop(key)
            d[key] = [z.real, z.imag]
        d["phase_pq"] = self.phase_pq
        return d

    def cp_preserved(self) -> "PhysParams":
        """Same lifetimes, mass difference and phase with A_L set to zero."""
        return from_raw(self.tau_S, self.tau_L, self.delta_m, 0.0,
                        self.phase_pq, self.mass_mean)

    def invariant_defects(self) -> dict:
        """Absolute violation of each stored identity; all should be ~1e-16."""
        p2, q2 = abs(self.p) ** 2, abs(self.q) ** 2
        r = (1 + self.A_L) / (1 - self.A_L)
        return {
            "norm": abs(p2 + q2 - 1),
            "asymmetry": abs(p2 - q2 - self.A_L),
            "conjugate_ratio": abs((self.p / self.q).conjugate() - r * self.q / self.p),
            "gamma": abs(self.gamma - (self.gamma_S + self.gamma_L) / 2),
            "delta_gamma": abs(self.delta_gamma - (self.gamma_S - self.gamma_L)),
        }


def from_raw(tau_S: float, tau_L: float, delta_m: float, A_L: float,
             phase_pq: float = 0.0, mass_mean: float = PDG_MASS_MEAN) -> PhysParams:
    """Build a parameter set from lifetimes, mass difference and CP asymmetry.

    p and q are chosen with |p|^2 = (1 + A_L)/2, |q|^2 = (1 - A_L)/2 and
    arg(p/q) = phase_pq, split symmetrically between the two amplitudes.
    """
    for name, value in (("tau_S", tau_S), ("tau_L", tau_L)):
        if not (math.isfinite(value) and value > 0):
            raise DomainError(name, f"lifetime must be positive and finite, got {value!r}")
    if not math.isfinite(delta_m):
        raise DomainError("delta_m", f"must be finite, got {delta_m!r}")
    if not (math.isfinite(A_L) and abs(A_L) < 1):
        raise DomainError("A_L", f"must satisfy |A_L| < 1, got {A_L!r}")
    if not math.isfinite(phase_pq):
        raise DomainError("phase_pq", f"must be finite, got {phase_pq!r}")

    gamma_S = 1.0 / tau_S
    gamma_L = 1.0 / tau_L
    half_phase = cmath.exp(0.5j * phase_pq)
    p = math.sqrt((1 + A_L) / 2) * half_phase
    q = math.sqrt((1 - A_L) / 2) / half_phase
    return PhysParams(
        tau_S=float(tau_S),
        tau_L=float(tau_L),
        gamma_S=gamma_S,
        gamma_L=gamma_L,
        gamma=(gamma_S + gamma_L) / 2,
        delta_gamma=gamma_S - gamma_L,
        delta_m=float(delta_m),
        mass_mean=float(mass_mean),
        A_L=float(A_L),
        p=complex(p),
        q=complex(q),
    )


def pdg_defaults() -> PhysParams:
    return from_raw(PDG_TAU_S, PDG_TAU_L, PDG_DELTA_M, PDG_A_L, 0.0, PDG_MASS_MEAN)
