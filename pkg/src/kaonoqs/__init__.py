"""Neutral kaons as an open quantum system.

Bilinear observables evolve under a closed 4x4 linear generator; a truncated
Fock-space Lindblad engine serves as an independent oracle.
"""
from .params import DomainError, PhysParams, from_raw, pdg_defaults
from .heisenberg import (
    BilinearObservable, Propagator, generator_matrix, propagate_closed_form,
    propagate_ode, propagator_matrix,
)
from .observables import (
    FlavorCount, KLongState, KShortState, MixedSingle, ObservableKind,
    expectation, make_initial, mean_value, mean_value_cp,
)

__version__ = "0.1.0"

__all__ = [
    "DomainError", "PhysParams", "from_raw", "pdg_defaults",
    "BilinearObservable", "Propagator", "generator_matrix", "propagate_closed_form",
    "propagate_ode", "propagator_matrix",
    "FlavorCount", "KLongState", "KShortState", "MixedSingle", "ObservableKind",
    "expectation", "make_initial", "mean_value", "mean_value_cp",
]
