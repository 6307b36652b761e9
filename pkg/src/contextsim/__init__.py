"""Contextual and noncontextual routes to measuring a degenerate two-qubit observable."""

from .contexts import (
    DIRECT_C,
    PRODUCT_ROUTES,
    VIA_AB,
    VIA_APRIME_BPRIME,
    Route,
    RouteTag,
    StateSpec,
    closed_form_expectations,
    closed_form_final_state,
    density_from_spec,
    final_state_numeric,
    numeric_expectations,
    r_coefficients,
)
from .errors import ContextSimError, DegeneratePreparation, NonDiscriminable, NumericalDrift
from .measurement import DensityMatrix, expectation, lueders_update, von_neumann_update
from .observables import Observable, build_context_operators, build_mermin_square, verify_algebra
from .sampling import ExperimentConfig, run_discrimination_experiment

__version__ = "0.1.0"

__all__ = [
    "DIRECT_C", "VIA_AB", "VIA_APRIME_BPRIME", "PRODUCT_ROUTES",
    "Route", "RouteTag", "StateSpec",
    "closed_form_expectations", "closed_form_final_state", "density_from_spec",
    "final_state_numeric", "numeric_expectations", "r_coefficients",
    "ContextSimError", "DegeneratePreparation", "NonDiscriminable", "NumericalDrift",
    "DensityMatrix", "expectation", "lueders_update", "von_neumann_update",
    "Observable", "build_context_operators", "build_mermin_square", "verify_algebra",
    "ExperimentConfig", "run_discrimination_experiment",
]
