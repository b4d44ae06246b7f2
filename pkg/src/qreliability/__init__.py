"""Reliability and hazard of two coupled spins under amplitude damping."""
from .core import EPS_CRIT, DerivedParams, ModelParams, Regime, classify_regime, derived_values
from .closedform import (eigen_modes, hazard_analytic, hazard_asymptote,
                         reliability_analytic)
from .extrema import count_hazard_extrema, critical_x_k2, phase_map
from .fpt import MonitoringConfig, estimate, sample_first_passage
from .liouville import evolve_master, evolve_reduced
from .exceptions import (BracketNotFound, DegenerateDissipation, DegenerateSpectrum,
                         EmptySample, InvariantBreach, MethodDisagreement, RegimeError,
                         ReliabilityError, StepTooLarge, ValidationError)

__version__ = "0.1.0"

__all__ = [
    "EPS_CRIT", "DerivedParams", "ModelParams", "Regime", "classify_regime", "derived_values",
    "eigen_modes", "hazard_analytic", "hazard_asymptote", "reliability_analytic",
    "count_hazard_extrema", "critical_x_k2", "phase_map",
    "MonitoringConfig", "estimate", "sample_first_passage",
    "evolve_master", "evolve_reduced",
    "BracketNotFound", "DegenerateDissipation", "DegenerateSpectrum", "EmptySample",
    "InvariantBreach", "MethodDisagreement", "RegimeError", "ReliabilityError",
    "StepTooLarge", "ValidationError",
]
