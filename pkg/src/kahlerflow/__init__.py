"""Numerical laboratory for U(n)-invariant Kähler metrics under Kähler-Ricci flow."""

from .analysis import Certificate, MixedSignReport, certify_initial, compare_dt_psi_r, detect_mixed_sign
from .calabi import ExpansionFit, ExtensionVerdict, check_extension, fit_expansion
from .flow import FlowInvariantError, FlowState, SolverConfig, analytic_dt_psi_r, evolve, init_state, step
from .geometry import HermitianForm, PointCoordinates, metric_at, ricci_at, ricci_eigenpairs
from .profile import Mode, ProfileParams, RadialProfile, build_profile, sample

__all__ = [
    "Certificate", "MixedSignReport", "certify_initial", "compare_dt_psi_r", "detect_mixed_sign",
    "ExpansionFit", "ExtensionVerdict", "check_extension", "fit_expansion",
    "FlowInvariantError", "FlowState", "SolverConfig", "analytic_dt_psi_r", "evolve", "init_state", "step",
    "HermitianForm", "PointCoordinates", "metric_at", "ricci_at", "ricci_eigenpairs",
    "Mode", "ProfileParams", "RadialProfile", "build_profile", "sample",
]
