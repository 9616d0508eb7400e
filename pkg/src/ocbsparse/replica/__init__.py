"""Replica-symmetric predictions of the ideal distortion-rate trade-off."""

from .asymptotics import AsymptoticsReport, BasisSizeEstimate, asymptotics_alpha_to_zero, required_basis_size
from .l0 import (
    EntropyCurve,
    L0OrderParams,
    entropy_curve_l0,
    eos_l0_residuals,
    l0_identities,
    l0_zero_point,
    phi0_l0,
    small_mu_limit,
    solve_eos_l0,
)
from .l1 import (
    L1LsOrderParams,
    L1OrderParams,
    eos_l1_residuals,
    eos_l1ls_residuals,
    g_scaled,
    l1_from_rate,
    l1_identities,
    l1ls_from_rate,
    l1ls_identities,
    site_terms,
    solve_eos_l1,
    solve_eos_l1ls,
    sweep_l1,
)
from .quadrature import even_panel_rule, gauss_measure_integral, hermite_rule

__all__ = [
    "AsymptoticsReport",
    "BasisSizeEstimate",
    "asymptotics_alpha_to_zero",
    "required_basis_size",
    "EntropyCurve",
    "L0OrderParams",
    "entropy_curve_l0",
    "eos_l0_residuals",
    "l0_identities",
    "l0_zero_point",
    "phi0_l0",
    "small_mu_limit",
    "solve_eos_l0",
    "L1LsOrderParams",
    "L1OrderParams",
    "eos_l1_residuals",
    "eos_l1ls_residuals",
    "g_scaled",
    "l1_from_rate",
    "l1_identities",
    "l1ls_from_rate",
    "l1ls_identities",
    "site_terms",
    "solve_eos_l1",
    "solve_eos_l1ls",
    "sweep_l1",
    "even_panel_rule",
    "gauss_measure_integral",
    "hermite_rule",
]
