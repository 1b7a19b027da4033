"""Spectral simulation of a strongly magnetized 2D nonlinear Schroedinger model
and of its averaged (non-dispersive) effective model."""
from ._kernels import BACKEND
from .averaging import F_av, F_theta, G_av, G_theta, Gcal, ThetaRule, default_rule, identity_residual
from .coupling import CouplingExpr, EvalError, ParseError, parse
from .field import (Grid, SpectralField, apply_dy, apply_H, apply_Heps, apply_x, basis_field,
                    from_profile, inner, l2_norm, make_grid, pointwise_nonlin, project_Pn,
                    project_Pn_perp, random_field, sigma_eps_norm, sigma_norm)
from .hermite import HermiteBasis, build_basis, chi_norm_pow, coupling_v, eigenvalue
from .propagators import DisplacementTable, build_displacement, flow_full_linear, flow_H, flow_y
from .solvers import (ModelParams, NumericalAbort, Trajectory, compare_to_effective,
                      filter_trajectory, polarized_exact, solve_effective, solve_full)

__version__ = "0.1.0"

__all__ = [
    "apply_dy",
    "apply_H",
    "apply_Heps",
    "apply_x",
    "BACKEND",
    "basis_field",
    "build_basis",
    "build_displacement",
    "chi_norm_pow",
    "compare_to_effective",
    "coupling_v",
    "CouplingExpr",
    "default_rule",
    "DisplacementTable",
    "eigenvalue",
    "EvalError",
    "F_av",
    "F_theta",
    "filter_trajectory",
    "flow_full_linear",
    "flow_H",
    "flow_y",
    "from_profile",
    "G_av",
    "G_theta",
    "Gcal",
    "Grid",
    "HermiteBasis",
    "identity_residual",
    "inner",
    "l2_norm",
    "make_grid",
    "ModelParams",
    "NumericalAbort",
    "parse",
    "ParseError",
    "pointwise_nonlin",
    "polarized_exact",
    "project_Pn",
    "project_Pn_perp",
    "random_field",
    "sigma_eps_norm",
    "sigma_norm",
    "solve_effective",
    "solve_full",
    "SpectralField",
    "ThetaRule",
    "Trajectory",
]
