"""Numerical toolkit for crown-shaped sign-changing bubble configurations."""
from .appendix import (convolution_bound_a, convolution_bound_b, kernel_decay_report, radial_convolution,
                       split_convolution, sup_constant_b)
from .crown import (CrownSpec, bubble, crown, far_field_constant, kelvin_defect, residual_field, residual_sup,
                    sign_radii, solve_mu)
from .energy import (EnergyConstants, GramResult, c_tilde_exact, c_tilde_stated, constants, energy_domain,
                     energy_entire, gram_matrix, sobolev_energy)
from .errors import (ConsistencyError, CrownlabError, DegenerateProfileError, DimensionMismatchError, DomainError,
                     EstimationError, NonConvergenceError, OutOfRegimeError, ParameterError, QuadratureError,
                     SingularityError)
from .fields import ScalarField
from .fitting import ExpansionReport, loglog_fit
from .geometry import (ball_green, ball_regular_part, critical_exponent, fundamental_solution, green_constant,
                       rotation_matrix, sphere_area)
from .kelvin import (ParamSet, ReducedPoint, all_kernel_values, derivative_identity_check, kernel_field,
                     linearized_residual_check, q_family, theta_transform)
from .projection import defect_sweep, error_norm, error_norm_scaling, f_function, project_leading
from .quadrature import QuadratureSpec, QuadResult, adaptive_box, integrate_annulus, integrate_rn, weighted_norm
from .reduced import OptimizeResult, d_critical, expansion_check, golden_section_argmin, optimize, psi

__all__ = [name for name in dir() if not name.startswith("_")]
