"""Numerical laboratory for the normalized p-Laplacian Dirichlet problem.

Solves -Lap_p^N u = 1 with u = 0 on the boundary of analytic 2-D domains
by a dynamic-programming mean-value scheme, and provides the diagnostics
that probe the overdetermined-problem rigidity: viscosity envelope checks,
Pucci differential inequalities, boundary Neumann constancy scoring,
moving-plane reflection comparison, corner identities and P-functions.
"""

from .errors import (ConfigurationError, CoverageError,
                     DegenerateGradientError, DomainRangeError,
                     ParameterError, PnslError)
from .fields import GridField, load_checkpoint, save_checkpoint
from .geometry import (Annulus, BoundarySample, Classification, Disk,
                       DomainSpec, Ellipse, Grid, Hyperplane, Stadium,
                       boundary_probe, classify_grid, domain_from_dict,
                       reflect, sdf_eval)
from .operators import (Jet, PParams, SymMatrix, classical_field_eval,
                        envelopes, f_value, pucci, sym_eigs)
from .oracles import (AnnulusInftySolution, DppWeights, RadialSolution,
                      dpp_weights, envelope_bruteforce, hopf_constant,
                      infty_annulus, p1_ball_radius, radial_annulus_profile,
                      radial_ball)
from .solver import (ConvergenceReport, ProblemSpec, SolverConfig, dpp_sweep,
                     make_grid, policy_solve, residual, solve)
from .diagnostics import (CornerReport, PFunctionField, PucciReport,
                          SymmetryReport, ViscosityReport, boundary_identity,
                          constancy_score, corner_quantities, moving_plane,
                          neumann_trace, p_function, pucci_check,
                          viscosity_check)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
