"""Driven Coulomb chain on a ring.

Constructs equal-effective-force static configurations, integrates the
stiff driven-damped dynamics in deviation variables, solves the linearized
system analytically mode by mode, iterates the nonlinear deviation
equations to their fixed point in a weighted supremum norm, and measures
macro-homogeneity of the resulting flow.
"""

from .params import (SystemParams, DerivedScales, RegimeReport,
                     from_exponents, calibrate_friction, check_conditions,
                     derived_scales)
from .forcefield import (ForceProfile, ForceConstants, bump_profile,
                         zero_profile, table_profile, force_eval, constants)
from .equilibrium import (EquilibriumConfig, compute_w, solve,
                          minimize_virtual_potential, solve_via_series,
                          virtual_potential, verify)
from .spectral import (ModeField, ModeRoots, dft, idft, roots, mode_solution,
                       linear_solution, bound_suite)
from .dynamics import (Trajectory, DeviationTrajectory, simulate_full,
                       simulate_linear_cutoff, residual_terms,
                       consistency_identity)
from .picard import (bt_norm, free_term, apply_K, solve_fixed_point,
                     contraction_probe, kernel_bounds)
from .diagnostics import homogeneity, bound_dashboard

__version__ = "0.1.0"
