"""Optimal non-reversible perturbations of Ornstein-Uhlenbeck processes."""

from nonrev.basis import BalancedBasis, build_balanced_basis, solve_tstar
from nonrev.errors import NonrevError, NumericalError, ValidationError
from nonrev.gaussian import (
    GaussianState,
    evolve,
    gaussian_bound,
    general_density_bound,
    l2_distance_to_equilibrium,
    threshold_t0,
    threshold_talpha,
)
from nonrev.hermite import HermiteTruncation, hermite_report
from nonrev.linalg import eig_general, expm, read_matrix, validate_spd, write_matrix
from nonrev.optimal import (
    EigenLadder,
    OptimalPair,
    build_optimal_pair,
    check_divergence_free,
    default_ladder,
    prefactor_constants,
    spectrum_report,
)
from nonrev.presets import make_laplacian, run_preset
from nonrev.sde import SdeConfig, equilibrium_quadrature_2d, gradient_drift, simulate
from nonrev.semigroup import decay_curve, fit_rate, semigroup_bounds, two_dim_report

__version__ = "0.1.0"
