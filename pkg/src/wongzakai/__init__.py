"""Wong-Zakai and exponential Euler-Maruyama schemes for semilinear SPDEs.

Modules
-------
hilbert    finite truncations of the state space and their norms
semigroup  diagonal, grid-shift and product semigroups with integration kernels
noise      Brownian lattices, polygonal noise, Gaussian moments
model      model bundles, Stratonovich correction, structural probes
catalog    built-in models
schemes    Euler-Maruyama, exponential Euler, Wong-Zakai, reference solution
study      coupled Monte Carlo convergence studies
hjmm       forward-rate curves with stochastic volatility
cli        command-line front end
"""

from .catalog import BUILDERS, build_model, default_x0
from .errors import ArgumentError, NumericalError, ParameterError, StructuralError, WongZakaiError
from .hilbert import HVector, SpaceDescriptor, graph_norm, norm
from .model import SPDEModel, drift_hat, stratonovich_correction, validate_model, with_fd_jacobians
from .noise import BrownianLattice, coarsen, gaussian_even_moment, polygonal_derivative, sup_derivative_moment
from .schemes import (
    SchemeConfig,
    Trajectory,
    euler_maruyama,
    exponential_euler,
    reference_solution,
    simulate,
    wong_zakai,
)
from .semigroup import GridShiftSemigroup, ProductSemigroup, SpectralSemigroup
from .study import ConvergenceReport, StudySpec, fit_rate, run_study, sup_error_moment

__all__ = [
    "BUILDERS", "build_model", "default_x0",
    "ArgumentError", "NumericalError", "ParameterError", "StructuralError", "WongZakaiError",
    "HVector", "SpaceDescriptor", "graph_norm", "norm",
    "SPDEModel", "drift_hat", "stratonovich_correction", "validate_model", "with_fd_jacobians",
    "BrownianLattice", "coarsen", "gaussian_even_moment", "polygonal_derivative", "sup_derivative_moment",
    "SchemeConfig", "Trajectory", "euler_maruyama", "exponential_euler", "reference_solution",
    "simulate", "wong_zakai",
    "GridShiftSemigroup", "ProductSemigroup", "SpectralSemigroup",
    "ConvergenceReport", "StudySpec", "fit_rate", "run_study", "sup_error_moment",
]
