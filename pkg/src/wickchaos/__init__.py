"""Truncated Wiener-Ito chaos solvers for Wick-type magnetic Schroedinger equations in 1D."""
from .exceptions import *  # noqa: F401,F403
from .field import Grid1D, GridFunction, hzz_norm, l2_norm, sk_norm
from .hermite import brownian_coeff, hermite_fn, hermite_poly, white_noise_coeff
from .multiindex import (MultiIndex, TruncationPolicy, catalan, enumerate_indices,
                         factorial_ratio, kondratiev_series, r_closed, r_recursive, subtract,
                         weight)
from .propagator import CoefficientSet, Hamiltonian, PropagatorConfig, build_hamiltonian, evolve, step
from .solver import (Nonlinearity, SPDEProblem, brute_force_linear, solve_linear,
                     solve_semilinear, solve_wick_square, verify_bounds)
from .wick import (ChaosField, expectation, fit_decay, kondratiev_norm, variance, wick_product,
                   wick_square)

__version__ = "0.1.0"
