"""Numerical laboratory for damped waves with singular damping on the circle and the 2-torus."""

__version__ = "0.1.0"

from .damping import (
    BoundedPiece,
    DampingSpec,
    PowerPiece,
    RatePrediction,
    cell_average,
    classify_normal_p,
    constant_damping,
    eval_pointwise,
    predict_rates,
    sharp_damping,
    sobolev_multiplier_ratio,
)
from .discretize import (
    Grid,
    Interval,
    Periodic,
    State,
    assemble_A,
    assemble_laplacian,
    assemble_P,
    build_grid,
    circle_grid,
    discrete_norm,
)
from .evolution import evolve, evolve_torus, extinction_probe, fit_decay, riesz_project, step_cn
from .quasimode import build_circle_quasimode, build_torus_quasimode, find_mu, matching_objective, solve_halfline
from .resolvent import (
    NumericallySingular,
    a_resolvent_crosscheck,
    fit_exponent,
    resolvent_norm,
    sweep_1d,
    sweep_torus,
    torus_resolvent,
)
from .spectrum import (
    check_kernel_simplicity,
    check_lower_region,
    check_pole_correspondence,
    check_upper_halfplane,
    eig_A,
)
