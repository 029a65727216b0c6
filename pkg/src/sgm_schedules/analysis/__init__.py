"""
Bounds, empirical metrics, preprocessing and schedule tuning.
"""

from .metrics import fit_gaussian, gauss_kl, gauss_w2, sliced_w2, knn_kl, nll, evaluate
from .preprocess import PreprocessTransform, fit_transform, inverse, transfer_bound, transform_gaussian
from .bounds import (
    kl_bound,
    w2_bound,
    check_step_size,
    estimate_eps,
    empirical_bound_constants,
    w2_rate_constants,
    max_step_from_c0,
)
from .tuner import SweepSettings, sweep, refine, compare_schedules, select_a_star, a_grid

__all__ = [
    "fit_gaussian",
    "gauss_kl",
    "gauss_w2",
    "sliced_w2",
    "knn_kl",
    "nll",
    "evaluate",
    "PreprocessTransform",
    "fit_transform",
    "inverse",
    "transfer_bound",
    "transform_gaussian",
    "kl_bound",
    "w2_bound",
    "check_step_size",
    "estimate_eps",
    "empirical_bound_constants",
    "w2_rate_constants",
    "max_step_from_c0",
    "SweepSettings",
    "sweep",
    "refine",
    "compare_schedules",
    "select_a_star",
    "a_grid",
]
