"""
Forward/backward processes: schedules, targets, samplers.
"""

from .schedules import beta, beta_integral, m_sigma, backward_beta, backward_decay
from .targets import (
    Target,
    GaussianTarget,
    FunnelTarget,
    GmmTarget,
    BoundConstants,
    benchmark_gaussian,
    funnel_target,
    gmm25_target,
    stationary_target,
    gaussian_score,
    contraction_constants,
    propagated_constants,
    score_time_lipschitz_M,
    closed_form_divergences,
    fisher_to_stationary,
    bound_constants,
    refined_lipschitz,
    marginal,
)
from .diffusion import (
    ScoreSource,
    AnalyticGaussianScore,
    ZeroModifiedScore,
    OffsetScore,
    forward_exact,
    backward_em,
    backward_ei,
    backward_sample,
)

__all__ = [
    "beta",
    "beta_integral",
    "m_sigma",
    "backward_beta",
    "backward_decay",
    "Target",
    "GaussianTarget",
    "FunnelTarget",
    "GmmTarget",
    "BoundConstants",
    "benchmark_gaussian",
    "funnel_target",
    "gmm25_target",
    "stationary_target",
    "gaussian_score",
    "contraction_constants",
    "propagated_constants",
    "score_time_lipschitz_M",
    "closed_form_divergences",
    "fisher_to_stationary",
    "bound_constants",
    "refined_lipschitz",
    "marginal",
    "ScoreSource",
    "AnalyticGaussianScore",
    "ZeroModifiedScore",
    "OffsetScore",
    "forward_exact",
    "backward_em",
    "backward_ei",
    "backward_sample",
]
