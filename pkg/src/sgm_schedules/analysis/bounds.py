"""
Term-by-term KL and W2 upper bounds, their Monte-Carlo estimators, and the
step-size admissibility check.

Grid cell k is the backward cell [t_k, t_{k+1}]; its forward-time image is
[T - t_{k+1}, T - t_k]. Constants C_t, L_t are evaluated at forward times.
"""

import logging
import math
from typing import Dict, Optional, Tuple, Union

import numpy as np
from scipy.integrate import trapezoid

from .. import config
from ..errors import DomainError, LogConcavityError, PreconditionError, UnsupportedOperationError
from ..models import KlBoundReport, SampleBatch, Schedule, StepSizeCheck, TimeGrid, W2BoundReport
from ..process.diffusion import AnalyticGaussianScore, ScoreSource, forward_exact, is_exact_for
from ..process.schedules import beta, beta_integral, beta_max, total_integral
from ..process.targets import (
    BoundConstants,
    GaussianTarget,
    Target,
    bound_constants,
    closed_form_divergences,
    fisher_to_stationary,
    stationary_target,
)
from ..rng import child_seed
from ..score.network import LearnedScore, ScoreNetParams
from .metrics import fit_gaussian

logger = logging.getLogger(__name__)


def _gaussian(target: Target, what: str) -> GaussianTarget:
    if not isinstance(target, GaussianTarget):
        raise UnsupportedOperationError(f"{what} needs a Gaussian target, got {type(target).__name__}")
    return target


def _check_grid(sched: Schedule, grid: TimeGrid) -> None:
    if abs(grid.T - sched.T) > 1e-12 * sched.T:
        raise DomainError("grid and schedule horizons differ")


def cell_weights(sched: Schedule, grid: TimeGrid) -> np.ndarray:
    """int of beta over the forward image of each backward cell."""
    k = np.arange(grid.N)
    hi = sched.T - k * grid.h
    lo = np.maximum(sched.T - (k + 1) * grid.h, 0.0)
    return np.asarray(beta_integral(sched, lo, hi))


def cell_subpoints(sched: Schedule, grid: TimeGrid, n_sub: int = config.CELL_SUBPOINTS) -> np.ndarray:
    """(N, n_sub + 1) forward times covering the forward image of each backward cell."""
    if n_sub < 1:
        raise DomainError("need at least one subinterval per cell")
    k = np.arange(grid.N)[:, None]
    lo = np.maximum(sched.T - (k + 1) * grid.h, 0.0)
    hi = sched.T - k * grid.h
    return lo + (hi - lo) * np.linspace(0.0, 1.0, n_sub + 1)[None, :]


def cell_integrals(fn, sched: Schedule, grid: TimeGrid, n_sub: int = config.CELL_SUBPOINTS) -> np.ndarray:
    """Composite trapezoid of fn(s) * beta(s) over each cell; fn vectorized in s."""
    s = cell_subpoints(sched, grid, n_sub)
    values = np.asarray(fn(s)) * np.asarray(beta(sched, s))
    return trapezoid(values, s, axis=1)


def _mc_cell_errors(
    target: GaussianTarget,
    sched: Schedule,
    grid: TimeGrid,
    score: ScoreSource,
    n_mc: int,
    seed: int,
    stream_name: str,
) -> np.ndarray:
    """(N, n_mc) squared errors ||s_tilde - s_tilde_theta||^2 at forward time T - t_k."""
    truth = AnalyticGaussianScore(target, sched)
    errors = np.empty((grid.N, n_mc))
    for k in range(grid.N):
        tau = sched.T - k * grid.h
        x = forward_exact(target, sched, tau, n_mc, child_seed(seed, stream_name, k)).data
        diff = truth.modified(tau, x) - score.modified(tau, x)
        errors[k] = np.sum(diff ** 2, axis=1)
    return errors


# ---------- KL bound ----------

def kl_bound(
    target: Target,
    sched: Schedule,
    grid: TimeGrid,
    score: ScoreSource,
    n_mc: int = config.N_MC,
    seed: int = 0,
    refined: bool = False,
) -> KlBoundReport:
    """
    E1 = KL(pi_data || pi_inf) exp(-int beta / sigma2)         (refined: exponent doubled)
    E2 = sum_k E||s_tilde - s_tilde_theta||^2 * int_cell beta    (Monte Carlo, 0 for exact)
    E3 = 2 h beta(T) max{h beta(T) / (4 sigma2), 1} I(pi_data | pi_inf)
    """
    g = _gaussian(target, "kl_bound")
    _check_grid(sched, grid)
    s2 = sched.sigma2
    kl, _ = closed_form_divergences(g, stationary_target(g.dim, s2))
    fisher = fisher_to_stationary(g, s2)
    integral = total_integral(sched)

    log_e1 = math.log(kl) - integral / s2 if kl > 0 else -math.inf
    e1 = math.exp(log_e1)

    refined_ok = g.lam_max <= s2
    if refined and not refined_ok:
        raise PreconditionError(
            f"refined E1 needs lam_max <= sigma2 (lam_max={g.lam_max:.6g}, sigma2={s2:g})"
        )
    e1_refined = math.exp(log_e1 - integral / s2) if refined_ok else None
    if not refined_ok:
        logger.warning("refined E1 unavailable: lam_max=%.6g > sigma2=%g", g.lam_max, s2)

    if is_exact_for(score, g, sched):
        e2, e2_std = 0.0, 0.0
    else:
        if n_mc < 2:
            raise DomainError("Monte-Carlo E2 needs n_mc >= 2")
        errors = _mc_cell_errors(g, sched, grid, score, n_mc, seed, "mc")
        weights = cell_weights(sched, grid)
        e2 = float(weights @ errors.mean(axis=1))
        e2_std = float(np.sqrt(np.sum(weights ** 2 * errors.var(axis=1, ddof=1)) / n_mc))

    hb = grid.h * beta_max(sched)
    h_ok = hb <= 4.0 * s2
    if not h_ok:
        logger.warning("h beta(T) = %.4g exceeds 4 sigma2; using the max-form discretization term", hb)
    e3 = 2.0 * hb * max(hb / (4.0 * s2), 1.0) * fisher

    first = e1_refined if refined else e1
    return KlBoundReport(
        e1=e1,
        e2=e2,
        e3=e3,
        total=first + e2 + e3,
        e1_refined=e1_refined,
        refined_used=refined,
        log_e1=log_e1,
        e2_mc_std=e2_std,
        h_condition_ok=h_ok,
        schedule=sched.to_dict(),
        n_steps=grid.N,
    )


# ---------- W2 bound ----------

def check_step_size(
    sched: Schedule, grid: TimeGrid, constants: BoundConstants, with_M: bool = False
) -> StepSizeCheck:
    """
    h < 2 C_bar_t (m_tilde_{k+1} / m_tilde_k) / (beta_bar(t_k) max_cell L_bar L_bar_t)
    at every subpoint t of every cell; with_M adds M to the denominator.
    margin = min over cells of (rhs - h) / rhs.
    """
    _check_grid(sched, grid)
    s = cell_subpoints(sched, grid)
    C = np.asarray(constants.C_of_t(s))
    L = np.asarray(constants.L_of_t(s))
    ratio = np.exp(-cell_weights(sched, grid) / (2.0 * sched.sigma2))
    b_start = np.asarray(beta(sched, sched.T - np.arange(grid.N) * grid.h))
    denom = b_start[:, None] * L.max(axis=1, keepdims=True) * L
    if with_M:
        denom = denom + constants.M
    with np.errstate(divide="ignore", invalid="ignore"):
        rhs = 2.0 * C * ratio[:, None] / denom
        rhs = np.where(denom > 0, rhs, np.where(C > 0, np.inf, -np.inf))
        rel = np.where(rhs > 0, (rhs - grid.h) / rhs, -np.inf)
    per_cell = rel.min(axis=1)
    worst = int(np.argmin(per_cell))
    ok = bool(np.all(rhs > grid.h))
    if not ok:
        logger.warning("step-size condition fails (worst cell %d, margin %.4g)", worst, per_cell[worst])
    return StepSizeCheck(ok=ok, margin=float(per_cell[worst]), worst_cell=worst)


def w2_bound(
    target: Optional[Target],
    sched: Schedule,
    grid: TimeGrid,
    constants: Optional[BoundConstants] = None,
    eps: Optional[float] = None,
) -> W2BoundReport:
    """
    E1 = W2(pi_data, pi_inf) exp(-int beta (1 + C_t sigma2) / sigma2)
    E2 = sum_k J_k (sqrt(2 h beta(T)) / sigma + h beta(T) / (2 sigma2) + 2 J_k) B
         + eps T beta(T) + M h T beta(T) (1 + 2B),       J_k = int_cell L beta
    """
    _check_grid(sched, grid)
    if constants is None:
        constants = bound_constants(_gaussian(target, "w2_bound"), sched, grid)
    eps = 0.0 if eps is None else float(eps)
    if eps < 0:
        raise DomainError("eps must be >= 0")
    s2 = sched.sigma2

    s = cell_subpoints(sched, grid)
    C = np.asarray(constants.C_of_t(s))
    if np.min(C) < 0:
        raise LogConcavityError(
            f"C_t < 0 on the grid (min {np.min(C):.4g}); rescale the data so lam_max < sigma2 "
            "(preprocess 'rescale')"
        )
    b = np.asarray(beta(sched, s))
    int_bc = float(np.sum(trapezoid(b * C, s, axis=1)))
    w2_stat = constants.w2_to_stationary or 0.0
    e1 = w2_stat * math.exp(-(total_integral(sched) / s2 + int_bc))

    J = trapezoid(np.asarray(constants.L_of_t(s)) * b, s, axis=1)
    h, T = grid.h, sched.T
    bT = beta_max(sched)
    B = constants.B
    e2_disc = float(np.sum(J * (math.sqrt(2.0 * h * bT) / math.sqrt(s2) + h * bT / (2.0 * s2) + 2.0 * J)) * B)
    e2_eps = eps * T * bT
    e2_time = constants.M * h * T * bT * (1.0 + 2.0 * B)

    check = check_step_size(sched, grid, constants)
    return W2BoundReport(
        e1=e1,
        e2_disc=e2_disc,
        e2_eps=e2_eps,
        e2_time=e2_time,
        total=e1 + e2_disc + e2_eps + e2_time,
        step_size_ok=check.ok,
        step_size_margin=check.margin,
        eps=eps,
        M=constants.M,
        B=B,
        schedule=sched.to_dict(),
        n_steps=grid.N,
    )


def w2_rate_constants(
    constants: BoundConstants, sched: Schedule, grid: TimeGrid, L0: Optional[float] = None
) -> Dict[str, float]:
    """
    Rate form of the W2 bound: E1 + c1 sqrt(h) + c2 h + eps T beta(T) with
    c1 = L0 beta(T) T sqrt(2 beta(T)) / sigma,
    c2 = beta(T) T (L0 (1/(2 sigma2) + 2 L0) beta(T) B + M (1 + 2B)).
    """
    L0 = float(constants.L_of_t(0.0)) if L0 is None else float(L0)
    bT, T, s2, B = beta_max(sched), sched.T, sched.sigma2, constants.B
    c1 = L0 * bT * T * math.sqrt(2.0 * bT) / math.sqrt(s2)
    c2 = bT * T * (L0 * (1.0 / (2.0 * s2) + 2.0 * L0) * bT * B + constants.M * (1.0 + 2.0 * B))
    return {"c1": c1, "c2": c2, "rate_terms": c1 * math.sqrt(grid.h) + c2 * grid.h}


def max_step_from_c0(c_star: float, l_star: float, sched: Schedule, M: Optional[float] = None) -> float:
    """
    Closed-form step size under which the step-size condition holds for a
    C*-strongly log-concave, L*-smooth target (C*, L* > 1/sigma2). With M,
    the stricter threshold of the M-augmented condition.
    """
    s2 = sched.sigma2
    if not (c_star > 1.0 / s2 and l_star > 1.0 / s2):
        raise PreconditionError("closed-form step size needs C*, L* > 1/sigma2")
    bT = beta_max(sched)
    a = s2 * c_star - 1.0
    if M is None:
        return min(
            math.log(2.0) * 2.0 * s2 / bT,
            a / (s2 * c_star * (s2 * l_star + 1.0) * l_star * bT),
            a / ((s2 * l_star - 1.0) * l_star * bT),
        )
    m_T2 = math.exp(-total_integral(sched) / s2)
    return min(
        math.log(2.0) * 2.0 * s2 / bT,
        a / (s2 * M + bT * l_star * (s2 * l_star - 1.0)),
        a / (s2 * c_star) * m_T2 * (1.0 - m_T2) / (s2 * M * (1.0 - m_T2) + bT * l_star * m_T2),
        a * l_star / (s2 * c_star * (s2 * l_star + 1.0) * (M + bT * l_star ** 2)),
    )


# ---------- epsilon ----------

def estimate_eps(
    target: Target,
    sched: Schedule,
    grid: TimeGrid,
    score: Union[ScoreSource, ScoreNetParams],
    n_mc: int = config.N_MC,
    seed: int = 0,
) -> Tuple[float, int]:
    """
    eps = max over k of sqrt(E||s_tilde(T - t_k, X) - s_tilde_theta(T - t_k, X)||^2)
    under forward samples X at T - t_k. Returns (eps, argmax cell).
    """
    g = _gaussian(target, "estimate_eps")
    _check_grid(sched, grid)
    if isinstance(score, ScoreNetParams):
        score = LearnedScore(score, sched.sigma2)
    if n_mc < 1:
        raise DomainError("need n_mc >= 1")
    errors = _mc_cell_errors(g, sched, grid, score, n_mc, seed, "eps")
    rms = np.sqrt(errors.mean(axis=1))
    k_max = int(np.argmax(rms))
    return float(rms[k_max]), k_max


def empirical_bound_constants(batch: SampleBatch, sched: Schedule, grid: TimeGrid) -> BoundConstants:
    """Constants of the Gaussian fitted to a (preprocessed) sample."""
    return bound_constants(fit_gaussian(batch), sched, grid)
