"""
Forward noising and backward sampling.

Backward time t in [0, T] runs from noise (t = 0) to data (t = T) with
beta_bar(t) = beta(T - t). Samplers take a ScoreSource returning the
modified score s_tilde(t, x) = grad log p_t(x) + x / sigma2 at forward
time t.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Optional

import numpy as np

from .. import config
from ..errors import DivergenceError, DomainError
from ..models import SampleBatch, Schedule, TimeGrid
from ..rng import stream
from .schedules import beta, beta_integral, m_sigma
from .targets import GaussianTarget, Target

logger = logging.getLogger(__name__)

SCHEMES = ("em", "ei")


# ---------- Score sources ----------

class ScoreSource:
    """
    Anything that can evaluate the score on a batch at forward time t.

    Subclasses implement raw(); modified() adds x / sigma2.
    """

    dim: int
    sigma2: float

    def raw(self, t: float, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def modified(self, t: float, x: np.ndarray) -> np.ndarray:
        return self.raw(t, x) + x / self.sigma2


class AnalyticGaussianScore(ScoreSource):
    """Exact score of a Gaussian target under a schedule."""

    def __init__(self, target: GaussianTarget, sched: Schedule):
        self.target = target
        self.sched = sched
        self.dim = target.dim
        self.sigma2 = sched.sigma2

    def raw(self, t: float, x: np.ndarray) -> np.ndarray:
        return self.target.score(self.sched, t, x)


class ZeroModifiedScore(ScoreSource):
    """s_tilde = 0, i.e. the exact score of pi_inf."""

    def __init__(self, dim: int, sigma2: float = config.SIGMA2):
        self.dim = dim
        self.sigma2 = sigma2

    def raw(self, t: float, x: np.ndarray) -> np.ndarray:
        return -x / self.sigma2

    def modified(self, t: float, x: np.ndarray) -> np.ndarray:
        return np.zeros_like(x)


class OffsetScore(ScoreSource):
    """Another source shifted by a constant vector (controlled-error studies)."""

    def __init__(self, base: ScoreSource, offset: np.ndarray):
        self.base = base
        self.offset = np.asarray(offset, dtype=np.float64)
        self.dim = base.dim
        self.sigma2 = base.sigma2

    def raw(self, t: float, x: np.ndarray) -> np.ndarray:
        return self.base.raw(t, x) + self.offset


def is_exact_for(score: ScoreSource, target: Target, sched: Schedule) -> bool:
    """True when score is the analytic score of (target, sched)."""
    return (
        isinstance(score, AnalyticGaussianScore)
        and score.target is target
        and score.sched == sched
    )


# ---------- Forward process ----------

def noise(x0: np.ndarray, sched: Schedule, t, z: np.ndarray) -> np.ndarray:
    """X_t = m_t X_0 + sigma_t Z; t scalar or one time per row."""
    m, sig2 = m_sigma(sched, t)
    m = np.asarray(m, dtype=np.float64)
    sd = np.sqrt(np.asarray(sig2, dtype=np.float64))
    if m.ndim:
        m, sd = m[:, None], sd[:, None]
    return m * x0 + sd * z


def forward_exact(target: Target, sched: Schedule, t: float, n: int, seed: int) -> SampleBatch:
    """Exact draws of X_t for X_0 ~ target."""
    if n < 1:
        raise DomainError("need n >= 1 samples")
    x0 = target.sample(n, seed).data
    if t == 0:
        return SampleBatch(x0, seed=seed, stage="forward", t=0.0)
    z = stream(seed, "forward").standard_normal(x0.shape)
    return SampleBatch(noise(x0, sched, t, z), seed=seed, stage="forward", t=float(t))


def forward_em(x0: np.ndarray, sched: Schedule, t: float, n_steps: int, seed: int) -> np.ndarray:
    """
    Euler-Maruyama integration of the forward SDE
    dX = -beta/(2 sigma2) X dt + sqrt(beta) dB up to time t.
    """
    x = np.array(x0, dtype=np.float64, copy=True)
    h = t / n_steps
    for k in range(n_steps):
        b = beta(sched, k * h)
        z = stream(seed, "forward-em", k).standard_normal(x.shape)
        x = x - h * b * x / (2.0 * sched.sigma2) + np.sqrt(b * h) * z
    return x


# ---------- Backward process ----------

def _chunked(fn: Callable, t: float, x: np.ndarray, pool: Optional[ThreadPoolExecutor]) -> np.ndarray:
    # fixed chunking: BLAS results then do not depend on the worker count
    n_chunks = -(-x.shape[0] // config.CHUNK_ROWS)
    parts = np.array_split(x, n_chunks)
    mapper = pool.map if pool is not None else map
    return np.vstack(list(mapper(lambda part: fn(t, part), parts)))


def _check_finite(x: np.ndarray, step: int) -> None:
    if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > config.DIVERGENCE_LIMIT:
        raise DivergenceError(step)


def backward_sample(
    score: ScoreSource,
    sched: Schedule,
    grid: TimeGrid,
    n: int,
    seed: int,
    scheme: str = "em",
    workers: Optional[int] = None,
) -> SampleBatch:
    """
    Run a backward sampler from X_0 ~ N(0, sigma2 I).

    Noise for step k is drawn as one (n, d) block from stream (seed, "noise", k),
    so the result does not depend on how particles are split across workers.
    """
    if scheme not in SCHEMES:
        raise DomainError(f"unknown scheme '{scheme}'")
    if n < 1:
        raise DomainError("need n >= 1 particles")
    if abs(grid.T - sched.T) > 1e-12 * sched.T:
        raise DomainError("grid and schedule horizons differ")

    s2 = sched.sigma2
    T, h = sched.T, grid.h
    x = np.sqrt(s2) * stream(seed, "prior").standard_normal((n, score.dim))
    workers = config.worker_count() if workers is None else workers
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None

    try:
        for k in range(grid.N):
            t_k = k * h
            z = stream(seed, "noise", k).standard_normal(x.shape)
            s_tilde = _chunked(score.modified, T - t_k, x, pool)
            if scheme == "em":
                b = beta(sched, T - t_k)
                x = x + h * (-b * x / (2.0 * s2) + b * s_tilde) + np.sqrt(b * h) * z
            else:
                integral = beta_integral(sched, max(T - (k + 1) * h, 0.0), T - t_k)
                decay = np.exp(-integral / (2.0 * s2))
                x = (
                    decay * x
                    - 2.0 * s2 * np.expm1(-integral / (2.0 * s2)) * s_tilde
                    + np.sqrt(-s2 * np.expm1(-integral / s2)) * z
                )
            _check_finite(x, k)
    finally:
        if pool is not None:
            pool.shutdown()

    logger.debug("backward %s: %d particles, %d steps", scheme, n, grid.N)
    return SampleBatch(x, seed=seed, stage="generated")


def backward_em(score: ScoreSource, sched: Schedule, grid: TimeGrid, n: int, seed: int, **kw) -> SampleBatch:
    """
    X <- X + h (-beta_bar(t_k) X / (2 sigma2) + beta_bar(t_k) s_tilde(T - t_k, X))
           + sqrt(beta_bar(t_k) h) Z_k
    """
    return backward_sample(score, sched, grid, n, seed, scheme="em", **kw)


def backward_ei(score: ScoreSource, sched: Schedule, grid: TimeGrid, n: int, seed: int, **kw) -> SampleBatch:
    """
    Exponential integrator with the score frozen per cell; I_k is the
    integral of beta_bar over [t_k, t_{k+1}]:

    X <- e^{-I_k/(2 sigma2)} X + 2 sigma2 (1 - e^{-I_k/(2 sigma2)}) s_tilde(T - t_k, X)
           + sigma sqrt(1 - e^{-I_k/sigma2}) Z_k
    """
    return backward_sample(score, sched, grid, n, seed, scheme="ei", **kw)
