"""
Target distributions and their closed-form quantities.

GaussianTarget carries everything the bounds need analytically: the
marginal score, the contraction constants C_t / L_t, the time-Lipschitz
constant M, and KL / W2 / Fisher information to the stationary law.
FunnelTarget and GmmTarget are sample-and-density only.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple, Union

import numpy as np
from scipy import linalg
from scipy.special import logsumexp

from .. import config
from ..errors import DomainError, InvalidTargetError, UnsupportedOperationError
from ..models import SampleBatch, Schedule, TimeGrid
from ..rng import stream
from .schedules import beta, m_sigma

logger = logging.getLogger(__name__)

_LOG_2PI = np.log(2.0 * np.pi)


class Target:
    """Common interface: dim, sample, log_density, second_moment."""

    dim: int

    def sample(self, n: int, seed: int) -> SampleBatch:
        raise NotImplementedError

    def log_density(self, x: np.ndarray) -> np.ndarray:
        raise UnsupportedOperationError(f"{type(self).__name__} has no tractable density")

    def second_moment(self, seed: int = 0, n: int = 100_000) -> float:
        """E||X||^2; Monte-Carlo unless overridden."""
        return self.sample(n, seed).second_moment()

    def _check_n(self, n: int) -> None:
        if n < 1:
            raise DomainError("need n >= 1 samples")

    def _rows(self, x: np.ndarray) -> np.ndarray:
        arr = np.asarray(x, dtype=np.float64)
        if arr.shape[-1] != self.dim:
            raise DomainError(f"expected dimension {self.dim}, got {arr.shape[-1]}")
        return arr


@dataclass(frozen=True, eq=False)
class GaussianTarget(Target):
    """
    N(mu, Sigma) with a cached spectral decomposition.

    Sigma must be symmetric within SYMMETRY_TOL with every eigenvalue above
    EIGEN_FLOOR; nothing is regularized silently.
    """
    mu: np.ndarray
    Sigma: np.ndarray
    eigvals: np.ndarray = field(init=False, repr=False)
    eigvecs: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        mu = np.atleast_1d(np.asarray(self.mu, dtype=np.float64))
        Sigma = np.atleast_2d(np.asarray(self.Sigma, dtype=np.float64))
        d = mu.shape[0]
        if mu.ndim != 1 or Sigma.shape != (d, d):
            raise InvalidTargetError(f"mu {mu.shape} and Sigma {Sigma.shape} do not conform")
        if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(Sigma))):
            raise InvalidTargetError("non-finite mean or covariance")
        if np.max(np.abs(Sigma - Sigma.T)) > config.SYMMETRY_TOL:
            raise InvalidTargetError("covariance is not symmetric")
        Sigma = 0.5 * (Sigma + Sigma.T)
        lam, vecs = linalg.eigh(Sigma)
        if lam[0] <= config.EIGEN_FLOOR:
            raise InvalidTargetError(
                f"covariance eigenvalue {lam[0]:.3e} below floor {config.EIGEN_FLOOR:g}"
            )
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "Sigma", Sigma)
        object.__setattr__(self, "eigvals", lam)
        object.__setattr__(self, "eigvecs", vecs)

    @property
    def dim(self) -> int:
        return self.mu.shape[0]

    @property
    def lam_min(self) -> float:
        return float(self.eigvals[0])

    @property
    def lam_max(self) -> float:
        return float(self.eigvals[-1])

    def sample(self, n: int, seed: int) -> SampleBatch:
        self._check_n(n)
        z = stream(seed, "target").standard_normal((n, self.dim))
        root = self.eigvecs * np.sqrt(self.eigvals)
        return SampleBatch(self.mu + z @ root.T, seed=seed, stage="data")

    def log_density(self, x: np.ndarray) -> np.ndarray:
        x = self._rows(x)
        y = (x - self.mu) @ self.eigvecs
        quad = np.sum(y ** 2 / self.eigvals, axis=-1)
        return -0.5 * (self.dim * _LOG_2PI + np.sum(np.log(self.eigvals)) + quad)

    def second_moment(self, seed: int = 0, n: int = 0) -> float:
        return float(np.trace(self.Sigma) + self.mu @ self.mu)

    def score(self, sched: Schedule, t, x: np.ndarray) -> np.ndarray:
        """
        Marginal score -(m_t^2 Sigma + sigma_t^2 I)^{-1} (x - m_t mu).

        t may be a scalar or one time per row of x.
        """
        x = self._rows(x)
        m, sig2 = m_sigma(sched, t)
        m = np.asarray(m, dtype=np.float64)
        sig2 = np.asarray(sig2, dtype=np.float64)
        if m.ndim:
            m, sig2 = m[:, None], sig2[:, None]
        eig_t = m ** 2 * self.eigvals + sig2
        y = (x - m * self.mu) @ self.eigvecs
        return -(y / eig_t) @ self.eigvecs.T


@dataclass(frozen=True)
class FunnelTarget(Target):
    """x1 ~ N(0, a^2), x_j | x1 ~ N(0, exp(2 b x1)) for j >= 2."""
    d: int
    a_fun: float = config.FUNNEL_A
    b_fun: float = config.FUNNEL_B

    def __post_init__(self) -> None:
        if self.a_fun <= 0:
            raise InvalidTargetError("funnel scale a must be positive")
        if self.d < 2:
            raise InvalidTargetError("funnel needs d >= 2")

    @property
    def dim(self) -> int:
        return self.d

    def sample(self, n: int, seed: int) -> SampleBatch:
        self._check_n(n)
        z = stream(seed, "target").standard_normal((n, self.d))
        x1 = self.a_fun * z[:, :1]
        rest = np.exp(self.b_fun * x1) * z[:, 1:]
        return SampleBatch(np.hstack([x1, rest]), seed=seed, stage="data")

    def log_density(self, x: np.ndarray) -> np.ndarray:
        x = self._rows(x)
        x1 = x[..., 0]
        lead = -0.5 * (_LOG_2PI + 2.0 * np.log(self.a_fun) + (x1 / self.a_fun) ** 2)
        rest = x[..., 1:]
        log_var = 2.0 * self.b_fun * x1
        tail = -0.5 * np.sum(
            _LOG_2PI + log_var[..., None] + rest ** 2 * np.exp(-log_var)[..., None], axis=-1
        )
        return lead + tail


@dataclass(frozen=True, eq=False)
class GmmTarget(Target):
    """Mixture of Gaussians with a shared diagonal covariance."""
    weights: np.ndarray
    means: np.ndarray
    diag: np.ndarray

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=np.float64)
        means = np.atleast_2d(np.asarray(self.means, dtype=np.float64))
        diag = np.asarray(self.diag, dtype=np.float64)
        if w.ndim != 1 or means.shape[0] != w.shape[0] or diag.shape != (means.shape[1],):
            raise InvalidTargetError("weights, means and diag do not conform")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise InvalidTargetError("weights must be a probability vector")
        if np.any(diag <= 0):
            raise InvalidTargetError("diagonal covariance entries must be positive")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "diag", diag)

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def sample(self, n: int, seed: int) -> SampleBatch:
        self._check_n(n)
        rng = stream(seed, "target")
        comp = rng.choice(len(self.weights), size=n, p=self.weights)
        z = rng.standard_normal((n, self.dim))
        return SampleBatch(self.means[comp] + np.sqrt(self.diag) * z, seed=seed, stage="data")

    def component_log_densities(self, x: np.ndarray) -> np.ndarray:
        """(..., K) array of log N(x; mean_k, diag)."""
        x = self._rows(x)
        diff = x[..., None, :] - self.means
        quad = np.sum(diff ** 2 / self.diag, axis=-1)
        return -0.5 * (self.dim * _LOG_2PI + np.sum(np.log(self.diag)) + quad)

    def log_density(self, x: np.ndarray) -> np.ndarray:
        with np.errstate(divide="ignore"):
            log_w = np.log(self.weights)
        return logsumexp(self.component_log_densities(x) + log_w, axis=-1)

    def second_moment(self, seed: int = 0, n: int = 0) -> float:
        return float(self.weights @ np.sum(self.means ** 2, axis=1) + np.sum(self.diag))


AnyTarget = Union[GaussianTarget, FunnelTarget, GmmTarget]


# ---------- Named targets ----------

def stationary_target(d: int, sigma2: float = config.SIGMA2) -> GaussianTarget:
    """pi_inf = N(0, sigma2 I)."""
    return GaussianTarget(np.zeros(d), sigma2 * np.eye(d))


def benchmark_gaussian(kind: str, d: int) -> GaussianTarget:
    """
    Gaussian targets of the schedule-selection experiments, all with mean 1_d:
    iso (0.5 I), heterosc (1 on the first five coordinates, 0.01 after),
    corr (1 / sqrt(1 + |j - j'|) off the diagonal; the unshifted
    1 / sqrt|j - j'| matrix is singular from d = 2 on).
    """
    mu = np.ones(d)
    if kind == "iso":
        Sigma = 0.5 * np.eye(d)
    elif kind == "heterosc":
        diag = np.full(d, 0.01)
        diag[:5] = 1.0
        Sigma = np.diag(diag)
    elif kind == "corr":
        idx = np.arange(d)
        gap = np.abs(idx[:, None] - idx[None, :]).astype(np.float64)
        Sigma = 1.0 / np.sqrt(1.0 + gap)
    else:
        raise InvalidTargetError(f"unknown Gaussian target '{kind}'")
    return GaussianTarget(mu, Sigma)


def funnel_target(d: int) -> FunnelTarget:
    return FunnelTarget(d=d)


def gmm25_target(d: int) -> GmmTarget:
    """25 equally weighted modes at (j, k, 0, ..., 0), j, k in {-2, ..., 2}."""
    if d < 2:
        raise InvalidTargetError("gmm25 needs d >= 2")
    grid = [(j, k) for j in range(-2, 3) for k in range(-2, 3)]
    means = np.zeros((len(grid), d))
    means[:, :2] = np.asarray(grid, dtype=np.float64)
    diag = np.full(d, 0.1)
    diag[:2] = 0.01
    return GmmTarget(np.full(len(grid), 1.0 / len(grid)), means, diag)


# ---------- Operations ----------

def sample(target: Target, n: int, seed: int) -> SampleBatch:
    return target.sample(n, seed)


def log_density(target: Target, x: np.ndarray) -> np.ndarray:
    return target.log_density(x)


def _require_gaussian(target: Target, what: str) -> GaussianTarget:
    if not isinstance(target, GaussianTarget):
        raise UnsupportedOperationError(f"{what} needs a Gaussian target, got {type(target).__name__}")
    return target


def gaussian_score(target: Target, sched: Schedule, t, x: np.ndarray, modified: bool = False) -> np.ndarray:
    """
    Exact forward-marginal score at time t; modified=True adds x / sigma2.
    """
    g = _require_gaussian(target, "gaussian_score")
    value = g.score(sched, t, x)
    if modified:
        value = value + np.asarray(x, dtype=np.float64) / sched.sigma2
    return value


def marginal(target: Target, sched: Schedule, t: float) -> GaussianTarget:
    """Law of X_t for Gaussian data: N(m_t mu, m_t^2 Sigma + sigma_t^2 I)."""
    g = _require_gaussian(target, "marginal")
    m, sig2 = m_sigma(sched, t)
    return GaussianTarget(m * g.mu, m ** 2 * g.Sigma + sig2 * np.eye(g.dim))


def contraction_constants(target: Target, sched: Schedule, t):
    """
    (C_t, L_t) for the modified score of Gaussian data:

        C_t = m^2 (sigma2 - lam_max) / (m^2 lam_max + sigma2 (1 - m^2))
        L_t = min{1 / (sigma2 (1 - m^2)), 1 / (lam_min m^2)} + 1 / sigma2

    C_t is negative when lam_max > sigma2; callers decide admissibility.
    Vectorized over t.
    """
    g = _require_gaussian(target, "contraction_constants")
    m, sig2 = m_sigma(sched, t)
    m2 = np.asarray(m, dtype=np.float64) ** 2
    sig2 = np.asarray(sig2, dtype=np.float64)
    s2 = sched.sigma2
    C = m2 * (s2 - g.lam_max) / (m2 * g.lam_max + sig2)
    with np.errstate(divide="ignore"):
        L = np.minimum(1.0 / sig2, 1.0 / (g.lam_min * m2)) + 1.0 / s2
    if np.ndim(t) == 0:
        return float(C), float(L)
    return C, L


def propagated_constants(c_star: float, l_star: float, sched: Schedule, t):
    """
    C_t, L_t for a target whose log-density is C*-strongly concave and
    L*-smooth. Needs C* > 1/sigma2. When L* > 1/sigma2 the tighter
    "- 1/sigma2" form of L_t is used.
    """
    s2 = sched.sigma2
    if not c_star > 1.0 / s2:
        raise DomainError(f"propagation needs C* > 1/sigma2, got C*={c_star}")
    if not np.isfinite(l_star) or l_star <= 0:
        raise DomainError("L* must be positive and finite")
    m, sig2 = m_sigma(sched, t)
    m2 = np.asarray(m, dtype=np.float64) ** 2
    sig2 = np.asarray(sig2, dtype=np.float64)
    C = 1.0 / (m2 / c_star + sig2) - 1.0 / s2
    with np.errstate(divide="ignore"):
        base = np.minimum(1.0 / sig2, l_star / m2)
    L = base - 1.0 / s2 if l_star > 1.0 / s2 else base + 1.0 / s2
    if np.ndim(t) == 0:
        return float(C), float(L)
    return C, L


def score_time_lipschitz_M(target: Target, sched: Schedule, grid: TimeGrid) -> float:
    """
    Time-Lipschitz constant of the score over the grid:
    M = max over cells [t1, t2] of max{||mu|| kappa2, kappa1} where

        D(m)   = sigma2 + m^2 (lam_min - sigma2)
        kappa1 = m1^2 (beta(t2)/sigma2) |lam_min - sigma2| / |D(m1) D(m2)|
        kappa2 = m1 (beta(t2)/(2 sigma2)) |m1 m2 (lam_min - sigma2) - sigma2| / |D(m1) D(m2)|

    The modified score differs by the time-independent x / sigma2, so the
    same M serves both.
    """
    g = _require_gaussian(target, "score_time_lipschitz_M")
    if grid.T != sched.T:
        raise DomainError("grid and schedule horizons differ")
    times = grid.times
    m, _ = m_sigma(sched, times)
    m1, m2 = m[:-1], m[1:]
    b2 = np.asarray(beta(sched, times[1:]))
    s2 = sched.sigma2
    gap = g.lam_min - s2
    denom = np.abs((s2 + m1 ** 2 * gap) * (s2 + m2 ** 2 * gap))
    kappa1 = m1 ** 2 * (b2 / s2) * abs(gap) / denom
    kappa2 = m1 * (b2 / (2.0 * s2)) * np.abs(m1 * m2 * gap - s2) / denom
    mu_norm = float(np.linalg.norm(g.mu))
    return float(max(np.max(mu_norm * kappa2), np.max(kappa1)))


def closed_form_divergences(p: Target, q: Target) -> Tuple[float, float]:
    """(KL(p || q), W2(p, q)) between two Gaussians."""
    p = _require_gaussian(p, "closed_form_divergences")
    q = _require_gaussian(q, "closed_form_divergences")
    if p.dim != q.dim:
        raise DomainError(f"dimension mismatch: {p.dim} vs {q.dim}")
    d = p.dim
    dmu = q.mu - p.mu

    # KL in the eigenbasis of Sigma_2
    inv_q = (q.eigvecs / q.eigvals) @ q.eigvecs.T
    logdet = np.sum(np.log(q.eigvals)) - np.sum(np.log(p.eigvals))
    kl = 0.5 * (logdet - d + np.trace(inv_q @ p.Sigma) + dmu @ inv_q @ dmu)

    root_q = (q.eigvecs * np.sqrt(q.eigvals)) @ q.eigvecs.T
    inner = root_q @ p.Sigma @ root_q
    inner_vals = linalg.eigvalsh(0.5 * (inner + inner.T))
    cross = np.sum(np.sqrt(np.clip(inner_vals, 0.0, None)))
    w2_sq = dmu @ dmu + np.trace(p.Sigma) + np.trace(q.Sigma) - 2.0 * cross
    return float(max(kl, 0.0)), float(np.sqrt(max(w2_sq, 0.0)))


def fisher_to_stationary(target: Target, sigma2: float) -> float:
    """I(pi_data | pi_inf) = (Tr Sigma + ||mu||^2)/sigma2^2 - 2d/sigma2 + Tr Sigma^{-1}."""
    g = _require_gaussian(target, "fisher_to_stationary")
    value = (
        (np.trace(g.Sigma) + g.mu @ g.mu) / sigma2 ** 2
        - 2.0 * g.dim / sigma2
        + np.sum(1.0 / g.eigvals)
    )
    return float(max(value, 0.0))


# ---------- Bound constants ----------

@dataclass
class BoundConstants:
    """
    Constants entering the bounds. C_of_t / L_of_t take forward times
    (scalar or array). lam_max is set when the target is Gaussian.
    """
    C_of_t: Callable
    L_of_t: Callable
    M: float
    B: float
    fisher: Optional[float]
    kl_to_stationary: Optional[float]
    w2_to_stationary: Optional[float]
    sigma2: float = config.SIGMA2
    lam_max: Optional[float] = None

    def __post_init__(self) -> None:
        if not self.B > 0:
            raise DomainError("B must be positive")
        if self.fisher is not None and self.fisher < 0:
            raise DomainError("Fisher information must be nonnegative")


def refined_lipschitz(target: Target, sched: Schedule, t):
    """
    L_t for bounds: the propagated form with L* = 1 / lam_min, which drops to
    min{...} - 1/sigma2 when lam_min < sigma2 and never exceeds the plain L_t.
    """
    g = _require_gaussian(target, "refined_lipschitz")
    if g.lam_min >= sched.sigma2:
        return contraction_constants(g, sched, t)[1]
    m, sig2 = m_sigma(sched, t)
    m2 = np.asarray(m, dtype=np.float64) ** 2
    with np.errstate(divide="ignore"):
        L = np.minimum(1.0 / np.asarray(sig2, dtype=np.float64), 1.0 / (g.lam_min * m2)) - 1.0 / sched.sigma2
    return float(L) if np.ndim(t) == 0 else L


def bound_constants(target: Target, sched: Schedule, grid: TimeGrid) -> BoundConstants:
    """All closed-form constants for a Gaussian target."""
    g = _require_gaussian(target, "bound_constants")
    kl, w2 = closed_form_divergences(g, stationary_target(g.dim, sched.sigma2))
    return BoundConstants(
        C_of_t=lambda t: contraction_constants(g, sched, t)[0],
        L_of_t=lambda t: refined_lipschitz(g, sched, t),
        M=score_time_lipschitz_M(g, sched, grid),
        B=float(np.sqrt(g.second_moment() + sched.sigma2 * g.dim)),
        fisher=fisher_to_stationary(g, sched.sigma2),
        kl_to_stationary=kl,
        w2_to_stationary=w2,
        sigma2=sched.sigma2,
        lam_max=g.lam_max,
    )
