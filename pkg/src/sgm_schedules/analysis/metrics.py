"""
Empirical divergences between sample sets and/or targets.
"""

import logging
import math
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

from .. import config
from ..errors import DomainError, InvalidTargetError, RankError
from ..models import MetricReport, SampleBatch
from ..process.targets import GaussianTarget, Target, closed_form_divergences
from ..rng import stream

logger = logging.getLogger(__name__)

METRICS = ("gauss-kl", "gauss-w2", "sliced-w2", "knn-kl", "nll")


def fit_gaussian(batch: SampleBatch) -> GaussianTarget:
    """Sample mean and unbiased, symmetrized sample covariance."""
    x = batch.data
    n, d = x.shape
    if n <= d:
        raise RankError(f"need n > d to fit a covariance (n={n}, d={d})")
    mu = x.mean(axis=0)
    cov = np.atleast_2d(np.cov(x, rowvar=False, ddof=1))
    cov = 0.5 * (cov + cov.T)
    try:
        return GaussianTarget(mu, cov)
    except InvalidTargetError as exc:
        raise RankError(f"sample covariance is singular: {exc}") from None


def gauss_kl(target: Target, batch: SampleBatch) -> float:
    """KL(pi_data || N(mean, cov) of the batch)."""
    kl, _ = closed_form_divergences(target, fit_gaussian(batch))
    return kl


def gauss_w2(target: Target, batch: SampleBatch) -> float:
    _, w2 = closed_form_divergences(target, fit_gaussian(batch))
    return w2


def _equal_sizes(a: np.ndarray, b: np.ndarray, seed: int):
    if a.shape[0] == b.shape[0]:
        return a, b
    n = min(a.shape[0], b.shape[0])
    rng = stream(seed, "subsample")
    if a.shape[0] > n:
        return a[np.sort(rng.choice(a.shape[0], n, replace=False))], b
    return a, b[np.sort(rng.choice(b.shape[0], n, replace=False))]


def sliced_w2(
    batch_a: SampleBatch, batch_b: SampleBatch, n_proj: int = config.SLICED_PROJECTIONS, seed: int = 0
) -> float:
    """
    sqrt of the mean over random unit directions of the squared 1-D W2
    between projected samples. The larger batch is subsampled (seeded).
    """
    if batch_a.dim != batch_b.dim:
        raise DomainError("batches have different dimensions")
    if n_proj < 1:
        raise DomainError("need at least one projection")
    a, b = _equal_sizes(batch_a.data, batch_b.data, seed)
    dirs = stream(seed, "projections").standard_normal((n_proj, batch_a.dim))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    pa = np.sort(a @ dirs.T, axis=0)
    pb = np.sort(b @ dirs.T, axis=0)
    per_direction = np.mean((pa - pb) ** 2, axis=0)
    return float(np.sqrt(np.mean(per_direction)))


def default_k(d: int) -> int:
    return int(math.ceil(math.sqrt(d)))


def knn_kl(batch_p: SampleBatch, batch_q: SampleBatch, k: Optional[int] = None) -> float:
    """
    k-NN estimate of KL(p || q):

        (d / n) sum_i log(nu_k(i) / rho_k(i)) + log(m / (n - 1))

    rho_k: distance from x_i to its k-th neighbour in p (itself excluded),
    nu_k: distance to its k-th neighbour in q. Can be negative.
    """
    x, y = batch_p.data, batch_q.data
    if batch_p.dim != batch_q.dim:
        raise DomainError("batches have different dimensions")
    n, d = x.shape
    m = y.shape[0]
    k = default_k(d) if k is None else int(k)
    if k < 1 or n < k + 1 or m < k + 1:
        raise DomainError(f"need at least k+1={k + 1} points in each batch")

    rho, _ = cKDTree(x).query(x, k=k + 1)
    nu, _ = cKDTree(y).query(x, k=k)
    rho = np.asarray(rho)[:, -1]
    nu = np.asarray(nu).reshape(n, -1)[:, -1]

    floor = config.KNN_DISTANCE_FLOOR
    n_zero = int(np.sum(rho < floor) + np.sum(nu < floor))
    if n_zero:
        logger.warning("knn-kl: %d zero neighbour distances floored at %g", n_zero, floor)
    rho = np.maximum(rho, floor)
    nu = np.maximum(nu, floor)
    return float(d / n * np.sum(np.log(nu / rho)) + np.log(m / (n - 1)))


def nll(target: Target, batch: SampleBatch) -> float:
    """-(1/n) sum log pi_data(x_i)."""
    return float(-np.mean(target.log_density(batch.data)))


def evaluate(
    name: str,
    batch: SampleBatch,
    target: Optional[Target] = None,
    reference: Optional[SampleBatch] = None,
    n_proj: int = config.SLICED_PROJECTIONS,
    k: Optional[int] = None,
    seed: int = 0,
) -> MetricReport:
    """
    Evaluate one named metric of generated `batch` against the target
    (gauss-kl, gauss-w2, nll) or a reference sample (sliced-w2, knn-kl).
    """
    if name in ("gauss-kl", "gauss-w2", "nll"):
        if target is None:
            raise DomainError(f"{name} needs a target")
        if name == "gauss-kl":
            value = gauss_kl(target, batch)
        elif name == "gauss-w2":
            value = gauss_w2(target, batch)
        else:
            value = nll(target, batch)
        return MetricReport(name=name, value=value, n_samples=batch.n)

    if reference is None:
        raise DomainError(f"{name} needs a reference sample")
    if name == "sliced-w2":
        value = sliced_w2(reference, batch, n_proj=n_proj, seed=seed)
        return MetricReport(name=name, value=value, n_samples=batch.n, params={"projections": n_proj})
    if name == "knn-kl":
        k_used = default_k(batch.dim) if k is None else k
        value = knn_kl(reference, batch, k=k_used)
        return MetricReport(name=name, value=value, n_samples=batch.n, params={"k": k_used})
    raise DomainError(f"unknown metric '{name}'")
