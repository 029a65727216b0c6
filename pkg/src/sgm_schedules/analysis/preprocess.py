"""
Standardize-and-rescale preprocessing.

    X_scale = kappa * diag(1 / sigma_j) (X - mu),  kappa = 1 / sqrt(2 lam_max(corr))

so the transformed covariance has lam_max = 1/2 < sigma2 = 1, which keeps
C_t >= 0 for the W2 bound. Parameters are fitted on the training batch and
then frozen.
"""

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Tuple

import numpy as np
from scipy import linalg

from ..errors import DegenerateCoordinateError, DomainError, RankError
from ..models import SampleBatch
from ..process.targets import GaussianTarget


@dataclass(frozen=True, eq=False)
class PreprocessTransform:
    mu: np.ndarray
    d_scale: np.ndarray
    kappa: float

    def __post_init__(self) -> None:
        mu = np.asarray(self.mu, dtype=np.float64)
        d_scale = np.asarray(self.d_scale, dtype=np.float64)
        if mu.shape != d_scale.shape or mu.ndim != 1:
            raise DomainError("mu and d_scale must be vectors of equal length")
        if np.any(d_scale <= 0):
            raise DegenerateCoordinateError("d_scale must be positive")
        if not self.kappa > 0:
            raise DomainError("kappa must be positive")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "d_scale", d_scale)
        object.__setattr__(self, "kappa", float(self.kappa))

    @property
    def dim(self) -> int:
        return self.mu.shape[0]

    def apply(self, x: np.ndarray) -> np.ndarray:
        return self.kappa * (np.asarray(x) - self.mu) / self.d_scale

    def invert(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x) * self.d_scale / self.kappa + self.mu

    def to_dict(self) -> Dict[str, Any]:
        return {"mu": self.mu.tolist(), "d_scale": self.d_scale.tolist(), "kappa": self.kappa}

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "PreprocessTransform":
        return cls(mu=np.asarray(d["mu"]), d_scale=np.asarray(d["d_scale"]), kappa=float(d["kappa"]))

    def save(self, path: Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2), encoding="utf-8")

    @classmethod
    def load(cls, path: Path) -> "PreprocessTransform":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def fit_transform(batch: SampleBatch) -> Tuple[PreprocessTransform, SampleBatch]:
    x = batch.data
    n, d = x.shape
    if n <= d:
        raise RankError(f"need n > d to standardize (n={n}, d={d})")
    mu = x.mean(axis=0)
    sd = x.std(axis=0, ddof=1)
    flat = np.flatnonzero(sd <= 0)
    if flat.size:
        raise DegenerateCoordinateError(f"zero variance in coordinate(s) {flat.tolist()}")
    standardized = (x - mu) / sd
    corr = np.atleast_2d(np.cov(standardized, rowvar=False, ddof=1))
    lam_max = float(linalg.eigvalsh(0.5 * (corr + corr.T))[-1])
    transform = PreprocessTransform(mu=mu, d_scale=sd, kappa=1.0 / np.sqrt(2.0 * lam_max))
    return transform, SampleBatch(transform.apply(x), seed=batch.seed, stage=batch.stage, t=batch.t)


def apply(transform: PreprocessTransform, batch: SampleBatch) -> SampleBatch:
    return SampleBatch(transform.apply(batch.data), seed=batch.seed, stage=batch.stage, t=batch.t)


def inverse(transform: PreprocessTransform, batch: SampleBatch) -> SampleBatch:
    """y = x * sigma_j / kappa + mu."""
    if batch.dim != transform.dim:
        raise DomainError("batch dimension does not match the transform")
    return SampleBatch(transform.invert(batch.data), seed=batch.seed, stage=batch.stage, t=batch.t)


def transfer_bound(transform: PreprocessTransform, w2_scaled: float) -> float:
    """W2 on the original scale <= (1 / kappa) max_j sigma_j W2 on the scaled one."""
    if w2_scaled < 0:
        raise DomainError("w2_scaled must be >= 0")
    return float(np.max(transform.d_scale) * w2_scaled / transform.kappa)


def transform_gaussian(transform: PreprocessTransform, target: GaussianTarget) -> GaussianTarget:
    """Law of X_scale when X ~ target (an affine image of a Gaussian)."""
    scale = transform.kappa / transform.d_scale
    mu = scale * (target.mu - transform.mu)
    Sigma = target.Sigma * np.outer(scale, scale)
    return GaussianTarget(mu, 0.5 * (Sigma + Sigma.T))
