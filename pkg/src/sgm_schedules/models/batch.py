from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..errors import DomainError

STAGES = ("data", "forward", "generated")


@dataclass
class SampleBatch:
    """
    n x d matrix of samples with provenance.

    stage is one of "data", "forward" (then t is the forward time) or
    "generated" (output of a backward sampler).
    """
    data: np.ndarray
    seed: int
    stage: str = "data"
    t: Optional[float] = None

    def __post_init__(self) -> None:
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DomainError(f"samples must be an n x d matrix, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise DomainError("samples contain non-finite values")
        if self.stage not in STAGES:
            raise DomainError(f"unknown stage '{self.stage}'")
        self.data = arr

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    def second_moment(self) -> float:
        """Empirical E||X||^2."""
        return float(np.mean(np.sum(self.data ** 2, axis=1)))
