from dataclasses import dataclass, asdict
from typing import Any, Dict

import numpy as np

from .. import config
from ..errors import DomainError

SCHEDULE_KINDS = ("linear", "parametric", "cosine")


@dataclass(frozen=True)
class Schedule:
    """
    One member of the noise-schedule families.

    linear:      beta(t) = beta0 + (beta1 - beta0) t / T
    parametric:  beta(t) = beta0 + (beta1 - beta0) (e^{a t} - 1) / (e^{a T} - 1)
    cosine:      beta(t) = sigma2 * pi / (T (s + 1)) * tan(pi (s + t/T) / (2 (s + 1)))

    The cosine kind ignores beta0 / beta1 and is clipped at `clip`.
    """
    kind: str = "linear"
    beta0: float = config.BETA0
    beta1: float = config.BETA1
    T: float = config.HORIZON
    sigma2: float = config.SIGMA2
    a: float = 0.0
    s: float = config.COSINE_S
    clip: float = config.COSINE_CLIP

    def __post_init__(self) -> None:
        if self.kind not in SCHEDULE_KINDS:
            raise ValueError(f"unknown schedule kind '{self.kind}'")
        if not (self.T > 0 and np.isfinite(self.T)):
            raise ValueError("T must be positive and finite")
        if not (self.sigma2 > 0 and np.isfinite(self.sigma2)):
            raise ValueError("sigma2 must be positive and finite")
        if self.kind == "cosine":
            if self.s <= 0:
                raise ValueError("cosine offset s must be positive")
            if self.clip <= 0:
                raise ValueError("cosine clip must be positive")
        else:
            if self.beta0 <= 0:
                raise ValueError("beta0 must be positive")
            if self.beta1 < self.beta0:
                raise ValueError("beta1 must be >= beta0 (nondecreasing schedule)")
            if not np.isfinite(self.a):
                raise ValueError("a must be finite")

    @classmethod
    def linear(cls, **kw: Any) -> "Schedule":
        return cls(kind="linear", **kw)

    @classmethod
    def parametric(cls, a: float, **kw: Any) -> "Schedule":
        return cls(kind="parametric", a=float(a), **kw)

    @classmethod
    def cosine(cls, **kw: Any) -> "Schedule":
        return cls(kind="cosine", **kw)

    @property
    def is_linear(self) -> bool:
        """True when the closed forms reduce to the linear ones."""
        return self.kind == "linear" or (
            self.kind == "parametric" and abs(self.a) <= config.LINEAR_A_TOL
        )

    @property
    def label(self) -> str:
        if self.kind == "parametric":
            return f"parametric(a={self.a:g})"
        return self.kind

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "Schedule":
        known = {k: d[k] for k in cls.__dataclass_fields__ if k in d}
        return cls(**known)


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid t_k = k h, h = T / N, on [0, T]."""
    N: int
    T: float = config.HORIZON

    def __post_init__(self) -> None:
        if int(self.N) != self.N or self.N < 1:
            raise DomainError("grid needs N >= 1 steps")
        if not self.T > 0:
            raise DomainError("grid horizon must be positive")

    @property
    def h(self) -> float:
        return self.T / self.N

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.N + 1)

    def cell(self, k: int) -> tuple:
        """Backward cell [t_k, t_{k+1}]."""
        return k * self.h, (k + 1) * self.h

    def forward_cell(self, k: int) -> tuple:
        """Forward-time image [T - t_{k+1}, T - t_k] of backward cell k."""
        t0, t1 = self.cell(k)
        return max(self.T - t1, 0.0), self.T - t0
