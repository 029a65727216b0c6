"""
Score-matching training with Adam.

Each epoch re-noises the training data: fresh tau = T (1 - U) and fresh Z
per example, drawn from stream (seed, "train", epoch).
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from .. import config
from ..errors import DomainError, TrainingDivergedError, UnsupportedOperationError
from ..models import SampleBatch, Schedule
from ..process.diffusion import noise
from ..process.schedules import m_sigma
from ..process.targets import GaussianTarget, Target
from ..rng import child_seed, stream
from .network import ScoreNetParams, init_params, net_backward, net_forward, tensor_names

logger = logging.getLogger(__name__)

LOSSES = ("explicit", "conditional")


@dataclass(frozen=True)
class TrainConfig:
    loss: str = "explicit"
    epochs: int = config.EPOCHS
    batch_size: int = config.BATCH_SIZE
    learning_rate: float = config.LEARNING_RATE
    seed: int = 0
    width: int = config.WIDTH
    n_layers: int = config.N_HIDDEN
    adam_beta1: float = config.ADAM_BETA1
    adam_beta2: float = config.ADAM_BETA2
    adam_eps: float = config.ADAM_EPS

    def __post_init__(self) -> None:
        if self.loss not in LOSSES:
            raise ValueError(f"unknown loss '{self.loss}'")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")


@dataclass
class TrainResult:
    params: ScoreNetParams
    epoch_losses: List[float] = field(default_factory=list)


class Adam:
    """Adam over a dict of tensors, updated in place."""

    def __init__(self, params: ScoreNetParams, lr: float, beta1: float, beta2: float, eps: float):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.step_count = 0
        self.m = {k: np.zeros_like(v) for k, v in params.tensors.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.tensors.items()}

    def step(self, params: ScoreNetParams, grads: Dict[str, np.ndarray]) -> None:
        self.step_count += 1
        c1 = 1.0 - self.beta1 ** self.step_count
        c2 = 1.0 - self.beta2 ** self.step_count
        for name in tensor_names(params.n_layers):
            g = grads[name]
            self.m[name] = self.beta1 * self.m[name] + (1.0 - self.beta1) * g
            self.v[name] = self.beta2 * self.v[name] + (1.0 - self.beta2) * g * g
            m_hat = self.m[name] / c1
            v_hat = self.v[name] / c2
            params.tensors[name] -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def sample_times(rng: np.random.Generator, n: int, T: float) -> np.ndarray:
    """tau uniform on (0, T]."""
    return T * (1.0 - rng.random(n))


def regression_targets(
    loss: str,
    target: Optional[Target],
    sched: Schedule,
    tau: np.ndarray,
    x_tau: np.ndarray,
    z: np.ndarray,
) -> np.ndarray:
    """
    explicit:    grad log p_tau(X_tau)                  (Gaussian targets only)
    conditional: grad log p_tau(X_tau | X_0) = -Z / sigma_tau
    """
    if loss == "explicit":
        if not isinstance(target, GaussianTarget):
            raise UnsupportedOperationError("explicit score matching needs a Gaussian target")
        return target.score(sched, tau, x_tau)
    _, sig2 = m_sigma(sched, tau)
    return -z / np.sqrt(np.asarray(sig2))[:, None]


def score_matching_loss(
    params: ScoreNetParams,
    target: Optional[Target],
    sched: Schedule,
    loss: str,
    x0: np.ndarray,
    tau: np.ndarray,
    z: np.ndarray,
) -> np.ndarray:
    """Per-example squared error ||s_theta(tau, X_tau) - y||^2 on given draws."""
    x_tau = noise(x0, sched, tau, z)
    y = regression_targets(loss, target, sched, tau, x_tau, z)
    out = net_forward(params, tau, x_tau)
    return np.sum((out - y) ** 2, axis=1)


def train(
    target: Target,
    sched: Schedule,
    cfg: TrainConfig,
    n_train: int = config.N_TRAIN,
    seed: int = 0,
    data: Optional[SampleBatch] = None,
) -> TrainResult:
    """
    Fit a score network. data overrides the n_train draws from target
    (used for preprocessed samples); for the explicit loss target must be
    the Gaussian law of data.
    """
    if cfg.loss == "explicit" and not isinstance(target, GaussianTarget):
        raise UnsupportedOperationError("explicit score matching needs a Gaussian target")
    x_all = data.data if data is not None else target.sample(n_train, child_seed(seed, "train-data")).data
    n, d = x_all.shape
    if d != target.dim:
        raise DomainError(f"data dimension {d} does not match target dimension {target.dim}")

    params = init_params(d, cfg.width, seed=seed, n_layers=cfg.n_layers)
    opt = Adam(params, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)
    losses: List[float] = []

    for epoch in range(cfg.epochs):
        rng = stream(seed, "train", epoch)
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            x0 = x_all[idx]
            tau = sample_times(rng, len(idx), sched.T)
            z = rng.standard_normal(x0.shape)
            x_tau = noise(x0, sched, tau, z)
            y = regression_targets(cfg.loss, target, sched, tau, x_tau, z)
            loss, grads = net_backward(params, tau, x_tau, y)
            if not np.isfinite(loss):
                raise TrainingDivergedError(epoch)
            opt.step(params, grads)
            total += loss * len(idx)
        epoch_loss = total / n
        if not np.isfinite(epoch_loss) or not np.all(np.isfinite(params.flat())):
            raise TrainingDivergedError(epoch)
        losses.append(epoch_loss)
        logger.info("epoch %d/%d  loss=%.6f", epoch + 1, cfg.epochs, epoch_loss)

    return TrainResult(params=params, epoch_losses=losses)

