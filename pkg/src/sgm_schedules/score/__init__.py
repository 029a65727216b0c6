"""
Score network, its gradients, and score-matching training.
"""

from .network import (
    ScoreNetParams,
    LearnedScore,
    init_params,
    zero_params,
    net_forward,
    net_backward,
    time_embedding,
    tensor_names,
)
from .training import TrainConfig, TrainResult, Adam, train, score_matching_loss, sample_times

__all__ = [
    "ScoreNetParams",
    "LearnedScore",
    "init_params",
    "zero_params",
    "net_forward",
    "net_backward",
    "time_embedding",
    "tensor_names",
    "TrainConfig",
    "TrainResult",
    "Adam",
    "train",
    "score_matching_loss",
    "sample_times",
]
