"""
Dense time-conditioned score network with hand-written backprop.

    h_0 = x W_in + b_in
    h_l = relu(h_{l-1} W_l + b_l + e(t) U_l + c_l),   l = 1..n_layers
    s   = h_L W_out + b_out

e(t) = [sin(w_j t), cos(w_j t)] with w_j = 10000^{-2j/W}, j < W/2.
All math in float64.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np

from .. import config
from ..errors import DomainError
from ..process.diffusion import ScoreSource
from ..rng import stream


def tensor_names(n_layers: int) -> List[str]:
    """Fixed tensor order, shared by init, gradients and the parameter file."""
    names = ["in.W", "in.b"]
    for l in range(1, n_layers + 1):
        names += [f"h{l}.W", f"h{l}.b", f"t{l}.W", f"t{l}.b"]
    names += ["out.W", "out.b"]
    return names


def tensor_shapes(d: int, width: int, n_layers: int) -> Dict[str, Tuple[int, ...]]:
    shapes = {"in.W": (d, width), "in.b": (width,)}
    for l in range(1, n_layers + 1):
        shapes[f"h{l}.W"] = (width, width)
        shapes[f"h{l}.b"] = (width,)
        shapes[f"t{l}.W"] = (width, width)
        shapes[f"t{l}.b"] = (width,)
    shapes["out.W"] = (width, d)
    shapes["out.b"] = (d,)
    return shapes


@dataclass
class ScoreNetParams:
    d: int
    width: int
    n_layers: int = config.N_HIDDEN
    tensors: Dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.width < 2 or self.width % 2:
            raise DomainError("width must be even and >= 2")
        shapes = tensor_shapes(self.d, self.width, self.n_layers)
        for name in tensor_names(self.n_layers):
            arr = self.tensors.get(name)
            if arr is None:
                raise DomainError(f"missing tensor {name}")
            if arr.shape != shapes[name]:
                raise DomainError(f"tensor {name} has shape {arr.shape}, expected {shapes[name]}")
            if not np.all(np.isfinite(arr)):
                raise DomainError(f"tensor {name} is not finite")

    def copy(self) -> "ScoreNetParams":
        return ScoreNetParams(
            self.d, self.width, self.n_layers, {k: v.copy() for k, v in self.tensors.items()}
        )

    def flat(self) -> np.ndarray:
        return np.concatenate([self.tensors[n].ravel() for n in tensor_names(self.n_layers)])


def zero_params(d: int, width: int = config.WIDTH, n_layers: int = config.N_HIDDEN) -> ScoreNetParams:
    shapes = tensor_shapes(d, width, n_layers)
    return ScoreNetParams(d, width, n_layers, {k: np.zeros(s) for k, s in shapes.items()})


def init_params(
    d: int, width: int = config.WIDTH, seed: int = 0, n_layers: int = config.N_HIDDEN
) -> ScoreNetParams:
    """Kaiming-uniform weights (bound sqrt(6 / fan_in)), zero biases."""
    params = zero_params(d, width, n_layers)
    rng = stream(seed, "init")
    for name in tensor_names(n_layers):
        arr = params.tensors[name]
        if name.endswith(".W"):
            bound = np.sqrt(6.0 / arr.shape[0])
            params.tensors[name] = rng.uniform(-bound, bound, size=arr.shape)
    return params


def time_embedding(t, width: int, n: int) -> np.ndarray:
    """(n, width) sin/cos features; t scalar or length-n array."""
    tt = np.broadcast_to(np.asarray(t, dtype=np.float64), (n,))
    freqs = 10000.0 ** (-2.0 * np.arange(width // 2) / width)
    angles = tt[:, None] * freqs[None, :]
    return np.hstack([np.sin(angles), np.cos(angles)])


def _as_rows(params: ScoreNetParams, x: np.ndarray) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != params.d:
        raise DomainError(f"expected inputs of dimension {params.d}, got shape {np.shape(x)}")
    return arr


def _forward(params: ScoreNetParams, t, x: np.ndarray):
    p = params.tensors
    emb = time_embedding(t, params.width, x.shape[0])
    hs = [x @ p["in.W"] + p["in.b"]]
    zs = []
    for l in range(1, params.n_layers + 1):
        z = hs[-1] @ p[f"h{l}.W"] + p[f"h{l}.b"] + emb @ p[f"t{l}.W"] + p[f"t{l}.b"]
        zs.append(z)
        hs.append(np.maximum(z, 0.0))
    out = hs[-1] @ p["out.W"] + p["out.b"]
    return out, (emb, hs, zs)


def net_forward(params: ScoreNetParams, t, x: np.ndarray) -> np.ndarray:
    """s_theta(t, x); x is (d,) or (n, d), t scalar or one per row."""
    single = np.ndim(x) == 1
    out, _ = _forward(params, t, _as_rows(params, x))
    return out[0] if single else out


def net_backward(
    params: ScoreNetParams, t, x: np.ndarray, targets: np.ndarray
) -> Tuple[float, Dict[str, np.ndarray]]:
    """
    Loss (1/n) sum_i ||s_theta(t_i, x_i) - y_i||^2 and its gradient with
    respect to every tensor.
    """
    x = _as_rows(params, x)
    y = _as_rows(params, targets)
    if y.shape != x.shape:
        raise DomainError("targets do not conform to inputs")
    p = params.tensors
    out, (emb, hs, zs) = _forward(params, t, x)
    n = x.shape[0]
    resid = out - y
    loss = float(np.sum(resid ** 2) / n)

    grads: Dict[str, np.ndarray] = {}
    d_out = 2.0 * resid / n
    grads["out.W"] = hs[-1].T @ d_out
    grads["out.b"] = d_out.sum(axis=0)
    d_h = d_out @ p["out.W"].T
    for l in range(params.n_layers, 0, -1):
        d_z = d_h * (zs[l - 1] > 0)
        grads[f"h{l}.W"] = hs[l - 1].T @ d_z
        grads[f"h{l}.b"] = d_z.sum(axis=0)
        grads[f"t{l}.W"] = emb.T @ d_z
        grads[f"t{l}.b"] = d_z.sum(axis=0)
        d_h = d_z @ p[f"h{l}.W"].T
    grads["in.W"] = x.T @ d_h
    grads["in.b"] = d_h.sum(axis=0)
    return loss, grads


class LearnedScore(ScoreSource):
    """Network as a score source: s_tilde_theta = s_theta + x / sigma2."""

    def __init__(self, params: ScoreNetParams, sigma2: float = config.SIGMA2):
        self.params = params
        self.dim = params.d
        self.sigma2 = sigma2

    def raw(self, t: float, x: np.ndarray) -> np.ndarray:
        return net_forward(self.params, t, x)
