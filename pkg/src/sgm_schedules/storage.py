"""
Readers and writers for on-disk artifacts.

- sample files: int64 n, int64 d, then n*d float64, little-endian, row-major
- matrix files (target.sigma-file): int64 d, then d*d float64
- parameter files: magic, int64 d, W, n_layers, then float64 tensors in
  tensor_names() order
- CSV tables via pandas with 17 significant digits
"""

import hashlib
import json
import logging
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, List, Union

import numpy as np
import pandas as pd

from . import config
from .errors import ConfigError, DomainError
from .models import SampleBatch
from .score.network import ScoreNetParams, tensor_names, tensor_shapes

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

PARAMS_MAGIC = b"SGMNET01"
_I64 = np.dtype("<i8")
_F64 = np.dtype("<f8")


def _read_exact(f, count: int, dtype: np.dtype, path: PathLike) -> np.ndarray:
    raw = f.read(count * dtype.itemsize)
    if len(raw) != count * dtype.itemsize:
        raise DomainError(f"{path}: truncated file")
    return np.frombuffer(raw, dtype=dtype, count=count)


# ---------- Samples ----------

def write_samples(path: PathLike, batch: SampleBatch) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(np.asarray([batch.n, batch.dim], dtype=_I64).tobytes())
        f.write(np.ascontiguousarray(batch.data, dtype=_F64).tobytes())
    logger.info("wrote %d x %d samples to %s", batch.n, batch.dim, path)


def read_samples(path: PathLike, seed: int = 0) -> SampleBatch:
    with open(path, "rb") as f:
        n, d = (int(v) for v in _read_exact(f, 2, _I64, path))
        if n < 1 or d < 1:
            raise DomainError(f"{path}: bad header n={n}, d={d}")
        data = _read_exact(f, n * d, _F64, path).reshape(n, d)
    return SampleBatch(data.astype(np.float64), seed=seed, stage="generated")


# ---------- Matrices ----------

def write_matrix(path: PathLike, matrix: np.ndarray) -> None:
    matrix = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    d = matrix.shape[0]
    if matrix.shape != (d, d):
        raise DomainError("expected a square matrix")
    with open(path, "wb") as f:
        f.write(np.asarray([d], dtype=_I64).tobytes())
        f.write(np.ascontiguousarray(matrix, dtype=_F64).tobytes())


@lru_cache(maxsize=8)
def read_matrix(path: str) -> np.ndarray:
    """
    Load a square matrix file. Cached: configs re-read the same sigma-file
    for every sweep point.
    """
    with open(path, "rb") as f:
        d = int(_read_exact(f, 1, _I64, path)[0])
        if d < 1:
            raise DomainError(f"{path}: bad dimension {d}")
        matrix = _read_exact(f, d * d, _F64, path).reshape(d, d)
    out = matrix.astype(np.float64)
    out.setflags(write=False)
    return out


# ---------- Network parameters ----------

def save_params(path: PathLike, params: ScoreNetParams) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(PARAMS_MAGIC)
        f.write(np.asarray([params.d, params.width, params.n_layers], dtype=_I64).tobytes())
        for name in tensor_names(params.n_layers):
            f.write(np.ascontiguousarray(params.tensors[name], dtype=_F64).tobytes())


def load_params(path: PathLike) -> ScoreNetParams:
    with open(path, "rb") as f:
        magic = f.read(len(PARAMS_MAGIC))
        if magic != PARAMS_MAGIC:
            raise DomainError(f"{path}: not a score-network parameter file")
        d, width, n_layers = (int(v) for v in _read_exact(f, 3, _I64, path))
        shapes = tensor_shapes(d, width, n_layers)
        tensors: Dict[str, np.ndarray] = {}
        for name in tensor_names(n_layers):
            shape = shapes[name]
            count = int(np.prod(shape))
            tensors[name] = _read_exact(f, count, _F64, path).reshape(shape).astype(np.float64)
    return ScoreNetParams(d=d, width=width, n_layers=n_layers, tensors=tensors)


def content_key(payload: Dict[str, Any], *arrays: np.ndarray) -> str:
    """sha256 over a JSON payload plus raw array bytes."""
    h = hashlib.sha256(json.dumps(payload, sort_keys=True).encode("utf-8"))
    for arr in arrays:
        h.update(np.ascontiguousarray(arr, dtype=_F64).tobytes())
    return h.hexdigest()[:32]


# ---------- Tables ----------

def write_table(path: PathLike, rows: List[Dict[str, Any]], columns: List[str]) -> None:
    """CSV with fixed column order and 17 significant digits."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(rows, columns=columns)
    frame.to_csv(path, index=False, float_format=config.CSV_FLOAT_FORMAT, lineterminator="\n")
    logger.info("wrote %d rows to %s", len(frame), path)


def read_table(path: PathLike) -> pd.DataFrame:
    try:
        return pd.read_csv(path)
    except FileNotFoundError:
        raise ConfigError(f"CSV not found: {path}") from None


def write_json(path: PathLike, payload: Dict[str, Any]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    logger.info("wrote %s", path)
