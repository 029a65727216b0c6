"""
Global configuration for the sgm_schedules package.

Edit this file to change:
- paths to artifacts and bundled configs
- default schedule / grid / training constants
- numerical guards
"""

import os
from pathlib import Path

from dotenv import load_dotenv

load_dotenv()

# ---------- Paths ----------

# project root = two levels up from this file (…/src/sgm_schedules/config.py)
PROJECT_ROOT = Path(__file__).resolve().parents[2]
CONFIG_DIR = PROJECT_ROOT / "configs"

# Trained networks from sweeps are cached here, keyed by content hash
CACHE_DIR = Path(os.getenv("SGM_CACHE_DIR", str(PROJECT_ROOT / ".sgm_cache")))

# ---------- Schedule defaults ----------

BETA0 = 0.1
BETA1 = 20.0
HORIZON = 1.0
SIGMA2 = 1.0

# offset of the cosine schedule, chosen so that beta_cos(0) matches BETA0
COSINE_S = 0.021122
# beta_cos blows up at t=T; sampling and integration use this ceiling
COSINE_CLIP = 200.0

# below this |a| the parametric family is evaluated as the linear one
LINEAR_A_TOL = 1e-8

# ---------- Discretization ----------

N_STEPS = 500
# subpoints per grid cell for trapezoid integrals of C_t, L_t
CELL_SUBPOINTS = 64
# any |x| beyond this during backward sampling counts as divergence
DIVERGENCE_LIMIT = 1e8
# particles per score-evaluation chunk in the backward samplers
CHUNK_ROWS = 1024

# ---------- Targets ----------

EIGEN_FLOOR = 1e-12
SYMMETRY_TOL = 1e-12
FUNNEL_A = 1.0
FUNNEL_B = 0.5

# ---------- Score network / training ----------

WIDTH = 256
N_HIDDEN = 3
BATCH_SIZE = 64
LEARNING_RATE = 1e-4
EPOCHS = 20
N_TRAIN = 10_000
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

# ---------- Bounds / estimators ----------

N_MC = 500
SLICED_PROJECTIONS = 2000
N_SAMPLES = 10_000
KNN_DISTANCE_FLOOR = 1e-300

# ---------- Tuning ----------

A_MIN = -10.0
A_MAX = 10.0
A_STEP = 1.0
REFINE_STEP = 0.25
REFINE_RADIUS = 1.0

# ---------- Logging ----------

LOG_FORMAT = "[%(levelname)s] %(message)s"
LOG_LEVEL = os.getenv("SGM_LOG_LEVEL", "INFO")

# CSV floats: 17 significant digits round-trip a float64
CSV_FLOAT_FORMAT = "%.17g"


def worker_count() -> int:
    """
    Number of workers for sweep points and particle chunks.

    Reads SGM_THREADS (also from .env); defaults to hardware parallelism.
    """
    raw = os.getenv("SGM_THREADS")
    if raw:
        try:
            value = int(raw)
        except ValueError:
            value = 0
        if value >= 1:
            return value
    return os.cpu_count() or 1
