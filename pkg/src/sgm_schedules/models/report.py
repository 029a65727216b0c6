import math
from dataclasses import dataclass, field, asdict
from typing import Dict, Any, List, Optional

NOVIKOV_NOTE = (
    "assumes the Novikov-type integrability condition on the learned score; "
    "it is not checked numerically"
)


def _finite_or_none(x: Optional[float]) -> Optional[float]:
    if x is None or not math.isfinite(x):
        return None
    return float(x)


@dataclass
class KlBoundReport:
    """
    Term-by-term KL upper bound for one (schedule, grid, score) setting.

    total = E1 (or E1_refined when refined_used) + E2 + E3.
    """
    e1: float
    e2: float
    e3: float
    total: float
    e1_refined: Optional[float] = None
    refined_used: bool = False
    log_e1: Optional[float] = None
    e2_mc_std: float = 0.0
    h_condition_ok: bool = True
    novikov_assumed: bool = True
    note: str = NOVIKOV_NOTE
    schedule: Dict[str, Any] = field(default_factory=dict)
    n_steps: int = 0

    def to_dict(self) -> Dict[str, Any]:
        d = asdict(self)
        d["log_e1"] = _finite_or_none(self.log_e1)
        return d

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "KlBoundReport":
        return cls(**{k: d[k] for k in cls.__dataclass_fields__ if k in d})


@dataclass
class W2BoundReport:
    """
    Term-by-term W2 upper bound.

    total = e1 + e2_disc + e2_eps + e2_time.
    """
    e1: float
    e2_disc: float
    e2_eps: float
    e2_time: float
    total: float
    step_size_ok: bool
    step_size_margin: float
    eps: float = 0.0
    M: float = 0.0
    B: float = 0.0
    schedule: Dict[str, Any] = field(default_factory=dict)
    n_steps: int = 0

    @property
    def e2(self) -> float:
        return self.e2_disc + self.e2_eps + self.e2_time

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "W2BoundReport":
        return cls(**{k: d[k] for k in cls.__dataclass_fields__ if k in d})


@dataclass
class StepSizeCheck:
    ok: bool
    margin: float
    worst_cell: int


@dataclass
class MetricReport:
    """
    One empirical metric value. std is None for single-run values.
    """
    name: str
    value: float
    std: Optional[float] = None
    n_samples: int = 0
    params: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


COMPARISON_COLUMNS = ["schedule", "mean", "std", "n_runs", "gain_pct", "gain_vs_cosine_pct"]

# sweep CSV columns, in order
SWEEP_COLUMNS = [
    "a",
    "bound_total",
    "bound_total_original",
    "bound_e1",
    "bound_e2",
    "bound_e3_or_eps",
    "emp_mean",
    "emp_std",
    "n_runs",
    "error",
]


@dataclass
class SweepRow:
    """
    Bound summary (and optional empirical metric) at one value of a.

    For KL sweeps bound_e3_or_eps holds E3; for W2 sweeps it holds the
    epsilon-dependent term, and bound_e2 the remaining discretization terms.
    bound_total_original is the bound on the scale emp_mean is measured on;
    it differs from bound_total only for W2 sweeps of rescaled data.
    """
    a: float
    bound_total: Optional[float] = None
    bound_total_original: Optional[float] = None
    bound_e1: Optional[float] = None
    bound_e2: Optional[float] = None
    bound_e3_or_eps: Optional[float] = None
    emp_mean: Optional[float] = None
    emp_std: Optional[float] = None
    n_runs: int = 0
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None and self.bound_total is not None

    def to_dict(self) -> Dict[str, Any]:
        return {k: getattr(self, k) for k in SWEEP_COLUMNS}


@dataclass
class SweepResult:
    """
    Rows sorted by a; a_star minimizes bound_total over rows without errors.
    """
    metric: str
    rows: List[SweepRow] = field(default_factory=list)
    a_star: Optional[float] = None
    trace: List[Dict[str, Any]] = field(default_factory=list)

    def row(self, a: float) -> Optional[SweepRow]:
        for r in self.rows:
            if r.a == a:
                return r
        return None

    @property
    def min_total(self) -> Optional[float]:
        totals = [r.bound_total for r in self.rows if r.ok]
        return min(totals) if totals else None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "metric": self.metric,
            "a_star": self.a_star,
            "rows": [r.to_dict() for r in self.rows],
            "trace": self.trace,
        }


@dataclass
class ComparisonRow:
    """
    Empirical metric over runs for one schedule. gain_pct and
    gain_vs_cosine_pct are relative improvements (positive = lower metric)
    over the linear and cosine schedules.
    """
    schedule: str
    mean: float
    std: Optional[float]
    n_runs: int
    values: List[float] = field(default_factory=list)
    gain_pct: Optional[float] = None
    gain_vs_cosine_pct: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "schedule": self.schedule,
            "mean": self.mean,
            "std": self.std,
            "n_runs": self.n_runs,
            "gain_pct": self.gain_pct,
            "gain_vs_cosine_pct": self.gain_vs_cosine_pct,
        }
