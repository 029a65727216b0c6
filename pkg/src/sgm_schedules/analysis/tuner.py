"""
Bound-minimizing schedule search over the parametric family, and head to
head schedule comparisons.

Points of a sweep run concurrently; rows are assembled by sorting on a, so
the result does not depend on the worker count.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np

from .. import config
from ..errors import DomainError, SgmError
from ..models import ComparisonRow, SampleBatch, Schedule, SweepResult, SweepRow, TimeGrid
from ..process.diffusion import AnalyticGaussianScore, ScoreSource, ZeroModifiedScore, backward_sample
from ..process.targets import BoundConstants, GaussianTarget, Target, bound_constants
from ..rng import child_seed
from ..score.network import LearnedScore
from ..score.training import TrainConfig, train
from .. import storage
from .bounds import empirical_bound_constants, estimate_eps, kl_bound, w2_bound
from .metrics import evaluate
from .preprocess import PreprocessTransform, inverse, transfer_bound

logger = logging.getLogger(__name__)

SCORE_MODES = ("exact", "trained", "zero")


@dataclass(frozen=True)
class SweepSettings:
    """
    How each sweep point is evaluated.

    `target` passed to sweep() is the law the model learns (already
    preprocessed when `transform` is set). `reference` holds data samples in
    that same space; it feeds training, empirical bound constants and
    sample-based metrics. Empirical metrics are computed on the original
    scale against `metric_target` when a transform is set.
    """
    base: Schedule = field(default_factory=lambda: Schedule.parametric(0.0))
    score_mode: str = "exact"
    train: Optional[TrainConfig] = None
    n_train: int = config.N_TRAIN
    empirical: Optional[str] = None
    n_samples: int = config.N_SAMPLES
    scheme: str = "em"
    n_mc: int = config.N_MC
    n_runs: int = 1
    refined: bool = False
    reference: Optional[SampleBatch] = None
    transform: Optional[PreprocessTransform] = None
    metric_target: Optional[Target] = None
    constants: Optional[BoundConstants] = None
    cache_dir: Optional[Path] = None
    workers: Optional[int] = None
    n_proj: int = config.SLICED_PROJECTIONS

    def __post_init__(self) -> None:
        if self.score_mode not in SCORE_MODES:
            raise DomainError(f"unknown score mode '{self.score_mode}'")
        if self.n_runs < 1:
            raise DomainError("n_runs must be >= 1")


def parametric_at(base: Schedule, a: float) -> Schedule:
    """Family member with endpoints pinned to base's beta0 / beta1 / T / sigma2."""
    return replace(base, kind="parametric", a=float(a))


def a_grid(a_min: float, a_max: float, step: float) -> List[float]:
    if step <= 0 or a_max < a_min:
        raise DomainError("need step > 0 and a_max >= a_min")
    count = int(np.floor((a_max - a_min) / step + 1e-9)) + 1
    return [round(a_min + i * step, 12) for i in range(count)]


def _target_fingerprint(target: Target) -> Tuple[dict, List[np.ndarray]]:
    if isinstance(target, GaussianTarget):
        return {"kind": "gaussian"}, [target.mu, target.Sigma]
    return {"kind": type(target).__name__, "repr": repr(target)}, []


def _trained_score(target: Target, sched: Schedule, settings: SweepSettings, seed: int) -> LearnedScore:
    cfg = settings.train or TrainConfig()
    cache_path = None
    if settings.cache_dir is not None:
        payload, arrays = _target_fingerprint(target)
        payload.update(
            schedule=sched.to_dict(),
            train=cfg.__dict__,
            n_train=settings.n_train,
            seed=seed,
            data=settings.reference is not None,
        )
        if settings.reference is not None:
            arrays = arrays + [settings.reference.data]
        cache_path = Path(settings.cache_dir) / f"{storage.content_key(payload, *arrays)}.bin"
        if cache_path.exists():
            logger.debug("cache hit %s", cache_path.name)
            return LearnedScore(storage.load_params(cache_path), sched.sigma2)

    result = train(target, sched, cfg, n_train=settings.n_train, seed=seed, data=settings.reference)
    if cache_path is not None:
        storage.save_params(cache_path, result.params)
    return LearnedScore(result.params, sched.sigma2)


def build_score(target: Target, sched: Schedule, settings: SweepSettings, seed: int) -> ScoreSource:
    if settings.score_mode == "exact":
        if not isinstance(target, GaussianTarget):
            raise DomainError("exact score needs a Gaussian target")
        return AnalyticGaussianScore(target, sched)
    if settings.score_mode == "zero":
        return ZeroModifiedScore(target.dim, sched.sigma2)
    return _trained_score(target, sched, settings, seed)


def _empirical_value(
    score: ScoreSource, target: Target, sched: Schedule, grid: TimeGrid, settings: SweepSettings, seed: int
) -> float:
    samples = backward_sample(
        score, sched, grid, settings.n_samples, child_seed(seed, "sample"), scheme=settings.scheme, workers=1
    )
    metric_target = target
    reference = settings.reference
    if settings.transform is not None:
        samples = inverse(settings.transform, samples)
        metric_target = settings.metric_target or target
        if reference is not None:
            reference = inverse(settings.transform, reference)
    if reference is None and settings.empirical in ("sliced-w2", "knn-kl"):
        reference = metric_target.sample(settings.n_samples, child_seed(seed, "reference"))
    report = evaluate(
        settings.empirical,
        samples,
        target=metric_target,
        reference=reference,
        n_proj=settings.n_proj,
        seed=child_seed(seed, "metric"),
    )
    return report.value


def _constants(target: Target, sched: Schedule, grid: TimeGrid, settings: SweepSettings) -> BoundConstants:
    if settings.constants is not None:
        return settings.constants
    if isinstance(target, GaussianTarget):
        return bound_constants(target, sched, grid)
    if settings.reference is None:
        raise DomainError("non-Gaussian W2 bound needs reference samples for its constants")
    return empirical_bound_constants(settings.reference, sched, grid)


def _bound_terms(
    metric: str,
    target: Target,
    sched: Schedule,
    grid: TimeGrid,
    score: ScoreSource,
    eps_mode: str,
    settings: SweepSettings,
    seed: int,
) -> Tuple[float, float, float, float]:
    """(total, e1, e2, e3-or-eps)."""
    if metric == "kl":
        rep = kl_bound(target, sched, grid, score, settings.n_mc, child_seed(seed, "mc"), settings.refined)
        first = rep.e1_refined if rep.refined_used else rep.e1
        return rep.total, first, rep.e2, rep.e3
    if eps_mode == "estimate":
        eps, _ = estimate_eps(target, sched, grid, score, settings.n_mc, child_seed(seed, "eps"))
    else:
        eps = float(eps_mode)
    rep = w2_bound(target, sched, grid, _constants(target, sched, grid, settings), eps=eps)
    return rep.total, rep.e1, rep.e2_disc + rep.e2_time, rep.e2_eps


def original_scale_total(metric: str, total: float, settings: SweepSettings) -> float:
    """
    Bound on the scale empirical metrics are measured on. KL is unchanged by
    the affine rescale; W2 is carried back through the transform.
    """
    if metric == "w2" and settings.transform is not None:
        return transfer_bound(settings.transform, total)
    return total


def evaluate_point(
    metric: str, target: Target, grid: TimeGrid, a: float, eps_mode: str, seed: int, settings: SweepSettings
) -> SweepRow:
    """Bound (and optional empirical metric) at one a, averaged over runs."""
    sched = parametric_at(settings.base, a)
    try:
        totals, e1s, e2s, e3s, emps = [], [], [], [], []
        for r in range(settings.n_runs):
            run_seed = child_seed(seed, "run", r)
            score = build_score(target, sched, settings, run_seed)
            total, e1, e2, e3 = _bound_terms(metric, target, sched, grid, score, eps_mode, settings, run_seed)
            totals.append(total)
            e1s.append(e1)
            e2s.append(e2)
            e3s.append(e3)
            if settings.empirical:
                emps.append(_empirical_value(score, target, sched, grid, settings, run_seed))
    except SgmError as exc:
        logger.warning("a=%g failed: %s", a, exc)
        return SweepRow(a=a, n_runs=settings.n_runs, error=f"{type(exc).__name__}: {exc}")

    mean_total = float(np.mean(totals))
    row = SweepRow(
        a=a,
        bound_total=mean_total,
        bound_total_original=original_scale_total(metric, mean_total, settings),
        bound_e1=float(np.mean(e1s)),
        bound_e2=float(np.mean(e2s)),
        bound_e3_or_eps=float(np.mean(e3s)),
        n_runs=settings.n_runs,
    )
    if emps:
        row.emp_mean = float(np.mean(emps))
        row.emp_std = float(np.std(emps, ddof=1)) if len(emps) > 1 else None
    logger.info("a=%g  bound=%.6g", a, row.bound_total)
    return row


def select_a_star(rows: Iterable[SweepRow]) -> Optional[float]:
    """argmin of bound_total; ties go to smaller |a|, then smaller a."""
    ok = [r for r in rows if r.ok]
    if not ok:
        return None
    return min(ok, key=lambda r: (r.bound_total, abs(r.a), r.a)).a


def _evaluate_many(
    metric: str,
    target: Target,
    grid: TimeGrid,
    a_values: List[float],
    eps_mode: str,
    seed: int,
    settings: SweepSettings,
) -> List[SweepRow]:
    workers = settings.workers or config.worker_count()

    def one(a: float) -> SweepRow:
        return evaluate_point(metric, target, grid, a, eps_mode, child_seed(seed, "a", repr(a)), settings)

    if workers <= 1 or len(a_values) == 1:
        return [one(a) for a in a_values]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, a_values))


def sweep(
    metric: str,
    target: Target,
    grid: TimeGrid,
    a_values: Iterable[float],
    eps_mode: str = "0",
    seed: int = 0,
    settings: Optional[SweepSettings] = None,
) -> SweepResult:
    """
    Evaluate the bound at each distinct a. Failing points are recorded with
    their error and skipped when choosing a_star.
    """
    if metric not in ("kl", "w2"):
        raise DomainError(f"unknown bound metric '{metric}'")
    settings = settings or SweepSettings()
    values = sorted({float(a) for a in a_values})
    if not values:
        raise DomainError("a_values is empty")
    rows = _evaluate_many(metric, target, grid, values, eps_mode, seed, settings)
    rows.sort(key=lambda r: r.a)
    result = SweepResult(metric=metric, rows=rows, a_star=select_a_star(rows))
    result.trace.append({"stage": "coarse", "n_points": len(values), "a_star": result.a_star})
    return result


def refine(
    metric: str,
    target: Target,
    grid: TimeGrid,
    coarse: SweepResult,
    step: float = config.REFINE_STEP,
    radius: float = config.REFINE_RADIUS,
    seed: int = 0,
    eps_mode: str = "0",
    settings: Optional[SweepSettings] = None,
) -> SweepResult:
    """Re-sweep [a_star - radius, a_star + radius] at `step` and merge."""
    if step <= 0:
        raise DomainError("refine step must be positive")
    if radius < step:
        raise DomainError("refine radius must be >= step")
    if coarse.a_star is None:
        return coarse
    settings = settings or SweepSettings()
    n_side = int(np.floor(radius / step + 1e-9))
    center = coarse.a_star
    wanted = [round(center + j * step, 12) for j in range(-n_side, n_side + 1)]
    done = {r.a for r in coarse.rows}
    fresh = [a for a in wanted if a not in done]

    rows = list(coarse.rows)
    if fresh:
        rows += _evaluate_many(metric, target, grid, fresh, eps_mode, seed, settings)
    rows.sort(key=lambda r: r.a)
    merged = SweepResult(metric=metric, rows=rows, a_star=select_a_star(rows), trace=list(coarse.trace))
    merged.trace.append(
        {"stage": "refine", "step": step, "radius": radius, "n_points": len(fresh), "a_star": merged.a_star}
    )
    return merged


def _gain(reference: Optional[float], value: float) -> Optional[float]:
    if reference is None or reference == 0:
        return None
    return 100.0 * (reference - value) / reference


def compare_schedules(
    target: Target,
    grid: TimeGrid,
    schedules: Dict[str, Schedule],
    n_runs: int = 1,
    seed: int = 0,
    settings: Optional[SweepSettings] = None,
) -> List[ComparisonRow]:
    """
    Empirical metric per schedule over n_runs seeds. Run r uses the same
    seed under every schedule. std is None for a single run.
    """
    if n_runs < 1:
        raise DomainError("n_runs must be >= 1")
    settings = settings or SweepSettings()
    if not settings.empirical:
        metric = "gauss-kl" if isinstance(target, GaussianTarget) else "sliced-w2"
        settings = replace(settings, empirical=metric)

    rows: List[ComparisonRow] = []
    for name, sched in schedules.items():
        values = []
        for r in range(n_runs):
            run_seed = child_seed(seed, "run", r)
            score = build_score(target, sched, settings, run_seed)
            values.append(_empirical_value(score, target, sched, grid, settings, run_seed))
        std = float(np.std(values, ddof=1)) if n_runs > 1 else None
        rows.append(ComparisonRow(schedule=name, mean=float(np.mean(values)), std=std, n_runs=n_runs, values=values))
        logger.info("%s: %s = %.6g", name, settings.empirical, rows[-1].mean)

    means = {r.schedule: r.mean for r in rows}
    for r in rows:
        if r.schedule != "linear":
            r.gain_pct = _gain(means.get("linear"), r.mean)
        if r.schedule not in ("linear", "cosine"):
            r.gain_vs_cosine_pct = _gain(means.get("cosine"), r.mean)
    return rows
