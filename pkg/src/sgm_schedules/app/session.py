"""
Experiment orchestration: config file -> sweep -> comparison -> artifacts.
"""

import logging
from dataclasses import replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from .. import config, storage
from ..analysis.preprocess import PreprocessTransform, fit_transform, transform_gaussian
from ..analysis.tuner import SweepSettings, a_grid, compare_schedules, refine, sweep
from ..errors import ConfigError
from ..models import (
    COMPARISON_COLUMNS,
    ExperimentConfig,
    SWEEP_COLUMNS,
    SampleBatch,
    Schedule,
    TimeGrid,
    load_config,
    serialize_config,
)
from ..models.experiment import ScheduleSection, TargetSection, TrainSection
from ..process.schedules import standard_schedules
from ..process.targets import GaussianTarget, Target, funnel_target, gmm25_target, benchmark_gaussian
from ..rng import child_seed
from ..score.training import TrainConfig
from .plot import emit_plot

logger = logging.getLogger(__name__)


# ---------- Builders ----------

def build_schedule(section: ScheduleSection) -> Schedule:
    try:
        return Schedule(
            kind=section.kind,
            a=section.a,
            s=section.s,
            beta0=section.beta0,
            beta1=section.beta1,
            T=section.T,
            sigma2=section.sigma2,
        )
    except ValueError as exc:
        raise ConfigError(str(exc), key="schedule") from None


def build_target(section: TargetSection) -> Target:
    """Named target, optionally with a custom mean (Gaussian kinds) or covariance file."""
    d = section.dim
    if section.kind == "funnel":
        return funnel_target(d)
    if section.kind == "gmm25":
        return gmm25_target(d)
    if section.kind == "custom-gaussian":
        Sigma = storage.read_matrix(str(section.sigma_file))
        if Sigma.shape != (d, d):
            raise ConfigError(f"sigma-file is {Sigma.shape[0]}-dimensional, dim is {d}", key="target.sigma-file")
        mu = np.zeros(d)
    else:
        base = benchmark_gaussian(section.kind, d)
        mu, Sigma = base.mu, base.Sigma
    if section.mu is not None:
        mu = np.asarray(section.mu, dtype=np.float64)
    return GaussianTarget(mu, Sigma)


def build_train_config(section: TrainSection, seed: int) -> TrainConfig:
    return TrainConfig(
        loss=section.loss,
        epochs=section.epochs,
        batch_size=section.batch,
        learning_rate=section.lr,
        seed=seed,
        width=section.width,
    )


def prepare_data(
    target: Target, n_train: int, seed: int, preprocess: str
) -> Tuple[Target, Optional[SampleBatch], Optional[PreprocessTransform]]:
    """
    The law the model learns, the data it learns from, and the frozen transform.

    Gaussian targets without preprocessing need no data; otherwise the
    training draws are fitted (rescale) and reused for bound constants.
    """
    if preprocess == "none":
        if isinstance(target, GaussianTarget):
            return target, None, None
        return target, target.sample(n_train, child_seed(seed, "data")), None

    data = target.sample(n_train, child_seed(seed, "data"))
    transform, scaled = fit_transform(data)
    model_target = transform_gaussian(transform, target) if isinstance(target, GaussianTarget) else target
    return model_target, scaled, transform


# ---------- Session ----------

def run_experiment(config_path: Path, output_dir: Optional[Path] = None) -> Dict[str, Any]:
    """Load a config file and execute it; outputs land next to the file unless output_dir is given."""
    config_path = Path(config_path)
    cfg = load_config(config_path)
    return execute(cfg, Path(output_dir) if output_dir is not None else config_path.parent)


def execute(cfg: ExperimentConfig, base_dir: Path) -> Dict[str, Any]:
    """
    Run the full protocol of a validated config:

    - coarse sweep of the bound over a (one run per point)
    - local refinement around a_star (experiment.runs runs per point)
    - when metrics are listed: linear / cosine / parametric(a_star) comparison
    - CSV + JSON artifacts, optional SVG plot
    """
    seed = cfg.experiment.seed

    # Problem
    target = build_target(cfg.target)
    base = build_schedule(cfg.schedule)
    grid = TimeGrid(cfg.grid.steps, base.T)
    model_target, reference, transform = prepare_data(
        target, cfg.target.n_train, seed, cfg.experiment.preprocess
    )
    metrics: List[str] = list(cfg.experiment.metrics)

    settings = SweepSettings(
        base=base,
        score_mode=cfg.experiment.score,
        train=build_train_config(cfg.train, seed),
        n_train=cfg.target.n_train,
        empirical=metrics[0] if metrics else None,
        n_samples=cfg.experiment.n_samples,
        scheme=cfg.experiment.scheme,
        n_mc=cfg.experiment.n_mc,
        n_runs=1,
        refined=cfg.experiment.refined,
        reference=reference,
        transform=transform,
        metric_target=target,
        cache_dir=config.CACHE_DIR if cfg.experiment.score == "trained" else None,
    )

    # Sweep
    eps_mode = cfg.experiment.eps
    a_values = a_grid(cfg.sweep.a_min, cfg.sweep.a_max, cfg.sweep.a_step)
    result = sweep(cfg.experiment.bound, model_target, grid, a_values, eps_mode, seed, settings)
    if cfg.sweep.refine_step > 0 and result.a_star is not None:
        result = refine(
            cfg.experiment.bound,
            model_target,
            grid,
            result,
            step=cfg.sweep.refine_step,
            radius=cfg.sweep.refine_radius,
            seed=seed,
            eps_mode=eps_mode,
            settings=replace(settings, n_runs=cfg.experiment.runs),
        )

    # Compare
    comparison: Dict[str, List[Dict[str, Any]]] = {}
    if metrics and result.a_star is not None:
        schedules = standard_schedules(
            result.a_star, beta0=base.beta0, beta1=base.beta1, T=base.T, sigma2=base.sigma2
        )
        for name in metrics:
            rows = compare_schedules(
                model_target, grid, schedules, cfg.experiment.runs, seed, replace(settings, empirical=name)
            )
            comparison[name] = [r.to_dict() for r in rows]

    # Emit
    csv_path = cfg.output_path(cfg.output.csv, base_dir)
    storage.write_table(csv_path, [r.to_dict() for r in result.rows], SWEEP_COLUMNS)
    for name, rows in comparison.items():
        storage.write_table(cfg.output_path(f"comparison-{name}.csv", base_dir), rows, COMPARISON_COLUMNS)

    report = {
        "config": serialize_config(cfg),
        "a_star": result.a_star,
        "metric": result.metric,
        "trace": result.trace,
        "comparison": comparison,
        "transform": transform.to_dict() if transform is not None else None,
        "failed_points": [r.a for r in result.rows if r.error],
    }
    json_path = cfg.output_path(cfg.output.report, base_dir)
    storage.write_json(json_path, report)

    plot_path = None
    if cfg.output.plot:
        plot_path = cfg.output_path(cfg.output.plot, base_dir)
        y_cols = ["bound_total_original"] + (["emp_mean"] if metrics else [])
        emit_plot(csv_path, "a", y_cols, plot_path, log_scale=cfg.output.log_scale)

    return {
        "sweep": result,
        "comparison": comparison,
        "csv": csv_path,
        "report": json_path,
        "plot": plot_path,
    }


# ---------- Protocol checks ----------

def _pooled_std(*stds: Optional[float]) -> float:
    return float(np.sqrt(np.mean([(s or 0.0) ** 2 for s in stds])))


def protocol_checks(
    a_star: Optional[float],
    comparison: Dict[str, List[Dict[str, Any]]],
    a_bracket: Tuple[float, float] = (0.0, 5.0),
    metric: Optional[str] = None,
) -> Dict[str, Any]:
    """
    Verdict of a finished run: a_star inside a_bracket, and the
    parametric(a_star) mean no worse than linear mean + pooled std.
    """
    if not comparison:
        raise ConfigError("run has no schedule comparison; list experiment.metrics")
    metric = metric or next(iter(comparison))
    if metric not in comparison:
        raise ConfigError(f"no comparison for metric '{metric}'", key="experiment.metrics")

    rows = {r["schedule"]: r for r in comparison[metric]}
    linear = rows.get("linear")
    tuned = next((r for name, r in rows.items() if name.startswith("parametric(")), None)
    if linear is None or tuned is None:
        raise ConfigError("comparison needs linear and parametric rows")

    lo, hi = a_bracket
    pooled = _pooled_std(linear["std"], tuned["std"])
    in_bracket = a_star is not None and lo <= a_star <= hi
    non_inferior = tuned["mean"] <= linear["mean"] + pooled
    return {
        "metric": metric,
        "a_star": a_star,
        "a_bracket": [lo, hi],
        "a_star_in_bracket": in_bracket,
        "linear_mean": linear["mean"],
        "tuned_mean": tuned["mean"],
        "pooled_std": pooled,
        "non_inferior": non_inferior,
        "passed": in_bracket and non_inferior,
    }
