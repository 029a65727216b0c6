"""
Command-line entry point.

    PYTHONPATH=src python -m sgm_schedules.app.cli <command> [flags]

Exit status: 0 on success, 2 for invalid configs / flags / CSV columns,
3 for numeric failures raised by the library.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from pydantic import ValidationError

from .. import config, storage
from ..analysis.bounds import (
    empirical_bound_constants,
    estimate_eps,
    kl_bound,
    w2_bound,
    w2_rate_constants,
)
from ..analysis.metrics import evaluate
from ..analysis.preprocess import PreprocessTransform, inverse, transfer_bound, transform_gaussian
from ..errors import ConfigError, SgmError
from ..models import ExperimentConfig, TimeGrid
from ..models.experiment import METRIC_NAMES
from ..process.diffusion import AnalyticGaussianScore, ScoreSource, ZeroModifiedScore, backward_sample
from ..process.targets import GaussianTarget, Target, bound_constants
from ..rng import child_seed
from ..score.network import LearnedScore
from ..score.training import train
from .plot import emit_plot
from .session import build_schedule, build_target, build_train_config, execute, prepare_data, run_experiment

logger = logging.getLogger(__name__)

# config section -> fields settable from flags (argparse dest == field name)
FLAG_FIELDS: Dict[str, List[str]] = {
    "schedule": ["kind", "a", "s", "beta0", "beta1", "T", "sigma2"],
    "target": ["target", "dim", "mu", "sigma_file", "n_train"],
    "grid": ["steps"],
    "train": ["loss", "epochs", "lr", "batch", "width"],
    "experiment": [
        "seed", "bound", "refined", "eps", "n_mc", "score_mode", "scheme",
        "n_samples", "runs", "preprocess", "metrics",
    ],
    "sweep": ["a_min", "a_max", "a_step", "refine_step", "refine_radius"],
}
# argparse dest -> config field name, where they differ
RENAMED = {"target": "kind", "score_mode": "score"}


# ---------- Flags -> config ----------

def _csv_floats(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got '{text}'") from None


def _csv_names(text: str) -> List[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    """Validated config from whichever flags the subcommand defines; unset flags keep defaults."""
    raw: Dict[str, Dict[str, Any]] = {}
    flags = vars(args)
    for section, names in FLAG_FIELDS.items():
        for name in names:
            value = flags.get(name)
            if value is None:
                continue
            field = RENAMED.get(name, name)
            raw.setdefault(section, {})[field] = value
    try:
        return ExperimentConfig(**raw)
    except ValidationError as exc:
        err = exc.errors()[0]
        loc = [str(p) for p in err["loc"]]
        flag = "--" + loc[1].replace("_", "-") if len(loc) >= 2 else None
        raise ConfigError(err["msg"], key=flag) from None


def _score_source(spec: str, target: Target, cfg: ExperimentConfig) -> ScoreSource:
    """exact | zero | net:<params-file>"""
    sched = build_schedule(cfg.schedule)
    if spec == "exact":
        if not isinstance(target, GaussianTarget):
            raise ConfigError("--score exact needs a Gaussian target", key="--score")
        return AnalyticGaussianScore(target, sched)
    if spec == "zero":
        return ZeroModifiedScore(target.dim, sched.sigma2)
    if spec.startswith("net:"):
        path = Path(spec[4:])
        if not path.exists():
            raise ConfigError(f"params file not found: {path}", key="--score")
        params = storage.load_params(path)
        if params.d != target.dim:
            raise ConfigError(f"network is {params.d}-dimensional, target is {target.dim}", key="--score")
        return LearnedScore(params, sched.sigma2)
    raise ConfigError(f"unknown score '{spec}' (exact, zero, net:<file>)", key="--score")


def _load_transform(path: Optional[str]) -> Optional[PreprocessTransform]:
    if not path:
        return None
    if not Path(path).exists():
        raise ConfigError(f"transform file not found: {path}", key="--transform")
    return PreprocessTransform.load(Path(path))


def _emit(payload: Dict[str, Any], out: Optional[str]) -> None:
    if out:
        storage.write_json(Path(out), payload)
    print(json.dumps(payload, indent=2, sort_keys=True))


# ---------- Commands ----------

def cmd_generate(args: argparse.Namespace) -> int:
    cfg = config_from_args(args)
    target = build_target(cfg.target)
    transform = _load_transform(args.transform)
    if transform is not None and transform.dim != target.dim:
        raise ConfigError(f"transform is {transform.dim}-dimensional, target is {target.dim}", key="--transform")
    if transform is not None and isinstance(target, GaussianTarget):
        target = transform_gaussian(transform, target)
    sched = build_schedule(cfg.schedule)
    grid = _grid(cfg)
    score = _score_source(args.score, target, cfg)

    batch = backward_sample(
        score, sched, grid, args.n, child_seed(cfg.experiment.seed, "sample"),
        scheme=cfg.experiment.scheme, workers=config.worker_count(),
    )
    if transform is not None:
        batch = inverse(transform, batch)
    storage.write_samples(Path(args.out), batch)

    print("\n--- SAMPLES ---")
    print(f"n={batch.n} d={batch.dim} scheme={cfg.experiment.scheme} steps={grid.N} -> {args.out}")
    print(f"mean second moment: {batch.second_moment():.6g}")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    cfg = config_from_args(args)
    seed = cfg.experiment.seed
    target = build_target(cfg.target)
    sched = build_schedule(cfg.schedule)
    model_target, data, transform = prepare_data(target, cfg.target.n_train, seed, cfg.experiment.preprocess)

    result = train(model_target, sched, build_train_config(cfg.train, seed), cfg.target.n_train, seed, data)
    out = Path(args.out)
    storage.save_params(out, result.params)
    if transform is not None:
        transform_path = Path(args.transform_out) if args.transform_out else out.with_suffix(".transform.json")
        transform.save(transform_path)
        print(f"transform -> {transform_path}")

    print("\n--- TRAINING ---")
    for epoch, loss in enumerate(result.epoch_losses, start=1):
        print(f"epoch {epoch:3d}  loss={loss:.6g}")
    print(f"params -> {out}")
    return 0


def cmd_bound(args: argparse.Namespace) -> int:
    cfg = config_from_args(args)
    seed = cfg.experiment.seed
    target = build_target(cfg.target)
    sched = build_schedule(cfg.schedule)
    grid = _grid(cfg)
    model_target, reference, transform = prepare_data(target, cfg.target.n_train, seed, cfg.experiment.preprocess)
    score = _score_source(args.score, model_target, cfg)

    if cfg.experiment.bound == "kl":
        report = kl_bound(
            model_target, sched, grid, score, cfg.experiment.n_mc, child_seed(seed, "mc"), cfg.experiment.refined
        )
        payload = report.to_dict()
    else:
        if isinstance(model_target, GaussianTarget):
            constants = bound_constants(model_target, sched, grid)
        else:
            constants = empirical_bound_constants(reference, sched, grid)
        if cfg.experiment.eps == "estimate":
            eps, k_max = estimate_eps(model_target, sched, grid, score, cfg.experiment.n_mc, child_seed(seed, "eps"))
            logger.info("estimated eps=%.6g (cell %d)", eps, k_max)
        else:
            eps = float(cfg.experiment.eps)
        report = w2_bound(model_target, sched, grid, constants, eps=eps)
        payload = report.to_dict()
        payload["rate_constants"] = {
            k: v for k, v in w2_rate_constants(constants, sched, grid).items() if k != "rate_terms"
        }
        if transform is not None:
            payload["total_original_scale"] = transfer_bound(transform, report.total)

    print(f"\n--- {cfg.experiment.bound.upper()} BOUND ---")
    _emit(payload, args.out)
    return 0


def cmd_metrics(args: argparse.Namespace) -> int:
    cfg = config_from_args(args)
    seed = cfg.experiment.seed
    batch = storage.read_samples(Path(args.samples), seed=seed)
    reference = storage.read_samples(Path(args.reference), seed=seed) if args.reference else None
    has_target = args.target is not None or args.dim is not None
    target = build_target(cfg.target) if has_target else None
    if target is not None and target.dim != batch.dim:
        raise ConfigError(f"samples are {batch.dim}-dimensional, target is {target.dim}", key="--dim")
    if reference is None and args.metric in ("sliced-w2", "knn-kl"):
        if target is None:
            raise ConfigError(f"{args.metric} needs --reference or a target (--target/--dim)", key="--reference")
        reference = target.sample(batch.n, child_seed(seed, "reference"))
    if target is None and args.metric in ("gauss-kl", "gauss-w2", "nll"):
        raise ConfigError(f"{args.metric} needs a target (--target/--dim)", key="--dim")

    k = None if args.k == "auto" else int(args.k)
    report = evaluate(
        args.metric, batch, target=target, reference=reference, n_proj=args.projections, k=k,
        seed=child_seed(seed, "metric"),
    )
    print("\n--- METRIC ---")
    _emit(report.to_dict(), args.out)
    return 0


def cmd_tune(args: argparse.Namespace) -> int:
    cfg = config_from_args(args)
    out = Path(args.out)
    cfg.output.dir = str(out.parent) if str(out.parent) else "."
    cfg.output.csv = out.name
    cfg.output.report = Path(args.report).name if args.report else out.with_suffix(".json").name
    result = execute(cfg, Path.cwd())
    _print_sweep(result)
    return 0


def cmd_plot(args: argparse.Namespace) -> int:
    path = emit_plot(Path(args.csv), args.x, _csv_names(args.y), Path(args.out), log_scale=args.log)
    print(f"plot -> {path}")
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    result = run_experiment(Path(args.config), Path(args.out_dir) if args.out_dir else None)
    _print_sweep(result)
    return 0


def _grid(cfg: ExperimentConfig) -> TimeGrid:
    return TimeGrid(cfg.grid.steps, cfg.schedule.T)


def _print_sweep(result: Dict[str, Any]) -> None:
    sweep = result["sweep"]
    print("\n--- SWEEP ---")
    for row in sweep.rows:
        if row.ok:
            emp = "" if row.emp_mean is None else f"  emp={row.emp_mean:.6g}"
            orig = "" if row.bound_total_original == row.bound_total else f" (original scale {row.bound_total_original:.6g})"
            print(f"a={row.a:8.3f}  bound={row.bound_total:.6g}{orig}{emp}")
        else:
            print(f"a={row.a:8.3f}  failed: {row.error}")
    print(f"\na_star = {sweep.a_star}")
    for name, rows in result["comparison"].items():
        print(f"\n--- COMPARISON ({name}) ---")
        for r in rows:
            std = "" if r["std"] is None else f" +/- {r['std']:.6g}"
            gain = "" if r["gain_pct"] is None else f"  gain={r['gain_pct']:.2f}%"
            print(f"{r['schedule']:<24} {r['mean']:.6g}{std}{gain}")
    print(f"\ncsv -> {result['csv']}")
    print(f"report -> {result['report']}")
    if result["plot"]:
        print(f"plot -> {result['plot']}")


# ---------- Parser ----------

def _problem_flags() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("problem")
    g.add_argument("--target", choices=["iso", "heterosc", "corr", "funnel", "gmm25", "custom-gaussian"],
                   help="Target distribution (default iso).")
    g.add_argument("--dim", type=int, help="Dimension d.")
    g.add_argument("--mu", type=_csv_floats, help="Comma-separated mean (Gaussian targets).")
    g.add_argument("--sigma-file", dest="sigma_file", help="Covariance matrix file (custom-gaussian).")
    g.add_argument("--kind", choices=["linear", "parametric", "cosine"], help="Schedule kind.")
    g.add_argument("--a", type=float, help="Parametric schedule shape a.")
    g.add_argument("--s", type=float, help="Cosine offset s.")
    g.add_argument("--beta0", type=float, help="beta(0).")
    g.add_argument("--beta1", type=float, help="beta(T).")
    g.add_argument("--T", type=float, help="Horizon.")
    g.add_argument("--sigma2", type=float, help="Stationary variance.")
    g.add_argument("--steps", type=int, help="Discretization steps N.")
    g.add_argument("--seed", type=int, help="Top-level seed.")
    return p


def _train_flags() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("training")
    g.add_argument("--loss", choices=["explicit", "conditional"], help="Score-matching loss.")
    g.add_argument("--epochs", type=int, help="Training epochs.")
    g.add_argument("--lr", type=float, help="Adam learning rate.")
    g.add_argument("--batch", type=int, help="Minibatch size.")
    g.add_argument("--width", type=int, help="Hidden width W (even).")
    g.add_argument("--n-train", dest="n_train", type=int, help="Training sample count.")
    g.add_argument("--preprocess", choices=["none", "rescale"], help="Standardize and rescale the data first.")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sgm_schedules",
        description="Noise schedules for score-based generative models: sampling, bounds, tuning.",
    )
    parser.add_argument("--verbose", action="store_true", help="Debug logging.")
    sub = parser.add_subparsers(dest="command", required=True)
    problem, training = _problem_flags(), _train_flags()

    p = sub.add_parser("generate", parents=[problem], help="Run the backward sampler.")
    p.add_argument("--scheme", choices=["em", "ei"], help="Discretization scheme.")
    p.add_argument("--n", type=int, default=config.N_SAMPLES, help="Number of samples.")
    p.add_argument("--score", default="exact", help="exact | zero | net:<params-file>.")
    p.add_argument("--transform", help="Transform JSON; samples are mapped back to the original scale.")
    p.add_argument("--out", required=True, help="Samples file.")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", parents=[problem, training], help="Train a score network.")
    p.add_argument("--out", default="params.bin", help="Parameter file.")
    p.add_argument("--transform-out", dest="transform_out", help="Where to save the preprocessing transform.")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("bound", parents=[problem, training], help="Evaluate the KL or W2 bound.")
    p.add_argument("--metric", dest="bound", choices=["kl", "w2"], default="kl", help="Which bound.")
    p.add_argument("--refined", action="store_true", default=None, help="Refined E1 (needs lam_max <= sigma2).")
    p.add_argument("--eps", help="0 | estimate | <value>.")
    p.add_argument("--n-mc", dest="n_mc", type=int, help="Monte Carlo samples per cell.")
    p.add_argument("--score", default="exact", help="exact | zero | net:<params-file>.")
    p.add_argument("--out", help="Report JSON.")
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("metrics", parents=[problem], help="Empirical metric of a samples file.")
    p.add_argument("--metric", choices=list(METRIC_NAMES), required=True, help="Metric name.")
    p.add_argument("--samples", required=True, help="Samples file.")
    p.add_argument("--reference", help="Reference samples file (sliced-w2, knn-kl).")
    p.add_argument("--projections", type=int, default=config.SLICED_PROJECTIONS, help="Sliced-W2 directions.")
    p.add_argument("--k", default="auto", help="k-NN order or 'auto' (ceil(sqrt(d))).")
    p.add_argument("--out", help="Report JSON.")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("tune", parents=[problem, training], help="Sweep a and pick the bound minimizer.")
    p.add_argument("--metric", dest="bound", choices=["kl", "w2"], default="kl", help="Which bound to minimize.")
    p.add_argument("--a-min", dest="a_min", type=float)
    p.add_argument("--a-max", dest="a_max", type=float)
    p.add_argument("--a-step", dest="a_step", type=float)
    p.add_argument("--refine-step", dest="refine_step", type=float, help="0 disables refinement.")
    p.add_argument("--refine-radius", dest="refine_radius", type=float)
    p.add_argument("--runs", type=int, help="Seeds per refined point and per compared schedule.")
    p.add_argument("--score", dest="score_mode", choices=["exact", "trained", "zero"], help="Score per point.")
    p.add_argument("--eps", help="0 | estimate | <value> (W2).")
    p.add_argument("--n-mc", dest="n_mc", type=int)
    p.add_argument("--refined", action="store_true", default=None)
    p.add_argument("--scheme", choices=["em", "ei"])
    p.add_argument("--n-samples", dest="n_samples", type=int)
    p.add_argument("--empirical", dest="metrics", type=_csv_names,
                   help="Comma-separated empirical metrics per point.")
    p.add_argument("--out", default="sweep.csv", help="Sweep CSV.")
    p.add_argument("--report", help="Report JSON (default: CSV name with .json).")
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("plot", help="SVG line plot of CSV columns.")
    p.add_argument("--csv", required=True)
    p.add_argument("--x", default="a")
    p.add_argument("--y", default="bound_total", help="Comma-separated columns.")
    p.add_argument("--log", action="store_true", help="Log-scale y axis.")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("run", help="Run a config file end to end.")
    p.add_argument("config")
    p.add_argument("--out-dir", dest="out_dir", help="Base directory for outputs (default: config's directory).")
    p.set_defaults(func=cmd_run)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else config.LOG_LEVEL,
        format=config.LOG_FORMAT,
        stream=sys.stderr,
        force=True,
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SgmError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
