"""
Closed-form bound table for the linear, cosine and parametric schedules
on a Gaussian target (exact score, no sampling).

    PYTHONPATH=src python scripts/compare_schedules.py --target iso --dim 50 --a 2
"""

import argparse
from typing import Any, Dict, List

from sgm_schedules.analysis.bounds import check_step_size, kl_bound, w2_bound
from sgm_schedules.analysis.preprocess import fit_transform, transform_gaussian
from sgm_schedules.errors import SgmError
from sgm_schedules.models import TimeGrid
from sgm_schedules.process.diffusion import AnalyticGaussianScore
from sgm_schedules.process.schedules import standard_schedules
from sgm_schedules.process.targets import bound_constants, benchmark_gaussian
from sgm_schedules.rng import child_seed


def bound_rows(target, grid: TimeGrid, a: float, seed: int) -> List[Dict[str, Any]]:
    """
    KL bound on the raw target, W2 bound on its rescaled version.
    """
    data = target.sample(20_000, child_seed(seed, "data"))
    transform, _ = fit_transform(data)
    scaled = transform_gaussian(transform, target)
    print(f"[INFO] Rescaled target: lam_min={scaled.lam_min:.4g} lam_max={scaled.lam_max:.4g}")

    rows = []
    for name, sched in standard_schedules(a).items():
        row: Dict[str, Any] = {"schedule": name}
        kl = kl_bound(target, sched, grid, AnalyticGaussianScore(target, sched))
        row["kl_bound"] = kl.total
        try:
            constants = bound_constants(scaled, sched, grid)
            row["w2_bound"] = w2_bound(scaled, sched, grid, constants).total
            row["step_ok"] = check_step_size(sched, grid, constants).ok
            row["step_ok_M"] = check_step_size(sched, grid, constants, with_M=True).ok
        except SgmError as exc:
            print(f"[WARN] {name}: {exc}")
            row["w2_bound"] = None
            row["step_ok"] = None
            row["step_ok_M"] = None
        rows.append(row)
    return rows


def main() -> None:
    parser = argparse.ArgumentParser(description="Compare schedule bounds on a Gaussian target.")
    parser.add_argument("--target", choices=["iso", "heterosc", "corr"], default="iso")
    parser.add_argument("--dim", type=int, default=50)
    parser.add_argument("--a", type=float, default=2.0, help="Parametric schedule shape.")
    parser.add_argument("--steps", type=int, default=500)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    target = benchmark_gaussian(args.target, args.dim)
    grid = TimeGrid(args.steps, 1.0)
    print(f"[INFO] Target {args.target} d={args.dim}, N={args.steps}")

    rows = bound_rows(target, grid, args.a, args.seed)

    print("\n--- BOUNDS ---")
    for r in rows:
        w2 = "n/a" if r["w2_bound"] is None else f"{r['w2_bound']:.6g}"
        print(f"{r['schedule']:<24} KL<={r['kl_bound']:.6g}  W2<={w2}  step_ok={r['step_ok']}  with_M={r['step_ok_M']}")


if __name__ == "__main__":
    main()
