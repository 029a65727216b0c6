"""
Run the per-a training protocol and check its outcome: a_star inside the
expected bracket, and the tuned schedule non-inferior to linear.

    PYTHONPATH=src python scripts/check_protocol.py
    PYTHONPATH=src python scripts/check_protocol.py --epochs 5 --n-train 2000 --out-dir /tmp/protocol

Exit status: 0 when both checks pass, 1 when one fails, 2 for config errors,
3 for numeric failures.
"""

import argparse
import logging
import sys
from pathlib import Path

from pydantic import ValidationError

from sgm_schedules import config, storage
from sgm_schedules.app.session import execute, protocol_checks
from sgm_schedules.errors import ConfigError, SgmError
from sgm_schedules.models import load_config


def main() -> int:
    parser = argparse.ArgumentParser(description="Run the d=5 protocol and check a_star / non-inferiority.")
    parser.add_argument("--config", default=str(config.CONFIG_DIR / "iso-d5-protocol.cfg"))
    parser.add_argument("--out-dir", help="Base directory for outputs (default: next to the config).")
    parser.add_argument("--a-low", type=float, default=0.0)
    parser.add_argument("--a-high", type=float, default=5.0)
    # reduced-scale overrides
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--n-train", type=int)
    parser.add_argument("--width", type=int)
    parser.add_argument("--runs", type=int)
    args = parser.parse_args()

    logging.basicConfig(level=config.LOG_LEVEL, format=config.LOG_FORMAT, stream=sys.stderr)

    try:
        path = Path(args.config)
        cfg = load_config(path)
        if args.epochs is not None:
            cfg.train.epochs = args.epochs
        if args.width is not None:
            cfg.train.width = args.width
        if args.n_train is not None:
            cfg.target.n_train = args.n_train
        if args.runs is not None:
            cfg.experiment.runs = args.runs
        print(f"[INFO] Protocol {path.name}: epochs={cfg.train.epochs} width={cfg.train.width} "
              f"n_train={cfg.target.n_train} runs={cfg.experiment.runs}")

        base_dir = Path(args.out_dir) if args.out_dir else path.parent
        result = execute(cfg, base_dir)
        checks = protocol_checks(result["sweep"].a_star, result["comparison"], (args.a_low, args.a_high))
    except (ConfigError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SgmError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3

    out = result["report"].with_name("checks.json")
    storage.write_json(out, checks)

    print("\n--- CHECKS ---")
    print(f"a_star = {checks['a_star']}  bracket {checks['a_bracket']}  -> {checks['a_star_in_bracket']}")
    print(f"{checks['metric']}: parametric {checks['tuned_mean']:.6g} vs linear {checks['linear_mean']:.6g} "
          f"(pooled std {checks['pooled_std']:.6g}) -> {checks['non_inferior']}")
    print(f"\n{'PASS' if checks['passed'] else 'FAIL'}  ({out})")
    return 0 if checks["passed"] else 1


if __name__ == "__main__":
    sys.exit(main())
