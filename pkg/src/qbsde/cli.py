"""Command line entry point: run/validate/list experiments.

Exit codes: 0 all requested checks passed, 1 at least one check failed,
2 config or runtime error.
"""

from __future__ import annotations

import argparse
import sys

from .errors import ConfigValidationError, QbsdeError
from .experiments import bundled_configs, canonical_json, load_config, run_experiment


def _cmd_run(args) -> int:
    try:
        config = load_config(args.config)
    except ConfigValidationError as exc:
        print("config validation failed:", file=sys.stderr)
        for path, msg in exc.errors:
            print(f"  {path}: {msg}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    try:
        report = run_experiment(config, out_dir=args.out, n_paths=args.paths, seed=args.seed)
    except QbsdeError as exc:
        print(f"experiment failed: {exc}", file=sys.stderr)
        return 2
    print(f"experiment {report.name}  (config {report.config_hash})")
    print(f"  Y0 = {report.y0:.6g} +- {report.y0_se:.2g}")
    for check in report.checks:
        flag = "pass" if check.passed else "FAIL"
        print(f"  [{flag}] {check.name:28s} margin {check.margin:+.4g}  tol {check.tol:g}  se {check.se:.3g}")
    print("all checks passed" if report.all_passed else "SOME CHECKS FAILED")
    if args.out:
        print(f"wrote report to {args.out}")
    return 0 if report.all_passed else 1


def _cmd_validate(args) -> int:
    try:
        config = load_config(args.config)
    except ConfigValidationError as exc:
        print("invalid config:", file=sys.stderr)
        for path, msg in exc.errors:
            print(f"  {path}: {msg}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    print(f"config {config.name!r} is valid (hash {config.config_hash()})")
    if args.show:
        print(canonical_json(config.canonical()))
    return 0


def _cmd_list(args) -> int:
    for config in bundled_configs():
        print(f"{config.name:26s} {config.description}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="qbsde", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment config (path or bundled name)")
    p_run.add_argument("config")
    p_run.add_argument("--out", default=None, help="directory for report/solution/check files")
    p_run.add_argument("--paths", type=int, default=None, help="override scenario n_paths")
    p_run.add_argument("--seed", type=int, default=None, help="override scenario seed")
    p_run.set_defaults(func=_cmd_run)

    p_val = sub.add_parser("validate", help="parse and validate a config")
    p_val.add_argument("config")
    p_val.add_argument("--show", action="store_true", help="print the normalized config")
    p_val.set_defaults(func=_cmd_validate)

    p_list = sub.add_parser("list", help="list the bundled experiment catalogue")
    p_list.set_defaults(func=_cmd_list)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
