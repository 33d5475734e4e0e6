"""Command line entry point: ``lltc generate``, ``lltc run`` and
``lltc curves``.

Exit codes: 0 success, 2 configuration or usage error, 3 runtime error.
"""
import argparse
import logging
import sys
import typing
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import datagen, reports
from .config import ExperimentConfig, load_config
from .edgesim import ExperimentResult, run_experiment
from .exceptions import ConfigInvalid, LLTCException, RunFailed, SchemaViolation, SpecInvalid

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


class UsageError(Exception):
    """Bad invocation that argparse itself cannot detect."""


def _check_out_dir(out: Path, force: bool) -> None:
    if out.exists() and not out.is_dir():
        raise UsageError(f"Output path '{out}' is not a directory.")
    if out.exists() and any(out.iterdir()) and not force:
        raise UsageError(
            f"Output directory '{out}' is not empty; use --force to overwrite."
        )


def cmd_generate(
    config_path: Path, out: Path, force: bool = False, seed: typing.Optional[int] = None
) -> datagen.Dataset:
    """Write the configured synthetic dataset to ``out``.

    :param config_path: YAML experiment configuration.
    :param out: Target directory.
    :param force: (Optional) Overwrite a non-empty directory.
    :param seed: (Optional) Override the dataset seed.

    """
    cfg = load_config(config_path)
    spec = cfg.dataset.synthetic
    if spec is None:
        raise ConfigInvalid([("dataset.synthetic", "required for generate")])
    if seed is not None:
        spec = datagen.make_spec(**{**spec.model_dump(), "seed": seed})
    _check_out_dir(out, force)
    dataset = datagen.generate(spec)
    datagen.save(dataset, out)
    noise = sum(1 for s in dataset.unlabeled.samples if s.is_noise)
    print(
        f"labeled: {len(dataset.labeled)}, unlabeled: {len(dataset.unlabeled)} "
        f"({noise} noise), test: {len(dataset.test)} -> {out}"
    )
    return dataset


def _run_one(
    cfg: ExperimentConfig, strategy: str, seed: int, runs_dir: Path
) -> ExperimentResult:
    try:
        result = run_experiment(cfg, strategy, seed)
        reports.write_run(result, runs_dir)
    except LLTCException as e:
        raise RunFailed(strategy, seed, str(e))
    except Exception as e:
        logger.exception("Run '%s' with seed %d failed", strategy, seed)
        raise RunFailed(strategy, seed, f"{type(e).__name__}: {e}")
    return result


def cmd_run(
    config_path: Path,
    out: Path,
    force: bool = False,
    seed: typing.Optional[int] = None,
    jobs: int = 1,
) -> list[ExperimentResult]:
    """Run every (strategy, seed) pair and write their reports.

    :param config_path: YAML experiment configuration.
    :param out: Report directory.
    :param force: (Optional) Overwrite a non-empty directory.
    :param seed: (Optional) Run this seed only.
    :param jobs: (Optional) Worker processes for independent runs.

    """
    cfg = load_config(config_path)
    if seed is not None:
        cfg = cfg.with_seeds([seed])
    _check_out_dir(out, force)
    runs_dir = out / "runs"
    runs_dir.mkdir(parents=True, exist_ok=True)

    tasks = [(s.name, sd) for s in cfg.strategies() for sd in cfg.seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_run_one, cfg, name, sd, runs_dir) for name, sd in tasks]
            results = [f.result() for f in futures]
    else:
        results = [_run_one(cfg, name, sd, runs_dir) for name, sd in tasks]

    reports.write_comparison(results, out / "comparison.csv")
    for r in results:
        s = r.summary
        print(
            f"{s.strategy} seed {s.seed}: {s.rounds} rounds, "
            f"accuracy {s.final_accuracy:.4f}, {s.total_bytes_up} bytes up"
        )
    return results


def cmd_curves(comparison: Path, out: Path, force: bool = False) -> tuple[Path, Path]:
    """Derive the plot-ready curve tables from a comparison file.

    :param comparison: ``comparison.csv`` written by ``run``.
    :param out: Traffic curve path; the pool curve is written beside it.
    :param force: (Optional) Overwrite existing files.

    """
    targets = (out, reports.pool_curve_path(out))
    if not force and any(p.exists() for p in targets):
        raise UsageError(f"'{out}' already exists; use --force to overwrite.")
    out.parent.mkdir(parents=True, exist_ok=True)
    return reports.write_curves(comparison, out)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lltc", description="Label-less learning traffic control simulator."
    )
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="warnings only")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--force", action="store_true", help="overwrite existing output")

    seeded = argparse.ArgumentParser(add_help=False, parents=[common])
    seeded.add_argument("--config", type=Path, required=True, help="YAML configuration")
    seeded.add_argument("--out", type=Path, required=True, help="output directory")
    seeded.add_argument("--seed", type=int, help="override configured seeds")

    sub.add_parser("generate", parents=[seeded], help="write a synthetic dataset")
    run = sub.add_parser("run", parents=[seeded], help="run experiments")
    run.add_argument("--jobs", type=int, default=1, help="parallel worker processes")

    curves = sub.add_parser("curves", parents=[common], help="derive curve tables")
    curves.add_argument("comparison", type=Path, help="comparison.csv from 'run'")
    curves.add_argument("--out", type=Path, required=True, help="traffic curve CSV")
    return parser


def main(argv: typing.Optional[typing.Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(
        level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr
    )

    try:
        if getattr(args, "seed", None) is not None and args.seed < 0:
            raise UsageError("--seed must be a non-negative integer.")
        if args.command == "generate":
            cmd_generate(args.config, args.out, args.force, args.seed)
        elif args.command == "run":
            if args.jobs < 1:
                raise UsageError("--jobs must be at least 1.")
            cmd_run(args.config, args.out, args.force, args.seed, args.jobs)
        else:
            cmd_curves(args.comparison, args.out, args.force)
    except (ConfigInvalid, SpecInvalid, SchemaViolation, UsageError) as e:
        print(f"lltc: error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except LLTCException as e:
        print(f"lltc: error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
