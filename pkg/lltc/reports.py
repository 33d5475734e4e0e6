"""Report files: per-run CSV and JSON, the comparison CSV and the
plot-ready curve tables derived from it.

Every writer goes through :func:`lltc.datagen.write_text_atomic`.
"""
import json
import typing
from pathlib import Path

import pandas as pd

from .datagen import frame_to_csv, write_text_atomic
from .edgesim import ExperimentResult
from .exceptions import IoFailure, SchemaViolation

COLUMNS = [
    "strategy",
    "seed",
    "round",
    "k",
    "training_size",
    "accuracy",
    "auto_label_accuracy",
    "pool_accuracy",
    "shortfall",
    "bytes_up",
    "bytes_down",
    "cum_bytes_up",
    "cum_bytes_down",
    "bytes_collected",
    "items_collected",
    "items_offloaded",
    "items_discarded_noise",
    "items_remaining",
    "items_never_collected",
    "pool_consumed",
    "model_version",
]
TRAFFIC_COLUMNS = ["strategy", "round", "cum_bytes_up", "accuracy_mean", "accuracy_std", "seeds"]
POOL_COLUMNS = ["strategy", "round", "pool_consumed", "accuracy_mean", "accuracy_std", "seeds"]
REQUIRED_COLUMNS = ["strategy", "seed", "round", "accuracy", "cum_bytes_up", "pool_consumed"]
# None in rounds without pseudo-labels or without labelled pool items
OPTIONAL_COLUMNS = ["auto_label_accuracy", "pool_accuracy"]


def run_stem(strategy: str, seed: int) -> str:
    return f"{strategy}_seed{seed}"


def run_frame(result: ExperimentResult) -> pd.DataFrame:
    rows = [{**r.to_row(), "seed": result.summary.seed} for r in result.reports]
    frame = pd.DataFrame(rows, columns=COLUMNS)
    return frame.astype({c: "float64" for c in OPTIONAL_COLUMNS})


def write_run(result: ExperimentResult, directory: Path) -> tuple[Path, Path]:
    """Write ``<strategy>_seed<seed>.csv`` and ``.json`` under ``directory``."""
    stem = run_stem(result.summary.strategy, result.summary.seed)
    csv_path = directory / f"{stem}.csv"
    json_path = directory / f"{stem}.json"
    write_text_atomic(csv_path, frame_to_csv(run_frame(result)))
    write_text_atomic(json_path, json.dumps(result.summary.to_dict(), indent=2) + "\n")
    return csv_path, json_path


def write_comparison(results: typing.Sequence[ExperimentResult], path: Path) -> pd.DataFrame:
    """Concatenate every run, keyed by (strategy, seed, round), in the order
    given.

    """
    frames = [run_frame(r) for r in results]
    frame = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=COLUMNS)
    write_text_atomic(path, frame_to_csv(frame))
    return frame


def read_comparison(path: typing.Union[str, Path]) -> pd.DataFrame:
    path = Path(path)
    try:
        frame = pd.read_csv(path, encoding="utf-8")
    except OSError as e:
        raise IoFailure(f"Unable to read '{path}': {e}")
    except UnicodeDecodeError:
        raise SchemaViolation(f"{path}: not valid UTF-8.")
    except (pd.errors.EmptyDataError, pd.errors.ParserError) as e:
        raise SchemaViolation(f"{path}:1: {e}")
    missing = [c for c in REQUIRED_COLUMNS if c not in frame.columns]
    if missing:
        raise SchemaViolation(f"{path}:1: missing column '{missing[0]}'.")
    for col in REQUIRED_COLUMNS[1:]:
        values = pd.to_numeric(frame[col], errors="coerce")
        if values.isna().any():
            row = int(values.isna().to_numpy().nonzero()[0][0])
            raise SchemaViolation(f"{path}:{row + 2}: field '{col}' is not numeric.")
        frame[col] = values
    return frame


def _curve(frame: pd.DataFrame, x: str, columns: list[str]) -> pd.DataFrame:
    grouped = frame.groupby(["strategy", "round"], sort=False)
    curve = grouped.agg(
        **{
            x: (x, "mean"),
            "accuracy_mean": ("accuracy", "mean"),
            "accuracy_std": ("accuracy", lambda a: float(a.std(ddof=0))),
            "seeds": ("seed", "nunique"),
        }
    ).reset_index()
    order = {name: i for i, name in enumerate(frame["strategy"].drop_duplicates())}
    curve["_order"] = curve["strategy"].map(order)
    curve = curve.sort_values(["_order", x, "round"], kind="mergesort")
    return curve[columns].reset_index(drop=True)


def curves(comparison: pd.DataFrame) -> tuple[pd.DataFrame, pd.DataFrame]:
    """Seed-averaged accuracy per strategy against cumulative offloaded bytes
    and against pool items consumed.

    Rows group runs by (strategy, round); standard deviations are population
    deviations over seeds, so a single seed gives zeros.

    """
    return (
        _curve(comparison, "cum_bytes_up", TRAFFIC_COLUMNS),
        _curve(comparison, "pool_consumed", POOL_COLUMNS),
    )


def pool_curve_path(out: Path) -> Path:
    return out.with_name(f"{out.stem}_pool{out.suffix}")


def write_curves(
    comparison_path: typing.Union[str, Path], out: typing.Union[str, Path]
) -> tuple[Path, Path]:
    """Write the traffic curve to ``out`` and the pool curve beside it."""
    out = Path(out)
    traffic, pool = curves(read_comparison(comparison_path))
    write_text_atomic(out, frame_to_csv(traffic))
    write_text_atomic(pool_curve_path(out), frame_to_csv(pool))
    return out, pool_curve_path(out)
