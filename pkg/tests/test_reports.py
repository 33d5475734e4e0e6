import json
import warnings

import pandas as pd
import pytest

from lltc import exceptions, reports
from lltc.config import from_mapping, load_config
from lltc.edgesim import run_experiment

from .conftest import FIXTURES

SUMMARY_KEYS = [
    "strategy",
    "kind",
    "seed",
    "rounds",
    "bootstrap_accuracy",
    "final_accuracy",
    "final_training_size",
    "total_bytes_up",
    "total_bytes_down",
    "bytes_collected",
    "traffic_ratio",
    "auto_label_accuracy",
    "items_offloaded",
    "shortfall_rounds",
    "oracle_labels",
]


@pytest.fixture(scope="module")
def tiny_results():
    cfg = load_config(f"{FIXTURES}/tiny.yaml")
    return [run_experiment(cfg, name, seed=0) for name in ("random", "lltc")]


def toy_comparison():
    return pd.DataFrame(
        {
            "strategy": ["b", "b", "a", "a", "b", "b", "a", "a"],
            "seed": [1, 1, 1, 1, 2, 2, 2, 2],
            "round": [1, 2, 1, 2, 1, 2, 1, 2],
            "accuracy": [0.5, 0.6, 0.8, 0.9, 0.7, 0.6, 0.8, 0.7],
            "cum_bytes_up": [100, 300, 50, 90, 120, 340, 50, 110],
            "pool_consumed": [2, 4, 1, 2, 2, 4, 1, 2],
        }
    )


def test_run_stem():
    assert reports.run_stem("lltc_unbalanced", 7) == "lltc_unbalanced_seed7"


def test_run_frame(tiny_results):
    result = tiny_results[0]
    frame = reports.run_frame(result)
    assert list(frame.columns) == reports.COLUMNS
    assert len(frame) == result.summary.rounds
    assert set(frame["seed"]) == {0}
    assert list(frame["round"]) == [1, 2, 3]


def test_write_run(tiny_results, tmp_path):
    csv_path, json_path = reports.write_run(tiny_results[0], tmp_path)
    assert csv_path.name == "random_seed0.csv"
    assert json_path.name == "random_seed0.json"
    lines = csv_path.read_text(encoding="utf-8").rstrip("\n").split("\n")
    assert lines[0] == ",".join(reports.COLUMNS)
    assert len(lines) == 4
    summary = json.loads(json_path.read_text(encoding="utf-8"))
    assert list(summary) == SUMMARY_KEYS
    assert summary["total_bytes_up"] == 480
    assert summary["oracle_labels"] is False
    assert not list(tmp_path.glob(".*.tmp"))


def test_write_comparison(tiny_results, tmp_path):
    path = tmp_path / "comparison.csv"
    frame = reports.write_comparison(tiny_results, path)
    expected = sum(r.summary.rounds for r in tiny_results)
    assert len(frame) == expected
    assert list(frame["strategy"].drop_duplicates()) == ["random", "lltc"]
    back = reports.read_comparison(path)
    assert len(back) == expected
    for result in tiny_results:
        rows = back[back["strategy"] == result.summary.strategy]
        assert rows["bytes_up"].sum() == result.summary.total_bytes_up
        assert rows["items_offloaded"].sum() == result.summary.items_offloaded


def test_write_comparison_without_pseudo_labels(small_config, tmp_path):
    cfg = from_mapping(small_config)
    results = [run_experiment(cfg, name, seed=3) for name in ("offload_all", "lltc")]
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        frame = reports.write_comparison(results, tmp_path / "comparison.csv")
    assert frame["auto_label_accuracy"].dtype == "float64"
    assert frame[frame["strategy"] == "offload_all"]["auto_label_accuracy"].isna().all()


def test_curves_single_seed(tiny_results, tmp_path):
    path = tmp_path / "comparison.csv"
    reports.write_comparison(tiny_results, path)
    traffic, pool = reports.curves(reports.read_comparison(path))
    assert list(traffic.columns) == reports.TRAFFIC_COLUMNS
    assert list(pool.columns) == reports.POOL_COLUMNS
    assert (traffic["accuracy_std"] == 0).all()
    assert (traffic["seeds"] == 1).all()
    for _, rows in traffic.groupby("strategy"):
        assert rows["cum_bytes_up"].is_monotonic_increasing


def test_curves_average_over_seeds():
    traffic, pool = reports.curves(toy_comparison())
    assert list(traffic["strategy"]) == ["b", "b", "a", "a"]
    first = traffic.iloc[0]
    assert first["round"] == 1
    assert first["cum_bytes_up"] == pytest.approx(110)
    assert first["accuracy_mean"] == pytest.approx(0.6)
    assert first["accuracy_std"] == pytest.approx(0.1)
    assert first["seeds"] == 2
    a2 = traffic[(traffic["strategy"] == "a") & (traffic["round"] == 2)].iloc[0]
    assert a2["cum_bytes_up"] == pytest.approx(100)
    assert a2["accuracy_mean"] == pytest.approx(0.8)
    assert list(pool["pool_consumed"]) == [2, 4, 1, 2]
    assert pool.iloc[1]["accuracy_std"] == pytest.approx(0.0)


def test_write_curves(tmp_path):
    comparison = tmp_path / "comparison.csv"
    toy_comparison().to_csv(comparison, index=False)
    out, pool_path = reports.write_curves(comparison, tmp_path / "curves.csv")
    assert pool_path == tmp_path / "curves_pool.csv"
    header = out.read_text(encoding="utf-8").split("\n")[0]
    assert header == ",".join(reports.TRAFFIC_COLUMNS)
    assert pool_path.read_text(encoding="utf-8").startswith(",".join(reports.POOL_COLUMNS))


def test_read_comparison_missing_file(tmp_path):
    with pytest.raises(exceptions.IoFailure):
        reports.read_comparison(tmp_path / "missing.csv")


def test_read_comparison_missing_column(tmp_path):
    path = tmp_path / "comparison.csv"
    toy_comparison().drop(columns=["pool_consumed"]).to_csv(path, index=False)
    with pytest.raises(exceptions.SchemaViolation) as e:
        reports.read_comparison(path)
    assert str(e.value) == f"{path}:1: missing column 'pool_consumed'."


def test_read_comparison_non_numeric(tmp_path):
    path = tmp_path / "comparison.csv"
    frame = toy_comparison().astype({"accuracy": object})
    frame.loc[2, "accuracy"] = "high"
    frame.to_csv(path, index=False)
    with pytest.raises(exceptions.SchemaViolation) as e:
        reports.read_comparison(path)
    assert str(e.value) == f"{path}:4: field 'accuracy' is not numeric."


def test_read_comparison_empty_file(tmp_path):
    path = tmp_path / "comparison.csv"
    path.write_text("", encoding="utf-8")
    with pytest.raises(exceptions.SchemaViolation):
        reports.read_comparison(path)


def test_read_comparison_not_utf8(tmp_path):
    path = tmp_path / "comparison.csv"
    path.write_bytes(",".join(reports.REQUIRED_COLUMNS).encode() + b"\n\xff,1,1,0.5,10,1\n")
    with pytest.raises(exceptions.SchemaViolation) as e:
        reports.read_comparison(path)
    assert str(e.value) == f"{path}: not valid UTF-8."
