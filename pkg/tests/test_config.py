import os

import pytest

from lltc import exceptions
from lltc.baselines import StrategyKind
from lltc.config import ExperimentConfig, from_mapping, load_config

from .conftest import FIXTURES


def fields(e):
    return [field for field, _ in e.value.errors]


def test_defaults(small_config):
    cfg = from_mapping({"dataset": small_config["dataset"]})
    assert [s.name for s in cfg.strategies()] == ["lltc"]
    assert cfg.seeds == [0]
    assert (cfg.schedule.k0, cfg.schedule.n_iters, cfg.schedule.growth) == (50, 10, 0)
    assert cfg.schedule.arrivals_per_round is None
    assert cfg.channel.count_model_push is False
    assert cfg.channel.header_bytes == 64
    assert cfg.edge.noise_detect_rate == 0.8


def test_strategies_in_file_order(small_config):
    cfg = from_mapping(small_config)
    assert [s.name for s in cfg.strategies()] == [
        "lltc",
        "self_training",
        "co_training",
        "random",
        "offload_all",
    ]


def test_named_strategy_variant(small_config):
    small_config["strategy"] = {
        "lltc": None,
        "lltc_f": {"kind": "lltc", "modality": "f", "balanced": False},
    }
    cfg = from_mapping(small_config)
    variant = cfg.strategy_named("lltc_f")
    assert variant.kind is StrategyKind.LLTC
    assert variant.params.modality == "f"


def test_unknown_strategy_name(small_config):
    cfg = from_mapping(small_config)
    with pytest.raises(exceptions.ConfigInvalid) as e:
        cfg.strategy_named("nope")
    assert str(e.value) == "strategy: no strategy named 'nope'"


def test_unknown_strategy_kind(small_config):
    small_config["strategy"] = {"pu": {}}
    with pytest.raises(exceptions.ConfigInvalid) as e:
        from_mapping(small_config)
    assert fields(e) == ["strategy"]
    assert "Unknown strategy kind 'pu'." in str(e.value)


def test_invalid_strategy_params(small_config):
    small_config["strategy"] = {"lltc": {"tau": -0.5}}
    with pytest.raises(exceptions.ConfigInvalid) as e:
        from_mapping(small_config)
    assert fields(e) == ["strategy"]


def test_no_strategies(small_config):
    small_config["strategy"] = {}
    with pytest.raises(exceptions.ConfigInvalid) as e:
        from_mapping(small_config)
    assert fields(e) == ["strategy"]


def test_invalid_noise_fraction_names_field(small_config):
    small_config["dataset"]["synthetic"]["noise_fraction"] = 1.5
    with pytest.raises(exceptions.ConfigInvalid) as e:
        from_mapping(small_config)
    assert fields(e) == ["dataset.synthetic.noise_fraction"]
    assert str(e.value).startswith("dataset.synthetic.noise_fraction: ")


def test_dataset_needs_exactly_one_source(small_config):
    small_config["dataset"]["path"] = "data"
    with pytest.raises(exceptions.ConfigInvalid) as e:
        from_mapping(small_config)
    assert fields(e) == ["dataset"]
    with pytest.raises(exceptions.ConfigInvalid):
        from_mapping({"dataset": {}})


def test_several_errors_reported(small_config):
    small_config["channel"] = {"header_bytes": 2000}
    small_config["schedule"]["k0"] = 0
    small_config["seeds"] = [-1]
    with pytest.raises(exceptions.ConfigInvalid) as e:
        from_mapping(small_config)
    assert sorted(fields(e)) == ["channel.header_bytes", "schedule.k0", "seeds.0"]


def test_empty_seed_list(small_config):
    small_config["seeds"] = []
    with pytest.raises(exceptions.ConfigInvalid) as e:
        from_mapping(small_config)
    assert fields(e) == ["seeds"]


def test_unknown_section(small_config):
    small_config["network_slicing"] = {"enabled": True}
    with pytest.raises(exceptions.ConfigInvalid) as e:
        from_mapping(small_config)
    assert fields(e) == ["network_slicing"]


def test_top_level_must_be_mapping():
    with pytest.raises(exceptions.ConfigInvalid) as e:
        from_mapping(["dataset"])
    assert str(e.value) == "config: top level must be a mapping"


def test_with_seeds(small_config):
    cfg = from_mapping(small_config).with_seeds([4, 5])
    assert cfg.seeds == [4, 5]


def test_with_seeds_validates(small_config):
    cfg = from_mapping(small_config)
    with pytest.raises(exceptions.ConfigInvalid) as e:
        cfg.with_seeds([-1])
    assert fields(e) == ["seeds.0"]
    with pytest.raises(exceptions.ConfigInvalid):
        cfg.with_seeds([])


def test_train_section(small_config):
    cfg = from_mapping(small_config)
    train = cfg.train.to_config(seed=9)
    assert (train.learning_rate, train.epochs, train.l2, train.seed) == (0.5, 40, 1e-3, 9)


def test_config_is_frozen(small_config):
    cfg = from_mapping(small_config)
    with pytest.raises(Exception):
        cfg.seeds = [1]
    assert isinstance(cfg, ExperimentConfig)


def test_load_config(small_config, write_config):
    cfg = load_config(write_config(small_config))
    assert cfg == from_mapping(small_config)


def test_load_config_missing_file(tmp_path):
    with pytest.raises(exceptions.ConfigInvalid) as e:
        load_config(tmp_path / "missing.yaml")
    assert fields(e) == ["config"]
    assert "unable to read" in str(e.value)


def test_load_config_invalid_yaml(tmp_path):
    path = tmp_path / "broken.yaml"
    path.write_text("dataset: [unclosed\n", encoding="utf-8")
    with pytest.raises(exceptions.ConfigInvalid) as e:
        load_config(path)
    assert "not valid YAML" in str(e.value)


def test_load_config_invalid_utf8(tmp_path):
    path = tmp_path / "latin.yaml"
    path.write_bytes(b"seeds: [1]\n# caf\xe9\n")
    with pytest.raises(exceptions.ConfigInvalid) as e:
        load_config(path)
    assert fields(e) == ["config"]
    assert "not valid UTF-8" in str(e.value)


def test_load_config_resolves_dataset_path(tmp_path, write_config):
    (tmp_path / "sub").mkdir()
    path = write_config({"dataset": {"path": "data"}}, name="sub/config.yaml")
    cfg = load_config(path)
    assert cfg.dataset.path == tmp_path / "sub" / "data"


def test_load_config_keeps_absolute_dataset_path(tmp_path, write_config):
    target = tmp_path / "elsewhere"
    cfg = load_config(write_config({"dataset": {"path": str(target)}}))
    assert cfg.dataset.path == target


def test_packaged_fixtures_load():
    for name in ("lltc.yaml", "smoke.yaml", "tiny.yaml", "traffic.yaml"):
        cfg = load_config(os.path.join(FIXTURES, name))
        assert cfg.strategies()
    tiny = load_config(os.path.join(FIXTURES, "tiny.yaml"))
    assert tiny.dataset.path is not None and tiny.dataset.path.is_dir()
    full = load_config(os.path.join(FIXTURES, "lltc.yaml"))
    assert full.seeds == list(range(1, 11))
    assert full.dataset.synthetic.classes == 6
    assert full.dataset.synthetic.n_labeled == 200
    assert full.dataset.synthetic.modality_correlation == 0.9
    traffic = load_config(os.path.join(FIXTURES, "traffic.yaml"))
    assert traffic.dataset.synthetic.class_imbalance == 5.0
    assert [s.name for s in traffic.strategies()] == ["lltc", "random"]
    assert traffic.strategies()[0].params.require_agreement
