import copy
import os

import pytest
import yaml

from lltc import datagen
from lltc.classifier import TrainConfig, train
from lltc.core import EntropyScore, Modality, PseudoLabel, Sample

FIXTURES = os.path.join(
    os.path.dirname(os.path.dirname(os.path.realpath(__file__))), "fixtures"
)

SMALL_SPEC = {
    "classes": 3,
    "dim_f": 2,
    "dim_s": 2,
    "n_labeled": 30,
    "n_unlabeled": 60,
    "n_test": 30,
    "class_separation": 10.0,
    "modality_correlation": 1.0,
    "noise_fraction": 0.1,
    "seed": 7,
}

SMALL_CONFIG = {
    "dataset": {"synthetic": SMALL_SPEC},
    "strategy": {
        "lltc": {},
        "self_training": {},
        "co_training": {},
        "random": {},
        "offload_all": {},
    },
    "schedule": {"k0": 5, "n_iters": 3, "growth": 2},
    "train": {"epochs": 40},
    "seeds": [3],
}


def sample(id, f=(0.0, 0.0), s=(0.0, 0.0), label=0, is_noise=False):
    return Sample.create(id, f, s, label, is_noise)


def pseudo(id, e_f, e_s=None, label=0, source=Modality.AGREEMENT):
    """PseudoLabel with the given entropies; ``e_s`` defaults to ``e_f`` so
    the joint entropy equals ``e_f``."""
    if e_s is None:
        e_s = e_f
    ef, es = EntropyScore(e_f), EntropyScore(e_s)
    return PseudoLabel(id, label, ef, es, EntropyScore((e_f + e_s) / 2), source)


@pytest.fixture
def tiny_dir():
    """Hand-written separable two-class dataset."""
    return os.path.join(FIXTURES, "tiny")


@pytest.fixture
def tiny(tiny_dir):
    return datagen.load(tiny_dir)


@pytest.fixture
def tiny_model(tiny):
    return train(tiny.labeled, TrainConfig())


@pytest.fixture
def small_spec():
    return datagen.make_spec(**SMALL_SPEC)


@pytest.fixture
def small_dataset(small_spec):
    return datagen.generate(small_spec)


@pytest.fixture
def small_config():
    """A fresh copy of a fast synthetic experiment mapping."""
    return copy.deepcopy(SMALL_CONFIG)


@pytest.fixture
def write_config(tmp_path):
    """Dump a config mapping to a YAML file and return its path."""

    def write(mapping, name="config.yaml"):
        path = tmp_path / name
        path.write_text(yaml.safe_dump(mapping), encoding="utf-8")
        return path

    return write
