"""Synthetic multimodal datasets and their on-disk CSV form.

Random draws come from ``numpy``'s PCG64 bit generator seeded directly with
``SynthSpec.seed``, consumed in a fixed order (see ``docs/formats.md``), so a
spec reproduces the same dataset on every platform.
"""
import json
import logging
import os
import typing
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import numpy.typing as npt
import pandas as pd
import pydantic

from .core import (
    DEFAULT_BYTES_PER_VALUE,
    DEFAULT_SAMPLE_HEADER_BYTES,
    FloatArray,
    LabeledSet,
    Sample,
    UnlabeledSet,
)
from .exceptions import InvalidSample, IoFailure, SchemaViolation, SpecInvalid

logger = logging.getLogger(__name__)

LABELED_FILE = "labeled.csv"
UNLABELED_FILE = "unlabeled.csv"
TEST_FILE = "test.csv"
META_FILE = "meta.json"
UNKNOWN_LABEL = -1


class SynthSpec(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(extra="forbid", frozen=True)

    classes: int = pydantic.Field(default=6, ge=2)
    dim_f: int = pydantic.Field(default=8, ge=1)
    dim_s: int = pydantic.Field(default=8, ge=1)
    n_labeled: int = pydantic.Field(default=200, ge=1)
    n_unlabeled: int = pydantic.Field(default=5000, ge=1)
    n_test: int = pydantic.Field(default=1000, ge=1)
    class_separation: float = pydantic.Field(default=3.0, gt=0, le=100)
    modality_correlation: float = pydantic.Field(default=0.9, ge=0, le=1)
    noise_fraction: float = pydantic.Field(default=0.05, ge=0, lt=1)
    class_imbalance: float = pydantic.Field(default=1.0, ge=1, le=100)
    seed: int = pydantic.Field(default=0, ge=0)
    sample_header_bytes: int = pydantic.Field(default=DEFAULT_SAMPLE_HEADER_BYTES, ge=0)
    bytes_per_value: int = pydantic.Field(default=DEFAULT_BYTES_PER_VALUE, ge=1)

    @pydantic.model_validator(mode="after")
    def _counts_cover_classes(self) -> "SynthSpec":
        for name in ("n_labeled", "n_unlabeled", "n_test"):
            if getattr(self, name) < self.classes:
                raise ValueError(f"{name} must be at least classes ({self.classes})")
        return self


def make_spec(**fields: typing.Any) -> SynthSpec:
    """Validate ``fields`` into a :class:`SynthSpec`, raising
    :class:`SpecInvalid` with one entry per offending field.

    """
    try:
        return SynthSpec.model_validate(fields)
    except pydantic.ValidationError as e:
        raise SpecInvalid(
            [(".".join(str(p) for p in err["loc"]) or "spec", err["msg"]) for err in e.errors()]
        )


@dataclass(frozen=True)
class Dataset:
    labeled: LabeledSet
    unlabeled: UnlabeledSet
    test: LabeledSet
    classes: int
    dim_f: int
    dim_s: int
    sample_header_bytes: int = DEFAULT_SAMPLE_HEADER_BYTES
    bytes_per_value: int = DEFAULT_BYTES_PER_VALUE


def _centroids(rng: np.random.Generator, classes: int, dim: int) -> FloatArray:
    # unit mean pairwise distance between class centres
    C = rng.standard_normal((classes, dim))
    gaps = [np.linalg.norm(C[i] - C[j]) for i in range(classes) for j in range(i + 1, classes)]
    return typing.cast(FloatArray, C / max(float(np.mean(gaps)), 1e-12))


def _balanced_labels(rng: np.random.Generator, n: int, classes: int) -> npt.NDArray[np.int64]:
    return rng.permutation(np.arange(n) % classes)


def _skewed_labels(
    rng: np.random.Generator, n: int, classes: int, ratio: float
) -> npt.NDArray[np.int64]:
    # geometric class weights, most over least frequent = ratio
    w = ratio ** (-np.arange(classes) / (classes - 1))
    return typing.cast(npt.NDArray[np.int64], rng.choice(classes, size=n, p=w / w.sum()))


def generate(spec: SynthSpec) -> Dataset:
    """Draw labeled, unlabeled and test sets from class-conditional Gaussian
    clusters in each modality.

    With probability ``modality_correlation`` a sample's s-view comes from the
    same class as its f-view, otherwise from a uniformly drawn class. A
    ``noise_fraction`` of the unlabeled pool is background noise with no
    label. With ``class_imbalance`` above 1 the unlabeled pool draws its
    classes with geometric weights instead of in equal shares.

    """
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    centres_f = _centroids(rng, spec.classes, spec.dim_f)
    centres_s = _centroids(rng, spec.classes, spec.dim_s)
    sigma = 1.0 / spec.class_separation
    next_id = 0

    def draw(n: int, noise: int, imbalance: float = 1.0) -> list[Sample]:
        nonlocal next_id
        if imbalance > 1:
            labels = _skewed_labels(rng, n - noise, spec.classes, imbalance)
        else:
            labels = _balanced_labels(rng, n - noise, spec.classes)
        twins = rng.random(n - noise) < spec.modality_correlation
        s_classes = np.where(twins, labels, rng.integers(0, spec.classes, n - noise))
        feats_f = centres_f[labels] + sigma * rng.standard_normal((n - noise, spec.dim_f))
        feats_s = centres_s[s_classes] + sigma * rng.standard_normal((n - noise, spec.dim_s))
        noise_f = rng.standard_normal((noise, spec.dim_f))
        noise_s = rng.standard_normal((noise, spec.dim_s))
        noise_at = set(rng.choice(n, size=noise, replace=False).tolist()) if noise else set()

        out: list[Sample] = []
        clean_i = noise_i = 0
        for pos in range(n):
            if pos in noise_at:
                f, s, label, is_noise = noise_f[noise_i], noise_s[noise_i], None, True
                noise_i += 1
            else:
                f, s = feats_f[clean_i], feats_s[clean_i]
                label, is_noise = int(labels[clean_i]), False
                clean_i += 1
            out.append(
                Sample.create(
                    next_id,
                    f,
                    s,
                    label,
                    is_noise,
                    spec.sample_header_bytes,
                    spec.bytes_per_value,
                )
            )
            next_id += 1
        return out

    labeled = draw(spec.n_labeled, 0)
    unlabeled = draw(
        spec.n_unlabeled,
        round(spec.noise_fraction * spec.n_unlabeled),
        spec.class_imbalance,
    )
    test = draw(spec.n_test, 0)
    logger.debug("Generated dataset with seed %d", spec.seed)
    return Dataset(
        LabeledSet.from_truth(labeled, spec.classes),
        UnlabeledSet(tuple(unlabeled)),
        LabeledSet.from_truth(test, spec.classes),
        spec.classes,
        spec.dim_f,
        spec.dim_s,
        spec.sample_header_bytes,
        spec.bytes_per_value,
    )


def columns(dim_f: int, dim_s: int) -> list[str]:
    return (
        ["id", "label", "is_noise"]
        + [f"f_{i}" for i in range(dim_f)]
        + [f"s_{i}" for i in range(dim_s)]
    )


def to_frame(
    samples: typing.Sequence[Sample],
    labels: typing.Sequence[typing.Optional[int]],
    dim_f: int,
    dim_s: int,
) -> pd.DataFrame:
    rows = [
        [s.id, UNKNOWN_LABEL if label is None else label, int(s.is_noise), *s.feat_f, *s.feat_s]
        for s, label in zip(samples, labels)
    ]
    frame = pd.DataFrame(rows, columns=columns(dim_f, dim_s))
    return frame.astype({"id": "int64", "label": "int64", "is_noise": "int64"})


def write_text_atomic(path: Path, text: str) -> None:
    """Write ``text`` to a temporary sibling and rename it over ``path``."""
    tmp = path.with_name(f".{path.name}.{os.getpid()}.tmp")
    try:
        with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError as e:
        raise IoFailure(f"Unable to write '{path}': {e}")


def frame_to_csv(frame: pd.DataFrame) -> str:
    return typing.cast(str, frame.to_csv(index=False, lineterminator="\n"))


def save(dataset: Dataset, path: typing.Union[str, Path]) -> None:
    """Write ``dataset`` as three CSV files plus ``meta.json`` under ``path``.

    :param dataset: Dataset to save.
    :param path: Target directory. Created when missing.

    """
    root = Path(path)
    try:
        root.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise IoFailure(f"Unable to create '{root}': {e}")
    d = dataset
    meta = {
        "classes": d.classes,
        "dim_f": d.dim_f,
        "dim_s": d.dim_s,
        "sample_header_bytes": d.sample_header_bytes,
        "bytes_per_value": d.bytes_per_value,
    }
    write_text_atomic(root / META_FILE, json.dumps(meta, indent=2) + "\n")
    for name, samples, labels in (
        (LABELED_FILE, d.labeled.samples, d.labeled.labels),
        (UNLABELED_FILE, d.unlabeled.samples, [s.true_label for s in d.unlabeled.samples]),
        (TEST_FILE, d.test.samples, d.test.labels),
    ):
        frame = to_frame(samples, list(labels), d.dim_f, d.dim_s)
        write_text_atomic(root / name, frame_to_csv(frame))


def _read_meta(root: Path) -> dict[str, int]:
    try:
        with open(root / META_FILE, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as e:
        raise IoFailure(f"Unable to read '{root / META_FILE}': {e}")
    except UnicodeDecodeError:
        raise SchemaViolation(f"{root / META_FILE}: not valid UTF-8.")
    except json.JSONDecodeError as e:
        raise SchemaViolation(f"{root / META_FILE}:{e.lineno}: {e.msg}")
    if not isinstance(raw, dict):
        raise SchemaViolation(f"{root / META_FILE}:1: top level must be an object.")
    meta = {}
    for key in ("classes", "dim_f", "dim_s", "sample_header_bytes", "bytes_per_value"):
        value = raw.get(key)
        if not isinstance(value, int) or isinstance(value, bool):
            raise SchemaViolation(f"{root / META_FILE}: field '{key}' must be an integer.")
        meta[key] = value
    return meta


def read_samples(
    path: Path,
    classes: int,
    dim_f: int,
    dim_s: int,
    header_bytes: int = DEFAULT_SAMPLE_HEADER_BYTES,
    bytes_per_value: int = DEFAULT_BYTES_PER_VALUE,
) -> list[Sample]:
    """Read one dataset CSV, validating every row.

    Errors name the file, the 1-based line and the column.

    """
    expected = columns(dim_f, dim_s)
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except OSError as e:
        raise IoFailure(f"Unable to read '{path}': {e}")
    except UnicodeDecodeError:
        raise SchemaViolation(f"{path}: not valid UTF-8.")
    except pd.errors.EmptyDataError:
        raise SchemaViolation(f"{path}:1: missing header.")
    except pd.errors.ParserError as e:
        raise SchemaViolation(f"{path}: {e}")
    if list(frame.columns) != expected:
        raise SchemaViolation(
            f"{path}:1: header must be '{','.join(expected)}'."
        )

    def integers(col: str) -> list[int]:
        out = []
        for row, text in enumerate(frame[col]):
            try:
                out.append(int(text))
            except ValueError:
                raise SchemaViolation(f"{path}:{row + 2}: field '{col}' is not an integer.")
        return out

    def floats(col: str) -> list[float]:
        out = []
        for row, text in enumerate(frame[col]):
            try:
                value = float(text)
            except ValueError:
                value = float("nan")
            if not np.isfinite(value):
                raise SchemaViolation(f"{path}:{row + 2}: field '{col}' is not a finite number.")
            out.append(value)
        return out

    ids = integers("id")
    labels = integers("label")
    noise = integers("is_noise")
    f_cols = [floats(c) for c in expected[3 : 3 + dim_f]]
    s_cols = [floats(c) for c in expected[3 + dim_f :]]

    samples = []
    for row in range(len(frame)):
        line = row + 2
        label = labels[row]
        if not UNKNOWN_LABEL <= label < classes:
            raise SchemaViolation(
                f"{path}:{line}: field 'label' value {label} outside [-1, {classes})."
            )
        if noise[row] not in (0, 1):
            raise SchemaViolation(f"{path}:{line}: field 'is_noise' must be 0 or 1.")
        try:
            samples.append(
                Sample.create(
                    ids[row],
                    [c[row] for c in f_cols],
                    [c[row] for c in s_cols],
                    None if label == UNKNOWN_LABEL else label,
                    bool(noise[row]),
                    header_bytes,
                    bytes_per_value,
                )
            )
        except InvalidSample as e:
            raise SchemaViolation(f"{path}:{line}: {e}")
    return samples


def load(path: typing.Union[str, Path]) -> Dataset:
    """Load a dataset directory written by :func:`save`.

    :param path: Directory holding ``meta.json`` and the three CSV files.

    """
    root = Path(path)
    meta = _read_meta(root)
    c, df, ds = meta["classes"], meta["dim_f"], meta["dim_s"]
    enc = (meta["sample_header_bytes"], meta["bytes_per_value"])

    def labeled(name: str) -> LabeledSet:
        samples = read_samples(root / name, c, df, ds, *enc)
        for i, s in enumerate(samples):
            if s.true_label is None:
                raise SchemaViolation(f"{root / name}:{i + 2}: field 'label' is required.")
        try:
            return LabeledSet.from_truth(samples, c)
        except InvalidSample as e:
            raise SchemaViolation(f"{root / name}: {e}")

    try:
        pool = UnlabeledSet(tuple(read_samples(root / UNLABELED_FILE, c, df, ds, *enc)))
    except InvalidSample as e:
        raise SchemaViolation(f"{root / UNLABELED_FILE}: {e}")
    dataset = Dataset(labeled(LABELED_FILE), pool, labeled(TEST_FILE), c, df, ds, *enc)
    seen = dataset.labeled.ids
    for name, ids in ((UNLABELED_FILE, pool.ids), (TEST_FILE, dataset.test.ids)):
        shared = seen & ids
        if shared:
            raise SchemaViolation(f"{root / name}: id {min(shared)} appears in another file.")
        seen = seen | ids
    return dataset
