"""Domain types shared by the selection engine, the classifier and the
simulator.

Every type here is immutable after construction. Feature vectors are stored
as tuples of floats so samples compare and hash by value; the set types hand
out read-only ``numpy`` matrices for computation.
"""
import enum
import math
import typing
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from .exceptions import (
    AllZero,
    ClassCountMismatch,
    InvalidDistribution,
    InvalidSample,
    NegativeEntry,
    NonFinite,
)

FloatArray = npt.NDArray[np.float64]

DEFAULT_SAMPLE_HEADER_BYTES = 16
DEFAULT_BYTES_PER_VALUE = 8
DISTRIBUTION_TOLERANCE = 1e-9


class Modality(str, enum.Enum):
    """Where a pseudo-label came from, and which entropy a ranking uses."""

    F = "f"
    S = "s"
    AGREEMENT = "agreement"
    FUSED = "fused"
    JOINT = "joint"


def sample_size_bytes(
    dim_f: int,
    dim_s: int,
    header_bytes: int = DEFAULT_SAMPLE_HEADER_BYTES,
    bytes_per_value: int = DEFAULT_BYTES_PER_VALUE,
) -> int:
    """Return the encoded size of one sample.

    :param dim_f: Dimension of modality f.
    :param dim_s: Dimension of modality s.
    :param header_bytes: (Optional) Fixed per-sample header.
    :param bytes_per_value: (Optional) Bytes per feature value.

    """
    return header_bytes + bytes_per_value * (dim_f + dim_s)


@dataclass(frozen=True)
class Sample:
    id: int
    feat_f: tuple[float, ...]
    feat_s: tuple[float, ...]
    true_label: typing.Optional[int]
    is_noise: bool
    size_bytes: int

    def __post_init__(self) -> None:
        if self.id < 0:
            raise InvalidSample(f"Sample id must be non-negative, got {self.id}.")
        if not self.feat_f or not self.feat_s:
            raise InvalidSample(f"Sample {self.id} has an empty feature vector.")
        if self.size_bytes <= 0:
            raise InvalidSample(f"Sample {self.id} has non-positive size.")
        if self.true_label is not None and self.true_label < 0:
            raise InvalidSample(f"Sample {self.id} has negative label.")

    @classmethod
    def create(
        cls,
        id: int,
        feat_f: typing.Iterable[float],
        feat_s: typing.Iterable[float],
        true_label: typing.Optional[int] = None,
        is_noise: bool = False,
        header_bytes: int = DEFAULT_SAMPLE_HEADER_BYTES,
        bytes_per_value: int = DEFAULT_BYTES_PER_VALUE,
    ) -> "Sample":
        """Build a sample, deriving ``size_bytes`` from its dimensions."""
        f = tuple(float(v) for v in feat_f)
        s = tuple(float(v) for v in feat_s)
        return cls(
            id=int(id),
            feat_f=f,
            feat_s=s,
            true_label=None if true_label is None else int(true_label),
            is_noise=bool(is_noise),
            size_bytes=sample_size_bytes(len(f), len(s), header_bytes, bytes_per_value),
        )


def _matrix(rows: typing.Sequence[tuple[float, ...]], dim: int) -> FloatArray:
    if not rows:
        return np.zeros((0, dim), dtype=np.float64)
    m = np.array(rows, dtype=np.float64)
    m.flags.writeable = False
    return m


def _check_dimensions(samples: typing.Sequence[Sample]) -> None:
    if not samples:
        return
    dim_f, dim_s = len(samples[0].feat_f), len(samples[0].feat_s)
    for s in samples:
        if len(s.feat_f) != dim_f or len(s.feat_s) != dim_s:
            raise InvalidSample(
                f"Sample {s.id} has dimensions ({len(s.feat_f)}, {len(s.feat_s)}), "
                f"expected ({dim_f}, {dim_s})."
            )


def _check_unique(samples: typing.Sequence[Sample]) -> None:
    seen: set[int] = set()
    for s in samples:
        if s.id in seen:
            raise InvalidSample(f"Duplicate sample id {s.id}.")
        seen.add(s.id)


@dataclass(frozen=True)
class LabeledSet:
    samples: tuple[Sample, ...]
    labels: tuple[int, ...]
    classes: int

    def __post_init__(self) -> None:
        if self.classes < 2:
            raise InvalidSample(f"Need at least 2 classes, got {self.classes}.")
        if len(self.samples) != len(self.labels):
            raise InvalidSample(
                f"{len(self.samples)} samples but {len(self.labels)} labels."
            )
        for s, label in zip(self.samples, self.labels):
            if not 0 <= label < self.classes:
                raise InvalidSample(
                    f"Label {label} of sample {s.id} outside [0, {self.classes})."
                )
        _check_dimensions(self.samples)
        _check_unique(self.samples)

    @classmethod
    def from_truth(cls, samples: typing.Iterable[Sample], classes: int) -> "LabeledSet":
        """Label every sample with its true label."""
        items = tuple(samples)
        labels = []
        for s in items:
            if s.true_label is None:
                raise InvalidSample(f"Sample {s.id} has no true label.")
            labels.append(s.true_label)
        return cls(items, tuple(labels), classes)

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def ids(self) -> frozenset[int]:
        return frozenset(s.id for s in self.samples)

    def features_f(self) -> FloatArray:
        return _matrix([s.feat_f for s in self.samples], self.dim_f)

    def features_s(self) -> FloatArray:
        return _matrix([s.feat_s for s in self.samples], self.dim_s)

    def label_array(self) -> npt.NDArray[np.int64]:
        return np.array(self.labels, dtype=np.int64)

    @property
    def dim_f(self) -> int:
        return len(self.samples[0].feat_f) if self.samples else 0

    @property
    def dim_s(self) -> int:
        return len(self.samples[0].feat_s) if self.samples else 0

    def class_counts(self) -> list[int]:
        counts = [0] * self.classes
        for label in self.labels:
            counts[label] += 1
        return counts

    def extend(
        self, samples: typing.Sequence[Sample], labels: typing.Sequence[int]
    ) -> "LabeledSet":
        """Return a new set with ``samples`` appended under ``labels``."""
        return LabeledSet(
            self.samples + tuple(samples), self.labels + tuple(labels), self.classes
        )


@dataclass(frozen=True)
class UnlabeledSet:
    samples: tuple[Sample, ...] = ()

    def __post_init__(self) -> None:
        _check_dimensions(self.samples)
        _check_unique(self.samples)

    def __len__(self) -> int:
        return len(self.samples)

    def __bool__(self) -> bool:
        return bool(self.samples)

    @property
    def ids(self) -> frozenset[int]:
        return frozenset(s.id for s in self.samples)

    @property
    def dim_f(self) -> int:
        return len(self.samples[0].feat_f) if self.samples else 0

    @property
    def dim_s(self) -> int:
        return len(self.samples[0].feat_s) if self.samples else 0

    def features_f(self) -> FloatArray:
        return _matrix([s.feat_f for s in self.samples], self.dim_f)

    def features_s(self) -> FloatArray:
        return _matrix([s.feat_s for s in self.samples], self.dim_s)

    def by_id(self) -> dict[int, Sample]:
        return {s.id: s for s in self.samples}

    def sorted(self) -> "UnlabeledSet":
        return UnlabeledSet(tuple(sorted(self.samples, key=lambda s: s.id)))

    def take(self, n: typing.Optional[int]) -> tuple["UnlabeledSet", "UnlabeledSet"]:
        """Split off the first ``n`` samples (all when ``n`` is None)."""
        if n is None:
            return self, UnlabeledSet()
        return UnlabeledSet(self.samples[:n]), UnlabeledSet(self.samples[n:])

    def merge(self, other: "UnlabeledSet") -> "UnlabeledSet":
        return UnlabeledSet(self.samples + other.samples)

    def remove(self, ids: typing.Collection[int]) -> "UnlabeledSet":
        drop = set(ids)
        return UnlabeledSet(tuple(s for s in self.samples if s.id not in drop))


@dataclass(frozen=True)
class ClassDistribution:
    probs: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.probs) < 2:
            raise InvalidDistribution("A distribution needs at least 2 classes.")
        if not all(math.isfinite(p) for p in self.probs):
            raise NonFinite("Distribution contains a non-finite entry.")
        if any(p < 0 for p in self.probs):
            raise NegativeEntry("Distribution contains a negative entry.")
        if abs(math.fsum(self.probs) - 1.0) > DISTRIBUTION_TOLERANCE:
            raise InvalidDistribution(
                f"Distribution sums to {math.fsum(self.probs)!r}, not 1."
            )

    @property
    def classes(self) -> int:
        return len(self.probs)

    def argmax(self) -> int:
        """Index of the largest entry. Ties resolve to the lowest index."""
        return int(np.argmax(self.probs))

    def as_array(self) -> FloatArray:
        return np.array(self.probs, dtype=np.float64)


def make_distribution(raw: typing.Sequence[float]) -> ClassDistribution:
    """Normalize a non-negative vector into a :class:`ClassDistribution`.

    :param raw: Non-empty vector of finite, non-negative weights with at least
        one positive entry.

    """
    values = [float(v) for v in raw]
    if not values:
        raise AllZero("Cannot normalize an empty vector.")
    if not all(math.isfinite(v) for v in values):
        raise NonFinite("Vector contains a non-finite entry.")
    if any(v < 0 for v in values):
        raise NegativeEntry("Vector contains a negative entry.")
    total = math.fsum(values)
    if total <= 0:
        raise AllZero("Vector has no positive entry.")
    return ClassDistribution(tuple(v / total for v in values))


def check_same_classes(a: ClassDistribution, b: ClassDistribution) -> None:
    if a.classes != b.classes:
        raise ClassCountMismatch(
            f"Distributions have {a.classes} and {b.classes} classes."
        )


@dataclass(frozen=True, order=True)
class EntropyScore:
    """Prediction entropy in nats."""

    value: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.value) or self.value < 0:
            raise InvalidDistribution(f"Invalid entropy value {self.value!r}.")


@dataclass(frozen=True)
class PseudoLabel:
    sample_id: int
    label: int
    entropy_f: EntropyScore
    entropy_s: EntropyScore
    joint_entropy: EntropyScore
    source_modality: Modality

    def rank(self, modality: Modality = Modality.JOINT) -> float:
        """Entropy this entry is ranked and thresholded by."""
        if modality is Modality.F:
            return self.entropy_f.value
        if modality is Modality.S:
            return self.entropy_s.value
        return self.joint_entropy.value


@dataclass(frozen=True)
class CandidateSet:
    entries: tuple[PseudoLabel, ...]
    threshold: float
    modality: Modality = Modality.JOINT

    def __post_init__(self) -> None:
        for e in self.entries:
            if e.rank(self.modality) > self.threshold:
                raise InvalidSample(
                    f"Candidate {e.sample_id} exceeds threshold {self.threshold}."
                )

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class SelectionBatch:
    entries: tuple[PseudoLabel, ...]
    iteration: int
    requested: int

    def __post_init__(self) -> None:
        if self.iteration < 1:
            raise InvalidSample(f"Iteration must be >= 1, got {self.iteration}.")
        ids = [e.sample_id for e in self.entries]
        if len(ids) != len(set(ids)):
            raise InvalidSample("A selection batch selected the same id twice.")

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def shortfall(self) -> int:
        return max(0, self.requested - len(self.entries))

    @property
    def ids(self) -> tuple[int, ...]:
        return tuple(e.sample_id for e in self.entries)

    def class_counts(self) -> dict[int, int]:
        counts: dict[int, int] = {}
        for e in self.entries:
            counts[e.label] = counts.get(e.label, 0) + 1
        return counts
