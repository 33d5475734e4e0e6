"""Reference learner: one linear-softmax head per modality.

Each head is a ``(c, dim + 1)`` weight matrix whose last column is the bias.
Training minimizes the sample-averaged multinomial cross-entropy plus
``l2 / 2 * ||W||^2`` over the non-bias weights with full-batch gradient
descent from zero weights, so results depend only on the training set and
the :class:`TrainConfig`.
"""
import logging
import math
import struct
import typing
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt
from scipy.special import logsumexp, softmax

from .core import (
    ClassDistribution,
    FloatArray,
    LabeledSet,
    Modality,
)
from .exceptions import (
    ConfigInvalid,
    Degenerate,
    DimensionMismatch,
    EmptyClass,
    InvalidSample,
)

logger = logging.getLogger(__name__)

SNAPSHOT_MAGIC = b"LLTC"
SNAPSHOT_FORMAT = 1
# magic, version, classes, dim_f, dim_s, format
SNAPSHOT_HEADER = struct.Struct("<4sIHHHH")
FINITE_DIFFERENCE_STEP = 1e-5


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.5
    epochs: int = 200
    l2: float = 1e-3
    seed: int = 0

    def __post_init__(self) -> None:
        errors = []
        if not 0 < self.learning_rate <= 10:
            errors.append(("learning_rate", "must be in (0, 10]"))
        if not 0 < self.epochs <= 100000:
            errors.append(("epochs", "must be in [1, 100000]"))
        if self.l2 < 0:
            errors.append(("l2", "must be non-negative"))
        if errors:
            raise ConfigInvalid(errors)


@dataclass(frozen=True, eq=False)
class ModelSnapshot:
    weights_f: FloatArray
    weights_s: FloatArray
    version: int = 0

    def __post_init__(self) -> None:
        for name in ("weights_f", "weights_s"):
            w = np.array(getattr(self, name), dtype=np.float64)
            if w.ndim != 2 or w.shape[1] < 2:
                raise InvalidSample(f"{name} must be a (c, dim + 1) matrix.")
            if not np.all(np.isfinite(w)):
                raise Degenerate(f"{name} contains non-finite weights.")
            w.flags.writeable = False
            object.__setattr__(self, name, w)
        if self.weights_f.shape[0] != self.weights_s.shape[0]:
            raise InvalidSample("Both heads must predict the same classes.")

    @classmethod
    def zeros(
        cls, classes: int, dim_f: int, dim_s: int, version: int = 0
    ) -> "ModelSnapshot":
        return cls(
            np.zeros((classes, dim_f + 1)), np.zeros((classes, dim_s + 1)), version
        )

    @property
    def classes(self) -> int:
        return int(self.weights_f.shape[0])

    @property
    def dim_f(self) -> int:
        return int(self.weights_f.shape[1]) - 1

    @property
    def dim_s(self) -> int:
        return int(self.weights_s.shape[1]) - 1

    @property
    def weight_count(self) -> int:
        return int(self.weights_f.size + self.weights_s.size)

    @property
    def size_bytes(self) -> int:
        return 8 * self.weight_count + SNAPSHOT_HEADER.size

    def head(self, modality: Modality) -> FloatArray:
        if modality is Modality.F:
            return self.weights_f
        if modality is Modality.S:
            return self.weights_s
        raise ValueError(f"No head for modality '{modality.value}'.")

    def to_bytes(self) -> bytes:
        """Serialize to the binary record whose length is ``size_bytes``."""
        header = SNAPSHOT_HEADER.pack(
            SNAPSHOT_MAGIC,
            self.version,
            self.classes,
            self.dim_f,
            self.dim_s,
            SNAPSHOT_FORMAT,
        )
        body = np.concatenate([self.weights_f.ravel(), self.weights_s.ravel()])
        return header + body.astype("<f8").tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "ModelSnapshot":
        magic, version, classes, dim_f, dim_s, fmt = SNAPSHOT_HEADER.unpack_from(data)
        if magic != SNAPSHOT_MAGIC or fmt != SNAPSHOT_FORMAT:
            raise InvalidSample("Not a model snapshot record.")
        body = np.frombuffer(data, dtype="<f8", offset=SNAPSHOT_HEADER.size)
        split = classes * (dim_f + 1)
        if body.size != split + classes * (dim_s + 1):
            raise InvalidSample("Model snapshot record has the wrong length.")
        return cls(
            body[:split].reshape(classes, dim_f + 1).astype(np.float64),
            body[split:].reshape(classes, dim_s + 1).astype(np.float64),
            version,
        )

    def to_record(self) -> dict[str, typing.Any]:
        """JSON-ready record. Keys are emitted in the documented order."""
        return {
            "format": SNAPSHOT_FORMAT,
            "version": self.version,
            "classes": self.classes,
            "dim_f": self.dim_f,
            "dim_s": self.dim_s,
            "size_bytes": self.size_bytes,
            "weights_f": self.weights_f.tolist(),
            "weights_s": self.weights_s.tolist(),
        }

    @classmethod
    def from_record(cls, record: typing.Mapping[str, typing.Any]) -> "ModelSnapshot":
        return cls(
            np.array(record["weights_f"], dtype=np.float64),
            np.array(record["weights_s"], dtype=np.float64),
            int(record["version"]),
        )

    def same_as(self, other: "ModelSnapshot") -> bool:
        """Bit-level equality of two snapshots."""
        return self.to_bytes() == other.to_bytes()


def _augment(X: FloatArray) -> FloatArray:
    return np.hstack([X, np.ones((X.shape[0], 1))])


def loss_and_gradient(
    W: FloatArray,
    X: FloatArray,
    y: npt.NDArray[np.int64],
    l2: float,
) -> tuple[float, FloatArray]:
    """Averaged cross-entropy of one head and its gradient.

    :param W: ``(c, dim + 1)`` weights, bias in the last column.
    :param X: ``(n, dim)`` features.
    :param y: ``n`` class indices.
    :param l2: L2 strength applied to non-bias weights.

    """
    n = X.shape[0]
    Xa = _augment(X)
    scores = Xa @ W.T
    log_norm = logsumexp(scores, axis=1)
    data_loss = float(np.mean(log_norm - scores[np.arange(n), y]))
    penalty = 0.5 * l2 * float(np.sum(W[:, :-1] ** 2))

    P = np.exp(scores - log_norm[:, None])
    P[np.arange(n), y] -= 1.0
    grad = P.T @ Xa / n
    grad[:, :-1] += l2 * W[:, :-1]
    return data_loss + penalty, grad


def _check_trainable(labeled: LabeledSet) -> None:
    if len(labeled) < labeled.classes:
        raise EmptyClass(
            f"Need at least {labeled.classes} samples, got {len(labeled)}."
        )
    missing = [c for c, n in enumerate(labeled.class_counts()) if n == 0]
    if missing:
        raise EmptyClass(f"No training sample for class {missing[0]}.")


def _descend(
    X: FloatArray,
    y: npt.NDArray[np.int64],
    classes: int,
    cfg: TrainConfig,
    history: typing.Optional[list[float]] = None,
) -> FloatArray:
    W = np.zeros((classes, X.shape[1] + 1))
    for epoch in range(cfg.epochs):
        loss, grad = loss_and_gradient(W, X, y, cfg.l2)
        if not math.isfinite(loss):
            raise Degenerate(f"Non-finite loss at epoch {epoch}.")
        if history is not None:
            history.append(loss)
        W = W - cfg.learning_rate * grad
    if not np.all(np.isfinite(W)):
        raise Degenerate("Training diverged to non-finite weights.")
    return W


def train(
    labeled: LabeledSet,
    cfg: TrainConfig,
    version: int = 1,
    history: typing.Optional[dict[Modality, list[float]]] = None,
) -> ModelSnapshot:
    """Train both heads from zero weights.

    :param labeled: Training set; every class must be represented.
    :param cfg: Optimizer settings.
    :param version: (Optional) Version stamped on the snapshot.
    :param history: (Optional) Receives the per-epoch loss of each head.

    """
    _check_trainable(labeled)
    y = labeled.label_array()
    hist_f: typing.Optional[list[float]] = None
    hist_s: typing.Optional[list[float]] = None
    if history is not None:
        hist_f = history.setdefault(Modality.F, [])
        hist_s = history.setdefault(Modality.S, [])
    W_f = _descend(labeled.features_f(), y, labeled.classes, cfg, hist_f)
    W_s = _descend(labeled.features_s(), y, labeled.classes, cfg, hist_s)
    logger.debug("Trained model v%d on %d samples", version, len(labeled))
    return ModelSnapshot(W_f, W_s, version)


def predict_proba(
    model: ModelSnapshot, modality: Modality, X: FloatArray
) -> FloatArray:
    """Class probabilities of one head for every row of ``X``."""
    W = model.head(modality)
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != W.shape[1] - 1:
        raise DimensionMismatch(
            f"Modality {modality.value} expects dimension {W.shape[1] - 1}, "
            f"got {X.shape[1]}."
        )
    return typing.cast(FloatArray, softmax(_augment(X) @ W.T, axis=1))


def fused_proba(model: ModelSnapshot, X_f: FloatArray, X_s: FloatArray) -> FloatArray:
    """Mean of the two per-modality distributions."""
    P_f = predict_proba(model, Modality.F, X_f)
    P_s = predict_proba(model, Modality.S, X_s)
    return typing.cast(FloatArray, (P_f + P_s) / 2.0)


def _distribution(row: FloatArray) -> ClassDistribution:
    return ClassDistribution(tuple(float(p) for p in row))


def predict_f(model: ModelSnapshot, feat_f: typing.Sequence[float]) -> ClassDistribution:
    return _distribution(predict_proba(model, Modality.F, np.asarray([feat_f]))[0])


def predict_s(model: ModelSnapshot, feat_s: typing.Sequence[float]) -> ClassDistribution:
    return _distribution(predict_proba(model, Modality.S, np.asarray([feat_s]))[0])


def gradient_check(
    labeled: LabeledSet,
    cfg: TrainConfig,
    weights: typing.Optional[ModelSnapshot] = None,
) -> float:
    """Largest absolute gap between the analytic gradient and central finite
    differences, over every weight of both heads.

    :param labeled: Small set (at most 50 samples).
    :param cfg: Supplies ``l2`` and the seed of the evaluation point.
    :param weights: (Optional) Evaluation point. Drawn from ``cfg.seed`` when
        omitted.

    """
    if weights is None:
        rng = np.random.default_rng(cfg.seed)
        c = labeled.classes
        weights = ModelSnapshot(
            0.1 * rng.standard_normal((c, labeled.dim_f + 1)),
            0.1 * rng.standard_normal((c, labeled.dim_s + 1)),
        )
    y = labeled.label_array()
    worst = 0.0
    for W0, X in (
        (weights.weights_f, labeled.features_f()),
        (weights.weights_s, labeled.features_s()),
    ):
        W = np.array(W0, dtype=np.float64)
        _, analytic = loss_and_gradient(W, X, y, cfg.l2)
        h = FINITE_DIFFERENCE_STEP
        for idx in np.ndindex(*W.shape):
            orig = W[idx]
            W[idx] = orig + h
            plus, _ = loss_and_gradient(W, X, y, cfg.l2)
            W[idx] = orig - h
            minus, _ = loss_and_gradient(W, X, y, cfg.l2)
            W[idx] = orig
            worst = max(worst, abs((plus - minus) / (2 * h) - analytic[idx]))
    return worst
