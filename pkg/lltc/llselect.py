"""Entropy-based labelling and selection of unlabeled multimodal samples.

The edge scores its pool with the current model, keeps the pseudo-labels
whose joint entropy is under a threshold, and admits the ``k`` least
uncertain of them, optionally with the same quota for every predicted class.
"""
import logging
import math
import typing

import numpy as np
import numpy.typing as npt
from scipy.special import entr

from .classifier import ModelSnapshot, predict_proba
from .core import (
    CandidateSet,
    ClassDistribution,
    EntropyScore,
    FloatArray,
    Modality,
    PseudoLabel,
    SelectionBatch,
    UnlabeledSet,
    check_same_classes,
)
from .exceptions import EmptyCandidateSet, EmptyPool

logger = logging.getLogger(__name__)


def default_threshold(classes: int) -> float:
    """Half the maximum entropy of a ``classes``-way distribution."""
    return 0.5 * math.log(classes)


def entropies(P: FloatArray) -> FloatArray:
    """Row-wise entropy in nats, with ``0 * ln 0 = 0``."""
    return typing.cast(FloatArray, entr(np.asarray(P, dtype=np.float64)).sum(axis=-1))


def entropy(d: ClassDistribution) -> EntropyScore:
    return EntropyScore(float(entropies(d.as_array())))


def joint_entropy(e_f: EntropyScore, e_s: EntropyScore) -> EntropyScore:
    return EntropyScore((e_f.value + e_s.value) / 2.0)


def resolve_label(
    d_f: ClassDistribution, d_s: ClassDistribution
) -> tuple[int, Modality]:
    """Label a sample from its two per-modality predictions.

    When the views disagree the less uncertain one wins; equal entropies go
    to modality f.

    """
    check_same_classes(d_f, d_s)
    label_f, label_s = d_f.argmax(), d_s.argmax()
    if label_f == label_s:
        return label_f, Modality.AGREEMENT
    if entropy(d_s).value < entropy(d_f).value:
        return label_s, Modality.S
    return label_f, Modality.F


def resolved_labels(model: ModelSnapshot, pool: UnlabeledSet) -> npt.NDArray[np.int64]:
    """Joint-modality labels of ``pool`` in sample id order, as :func:`score_pool`
    resolves them, without building the per-sample entries.

    """
    if not pool:
        raise EmptyPool("Cannot score an empty pool.")
    pool = pool.sorted()
    P_f = predict_proba(model, Modality.F, pool.features_f())
    P_s = predict_proba(model, Modality.S, pool.features_s())
    arg_f, arg_s = P_f.argmax(axis=1), P_s.argmax(axis=1)
    s_wins = (arg_f != arg_s) & (entropies(P_s) < entropies(P_f))
    return typing.cast(npt.NDArray[np.int64], np.where(s_wins, arg_s, arg_f))


def score_pool(
    model: ModelSnapshot,
    pool: UnlabeledSet,
    modality: Modality = Modality.JOINT,
) -> tuple[PseudoLabel, ...]:
    """Pseudo-label every sample of ``pool``, ordered by sample id.

    :param model: Snapshot pushed by the cloud.
    :param pool: Non-empty unlabeled pool.
    :param modality: (Optional) ``f`` or ``s`` label by that view alone
        instead of resolving the two views.

    """
    if not pool:
        raise EmptyPool("Cannot score an empty pool.")
    pool = pool.sorted()
    P_f = predict_proba(model, Modality.F, pool.features_f())
    P_s = predict_proba(model, Modality.S, pool.features_s())
    e_f, e_s = entropies(P_f), entropies(P_s)
    arg_f, arg_s = P_f.argmax(axis=1), P_s.argmax(axis=1)

    scored = []
    for i, sample in enumerate(pool.samples):
        ef, es = EntropyScore(float(e_f[i])), EntropyScore(float(e_s[i]))
        if modality is Modality.F:
            label, source = int(arg_f[i]), Modality.F
        elif modality is Modality.S:
            label, source = int(arg_s[i]), Modality.S
        elif arg_f[i] == arg_s[i]:
            label, source = int(arg_f[i]), Modality.AGREEMENT
        elif es.value < ef.value:
            label, source = int(arg_s[i]), Modality.S
        else:
            label, source = int(arg_f[i]), Modality.F
        scored.append(
            PseudoLabel(sample.id, label, ef, es, joint_entropy(ef, es), source)
        )
    return tuple(scored)


def candidate_filter(
    scored: typing.Iterable[PseudoLabel],
    tau: float,
    modality: Modality = Modality.JOINT,
) -> CandidateSet:
    """Keep the entries whose entropy is at most ``tau``, in input order."""
    if tau < 0:
        raise ValueError(f"Threshold must be non-negative, got {tau}.")
    kept = tuple(e for e in scored if e.rank(modality) <= tau)
    return CandidateSet(kept, tau, modality)


def agreeing(z: CandidateSet) -> CandidateSet:
    """Drop the candidates whose two views predict different classes."""
    kept = tuple(e for e in z.entries if e.source_modality is Modality.AGREEMENT)
    return CandidateSet(kept, z.threshold, z.modality)


def _ordered(
    entries: typing.Iterable[PseudoLabel], modality: Modality
) -> list[PseudoLabel]:
    return sorted(entries, key=lambda e: (e.rank(modality), e.sample_id))


def select_batch(
    z: CandidateSet, k: int, iteration: int = 1
) -> SelectionBatch:
    """Admit the ``k`` candidates with the smallest entropy.

    Every selected entry has entropy at most that of every unselected one;
    ties go to the smaller sample id. Fewer than ``k`` candidates is a
    shortfall, not an error.

    """
    if k < 1:
        raise ValueError(f"k must be positive, got {k}.")
    if not z.entries:
        raise EmptyCandidateSet("No candidates under the entropy threshold.")
    chosen = _ordered(z.entries, z.modality)[:k]
    if len(chosen) < k:
        logger.debug("Selection short by %d of %d", k - len(chosen), k)
    return SelectionBatch(tuple(chosen), iteration, k)


def select_balanced(
    z: CandidateSet, k: int, classes: int, iteration: int = 1
) -> SelectionBatch:
    """Admit ``k // classes`` candidates per predicted class, then fill the
    remaining slots with the globally least uncertain leftovers.

    """
    if k < 1:
        raise ValueError(f"k must be positive, got {k}.")
    if not z.entries:
        raise EmptyCandidateSet("No candidates under the entropy threshold.")
    quota = k // classes
    by_class: dict[int, list[PseudoLabel]] = {}
    for e in z.entries:
        by_class.setdefault(e.label, []).append(e)

    taken: list[PseudoLabel] = []
    for label in sorted(by_class):
        taken.extend(_ordered(by_class[label], z.modality)[:quota])
    chosen = {e.sample_id for e in taken}
    leftovers = [e for e in z.entries if e.sample_id not in chosen]
    taken.extend(_ordered(leftovers, z.modality)[: k - len(taken)])

    if len(taken) < k:
        logger.debug("Balanced selection short by %d of %d", k - len(taken), k)
    return SelectionBatch(tuple(_ordered(taken, z.modality)), iteration, k)


def iteration_schedule(k0: int, n_iters: int, growth: int) -> list[int]:
    """Per-round batch sizes ``k0, k0 + growth, k0 + 2 * growth, ...``."""
    if k0 < 1 or n_iters < 1 or growth < 0:
        raise ValueError("Schedule needs k0 >= 1, n_iters >= 1 and growth >= 0.")
    return [k0 + t * growth for t in range(n_iters)]
