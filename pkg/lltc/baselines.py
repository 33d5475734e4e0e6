"""Selection strategies: label-less learning and the comparison baselines.

``self_training`` and ``co_training`` are the classic pseudo-labelling
baselines; ``random`` and ``offload_all`` are traffic controls.
"""
import enum
import logging
import math
import typing
from dataclasses import dataclass

import numpy as np
import pydantic

from . import llselect
from .classifier import ModelSnapshot, predict_proba
from .core import (
    EntropyScore,
    FloatArray,
    Modality,
    PseudoLabel,
    Sample,
    SelectionBatch,
    UnlabeledSet,
)
from .exceptions import EmptyCandidateSet, EmptyPool, InvalidStrategy

logger = logging.getLogger(__name__)


class StrategyKind(str, enum.Enum):
    LLTC = "lltc"
    SELF_TRAINING = "self_training"
    CO_TRAINING = "co_training"
    RANDOM = "random"
    OFFLOAD_ALL = "offload_all"


class LLTCParams(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(extra="forbid", frozen=True)

    tau: typing.Optional[float] = pydantic.Field(default=None, ge=0)
    balanced: bool = True
    modality: typing.Literal["joint", "f", "s"] = "joint"
    require_agreement: bool = False

    @pydantic.model_validator(mode="after")
    def _agreement_needs_both_views(self) -> "LLTCParams":
        if self.require_agreement and self.modality != "joint":
            raise ValueError("require_agreement needs modality 'joint'")
        return self


class NoParams(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(extra="forbid", frozen=True)


PARAMS: dict[StrategyKind, type[pydantic.BaseModel]] = {
    StrategyKind.LLTC: LLTCParams,
    StrategyKind.SELF_TRAINING: NoParams,
    StrategyKind.CO_TRAINING: NoParams,
    StrategyKind.RANDOM: NoParams,
    StrategyKind.OFFLOAD_ALL: NoParams,
}


@dataclass(frozen=True)
class Strategy:
    name: str
    kind: StrategyKind
    params: pydantic.BaseModel

    @classmethod
    def create(
        cls,
        kind: typing.Union[str, StrategyKind],
        params: typing.Optional[typing.Mapping[str, typing.Any]] = None,
        name: typing.Optional[str] = None,
    ) -> "Strategy":
        """Validate ``params`` for ``kind`` and build a strategy.

        :param kind: One of the :class:`StrategyKind` values.
        :param params: (Optional) Kind-specific settings.
        :param name: (Optional) Report name. Defaults to the kind.

        """
        try:
            k = StrategyKind(kind)
        except ValueError:
            raise InvalidStrategy(f"Unknown strategy kind '{kind}'.")
        try:
            validated = PARAMS[k].model_validate(dict(params or {}))
        except pydantic.ValidationError as e:
            fields = ", ".join(
                ".".join(str(p) for p in err["loc"]) or "params" for err in e.errors()
            )
            raise InvalidStrategy(f"Invalid parameters for '{k.value}': {fields}.")
        return cls(name or k.value, k, validated)

    def select(
        self,
        model: ModelSnapshot,
        pool: UnlabeledSet,
        k: int,
        seed: int,
        iteration: int = 1,
    ) -> SelectionBatch:
        """Pick this round's pseudo-labelled batch from ``pool``.

        ``offload_all`` does no labelling at the edge and has no batch; use
        :func:`offload_all_select` for it.

        """
        if self.kind is StrategyKind.LLTC:
            params = typing.cast(LLTCParams, self.params)
            return lltc_select(
                model,
                pool,
                k,
                tau=params.tau,
                balanced=params.balanced,
                modality=Modality(params.modality),
                require_agreement=params.require_agreement,
                iteration=iteration,
            )
        if self.kind is StrategyKind.SELF_TRAINING:
            return self_training_select(model, pool, k, iteration)
        if self.kind is StrategyKind.CO_TRAINING:
            return co_training_select(model, pool, k, iteration)
        if self.kind is StrategyKind.RANDOM:
            return random_select(model, pool, k, seed, iteration)
        raise InvalidStrategy("offload_all does not pseudo-label at the edge.")


def lltc_select(
    model: ModelSnapshot,
    pool: UnlabeledSet,
    k: int,
    tau: typing.Optional[float] = None,
    balanced: bool = True,
    modality: Modality = Modality.JOINT,
    iteration: int = 1,
    require_agreement: bool = False,
) -> SelectionBatch:
    """Score, threshold and select one batch with label-less learning.

    :param tau: (Optional) Entropy threshold. Defaults to half of ``ln c``.
    :param balanced: (Optional) Give every predicted class the same quota.
    :param modality: (Optional) ``joint`` ranks by the mean of both
        entropies; ``f`` or ``s`` use that modality alone.
    :param require_agreement: (Optional) Admit only samples whose two views
        predict the same class.

    """
    scored = llselect.score_pool(model, pool, modality)
    threshold = llselect.default_threshold(model.classes) if tau is None else tau
    z = llselect.candidate_filter(scored, threshold, modality)
    if require_agreement:
        z = llselect.agreeing(z)
    try:
        if balanced:
            return llselect.select_balanced(z, k, model.classes, iteration)
        return llselect.select_batch(z, k, iteration)
    except EmptyCandidateSet:
        logger.warning(
            "No candidate under threshold %.4f in a pool of %d", threshold, len(pool)
        )
        return SelectionBatch((), iteration, k)


def _fused(
    model: ModelSnapshot, pool: UnlabeledSet
) -> tuple[UnlabeledSet, FloatArray, FloatArray, FloatArray]:
    if not pool:
        raise EmptyPool("Cannot select from an empty pool.")
    pool = pool.sorted()
    P_f = predict_proba(model, Modality.F, pool.features_f())
    P_s = predict_proba(model, Modality.S, pool.features_s())
    return pool, P_f, P_s, (P_f + P_s) / 2.0


def _entry(
    sample_id: int,
    label: int,
    e_f: float,
    e_s: float,
    source: Modality,
) -> PseudoLabel:
    ef, es = EntropyScore(float(e_f)), EntropyScore(float(e_s))
    return PseudoLabel(sample_id, label, ef, es, llselect.joint_entropy(ef, es), source)


def self_training_select(
    model: ModelSnapshot, pool: UnlabeledSet, k: int, iteration: int = 1
) -> SelectionBatch:
    """Average both views, label by the fused argmax and keep the ``k``
    least uncertain fused predictions. No threshold, no balancing, no
    cross-modal check.

    """
    pool, P_f, P_s, P = _fused(model, pool)
    e_f, e_s, e = (llselect.entropies(x) for x in (P_f, P_s, P))
    order = sorted(range(len(pool)), key=lambda i: (e[i], pool.samples[i].id))[:k]
    entries = [
        _entry(pool.samples[i].id, int(P[i].argmax()), e_f[i], e_s[i], Modality.FUSED)
        for i in order
    ]
    return SelectionBatch(tuple(entries), iteration, k)


def co_training_select(
    model: ModelSnapshot, pool: UnlabeledSet, k: int, iteration: int = 1
) -> SelectionBatch:
    """Each view picks its own most confident samples and labels them.

    View f picks ``ceil(k / 2)`` first, view s then picks ``k // 2`` from what
    is left, so the batch holds ``min(k, |pool|)`` distinct samples.

    """
    pool, P_f, P_s, _ = _fused(model, pool)
    e_f, e_s = llselect.entropies(P_f), llselect.entropies(P_s)
    ids = [s.id for s in pool.samples]
    share_f = math.ceil(k / 2)

    picked: list[PseudoLabel] = []
    taken: set[int] = set()
    for modality, P, e, share in (
        (Modality.F, P_f, e_f, share_f),
        (Modality.S, P_s, e_s, k - share_f),
    ):
        ranking = sorted(range(len(pool)), key=lambda i: (e[i], ids[i]))
        view = [i for i in ranking if ids[i] not in taken][:share]
        for i in view:
            taken.add(ids[i])
            picked.append(_entry(ids[i], int(P[i].argmax()), e_f[i], e_s[i], modality))
    return SelectionBatch(tuple(picked), iteration, k)


def random_select(
    model: ModelSnapshot,
    pool: UnlabeledSet,
    k: int,
    seed: int,
    iteration: int = 1,
) -> SelectionBatch:
    """Draw ``k`` samples uniformly without replacement and label them by the
    fused argmax. Deterministic given ``seed``.

    """
    pool, P_f, P_s, P = _fused(model, pool)
    rng = np.random.Generator(np.random.PCG64(seed))
    chosen = np.sort(rng.choice(len(pool), size=min(k, len(pool)), replace=False))
    e_f, e_s = llselect.entropies(P_f), llselect.entropies(P_s)
    entries = [
        _entry(pool.samples[i].id, int(P[i].argmax()), e_f[i], e_s[i], Modality.FUSED)
        for i in chosen
    ]
    return SelectionBatch(tuple(entries), iteration, k)


def offload_all_select(pool: UnlabeledSet) -> tuple[Sample, ...]:
    """Every sample of the pool, raw and unlabeled, ordered by id."""
    if not pool:
        raise EmptyPool("Cannot offload an empty pool.")
    return pool.sorted().samples
