"""Closed-loop simulation of UE, edge node, metered channel and cloud.

Every round the UE delivers part of its unlabeled stream to the edge, the
edge drops the noise it detects, labels and selects a batch with the current
model and offloads it. The cloud appends the batch to its training set,
retrains from scratch and pushes the new snapshot back. Time is counted in
rounds.
"""
import logging
import typing
from dataclasses import dataclass, field, replace

import numpy as np

from . import datagen, llselect
from .baselines import Strategy, StrategyKind, offload_all_select
from .classifier import ModelSnapshot, TrainConfig, fused_proba, train
from .config import ExperimentConfig, from_mapping
from .core import LabeledSet, Sample, UnlabeledSet
from .exceptions import (
    ConfigInvalid,
    ConservationViolated,
    DuplicateSample,
    EmptyTestSet,
    PoolExhausted,
    TrafficMismatch,
)

logger = logging.getLogger(__name__)

NOISE_STREAM = 1
SELECT_STREAM = 2


def derive_seed(seed: int, round_no: int, stream: int) -> int:
    """Independent 64-bit seed for one random stream of one round."""
    state = np.random.SeedSequence([seed, round_no, stream]).generate_state(1, np.uint64)
    return int(state[0])


@dataclass(frozen=True)
class ChannelConfig:
    count_model_push: bool = False
    header_bytes: int = 64

    def __post_init__(self) -> None:
        if not 0 <= self.header_bytes <= 1024:
            raise ConfigInvalid([("channel.header_bytes", "must be in [0, 1024]")])


@dataclass(frozen=True)
class Offload:
    """Edge to cloud message. ``labels`` is None for raw, unlabeled items."""

    round: int
    samples: tuple[Sample, ...]
    labels: tuple[typing.Optional[int], ...]
    header_bytes: int

    @property
    def payload_bytes(self) -> int:
        return sum(s.size_bytes for s in self.samples)


@dataclass(frozen=True)
class ModelPush:
    round: int
    model: ModelSnapshot
    header_bytes: int


class Channel:
    """Byte meter for the edge-cloud link. Empty offloads are not sent."""

    def __init__(self, config: ChannelConfig):
        self.config = config

    def offload(
        self,
        round_no: int,
        samples: typing.Sequence[Sample],
        labels: typing.Sequence[typing.Optional[int]],
    ) -> tuple[Offload, int]:
        """Build the round's offload message and return it with its metered
        size.

        """
        message = Offload(round_no, tuple(samples), tuple(labels), self.config.header_bytes)
        if not message.samples:
            return message, 0
        return message, message.payload_bytes + self.config.header_bytes

    def push(self, round_no: int, model: ModelSnapshot) -> tuple[ModelPush, int]:
        message = ModelPush(round_no, model, self.config.header_bytes)
        if not self.config.count_model_push:
            return message, 0
        return message, model.size_bytes + self.config.header_bytes


@dataclass(frozen=True)
class LedgerRow:
    round: int
    bytes_up: int
    bytes_down: int
    items_offloaded: int
    items_collected: int
    items_discarded_noise: int
    bytes_collected: int

    def __post_init__(self) -> None:
        for name in (
            "bytes_up",
            "bytes_down",
            "items_offloaded",
            "items_collected",
            "items_discarded_noise",
            "bytes_collected",
        ):
            if getattr(self, name) < 0:
                raise TrafficMismatch(f"Ledger field {name} is negative.")


@dataclass(frozen=True)
class TrafficLedger:
    rows: tuple[LedgerRow, ...] = ()

    def append(self, row: LedgerRow) -> "TrafficLedger":
        if self.rows and row.round <= self.rows[-1].round:
            raise TrafficMismatch(f"Ledger round {row.round} is out of order.")
        return TrafficLedger(self.rows + (row,))

    @property
    def bytes_up(self) -> int:
        return sum(r.bytes_up for r in self.rows)

    @property
    def bytes_down(self) -> int:
        return sum(r.bytes_down for r in self.rows)

    @property
    def bytes_collected(self) -> int:
        return sum(r.bytes_collected for r in self.rows)


@dataclass(frozen=True)
class CloudNode:
    training: LabeledSet
    model: ModelSnapshot
    bytes_received: int = 0

    def receive(self, message: Offload) -> tuple["CloudNode", list[Sample], list[int]]:
        """Accept an offload and append it to the training set.

        Pseudo-labelled items are taken as ground truth. Raw items are labelled
        by the oracle from their true label; items without one are dropped.

        """
        received = message.payload_bytes + message.header_bytes if message.samples else 0
        known = self.training.ids
        samples: list[Sample] = []
        labels: list[int] = []
        for sample, label in zip(message.samples, message.labels):
            if sample.id in known:
                raise DuplicateSample(f"Sample {sample.id} is already in the training set.")
            if label is None:
                label = sample.true_label
            if label is None:
                continue
            samples.append(sample)
            labels.append(label)
        cloud = replace(
            self,
            training=self.training.extend(samples, labels),
            bytes_received=self.bytes_received + received,
        )
        return cloud, samples, labels

    def retrain(self, cfg: TrainConfig) -> "CloudNode":
        model = train(self.training, cfg, version=self.model.version + 1)
        return replace(self, model=model)


@dataclass(frozen=True)
class SimConfig:
    channel: ChannelConfig = ChannelConfig()
    train: TrainConfig = TrainConfig()
    noise_detect_rate: float = 0.8
    arrivals_per_round: typing.Optional[int] = None

    @classmethod
    def from_experiment(cls, cfg: ExperimentConfig, seed: int) -> "SimConfig":
        return cls(
            ChannelConfig(cfg.channel.count_model_push, cfg.channel.header_bytes),
            cfg.train.to_config(seed),
            cfg.edge.noise_detect_rate,
            cfg.schedule.arrivals_per_round,
        )


@dataclass(frozen=True)
class SimState:
    round: int
    cloud: CloudNode
    pool: UnlabeledSet
    pending: UnlabeledSet
    test: LabeledSet
    ledger: TrafficLedger
    config: SimConfig
    seed: int
    initial_pool_size: int
    collected: int = 0
    offloaded: int = 0
    discarded_noise: int = 0
    admitted_pseudo: int = 0
    correct_pseudo: int = 0

    @property
    def model(self) -> ModelSnapshot:
        return self.cloud.model


@dataclass(frozen=True)
class RoundReport:
    round: int
    strategy: str
    k: int
    training_size: int
    accuracy: float
    auto_label_accuracy: typing.Optional[float]
    pool_accuracy: typing.Optional[float]
    shortfall: int
    ledger: LedgerRow
    cumulative_bytes_up: int
    cumulative_bytes_down: int
    pool_consumed: int
    items_remaining: int
    items_never_collected: int
    model_version: int

    @property
    def has_shortfall(self) -> bool:
        return self.shortfall > 0

    def to_row(self) -> dict[str, typing.Any]:
        """Flat record in the documented per-round column order."""
        return {
            "round": self.round,
            "strategy": self.strategy,
            "k": self.k,
            "training_size": self.training_size,
            "accuracy": self.accuracy,
            "auto_label_accuracy": self.auto_label_accuracy,
            "pool_accuracy": self.pool_accuracy,
            "shortfall": self.shortfall,
            "bytes_up": self.ledger.bytes_up,
            "bytes_down": self.ledger.bytes_down,
            "cum_bytes_up": self.cumulative_bytes_up,
            "cum_bytes_down": self.cumulative_bytes_down,
            "bytes_collected": self.ledger.bytes_collected,
            "items_collected": self.ledger.items_collected,
            "items_offloaded": self.ledger.items_offloaded,
            "items_discarded_noise": self.ledger.items_discarded_noise,
            "items_remaining": self.items_remaining,
            "items_never_collected": self.items_never_collected,
            "pool_consumed": self.pool_consumed,
            "model_version": self.model_version,
        }


@dataclass(frozen=True)
class ExperimentSummary:
    strategy: str
    kind: str
    seed: int
    rounds: int
    bootstrap_accuracy: float
    final_accuracy: float
    final_training_size: int
    total_bytes_up: int
    total_bytes_down: int
    bytes_collected: int
    traffic_ratio: typing.Optional[float]
    auto_label_accuracy: typing.Optional[float]
    items_offloaded: int
    shortfall_rounds: int
    oracle_labels: bool

    def to_dict(self) -> dict[str, typing.Any]:
        return {
            "strategy": self.strategy,
            "kind": self.kind,
            "seed": self.seed,
            "rounds": self.rounds,
            "bootstrap_accuracy": self.bootstrap_accuracy,
            "final_accuracy": self.final_accuracy,
            "final_training_size": self.final_training_size,
            "total_bytes_up": self.total_bytes_up,
            "total_bytes_down": self.total_bytes_down,
            "bytes_collected": self.bytes_collected,
            "traffic_ratio": self.traffic_ratio,
            "auto_label_accuracy": self.auto_label_accuracy,
            "items_offloaded": self.items_offloaded,
            "shortfall_rounds": self.shortfall_rounds,
            "oracle_labels": self.oracle_labels,
        }


@dataclass(frozen=True)
class ExperimentResult:
    summary: ExperimentSummary
    reports: tuple[RoundReport, ...] = field(default=())


def accuracy(model: ModelSnapshot, test: LabeledSet) -> float:
    """Fraction of ``test`` whose fused prediction matches the label.

    :param model: Snapshot to evaluate.
    :param test: Non-empty held-out set.

    """
    if not len(test):
        raise EmptyTestSet("Cannot evaluate on an empty test set.")
    P = fused_proba(model, test.features_f(), test.features_s())
    return float(np.mean(P.argmax(axis=1) == test.label_array()))


def pool_accuracy(model: ModelSnapshot, pool: UnlabeledSet) -> typing.Optional[float]:
    """Accuracy of the edge's resolved labels over pool items that have a
    hidden true label. None when there are none.

    """
    pool = pool.sorted()
    known = [i for i, s in enumerate(pool.samples) if s.true_label is not None]
    if not known:
        return None
    truth = np.array([pool.samples[i].true_label for i in known])
    return float(np.mean(llselect.resolved_labels(model, pool)[known] == truth))


def noise_filter(
    incoming: typing.Sequence[Sample], detect_rate: float, seed: int
) -> tuple[list[Sample], list[Sample]]:
    """Drop detected noise before it reaches the edge pool.

    One uniform draw is consumed per incoming sample; a noise sample is
    discarded when its draw falls below ``detect_rate``. Clean samples are
    always kept.

    :param incoming: Samples delivered by the UE this round.
    :param detect_rate: Detection probability in ``[0, 1]``.
    :param seed: Seed of the detector's draws.

    """
    if not 0 <= detect_rate <= 1:
        raise ValueError(f"detect_rate must be in [0, 1], got {detect_rate}.")
    draws = np.random.Generator(np.random.PCG64(seed)).random(len(incoming))
    kept: list[Sample] = []
    discarded: list[Sample] = []
    for sample, u in zip(incoming, draws):
        if sample.is_noise and u < detect_rate:
            discarded.append(sample)
        else:
            kept.append(sample)
    return kept, discarded


def bootstrap(
    labeled: LabeledSet,
    pool: UnlabeledSet,
    test: LabeledSet,
    config: SimConfig,
    seed: int,
) -> SimState:
    """Train the first model on the labeled set and push it to the edge.

    The push is ledger round 0.

    """
    model = train(labeled, config.train, version=1)
    channel = Channel(config.channel)
    _, bytes_down = channel.push(0, model)
    ledger = TrafficLedger().append(LedgerRow(0, 0, bytes_down, 0, 0, 0, 0))
    return SimState(
        round=0,
        cloud=CloudNode(labeled, model),
        pool=UnlabeledSet(),
        pending=pool,
        test=test,
        ledger=ledger,
        config=config,
        seed=seed,
        initial_pool_size=len(pool),
    )


def _select(
    state: SimState,
    strategy: Strategy,
    pool: UnlabeledSet,
    k: int,
    round_no: int,
) -> tuple[list[Sample], list[typing.Optional[int]], int]:
    if k <= 0 or not pool:
        return [], [], max(k, 0)
    if strategy.kind is StrategyKind.OFFLOAD_ALL:
        samples = list(offload_all_select(pool))
        return samples, [None] * len(samples), 0
    batch = strategy.select(
        state.model, pool, k, derive_seed(state.seed, round_no, SELECT_STREAM), round_no
    )
    by_id = pool.by_id()
    return (
        [by_id[e.sample_id] for e in batch.entries],
        [e.label for e in batch.entries],
        batch.shortfall,
    )


def run_round(
    state: SimState, strategy: Strategy, k: int
) -> tuple[SimState, RoundReport]:
    """Run one collect, filter, select, offload, retrain, push, evaluate cycle.

    :param state: State after the previous round (or :func:`bootstrap`).
    :param strategy: Edge selection strategy.
    :param k: Batch size for this round. Zero makes a no-op round.

    """
    if not state.pool and not state.pending:
        raise PoolExhausted("Nothing left to collect or select.")
    round_no = state.round + 1
    cfg = state.config
    channel = Channel(cfg.channel)

    arrivals, pending = state.pending.take(cfg.arrivals_per_round)
    kept, discarded = noise_filter(
        arrivals.samples,
        cfg.noise_detect_rate,
        derive_seed(state.seed, round_no, NOISE_STREAM),
    )
    pool = state.pool.merge(UnlabeledSet(tuple(kept)))
    pool_acc = pool_accuracy(state.model, pool) if pool else None

    samples, labels, shortfall = _select(state, strategy, pool, k, round_no)
    message, bytes_up = channel.offload(round_no, samples, labels)
    cloud, admitted, admitted_labels = state.cloud.receive(message)

    if strategy.kind is StrategyKind.OFFLOAD_ALL:
        pseudo, correct = 0, 0
    else:
        pseudo = len(admitted)
        correct = sum(1 for s, label in zip(admitted, admitted_labels) if s.true_label == label)
    auto_acc = correct / pseudo if pseudo else None
    bytes_down = 0
    if admitted:
        cloud = cloud.retrain(cfg.train)
        _, bytes_down = channel.push(round_no, cloud.model)

    pool = pool.remove([s.id for s in samples])
    row = LedgerRow(
        round=round_no,
        bytes_up=bytes_up,
        bytes_down=bytes_down,
        items_offloaded=len(samples),
        items_collected=len(arrivals),
        items_discarded_noise=len(discarded),
        bytes_collected=sum(s.size_bytes for s in arrivals.samples),
    )
    ledger = state.ledger.append(row)
    new_state = replace(
        state,
        round=round_no,
        cloud=cloud,
        pool=pool,
        pending=pending,
        ledger=ledger,
        collected=state.collected + len(arrivals),
        offloaded=state.offloaded + len(samples),
        discarded_noise=state.discarded_noise + len(discarded),
        admitted_pseudo=state.admitted_pseudo + pseudo,
        correct_pseudo=state.correct_pseudo + correct,
    )
    _check_invariants(new_state)

    report = RoundReport(
        round=round_no,
        strategy=strategy.name,
        k=k,
        training_size=len(cloud.training),
        accuracy=accuracy(cloud.model, state.test),
        auto_label_accuracy=auto_acc,
        pool_accuracy=pool_acc,
        shortfall=shortfall,
        ledger=row,
        cumulative_bytes_up=ledger.bytes_up,
        cumulative_bytes_down=ledger.bytes_down,
        pool_consumed=new_state.offloaded,
        items_remaining=len(pool),
        items_never_collected=len(pending),
        model_version=cloud.model.version,
    )
    logger.info(
        "Round %d [%s]: offloaded %d (%d bytes), accuracy %.4f",
        round_no,
        strategy.name,
        len(samples),
        bytes_up,
        report.accuracy,
    )
    if shortfall:
        logger.debug("Round %d [%s]: shortfall of %d", round_no, strategy.name, shortfall)
    return new_state, report


def _check_invariants(state: SimState) -> None:
    accounted = (
        state.offloaded + state.discarded_noise + len(state.pool) + len(state.pending)
    )
    if accounted != state.initial_pool_size:
        raise ConservationViolated(
            f"Round {state.round}: {accounted} items accounted for, "
            f"expected {state.initial_pool_size}."
        )
    if state.cloud.bytes_received != state.ledger.bytes_up:
        raise TrafficMismatch(
            f"Round {state.round}: cloud received {state.cloud.bytes_received} "
            f"bytes, ledger sent {state.ledger.bytes_up}."
        )


def load_dataset(cfg: ExperimentConfig, seed: int) -> datagen.Dataset:
    """Generate the synthetic dataset for ``seed``, or load the configured one."""
    if cfg.dataset.synthetic is not None:
        spec = datagen.make_spec(**{**cfg.dataset.synthetic.model_dump(), "seed": seed})
        return datagen.generate(spec)
    assert cfg.dataset.path is not None
    return datagen.load(cfg.dataset.path)


def run_experiment(
    cfg: typing.Union[ExperimentConfig, typing.Mapping[str, typing.Any]],
    strategy: typing.Union[Strategy, str],
    seed: int,
    dataset: typing.Optional[datagen.Dataset] = None,
) -> ExperimentResult:
    """Bootstrap, then run rounds over the configured schedule until it or
    the pool runs out.

    :param cfg: Validated config, or a raw mapping to validate.
    :param strategy: Strategy, or the name of one in ``cfg``.
    :param seed: Run seed. Drives dataset generation and every random draw.
    :param dataset: (Optional) Use this dataset instead of the configured one.

    """
    if not isinstance(cfg, ExperimentConfig):
        cfg = from_mapping(dict(cfg))
    if isinstance(strategy, str):
        strategy = cfg.strategy_named(strategy)
    data = dataset if dataset is not None else load_dataset(cfg, seed)
    sched = cfg.schedule
    state = bootstrap(
        data.labeled,
        data.unlabeled,
        data.test,
        SimConfig.from_experiment(cfg, seed),
        seed,
    )
    bootstrap_acc = accuracy(state.model, state.test)
    logger.info("Bootstrap [%s, seed %d]: accuracy %.4f", strategy.name, seed, bootstrap_acc)

    reports: list[RoundReport] = []
    for k in llselect.iteration_schedule(sched.k0, sched.n_iters, sched.growth):
        try:
            state, report = run_round(state, strategy, k)
        except PoolExhausted:
            logger.info("Pool exhausted after round %d", state.round)
            break
        reports.append(report)

    final_acc = reports[-1].accuracy if reports else bootstrap_acc
    collected = state.ledger.bytes_collected
    summary = ExperimentSummary(
        strategy=strategy.name,
        kind=strategy.kind.value,
        seed=seed,
        rounds=len(reports),
        bootstrap_accuracy=bootstrap_acc,
        final_accuracy=final_acc,
        final_training_size=len(state.cloud.training),
        total_bytes_up=state.ledger.bytes_up,
        total_bytes_down=state.ledger.bytes_down,
        bytes_collected=collected,
        traffic_ratio=state.ledger.bytes_up / collected if collected else None,
        auto_label_accuracy=(
            state.correct_pseudo / state.admitted_pseudo if state.admitted_pseudo else None
        ),
        items_offloaded=state.offloaded,
        shortfall_rounds=sum(1 for r in reports if r.has_shortfall),
        oracle_labels=strategy.kind is StrategyKind.OFFLOAD_ALL,
    )
    return ExperimentResult(summary, tuple(reports))
