"""Experiment configuration.

A single YAML file with the sections ``dataset``, ``strategy``, ``schedule``,
``channel``, ``edge``, ``train`` and ``seeds``. Environment variables override
nothing.
"""
import typing
from pathlib import Path

import pydantic
import yaml

from .baselines import Strategy
from .classifier import TrainConfig
from .datagen import SynthSpec
from .exceptions import ConfigInvalid, InvalidStrategy


class Section(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(extra="forbid", frozen=True)


class DatasetSection(Section):
    synthetic: typing.Optional[SynthSpec] = None
    path: typing.Optional[Path] = None

    @pydantic.model_validator(mode="after")
    def _one_source(self) -> "DatasetSection":
        if (self.synthetic is None) == (self.path is None):
            raise ValueError("exactly one of 'synthetic' or 'path' is required")
        return self


class ScheduleSection(Section):
    k0: int = pydantic.Field(default=50, ge=1)
    n_iters: int = pydantic.Field(default=10, ge=1)
    growth: int = pydantic.Field(default=0, ge=0)
    arrivals_per_round: typing.Optional[int] = pydantic.Field(default=None, ge=1)


class ChannelSection(Section):
    count_model_push: bool = False
    header_bytes: int = pydantic.Field(default=64, ge=0, le=1024)


class EdgeSection(Section):
    noise_detect_rate: float = pydantic.Field(default=0.8, ge=0, le=1)


class TrainSection(Section):
    learning_rate: float = pydantic.Field(default=0.5, gt=0, le=10)
    epochs: int = pydantic.Field(default=200, ge=1, le=100000)
    l2: float = pydantic.Field(default=1e-3, ge=0)

    def to_config(self, seed: int) -> TrainConfig:
        return TrainConfig(self.learning_rate, self.epochs, self.l2, seed)


class ExperimentConfig(Section):
    dataset: DatasetSection
    strategy: dict[str, typing.Optional[dict[str, typing.Any]]] = pydantic.Field(
        default_factory=lambda: {"lltc": {}}
    )
    schedule: ScheduleSection = ScheduleSection()
    channel: ChannelSection = ChannelSection()
    edge: EdgeSection = EdgeSection()
    train: TrainSection = TrainSection()
    seeds: list[pydantic.NonNegativeInt] = pydantic.Field(
        default_factory=lambda: [0], min_length=1
    )

    @pydantic.field_validator("strategy")
    @classmethod
    def _strategies_valid(
        cls, value: dict[str, typing.Optional[dict[str, typing.Any]]]
    ) -> dict[str, typing.Optional[dict[str, typing.Any]]]:
        if not value:
            raise ValueError("at least one strategy is required")
        for name, params in value.items():
            params = dict(params or {})
            kind = params.pop("kind", name)
            try:
                Strategy.create(kind, params, name)
            except InvalidStrategy as e:
                raise ValueError(f"{name}: {e}")
        return value

    def strategies(self) -> list[Strategy]:
        """Strategies in the order they appear in the file."""
        out = []
        for name, params in self.strategy.items():
            params = dict(params or {})
            kind = params.pop("kind", name)
            out.append(Strategy.create(kind, params, name))
        return out

    def strategy_named(self, name: str) -> Strategy:
        for s in self.strategies():
            if s.name == name:
                return s
        raise ConfigInvalid([("strategy", f"no strategy named '{name}'")])

    def with_seeds(self, seeds: typing.Sequence[int]) -> "ExperimentConfig":
        """Copy of this configuration running ``seeds`` instead."""
        try:
            return ExperimentConfig.model_validate({**dict(self), "seeds": list(seeds)})
        except pydantic.ValidationError as e:
            raise ConfigInvalid(_field_errors(e))


def _field_errors(e: pydantic.ValidationError) -> list[tuple[str, str]]:
    return [
        (".".join(str(p) for p in err["loc"]) or "config", err["msg"])
        for err in e.errors()
    ]


def from_mapping(raw: typing.Any) -> ExperimentConfig:
    """Validate an already-parsed mapping.

    :param raw: Mapping as produced by ``yaml.safe_load``.

    """
    if not isinstance(raw, dict):
        raise ConfigInvalid([("config", "top level must be a mapping")])
    try:
        return ExperimentConfig.model_validate(raw)
    except pydantic.ValidationError as e:
        raise ConfigInvalid(_field_errors(e))


def load_config(path: typing.Union[str, Path]) -> ExperimentConfig:
    """Read and validate a YAML experiment configuration.

    Relative ``dataset.path`` entries resolve against the file's directory.

    :param path: Path to the YAML file.

    """
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except OSError as e:
        raise ConfigInvalid([("config", f"unable to read '{path}': {e.strerror}")])
    except UnicodeDecodeError:
        raise ConfigInvalid([("config", f"'{path}' is not valid UTF-8")])
    except yaml.YAMLError as e:
        raise ConfigInvalid([("config", f"not valid YAML: {e}")])
    cfg = from_mapping(raw)
    ds = cfg.dataset
    if ds.path is not None and not ds.path.is_absolute():
        dataset = ds.model_copy(update={"path": path.parent / ds.path})
        cfg = cfg.model_copy(update={"dataset": dataset})
    return cfg
