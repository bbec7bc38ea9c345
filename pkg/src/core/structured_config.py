#!/usr/bin/env python3
# Copyright 2023 Canonical Ltd.
# See LICENSE file for licensing details.

"""Structured configuration for the fitted-ensembles toolkit."""
import logging
from enum import Enum

from pydantic import BaseModel, root_validator, validator

from literals import DEFAULT_NUM_BINS, DEFAULT_TPR_TARGET

logger = logging.getLogger(__name__)


class LogLevel(str, Enum):
    """Enum for the `--log-level` option."""

    INFO = "INFO"
    WARNING = "WARNING"
    ERROR = "ERROR"
    DEBUG = "DEBUG"


class OodKind(str, Enum):
    """Enum for the artificial OOD generators."""

    UNIFORM = "uniform"
    GAUSSIAN = "gaussian"
    RADEMACHER = "rademacher"


class BuilderKind(str, Enum):
    """Enum for the SCL part-model builders."""

    PLAIN = "plain"
    FITTED = "fitted"


class BaseConfigModel(BaseModel):
    """Base for every structured config, rejecting unknown keys."""

    class Config:
        """Pydantic model options."""

        extra = "forbid"
        validate_assignment = True

    @validator("*", pre=True)
    @classmethod
    def blank_string(cls, value):
        """Check for empty strings."""
        if value == "":
            return None
        return value


class TrainConfig(BaseConfigModel):
    """Hyperparameters of the member-classifier trainer."""

    epochs: int = 50
    batch_size: int = 32
    learning_rate: float = 0.05
    lr_decay: float = 1.0
    lr_decay_period: int = 10
    momentum: float = 0.9
    seed: int = 0
    hidden_width: int = 0
    standardize: bool = True

    @validator("epochs", "batch_size", "lr_decay_period")
    @classmethod
    def greater_than_zero(cls, value: int) -> int:
        """Check value greater or equal than one."""
        if value < 1:
            raise ValueError("Value below 1. Accepted value are greater or equal than 1.")
        return value

    @validator("learning_rate")
    @classmethod
    def positive_learning_rate(cls, value: float) -> float:
        """Check the learning rate is strictly positive."""
        if not value > 0:
            raise ValueError("learning_rate must be greater than 0")
        return value

    @validator("lr_decay")
    @classmethod
    def decay_in_unit_interval(cls, value: float) -> float:
        """Check the multiplicative decay lies in (0, 1]."""
        if not 0 < value <= 1:
            raise ValueError("lr_decay must be in (0, 1]")
        return value

    @validator("momentum")
    @classmethod
    def momentum_in_range(cls, value: float) -> float:
        """Check momentum lies in [0, 1)."""
        if not 0 <= value < 1:
            raise ValueError("momentum must be in [0, 1)")
        return value

    @validator("hidden_width", "seed")
    @classmethod
    def non_negative(cls, value: int) -> int:
        """Check value greater or equal than zero."""
        if value < 0:
            raise ValueError("Value below 0. Accepted value are greater or equal than 0.")
        return value


class SyntheticSpec(BaseConfigModel):
    """Gaussian blob generator settings.

    An unset `seed` is derived from the experiment master seed.
    """

    num_classes: int = 10
    dims: int = 2
    per_class_count: int = 100
    class_mean_scale: float = 4.0
    noise_sigma: float = 1.0
    layout: str = "circle"
    seed: int | None = None

    @validator("num_classes")
    @classmethod
    def at_least_two_classes(cls, value: int) -> int:
        """Check the class count."""
        if value < 2:
            raise ValueError("num_classes must be at least 2")
        return value

    @validator("dims", "per_class_count")
    @classmethod
    def at_least_one(cls, value: int) -> int:
        """Check value greater or equal than one."""
        if value < 1:
            raise ValueError("Value below 1. Accepted value are greater or equal than 1.")
        return value

    @validator("noise_sigma")
    @classmethod
    def positive_sigma(cls, value: float) -> float:
        """Check noise_sigma is strictly positive."""
        if not value > 0:
            raise ValueError("noise_sigma must be greater than 0")
        return value

    @validator("layout")
    @classmethod
    def layout_values(cls, value: str) -> str:
        """Check layout is one of `simplex` or `circle`."""
        if value not in ["simplex", "circle"]:
            raise ValueError("Value not one of 'simplex' or 'circle'")
        return value


class SpacesFile(BaseConfigModel):
    """The space/sequel config file."""

    num_classes: int
    sequels: list[list[list[list[int]]]]
    include_identity: bool | None = None

    @validator("num_classes")
    @classmethod
    def at_least_two_classes(cls, value: int) -> int:
        """Check the class count."""
        if value < 2:
            raise ValueError("num_classes must be at least 2")
        return value


class DatasetSource(BaseConfigModel):
    """Where in-distribution data comes from, exactly one source is allowed."""

    synthetic: SyntheticSpec | None = None
    train_csv: str | None = None
    test_csv: str | None = None
    predictions: str | None = None

    @root_validator(skip_on_failure=True)
    @classmethod
    def exactly_one_source(cls, values: dict) -> dict:
        """Check exactly one of synthetic, CSV paths or prediction matrices is set."""
        sources = [
            values.get("synthetic") is not None,
            values.get("train_csv") is not None,
            values.get("predictions") is not None,
        ]
        if sum(sources) != 1:
            raise ValueError("exactly one of synthetic, train_csv or predictions is required")
        if values.get("test_csv") is not None and values.get("train_csv") is None:
            raise ValueError("test_csv requires train_csv")
        return values


class OodSource(BaseConfigModel):
    """Where out-of-distribution data comes from."""

    held_out_classes: list[int] = []
    artificial: list[OodKind] = []
    artificial_count: int = 500
    artificial_scale: float | None = None

    @validator("artificial_count")
    @classmethod
    def at_least_one(cls, value: int) -> int:
        """Check value greater or equal than one."""
        if value < 1:
            raise ValueError("Value below 1. Accepted value are greater or equal than 1.")
        return value


class ExperimentConfig(BaseConfigModel):
    """Settings of the `run` command."""

    seed: int
    dataset: DatasetSource
    spaces: str | None = None
    include_identity: bool | None = None
    train: TrainConfig = TrainConfig()
    ood: OodSource = OodSource()
    num_ensembles: int = 1
    test_fraction: float = 0.3
    num_bins: int = DEFAULT_NUM_BINS
    tpr_target: float = DEFAULT_TPR_TARGET
    uneven: str = "error"
    output_dir: str | None = None

    @validator("num_ensembles", "num_bins")
    @classmethod
    def at_least_one(cls, value: int) -> int:
        """Check value greater or equal than one."""
        if value < 1:
            raise ValueError("Value below 1. Accepted value are greater or equal than 1.")
        return value

    @validator("test_fraction")
    @classmethod
    def open_unit_interval(cls, value: float) -> float:
        """Check the fraction lies in (0, 1)."""
        if not 0 < value < 1:
            raise ValueError("test_fraction must be in (0, 1)")
        return value

    @validator("tpr_target")
    @classmethod
    def tpr_in_range(cls, value: float) -> float:
        """Check the TPR target lies in (0, 1]."""
        if not 0 < value <= 1:
            raise ValueError("tpr_target must be in (0, 1]")
        return value

    @validator("uneven")
    @classmethod
    def uneven_values(cls, value: str) -> str:
        """Check uneven is one of `allow` or `error`."""
        if value not in ["allow", "error"]:
            raise ValueError("Value not one of 'allow' or 'error'")
        return value

    @root_validator(skip_on_failure=True)
    @classmethod
    def ood_required_for_training(cls, values: dict) -> dict:
        """Check trained pipelines name at least one OOD source."""
        dataset: DatasetSource = values["dataset"]
        ood: OodSource = values["ood"]
        if dataset.predictions is None and not (ood.held_out_classes or ood.artificial):
            raise ValueError("ood needs held_out_classes or artificial when training")
        return values


class PartitionSampling(BaseConfigModel):
    """Random partition sampling for SCL experiments."""

    count: int = 20
    min_part_size: int = 2
    num_parts: int | None = None

    @validator("count")
    @classmethod
    def at_least_one(cls, value: int) -> int:
        """Check value greater or equal than one."""
        if value < 1:
            raise ValueError("Value below 1. Accepted value are greater or equal than 1.")
        return value

    @validator("min_part_size")
    @classmethod
    def at_least_two(cls, value: int) -> int:
        """Check parts hold at least two classes."""
        if value < 2:
            raise ValueError("min_part_size must be at least 2")
        return value


class SclExperimentConfig(BaseConfigModel):
    """Settings of the `scl` command."""

    seed: int
    dataset: DatasetSource
    partitions: list[list[list[int]]] | None = None
    sampling: PartitionSampling | None = None
    builders: list[BuilderKind] = [BuilderKind.PLAIN, BuilderKind.FITTED]
    part_spaces: list[list[list[int]]] | None = None
    include_identity: bool = True
    train: TrainConfig = TrainConfig()
    runs: int = 5
    num_ensembles: int = 1
    test_fraction: float = 0.3
    output_dir: str | None = None

    @validator("runs", "num_ensembles")
    @classmethod
    def at_least_one(cls, value: int) -> int:
        """Check value greater or equal than one."""
        if value < 1:
            raise ValueError("Value below 1. Accepted value are greater or equal than 1.")
        return value

    @validator("test_fraction")
    @classmethod
    def open_unit_interval(cls, value: float) -> float:
        """Check the fraction lies in (0, 1)."""
        if not 0 < value < 1:
            raise ValueError("test_fraction must be in (0, 1)")
        return value

    @validator("builders")
    @classmethod
    def non_empty_builders(cls, value: list[BuilderKind]) -> list[BuilderKind]:
        """Check at least one builder is requested."""
        if not value:
            raise ValueError("builders must name at least one of 'plain' or 'fitted'")
        return value

    @root_validator(skip_on_failure=True)
    @classmethod
    def partitions_or_sampling(cls, values: dict) -> dict:
        """Check exactly one of explicit partitions or sampling is given."""
        if (values.get("partitions") is None) == (values.get("sampling") is None):
            raise ValueError("exactly one of partitions or sampling is required")
        if values["dataset"].predictions is not None:
            raise ValueError("scl experiments train part models and cannot use predictions")
        return values
