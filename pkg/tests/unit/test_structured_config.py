#!/usr/bin/env python3
# Copyright 2023 Canonical Ltd.
# See LICENSE file for licensing details.

import logging

import pytest
from pydantic import BaseModel, ValidationError

from core.structured_config import (
    DatasetSource,
    ExperimentConfig,
    OodKind,
    OodSource,
    PartitionSampling,
    SclExperimentConfig,
    SpacesFile,
    SyntheticSpec,
    TrainConfig,
)

logger = logging.getLogger(__name__)

SYNTHETIC = {"synthetic": {}}


def check_valid_values(model: type[BaseModel], field: str, accepted_values: list, **base) -> None:
    """Check the correctness of the passed values for a field."""
    for value in accepted_values:
        assert getattr(model(**base, **{field: value}), field) == value


def check_invalid_values(
    model: type[BaseModel], field: str, erroneus_values: list, **base
) -> None:
    """Check the incorrectness of the passed values for a field."""
    for value in erroneus_values:
        with pytest.raises(ValidationError):
            model(**base, **{field: value})


def test_train_config_values() -> None:
    """Check trainer hyperparameter ranges."""
    for field in ["epochs", "batch_size", "lr_decay_period"]:
        check_invalid_values(TrainConfig, field, [0, -3])
        check_valid_values(TrainConfig, field, [1, 42])

    check_invalid_values(TrainConfig, "learning_rate", [0.0, -0.1])
    check_valid_values(TrainConfig, "learning_rate", [0.5, 1e-4])

    check_invalid_values(TrainConfig, "lr_decay", [0.0, 1.5])
    check_valid_values(TrainConfig, "lr_decay", [0.5, 1.0])

    check_invalid_values(TrainConfig, "momentum", [-0.1, 1.0])
    check_valid_values(TrainConfig, "momentum", [0.0, 0.99])

    for field in ["hidden_width", "seed"]:
        check_invalid_values(TrainConfig, field, [-1])
        check_valid_values(TrainConfig, field, [0, 16])


def test_synthetic_spec_values() -> None:
    """Check generator settings."""
    check_invalid_values(SyntheticSpec, "num_classes", [0, 1])
    check_valid_values(SyntheticSpec, "num_classes", [2, 100])

    for field in ["dims", "per_class_count"]:
        check_invalid_values(SyntheticSpec, field, [0, -1])
        check_valid_values(SyntheticSpec, field, [1, 8])

    check_invalid_values(SyntheticSpec, "noise_sigma", [0.0, -1.0])
    check_invalid_values(SyntheticSpec, "layout", ["grid", "Simplex"])
    check_valid_values(SyntheticSpec, "layout", ["simplex", "circle"])


def test_unknown_keys_rejected() -> None:
    with pytest.raises(ValidationError):
        TrainConfig(epoch=3)
    with pytest.raises(ValidationError):
        SpacesFile(num_classes=4, sequels=[], extra=True)


def test_blank_strings_become_none() -> None:
    assert DatasetSource(train_csv="a.csv", test_csv="").test_csv is None


def test_dataset_source_exactly_one() -> None:
    """Check one of synthetic, train_csv or predictions is set."""
    with pytest.raises(ValidationError):
        DatasetSource()
    with pytest.raises(ValidationError):
        DatasetSource(synthetic={}, predictions="bundle.yaml")
    with pytest.raises(ValidationError):
        DatasetSource(synthetic={}, test_csv="test.csv")

    assert DatasetSource(train_csv="train.csv", test_csv="test.csv").synthetic is None


def test_ood_source_values() -> None:
    check_invalid_values(OodSource, "artificial_count", [0])
    check_invalid_values(OodSource, "artificial", [["cauchy"]])
    assert OodSource(artificial=["rademacher"]).artificial == [OodKind.RADEMACHER]


def test_experiment_config_values() -> None:
    """Check `run` settings."""
    base = {"seed": 0, "dataset": SYNTHETIC, "ood": {"artificial": ["uniform"]}}

    for field in ["num_ensembles", "num_bins"]:
        check_invalid_values(ExperimentConfig, field, [0], **base)
        check_valid_values(ExperimentConfig, field, [1, 5], **base)

    check_invalid_values(ExperimentConfig, "test_fraction", [0.0, 1.0], **base)
    check_valid_values(ExperimentConfig, "test_fraction", [0.3], **base)

    check_invalid_values(ExperimentConfig, "tpr_target", [0.0, 1.01], **base)
    check_valid_values(ExperimentConfig, "tpr_target", [0.95, 1.0], **base)

    check_invalid_values(ExperimentConfig, "uneven", ["maybe"], **base)
    check_valid_values(ExperimentConfig, "uneven", ["allow", "error"], **base)


def test_experiment_config_needs_ood_when_training() -> None:
    with pytest.raises(ValidationError):
        ExperimentConfig(seed=0, dataset=SYNTHETIC)

    config = ExperimentConfig(seed=0, dataset={"predictions": "bundle.yaml"})
    assert config.ood.held_out_classes == []


def test_partition_sampling_values() -> None:
    check_invalid_values(PartitionSampling, "count", [0])
    check_invalid_values(PartitionSampling, "min_part_size", [0, 1])
    check_valid_values(PartitionSampling, "min_part_size", [2, 5])


def test_scl_config_values() -> None:
    """Check `scl` settings."""
    base = {"seed": 0, "dataset": SYNTHETIC, "sampling": {}}

    for field in ["runs", "num_ensembles"]:
        check_invalid_values(SclExperimentConfig, field, [0], **base)
    check_invalid_values(SclExperimentConfig, "builders", [[], ["boosted"]], **base)

    with pytest.raises(ValidationError):
        SclExperimentConfig(seed=0, dataset=SYNTHETIC)
    with pytest.raises(ValidationError):
        SclExperimentConfig(seed=0, dataset={"predictions": "bundle.yaml"}, sampling={})
