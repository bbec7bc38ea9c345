#!/usr/bin/env python3
# Copyright 2024 Canonical Ltd.
# See LICENSE file for licensing details.

"""Separable concept learning: part models trained on disjoint class subsets, merged at test time.

Each part model scores only its own classes, in ascending original class order. The merged
model concatenates part scores at their global class positions and normalises them; the
routed bound instead asks only the part model owning the true class.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Protocol, Sequence

import numpy as np

from core.exceptions import (
    ArityMismatchError,
    ConfigError,
    EmptyPartDataError,
    InfeasibleConstraintError,
)
from core.models import (
    ClassSet,
    FittedEnsembleSpec,
    LabeledDataset,
    SclPartition,
    SclResult,
    Sequel,
)
from core.structured_config import BuilderKind, TrainConfig
from managers.datasets import split_by_classes
from managers.rectifier import (
    AggregateEnsemble,
    ConventionalEnsemble,
    build_aggregate,
    build_conventional_ensemble,
)
from managers.spaces import adjacent_merge_sequel, check_sequel, default_sequels, explicit_space

logger = logging.getLogger(__name__)

Loss = Callable[[int, int], float]


class PartModel(Protocol):
    """Anything producing one score column per class of its part."""

    @property
    def num_outputs(self) -> int:
        """Number of scored classes."""
        ...

    def scores(self, features: np.ndarray) -> np.ndarray:
        """Score matrix, one row per example."""
        ...


def indicator_loss(predicted: int, true: int) -> float:
    """0 for a correct prediction, 1 otherwise."""
    return float(predicted != true)


@dataclass
class SclModelSet:
    """One trained part model per part of a partition."""

    partition: SclPartition
    part_models: Sequence[PartModel]

    def __post_init__(self):
        if len(self.part_models) != len(self.partition.parts):
            raise ArityMismatchError(
                f"{len(self.part_models)} part models for {len(self.partition.parts)} parts"
            )
        for part, model in zip(self.partition.parts, self.part_models):
            if model.num_outputs != len(part):
                raise ArityMismatchError(
                    f"part {list(part)} has {len(part)} classes, "
                    f"its model scores {model.num_outputs}"
                )


def concat_scores(part_outputs: Sequence[Sequence[float]], partition: SclPartition) -> np.ndarray:
    """Places each part's scores at its classes' global positions, then divides by the total.

    Raises:
        ArityMismatchError: if an output's length differs from its part's size
    """
    if len(part_outputs) != len(partition.parts):
        raise ArityMismatchError(
            f"{len(part_outputs)} part outputs for {len(partition.parts)} parts"
        )

    merged = np.zeros(partition.num_classes, dtype=np.float64)
    for part, output in zip(partition.parts, part_outputs):
        output = np.asarray(output, dtype=np.float64)
        if output.shape != (len(part),):
            raise ArityMismatchError(f"output of length {output.size} for part {list(part)}")
        merged[list(part)] = output

    total = merged.sum()
    if total <= 0.0:
        return np.full(partition.num_classes, 1.0 / partition.num_classes)
    return merged / total


def _part_scores(model_set: SclModelSet, features: np.ndarray) -> list[np.ndarray]:
    return [
        np.asarray(model.scores(features), dtype=np.float64) for model in model_set.part_models
    ]


def _merged_scores(model_set: SclModelSet, part_scores: list[np.ndarray]) -> np.ndarray:
    """Unnormalised concatenation, its argmax equals that of the normalised scores."""
    merged = np.zeros((part_scores[0].shape[0], model_set.partition.num_classes))
    for part, scores in zip(model_set.partition.parts, part_scores):
        merged[:, list(part)] = scores
    return merged


def _routed_correct(
    model_set: SclModelSet, part_scores: list[np.ndarray], labels: np.ndarray
) -> np.ndarray:
    """Per example, whether the part model owning the true class predicts it within its part."""
    lookup = model_set.partition.part_lookup
    owners = lookup[labels]
    correct = np.zeros(len(labels), dtype=bool)
    for part_index, part in enumerate(model_set.partition.parts):
        rows = np.flatnonzero(owners == part_index)
        if not len(rows):
            continue
        local = np.argmax(part_scores[part_index][rows], axis=1)
        correct[rows] = np.asarray(part)[local] == labels[rows]
    return correct


def _check_labels(model_set: SclModelSet, features: np.ndarray, labels: np.ndarray) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    if len(labels) == 0:
        raise ConfigError("SCL evaluation needs at least one test example")
    if len(labels) != len(features):
        raise ConfigError(f"{len(labels)} labels for {len(features)} test rows")
    if labels.min() < 0 or labels.max() >= model_set.partition.num_classes:
        raise ConfigError(f"test labels outside 0..{model_set.partition.num_classes - 1}")
    return labels


def routed_accuracy_bound(
    model_set: SclModelSet, test_features: np.ndarray, test_labels: np.ndarray
) -> float:
    """Pooled accuracy when each example is scored only by the part model owning its true class."""
    labels = _check_labels(model_set, test_features, test_labels)
    part_scores = _part_scores(model_set, test_features)
    return float(np.mean(_routed_correct(model_set, part_scores, labels)))


def scl_accuracy(
    model_set: SclModelSet,
    test_features: np.ndarray,
    test_labels: np.ndarray,
    loss: Loss | None = None,
) -> SclResult:
    """Accuracy of the concatenated part models, with the routed bound and per-part accuracies.

    Args:
        model_set: the partition and its part models
        test_features: test feature matrix shared by every part model
        test_labels: global class labels of the test rows
        loss: optional `loss(predicted, true)`; its mean is reported as `scl_risk`,
            the indicator loss by default

    Returns:
        The `SclResult` for this partition
    """
    labels = _check_labels(model_set, test_features, test_labels)
    part_scores = _part_scores(model_set, test_features)

    predicted = np.argmax(_merged_scores(model_set, part_scores), axis=1)
    correct = predicted == labels
    routed = _routed_correct(model_set, part_scores, labels)

    owners = model_set.partition.part_lookup[labels]
    per_part: list[float | None] = []
    for part_index in range(len(model_set.partition.parts)):
        rows = owners == part_index
        per_part.append(float(np.mean(routed[rows])) if rows.any() else None)

    loss = loss or indicator_loss
    risk = float(np.mean([loss(int(p), int(t)) for p, t in zip(predicted, labels)]))

    return SclResult(
        scl_accuracy=float(np.mean(correct)),
        routed_accuracy_bound=float(np.mean(routed)),
        per_part_accuracy=tuple(per_part),
        partition=model_set.partition,
        scl_risk=risk,
        num_examples=len(labels),
    )


def sample_partitions(
    n: int,
    count: int,
    min_part_size: int = 2,
    seed: int = 0,
    num_parts: int | None = None,
) -> list[SclPartition]:
    """Random partitions whose parts all hold at least `min_part_size` classes.

    Each draw shuffles the classes and cuts the shuffle at random points respecting the minimum
    size. With `num_parts` unset, the part count is itself drawn from 1..n // min_part_size.

    Raises:
        InfeasibleConstraintError: if no partition with the requested shape exists
    """
    if count < 1:
        raise ConfigError(f"count must be at least 1, got {count}")
    if min_part_size < 2:
        raise ConfigError(f"min_part_size must be at least 2, got {min_part_size}")
    if n < min_part_size:
        raise InfeasibleConstraintError(f"{n} classes cannot fill a part of {min_part_size}")
    if num_parts is not None and (num_parts < 1 or num_parts * min_part_size > n):
        raise InfeasibleConstraintError(
            f"{n} classes cannot form {num_parts} parts of at least {min_part_size}"
        )

    rng = np.random.default_rng(seed)
    partitions = []
    for _ in range(count):
        parts_count = num_parts or int(rng.integers(1, n // min_part_size + 1))
        order = rng.permutation(n)
        spare = n - parts_count * min_part_size
        cuts = np.sort(rng.choice(spare + parts_count - 1, size=parts_count - 1, replace=False))
        extras = np.diff(np.concatenate([[-1], cuts, [spare + parts_count - 1]])) - 1
        sizes = min_part_size + extras

        parts, start = [], 0
        for size in sizes:
            parts.append(order[start : start + size])
            start += size
        partitions.append(SclPartition(parts=tuple(tuple(p) for p in parts), num_classes=n))

    return partitions


def part_spec(
    part_size: int,
    part_spaces: list[list[list[int]]] | None = None,
    include_identity: bool = True,
    uneven: str = "error",
) -> FittedEnsembleSpec:
    """The fitted-ensemble spec used for one part, in part-local class indices.

    Configured `part_spaces` form a single sequel. Otherwise even parts of four or more classes
    use the default structured sequels, other parts of three or more one space per adjacent
    merged pair, and two-class parts the identity space alone.
    """
    class_set = ClassSet(num_classes=part_size)
    if part_spaces:
        sequel = Sequel(spaces=tuple(explicit_space(blocks, part_size) for blocks in part_spaces))
        check_sequel(sequel)
        return FittedEnsembleSpec(class_set, (sequel,), include_identity)

    if part_size >= 4 and part_size % 2 == 0:
        return FittedEnsembleSpec(class_set, tuple(default_sequels(part_size)), include_identity)
    if part_size >= 3:
        return FittedEnsembleSpec(class_set, (adjacent_merge_sequel(part_size),), include_identity)

    identity = explicit_space([[index] for index in range(part_size)], part_size)
    return FittedEnsembleSpec(class_set, (Sequel(spaces=(identity,)),), include_identity=False)


def run_scl_experiment(
    train: LabeledDataset,
    partition: SclPartition,
    builder: BuilderKind | str,
    train_config: TrainConfig,
    test: LabeledDataset,
    part_spaces: list[list[list[int]]] | None = None,
    include_identity: bool = True,
    num_ensembles: int = 1,
    loss: Loss | None = None,
) -> SclResult:
    """Trains one model per part on that part's classes and evaluates the merged model.

    Part labels are remapped to 0..|part|-1 in ascending original order. The `plain` builder
    trains `num_ensembles` classifiers per part and averages them; `fitted` builds
    `num_ensembles` fitted ensembles per part and aggregates them.

    Raises:
        ConfigError: if train and test disagree on the class count
        EmptyPartDataError: if a part has no training rows
    """
    if train.num_classes != test.num_classes or train.num_classes != partition.num_classes:
        raise ConfigError(
            f"train ({train.num_classes}), test ({test.num_classes}) and partition "
            f"({partition.num_classes}) class counts differ"
        )

    builder = BuilderKind(builder)
    models: list[PartModel] = []
    for part_index, part in enumerate(partition.parts):
        part_train = split_by_classes(train, part, relabel_dense=True)
        if len(part_train) == 0:
            raise EmptyPartDataError(f"part {list(part)} has no training rows")

        part_seed = int(
            np.random.SeedSequence([train_config.seed, part_index]).generate_state(1)[0]
        )
        logger.info(f"training {builder.value} part model for classes {list(part)}")
        if builder == BuilderKind.PLAIN:
            classifiers = build_conventional_ensemble(
                part_train, train_config, num_ensembles, part_seed
            )
            models.append(ConventionalEnsemble(classifiers))
        else:
            spec = part_spec(len(part), part_spaces, include_identity)
            ensembles = build_aggregate(part_train, spec, train_config, num_ensembles, part_seed)
            models.append(AggregateEnsemble(ensembles))

    return scl_accuracy(SclModelSet(partition, models), test.features, test.labels, loss=loss)


def summarize_scl(results: Sequence[SclResult]) -> dict[str, dict[str, float]]:
    """Mean and standard deviation of accuracy, bound and gap over repeated runs."""
    if not results:
        raise ConfigError("cannot summarise an empty list of SCL results")

    summary = {}
    for name in ["scl_accuracy", "routed_accuracy_bound", "gap"]:
        values = [getattr(result, name) for result in results]
        summary[name] = {"mean": float(np.mean(values)), "std": float(np.std(values))}
    summary["runs"] = {"count": len(results)}
    return summary
