#!/usr/bin/env python3
# Copyright 2024 Canonical Ltd.
# See LICENSE file for licensing details.

"""Collection of domain objects for class spaces, datasets, predictions and reports."""

import logging
from dataclasses import dataclass, field
from typing import Any, Iterable

import numpy as np

from core.exceptions import (
    ConfigError,
    CoverageError,
    OutOfRangeError,
    OverlapError,
    ShapeMismatchError,
    UnknownClassError,
)
from literals import IDENTITY_KEY

logger = logging.getLogger(__name__)

MemberKey = tuple[int, int] | str


def _canonical_blocks(blocks: Iterable[Iterable[int]]) -> tuple[tuple[int, ...], ...]:
    """Sorts classes inside each block, then blocks by their minimum class index."""
    sorted_blocks = [tuple(sorted(int(index) for index in block)) for block in blocks]
    sorted_blocks.sort(key=lambda block: (block[0] if block else -1, len(block)))
    return tuple(sorted_blocks)


@dataclass(frozen=True)
class ClassSet:
    """The original set of classes of a classification problem."""

    num_classes: int
    names: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.num_classes < 2:
            raise ConfigError(f"a class set needs at least 2 classes, got {self.num_classes}")

        if self.names is None:
            return

        object.__setattr__(self, "names", tuple(self.names))
        if len(self.names) != self.num_classes:
            raise ConfigError(
                f"{len(self.names)} class names given for {self.num_classes} classes"
            )
        if len(set(self.names)) != len(self.names):
            raise ConfigError("class names must be unique")


@dataclass(frozen=True)
class SuperclassSpace:
    """An ordered collection of blocks of class indices.

    Construction does not validate the partition property, so invalid spaces can be built
    and passed to `validate_space`. Use `SuperclassSpace.canonical` to get the canonical
    block order.
    """

    blocks: tuple[tuple[int, ...], ...]
    class_set_size: int

    @classmethod
    def canonical(cls, blocks: Iterable[Iterable[int]], class_set_size: int) -> "SuperclassSpace":
        """Builds a space with blocks in canonical order."""
        return cls(blocks=_canonical_blocks(blocks), class_set_size=int(class_set_size))

    @property
    def num_blocks(self) -> int:
        """Number of superclasses in the space."""
        return len(self.blocks)

    @property
    def is_identity(self) -> bool:
        """True for the discrete partition with blocks in index order."""
        return self.blocks == tuple((index,) for index in range(self.class_set_size))

    @property
    def block_lookup(self) -> np.ndarray:
        """Array mapping each class index to the index of its block.

        Only meaningful for valid spaces, classes in no block map to -1.
        """
        lookup = np.full(self.class_set_size, -1, dtype=np.int64)
        for block_index, block in enumerate(self.blocks):
            for class_index in block:
                if 0 <= class_index < self.class_set_size:
                    lookup[class_index] = block_index
        return lookup

    def to_lists(self) -> list[list[int]]:
        """Plain nested lists, as written to space files."""
        return [list(block) for block in self.blocks]

    def __str__(self) -> str:
        return "{" + ",".join("{" + ",".join(map(str, b)) + "}" for b in self.blocks) + "}"


@dataclass(frozen=True)
class Sequel:
    """A collection of superclass spaces over the same class set."""

    spaces: tuple[SuperclassSpace, ...]

    def __post_init__(self):
        object.__setattr__(self, "spaces", tuple(self.spaces))
        if not self.spaces:
            raise ConfigError("a sequel needs at least one superclass space")

        sizes = {space.class_set_size for space in self.spaces}
        if len(sizes) != 1:
            raise ConfigError(f"sequel spaces disagree on the class set size: {sorted(sizes)}")

    @property
    def class_set_size(self) -> int:
        """Size of the shared class set."""
        return self.spaces[0].class_set_size

    @property
    def sizes(self) -> list[int]:
        """Block count of each space."""
        return [space.num_blocks for space in self.spaces]


@dataclass(frozen=True)
class FittedEnsembleSpec:
    """The sequels a fitted ensemble is built from."""

    class_set: ClassSet
    sequels: tuple[Sequel, ...]
    include_identity: bool = True

    def __post_init__(self):
        object.__setattr__(self, "sequels", tuple(self.sequels))
        if not self.sequels:
            raise ConfigError("a fitted ensemble needs at least one sequel")

        for sequel in self.sequels:
            if sequel.class_set_size != self.class_set.num_classes:
                raise ConfigError(
                    f"sequel over {sequel.class_set_size} classes in a spec over "
                    f"{self.class_set.num_classes} classes"
                )

    @property
    def num_classes(self) -> int:
        """Size of the original class set."""
        return self.class_set.num_classes

    @property
    def member_spaces(self) -> list[tuple[MemberKey, SuperclassSpace]]:
        """Member keys and spaces, sequel-major, space-minor, identity last."""
        members: list[tuple[MemberKey, SuperclassSpace]] = [
            ((sequel_index, space_index), space)
            for sequel_index, sequel in enumerate(self.sequels)
            for space_index, space in enumerate(sequel.spaces)
        ]
        if self.include_identity:
            identity = SuperclassSpace(
                blocks=tuple((index,) for index in range(self.num_classes)),
                class_set_size=self.num_classes,
            )
            members.append((IDENTITY_KEY, identity))
        return members

    @property
    def num_members(self) -> int:
        """Total member count, identity included when configured."""
        return sum(len(sequel.spaces) for sequel in self.sequels) + int(self.include_identity)


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    """A feature matrix with one class label per row."""

    features: np.ndarray
    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        features = np.asarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if features.ndim == 1 and features.size == 0:
            features = features.reshape(0, 0)
        if features.ndim != 2:
            raise ShapeMismatchError(f"features must be a matrix, got {features.ndim} dims")
        if labels.ndim != 1 or len(labels) != len(features):
            raise ShapeMismatchError(
                f"{len(labels)} labels given for {len(features)} feature rows"
            )
        if not np.all(np.isfinite(features)):
            raise ConfigError("features contain NaN or infinite values")
        if len(labels) and (labels.min() < 0 or labels.max() >= self.num_classes):
            bad = sorted({int(label) for label in labels if not 0 <= label < self.num_classes})
            raise UnknownClassError(f"labels {bad} outside 0..{self.num_classes - 1}")

        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def dims(self) -> int:
        """Feature dimension."""
        return self.features.shape[1]

    @property
    def classes_present(self) -> list[int]:
        """Distinct labels appearing in the dataset."""
        return sorted({int(label) for label in self.labels})


def row_stochastic_violations(values: np.ndarray, tolerance: float) -> list[int]:
    """Row indices whose entries leave [0, 1] or whose sum is off by more than `tolerance`."""
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        return []
    bad_sum = np.abs(values.sum(axis=1) - 1.0) > tolerance
    bad_range = np.any((values < 0.0) | (values > 1.0 + tolerance), axis=1)
    return [int(index) for index in np.flatnonzero(bad_sum | bad_range)]


@dataclass(frozen=True, eq=False)
class MemberPrediction:
    """A member's prediction matrix, bound to the space it predicts over."""

    space: SuperclassSpace
    matrix: np.ndarray

    def __post_init__(self):
        matrix = np.asarray(self.matrix, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[1] != self.space.num_blocks:
            raise ShapeMismatchError(
                f"matrix of shape {matrix.shape} for a space with {self.space.num_blocks} blocks"
            )
        object.__setattr__(self, "matrix", matrix)

    @property
    def rows(self) -> int:
        """Number of examples."""
        return self.matrix.shape[0]


@dataclass(frozen=True, eq=False)
class RectifiedScores:
    """Unnormalised class scores returned by probability rectification."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise ShapeMismatchError(f"scores must be a matrix, got {values.ndim} dims")
        if values.size and (values.min() < 0.0 or values.max() > 1.0):
            raise OutOfRangeError("rectified scores must lie in [0, 1]")
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def num_classes(self) -> int:
        """Original class count."""
        return self.values.shape[1]


@dataclass(frozen=True)
class SclPartition:
    """A partition of the class set whose parts all hold at least two classes."""

    parts: tuple[tuple[int, ...], ...]
    num_classes: int

    def __post_init__(self):
        parts = _canonical_blocks(self.parts)
        object.__setattr__(self, "parts", parts)

        if any(len(part) < 2 for part in parts):
            raise ConfigError(
                f"every part needs at least 2 classes, got {[list(p) for p in parts]}"
            )

        seen: set[int] = set()
        for part in parts:
            for class_index in part:
                if class_index in seen:
                    raise OverlapError(class_index)
                seen.add(class_index)

        expected = set(range(self.num_classes))
        if seen != expected:
            raise CoverageError(sorted(expected - seen), sorted(seen - expected))

    @property
    def part_lookup(self) -> np.ndarray:
        """Array mapping each class index to the index of its part."""
        lookup = np.empty(self.num_classes, dtype=np.int64)
        for part_index, part in enumerate(self.parts):
            lookup[list(part)] = part_index
        return lookup

    def to_lists(self) -> list[list[int]]:
        """Plain nested lists, as echoed in reports."""
        return [list(part) for part in self.parts]


@dataclass(frozen=True)
class SclResult:
    """Separable-risk report for one partition."""

    scl_accuracy: float
    routed_accuracy_bound: float
    per_part_accuracy: tuple[float | None, ...]
    partition: SclPartition
    scl_risk: float
    num_examples: int

    @property
    def gap(self) -> float:
        """Accuracy lost to cross-part competition."""
        return self.routed_accuracy_bound - self.scl_accuracy

    def to_dict(self) -> dict[str, Any]:
        """Report form of the result."""
        return {
            "scl_accuracy": self.scl_accuracy,
            "routed_accuracy_bound": self.routed_accuracy_bound,
            "gap": self.gap,
            "scl_risk": self.scl_risk,
            "per_part_accuracy": list(self.per_part_accuracy),
            "num_examples": self.num_examples,
            "partition": self.partition.to_lists(),
        }


@dataclass(frozen=True)
class ConfidenceSample:
    """The confidence of one prediction, tagged with its origin."""

    confidence: float
    in_distribution: bool
    correct: bool | None = None

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise OutOfRangeError(f"confidence {self.confidence} outside [0, 1]")
        if self.correct is not None and not self.in_distribution:
            raise ConfigError("correctness is only defined for in-distribution samples")


@dataclass(frozen=True)
class MeanStd:
    """Mean and standard deviation of a group, None when the group is empty."""

    mean: float | None
    std: float | None
    count: int

    @property
    def defined(self) -> bool:
        """Whether the group held any values."""
        return self.count > 0


@dataclass
class MetricsReport:
    """OOD detection metrics, histograms and confidence statistics for one model."""

    fpr_at_95_tpr: float | None = None
    auroc: float | None = None
    detection_error: float | None = None
    histogram_in: list[int] = field(default_factory=list)
    histogram_out: list[int] = field(default_factory=list)
    avg_miss_conf: MeanStd | None = None
    avg_correct_conf: MeanStd | None = None
    avg_total_conf: MeanStd | None = None
    accuracy: float | None = None
    num_in: int = 0
    num_out: int = 0


@dataclass(frozen=True, eq=False)
class BundleMember:
    """An externally produced member: its space and its prediction matrices."""

    space: SuperclassSpace
    in_distribution: MemberPrediction
    ood: dict[str, MemberPrediction]


@dataclass(frozen=True, eq=False)
class PredictionBundle:
    """Prediction matrices ingested through a sidecar file instead of trained members."""

    num_classes: int
    members: tuple[BundleMember, ...]
    labels: np.ndarray | None = None

    @property
    def ood_sources(self) -> list[str]:
        """OOD source names, in sidecar order."""
        return list(self.members[0].ood)

    @property
    def identity_member(self) -> BundleMember | None:
        """The member predicting over the original classes, if any."""
        for member in self.members:
            if member.space.is_identity:
                return member
        return None
