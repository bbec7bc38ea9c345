#!/usr/bin/env python3
# Copyright 2024 Canonical Ltd.
# See LICENSE file for licensing details.

"""Probability rectification and fitted-ensemble construction, inference and aggregation."""

import logging

import numpy as np

from core.exceptions import (
    ConfigError,
    EmptyMemberListError,
    ShapeMismatchError,
    SpecMismatchError,
)
from core.models import (
    FittedEnsembleSpec,
    LabeledDataset,
    MemberKey,
    MemberPrediction,
    RectifiedScores,
    SuperclassSpace,
)
from core.structured_config import TrainConfig
from managers.spaces import relabel, validate_space
from managers.trainer import Classifier, train

logger = logging.getLogger(__name__)


def _member_seed(seed: int, index: int) -> int:
    """Independent RNG stream for member or ensemble `index` under a master `seed`."""
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def rectify(member_predictions: list[MemberPrediction], n: int) -> RectifiedScores:
    """Caps every class probability by each member's probability for the block containing it.

    Scores start at 1 and take the minimum over members; the result is not renormalised.

    Args:
        member_predictions: one prediction matrix per member, all with the same row count
        n: the original class count

    Returns:
        The `RectifiedScores`, shape (rows, n)

    Raises:
        EmptyMemberListError: if no member is given
        ShapeMismatchError: if members disagree on row count or class set size
    """
    if not member_predictions:
        raise EmptyMemberListError("rectification needs at least one member")

    rows = {member.rows for member in member_predictions}
    if len(rows) != 1:
        raise ShapeMismatchError(f"member predictions disagree on row count: {sorted(rows)}")

    scores = np.ones((rows.pop(), n), dtype=np.float64)
    for member in member_predictions:
        if member.space.class_set_size != n:
            raise ShapeMismatchError(
                f"member space over {member.space.class_set_size} classes, expected {n}"
            )
        validate_space(member.space)
        np.minimum(scores, member.matrix[:, member.space.block_lookup], out=scores)

    return RectifiedScores(values=scores)


def predict(scores: RectifiedScores) -> tuple[np.ndarray, np.ndarray]:
    """Per-example predicted class and raw confidence.

    The class is the argmax, ties going to the lowest index; the confidence is the maximum
    rectified value, without renormalisation.
    """
    values = scores.values
    if values.shape[0] == 0:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.float64)

    classes = np.argmax(values, axis=1)
    return classes, values[np.arange(len(classes)), classes]


def constraint_violations(
    scores: RectifiedScores, member_predictions: list[MemberPrediction]
) -> int:
    """Counts (example, class, member) triples whose score exceeds the member's block."""
    violations = 0
    for member in member_predictions:
        bounds = member.matrix[:, member.space.block_lookup]
        violations += int(np.count_nonzero(scores.values > bounds))
    return violations


def normalize_scores(scores: RectifiedScores | np.ndarray) -> np.ndarray:
    """Divides each row by its sum; all-zero rows become uniform."""
    values = scores.values if isinstance(scores, RectifiedScores) else np.asarray(scores, float)
    totals = values.sum(axis=1, keepdims=True)
    uniform = np.full_like(values, 1.0 / max(values.shape[1], 1))
    with np.errstate(invalid="ignore", divide="ignore"):
        normalized = values / totals
    return np.where(totals > 0.0, normalized, uniform)


class FittedEnsemble:
    """Trained member-classifiers, one per superclass space of a spec."""

    def __init__(
        self,
        spec: FittedEnsembleSpec,
        members: list[tuple[MemberKey, SuperclassSpace, Classifier]],
    ):
        expected = [key for key, _ in spec.member_spaces]
        if [key for key, _, _ in members] != expected:
            raise ShapeMismatchError(
                f"ensemble members {[key for key, _, _ in members]} do not match spec {expected}"
            )

        self.spec = spec
        self.members = members

    def __len__(self) -> int:
        return len(self.members)

    @property
    def num_classes(self) -> int:
        """Original class count."""
        return self.spec.num_classes

    @property
    def num_outputs(self) -> int:
        """Width of the rectified scores."""
        return self.spec.num_classes

    @property
    def identity_classifier(self) -> Classifier | None:
        """The member trained on the original classes, if the identity space is included."""
        for _, space, classifier in self.members:
            if space.is_identity:
                return classifier
        return None

    def member_predictions(
        self, features: np.ndarray, keys: list[MemberKey] | None = None
    ) -> list[MemberPrediction]:
        """Runs every member, or only those in `keys`, over `features`."""
        return [
            MemberPrediction(space=space, matrix=classifier.predict_proba(features))
            for key, space, classifier in self.members
            if keys is None or key in keys
        ]

    def scores(self, features: np.ndarray) -> np.ndarray:
        """Rectified score matrix, as fed to SCL concatenation."""
        return ensemble_predict(self, features).values


def build_fitted_ensemble(
    dataset: LabeledDataset, spec: FittedEnsembleSpec, train_config: TrainConfig
) -> FittedEnsemble:
    """Trains one member per space of every sequel, then the identity member when configured.

    Member `i` trains with a seed derived from `(train_config.seed, i)`.

    Raises:
        ConfigError: if the dataset and spec disagree on the class count
    """
    if dataset.num_classes != spec.num_classes:
        raise ConfigError(
            f"dataset has {dataset.num_classes} classes, spec has {spec.num_classes}"
        )

    members = []
    for index, (key, space) in enumerate(spec.member_spaces):
        validate_space(space)
        member_data = LabeledDataset(
            features=dataset.features,
            labels=relabel(dataset.labels, space),
            num_classes=space.num_blocks,
        )
        member_config = train_config.copy(update={"seed": _member_seed(train_config.seed, index)})
        logger.info(f"training member {key} over {space.num_blocks} superclasses {space}")
        members.append((key, space, train(member_data, member_config)))

    return FittedEnsemble(spec=spec, members=members)


def ensemble_predict(ensemble: FittedEnsemble, features: np.ndarray) -> RectifiedScores:
    """Runs every member over `features`, then rectifies."""
    return rectify(ensemble.member_predictions(features), ensemble.num_classes)


def sequel_predict(
    ensemble: FittedEnsemble, features: np.ndarray, sequel_index: int
) -> RectifiedScores:
    """Rectification restricted to the members of one sequel."""
    if not 0 <= sequel_index < len(ensemble.spec.sequels):
        raise ConfigError(
            f"sequel {sequel_index} out of range for {len(ensemble.spec.sequels)} sequels"
        )

    keys: list[MemberKey] = [
        (sequel_index, space_index)
        for space_index in range(len(ensemble.spec.sequels[sequel_index].spaces))
    ]
    return rectify(ensemble.member_predictions(features, keys=keys), ensemble.num_classes)


def averaged_member_predictions(
    ensembles: list[FittedEnsemble], features: np.ndarray
) -> list[MemberPrediction]:
    """Uniform average of corresponding member predictions across ensembles.

    Raises:
        SpecMismatchError: if the ensembles were built from different specs
    """
    if not ensembles:
        raise EmptyMemberListError("aggregation needs at least one ensemble")

    spec = ensembles[0].spec
    for ensemble in ensembles[1:]:
        if ensemble.spec != spec:
            raise SpecMismatchError("aggregated ensembles must share an identical spec")

    per_ensemble = [ensemble.member_predictions(features) for ensemble in ensembles]
    averaged = []
    for position, (_, space) in enumerate(spec.member_spaces):
        stacked = np.stack([predictions[position].matrix for predictions in per_ensemble])
        averaged.append(MemberPrediction(space=space, matrix=np.mean(stacked, axis=0)))

    return averaged


def aggregate_ensembles(ensembles: list[FittedEnsemble], features: np.ndarray) -> RectifiedScores:
    """Averages corresponding members across ensembles uniformly, then rectifies once."""
    averaged = averaged_member_predictions(ensembles, features)
    return rectify(averaged, ensembles[0].num_classes)


def build_aggregate(
    dataset: LabeledDataset,
    spec: FittedEnsembleSpec,
    train_config: TrainConfig,
    count: int,
    seed: int,
) -> list[FittedEnsemble]:
    """Trains `count` fitted ensembles over the same spec, ensemble `k` seeded from `(seed, k)`."""
    if count < 1:
        raise ConfigError(f"count must be at least 1, got {count}")

    ensembles = []
    for index in range(count):
        config = train_config.copy(update={"seed": _member_seed(seed, index)})
        logger.info(f"building fitted ensemble {index + 1}/{count}")
        ensembles.append(build_fitted_ensemble(dataset, spec, config))

    return ensembles


def conventional_ensemble_predict(
    classifiers: list[Classifier], features: np.ndarray
) -> np.ndarray:
    """Uniform average of plain classifiers' probabilities."""
    if not classifiers:
        raise EmptyMemberListError("a conventional ensemble needs at least one classifier")

    return np.mean(np.stack([c.predict_proba(features) for c in classifiers]), axis=0)


def build_conventional_ensemble(
    dataset: LabeledDataset, train_config: TrainConfig, count: int, seed: int
) -> list[Classifier]:
    """Trains `count` plain classifiers on the original classes, `k` seeded from `(seed, k)`."""
    return [
        train(dataset, train_config.copy(update={"seed": _member_seed(seed, index)}))
        for index in range(count)
    ]


class AggregateEnsemble:
    """Several fitted ensembles over one spec, scored through `aggregate_ensembles`."""

    def __init__(self, ensembles: list[FittedEnsemble]):
        self.ensembles = ensembles

    @property
    def num_outputs(self) -> int:
        """Width of the rectified scores."""
        return self.ensembles[0].num_classes

    def scores(self, features: np.ndarray) -> np.ndarray:
        """Rectified scores of the averaged members."""
        return aggregate_ensembles(self.ensembles, features).values


class ConventionalEnsemble:
    """Plain classifiers scored by their averaged probabilities."""

    def __init__(self, classifiers: list[Classifier]):
        self.classifiers = classifiers

    @property
    def num_outputs(self) -> int:
        """Number of classes predicted."""
        return self.classifiers[0].num_outputs

    def scores(self, features: np.ndarray) -> np.ndarray:
        """Averaged probability matrix."""
        return conventional_ensemble_predict(self.classifiers, features)
