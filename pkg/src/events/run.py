#!/usr/bin/env python3
# Copyright 2024 Canonical Ltd.
# See LICENSE file for licensing details.

"""Handler for the `run` command: fitted-ensemble training or ingestion, then OOD evaluation."""

import argparse
import logging
from typing import TYPE_CHECKING, Callable

import numpy as np

from core.exceptions import ConfigError
from core.models import (
    ClassSet,
    ConfidenceSample,
    FittedEnsembleSpec,
    LabeledDataset,
    MetricsReport,
    PredictionBundle,
)
from core.structured_config import ExperimentConfig
from literals import IDENTITY_KEY, STAGES, Status
from managers.config import derive_seed
from managers.datasets import (
    gen_artificial_ood,
    gen_gaussian_blobs,
    hold_out_classes,
    load_csv_dataset,
    train_test_split,
)
from managers.metrics import evaluate_ood, render_table
from managers.rectifier import (
    FittedEnsemble,
    aggregate_ensembles,
    averaged_member_predictions,
    build_aggregate,
    build_conventional_ensemble,
    constraint_violations,
    conventional_ensemble_predict,
    rectify,
    sequel_predict,
)
from managers.spaces import default_sequels

if TYPE_CHECKING:
    from cli import FittedEnsembleToolkit

logger = logging.getLogger(__name__)

HELD_OUT_SOURCE = "held_out"

Scorer = Callable[[np.ndarray], np.ndarray]


def _confidences(scores: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Argmax class, lowest index on ties, and the raw maximum score per row."""
    predicted = np.argmax(scores, axis=1)
    return predicted, np.clip(scores[np.arange(len(predicted)), predicted], 0.0, 1.0)


def evaluate_models(
    in_scores: dict[str, np.ndarray],
    out_scores: dict[str, dict[str, np.ndarray]],
    labels: np.ndarray | None,
    num_bins: int,
    tpr_target: float,
) -> dict[str, dict[str, MetricsReport]]:
    """Metrics per OOD source and model, from score matrices of in- and out-of-distribution data.

    Args:
        in_scores: in-distribution score matrix per model
        out_scores: per OOD source, the score matrix per model
        labels: true in-distribution classes, or None when unknown
        num_bins: histogram bin count
        tpr_target: true positive rate the FPR is read at
    """
    results: dict[str, dict[str, MetricsReport]] = {}
    for source, models in out_scores.items():
        results[source] = {}
        for model, scores in models.items():
            predicted, in_conf = _confidences(in_scores[model])
            _, out_conf = _confidences(scores)
            samples = [
                ConfidenceSample(
                    confidence=float(confidence),
                    in_distribution=True,
                    correct=None if labels is None else bool(p == y),
                )
                for confidence, p, y in zip(
                    in_conf, predicted, labels if labels is not None else predicted
                )
            ]
            results[source][model] = evaluate_ood(in_conf, out_conf, num_bins, tpr_target, samples)
            logger.info(
                f"{model} vs {source}: auroc {results[source][model].auroc:.4f}, "
                f"mean OOD confidence {float(np.mean(out_conf)):.4f}"
            )

    return results


class RunHandler:
    """Trains or ingests a fitted ensemble and evaluates it against OOD sources."""

    def __init__(self, toolkit):
        self.toolkit: "FittedEnsembleToolkit" = toolkit

    def register(self, subparsers, parents: list[argparse.ArgumentParser]) -> None:
        """Adds the `run` sub-command."""
        parser = subparsers.add_parser(
            "run", parents=parents, help="build fitted ensembles and evaluate OOD metrics"
        )
        parser.add_argument("config", help="experiment config file")
        parser.set_defaults(handler=self._on_run)

    # --- DATA ---

    def load_data(
        self, config: ExperimentConfig, seeds: dict[str, int]
    ) -> tuple[LabeledDataset, LabeledDataset, dict[str, np.ndarray]]:
        """Train split, test split and OOD features per source."""
        source = config.dataset
        if source.synthetic is not None:
            spec = source.synthetic
            if spec.seed is None:
                spec = spec.copy(update={"seed": seeds["data"]})
            dataset = gen_gaussian_blobs(spec)
            test = None
        else:
            dataset = load_csv_dataset(str(source.train_csv))
            test = None
            if source.test_csv:
                test = load_csv_dataset(source.test_csv, dataset.num_classes)

        ood: dict[str, np.ndarray] = {}
        if config.ood.held_out_classes:
            dataset, ood[HELD_OUT_SOURCE] = hold_out_classes(dataset, config.ood.held_out_classes)
            if test is not None:
                test, held_test = hold_out_classes(test, config.ood.held_out_classes)
                ood[HELD_OUT_SOURCE] = held_test

        if test is None:
            train, test = train_test_split(dataset, config.test_fraction, seeds["data"])
        else:
            train = dataset

        scale = config.ood.artificial_scale or float(np.abs(train.features).max())
        for kind in config.ood.artificial:
            ood[kind.value] = gen_artificial_ood(
                kind,
                config.ood.artificial_count,
                train.dims,
                scale,
                derive_seed(seeds["data"], kind.value),
            )

        logger.info(
            f"{len(train)} train and {len(test)} test rows over {train.num_classes} classes, "
            f"OOD sources {list(ood)}"
        )
        return train, test, ood

    def load_spec(self, config: ExperimentConfig, num_classes: int) -> FittedEnsembleSpec:
        """The configured spaces file, or the default structured sequels."""
        if config.spaces:
            spec = self.toolkit.config_manager.load_spaces(config.spaces, config.include_identity)
        else:
            spec = FittedEnsembleSpec(
                class_set=ClassSet(num_classes=num_classes),
                sequels=tuple(default_sequels(num_classes, config.uneven)),  # type: ignore
                include_identity=config.include_identity is not False,
            )

        if spec.num_classes != num_classes:
            raise ConfigError(
                f"spaces over {spec.num_classes} classes for data with {num_classes} classes"
            )
        return spec

    # --- PIPELINES ---

    def _trained_pipeline(
        self, config: ExperimentConfig, seeds: dict[str, int]
    ) -> dict[str, dict[str, MetricsReport]]:
        with self.toolkit.stage("data"):
            train, test, ood = self.load_data(config, seeds)

        with self.toolkit.stage("spaces"):
            spec = self.load_spec(config, train.num_classes)

        with self.toolkit.stage("train"):
            train_config = config.train.copy(update={"seed": seeds["train"]})
            ensembles = build_aggregate(
                train, spec, train_config, config.num_ensembles, seeds["train"]
            )
            conventional = build_conventional_ensemble(
                train, train_config, config.num_ensembles, derive_seed(seeds["train"], "ensemble")
            )

        with self.toolkit.stage("predict"):
            scorers = self.scorers(ensembles, conventional)
            in_scores = {model: scorer(test.features) for model, scorer in scorers.items()}
            out_scores = {
                source: {model: scorer(features) for model, scorer in scorers.items()}
                for source, features in ood.items()
            }
            self.check_constraints(ensembles, test.features)

        with self.toolkit.stage("metrics"):
            return evaluate_models(
                in_scores, out_scores, test.labels, config.num_bins, config.tpr_target
            )

    @staticmethod
    def scorers(ensembles: list[FittedEnsemble], conventional: list) -> dict[str, Scorer]:
        """Reported models: identity member, sequel 0 alone, fitted ensemble and plain baseline."""
        scorers: dict[str, Scorer] = {}
        identity = ensembles[0].identity_classifier
        if identity is not None:
            scorers[IDENTITY_KEY] = identity.predict_proba
        scorers["sequel"] = lambda features: sequel_predict(ensembles[0], features, 0).values
        scorers["fitted"] = lambda features: aggregate_ensembles(ensembles, features).values
        scorers["ensemble"] = lambda features: conventional_ensemble_predict(
            conventional, features
        )
        return scorers

    @staticmethod
    def check_constraints(ensembles: list[FittedEnsemble], features: np.ndarray) -> int:
        """Counts constraint violations of the fitted scores, logging any as an error."""
        members = averaged_member_predictions(ensembles, features)
        scores = rectify(members, ensembles[0].num_classes)
        violations = constraint_violations(scores, members)
        if violations:
            logger.error(f"{violations} rectified scores exceed a member's block probability")
        else:
            logger.debug(f"all constraints hold over {len(features)} examples")
        return violations

    def _ingested_pipeline(self, config: ExperimentConfig) -> dict[str, dict[str, MetricsReport]]:
        with self.toolkit.stage("data"):
            bundle = self.toolkit.config_manager.load_predictions(str(config.dataset.predictions))

        with self.toolkit.stage("predict"):
            in_scores, out_scores = self.bundle_scores(bundle)

        with self.toolkit.stage("metrics"):
            return evaluate_models(
                in_scores, out_scores, bundle.labels, config.num_bins, config.tpr_target
            )

    @staticmethod
    def bundle_scores(
        bundle: PredictionBundle,
    ) -> tuple[dict[str, np.ndarray], dict[str, dict[str, np.ndarray]]]:
        """Rectified scores of ingested members, plus the identity member's own probabilities."""
        n = bundle.num_classes
        in_scores = {"fitted": rectify([m.in_distribution for m in bundle.members], n).values}
        out_scores = {
            source: {"fitted": rectify([m.ood[source] for m in bundle.members], n).values}
            for source in bundle.ood_sources
        }

        identity = bundle.identity_member
        if identity is not None:
            in_scores[IDENTITY_KEY] = identity.in_distribution.matrix
            for source in bundle.ood_sources:
                identity_scores = {IDENTITY_KEY: identity.ood[source].matrix}
                out_scores[source] = {**identity_scores, **out_scores[source]}

        return in_scores, out_scores

    def _on_run(self, args: argparse.Namespace) -> Status:
        """Handler for the `run` command."""
        with self.toolkit.stage("config"):
            config = self.toolkit.config_manager.load_experiment(args.config)
            if args.seed is not None:
                config.seed = args.seed
            self.toolkit.set_output(args.out or config.output_dir or ".")

        seeds = {stage: derive_seed(config.seed, stage) for stage in STAGES}
        if config.dataset.predictions is not None:
            results = self._ingested_pipeline(config)
        else:
            results = self._trained_pipeline(config, seeds)

        with self.toolkit.stage("report"):
            self.toolkit.report_manager.write_metrics(results)
            self.toolkit.report_manager.write_manifest("run", config, config.seed, seeds)
            if args.pretty:
                self.toolkit.echo(
                    "\n".join(
                        f"OOD source: {source}\n{render_table(columns)}"
                        for source, columns in results.items()
                    )
                )

        return Status.ACTIVE
