#!/usr/bin/env python3
# Copyright 2024 Canonical Ltd.
# See LICENSE file for licensing details.

import logging
import time

import numpy as np

from core.models import SclPartition
from core.structured_config import BuilderKind, SyntheticSpec, TrainConfig
from managers.datasets import gen_gaussian_blobs, split_by_classes, train_test_split
from managers.rectifier import build_conventional_ensemble, conventional_ensemble_predict
from managers.scl import run_scl_experiment, sample_partitions

logger = logging.getLogger(__name__)


def blobs(num_classes: int, seed: int):
    spec = SyntheticSpec(
        num_classes=num_classes,
        dims=2,
        per_class_count=30,
        class_mean_scale=3.0,
        noise_sigma=1.0,
        seed=seed,
    )
    return train_test_split(gen_gaussian_blobs(spec), 0.3, seed)


def test_scl_accuracy_never_exceeds_routed_bound():
    """50 experiments over random class counts, partitions, builders and seeds."""
    rng = np.random.default_rng(77)
    start = time.perf_counter()
    gaps = []
    for experiment in range(50):
        num_classes = int(rng.integers(4, 9))
        seed = int(rng.integers(2**31))
        train, test = blobs(num_classes, seed)
        partition = sample_partitions(num_classes, 1, 2, seed)[0]
        builder = BuilderKind.FITTED if experiment % 2 else BuilderKind.PLAIN
        config = TrainConfig(epochs=3, batch_size=16, seed=seed)

        result = run_scl_experiment(train, partition, builder, config, test)

        assert result.scl_accuracy <= result.routed_accuracy_bound
        gaps.append(result.routed_accuracy_bound - result.scl_accuracy)

    elapsed = time.perf_counter() - start
    logger.info(f"mean gap {np.mean(gaps):.4f} over 50 experiments in {elapsed:.1f}s")
    assert elapsed < 60.0


def test_single_part_matches_plain_accuracy():
    """The trivial partition reproduces the conventional ensemble trained on all classes."""
    num_classes, seed = 5, 11
    train, test = blobs(num_classes, seed)
    partition = SclPartition(parts=(tuple(range(num_classes)),), num_classes=num_classes)
    config = TrainConfig(epochs=5, batch_size=16, seed=seed)

    result = run_scl_experiment(train, partition, BuilderKind.PLAIN, config, test)

    part_seed = int(np.random.SeedSequence([seed, 0]).generate_state(1)[0])
    part_train = split_by_classes(train, range(num_classes), relabel_dense=True)
    classifiers = build_conventional_ensemble(part_train, config, 1, part_seed)
    predicted = np.argmax(conventional_ensemble_predict(classifiers, test.features), axis=1)
    plain_accuracy = float(np.mean(predicted == test.labels))

    assert result.scl_accuracy == plain_accuracy
    assert result.scl_accuracy == result.routed_accuracy_bound
