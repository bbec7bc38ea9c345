#!/usr/bin/env python3
# Copyright 2024 Canonical Ltd.
# See LICENSE file for licensing details.

import numpy as np

from managers.trainer import ClassifierParams, cross_entropy_and_gradients

STEP = 1e-5


def numeric_gradients(params: ClassifierParams, features, labels):
    """Central differences over every weight and bias."""

    def loss(weights, biases) -> float:
        perturbed = ClassifierParams(params.layer_sizes, tuple(weights), tuple(biases))
        return cross_entropy_and_gradients(perturbed, features, labels)[0]

    arrays = list(params.weights) + list(params.biases)
    count = len(params.weights)
    gradients = []
    for position, array in enumerate(arrays):
        numeric = np.zeros_like(array)
        for index in np.ndindex(array.shape):
            plus = [a.copy() for a in arrays]
            minus = [a.copy() for a in arrays]
            plus[position][index] += STEP
            minus[position][index] -= STEP
            numeric[index] = (
                loss(plus[:count], plus[count:]) - loss(minus[:count], minus[count:])
            ) / (2 * STEP)
        gradients.append(numeric)
    return gradients[:count], gradients[count:]


def test_gradients_match_finite_differences():
    """100 random parameter and batch draws, linear and one-hidden-layer models."""
    rng = np.random.default_rng(6)
    for draw in range(100):
        inputs = int(rng.integers(1, 5))
        outputs = int(rng.integers(2, 5))
        hidden = [int(rng.integers(2, 5))] if draw % 2 else []
        layer_sizes = [inputs] + hidden + [outputs]
        params = ClassifierParams.glorot(layer_sizes, rng)
        rows = int(rng.integers(1, 9))
        features = rng.normal(size=(rows, inputs))
        while hidden and np.abs(features @ params.weights[0]).min() < 1e-3:
            features = rng.normal(size=(rows, inputs))
        labels = rng.integers(0, outputs, size=rows)

        _, weight_grads, bias_grads = cross_entropy_and_gradients(params, features, labels)
        numeric_weights, numeric_biases = numeric_gradients(params, features, labels)

        for analytic, numeric in zip(weight_grads + bias_grads, numeric_weights + numeric_biases):
            np.testing.assert_allclose(analytic, numeric, rtol=1e-4, atol=1e-8)
