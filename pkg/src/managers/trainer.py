#!/usr/bin/env python3
# Copyright 2024 Canonical Ltd.
# See LICENSE file for licensing details.

"""Desk-scale probabilistic classifiers: softmax regression and a one-hidden-layer perceptron."""

import logging
from dataclasses import dataclass
from typing import Any

import numpy as np
import yaml

from core.exceptions import ConfigError, DegenerateDataError, DimensionMismatchError, ParseError
from core.models import LabeledDataset
from core.structured_config import TrainConfig
from core.workload import WorkloadBase

logger = logging.getLogger(__name__)


def softmax(logits: np.ndarray) -> np.ndarray:
    """Softmax along the last axis, shifted by the row maximum so large logits cannot overflow."""
    logits = np.asarray(logits, dtype=np.float64)
    shifted = logits - np.max(logits, axis=-1, keepdims=True)
    exponentials = np.exp(shifted)
    return exponentials / np.sum(exponentials, axis=-1, keepdims=True)


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - np.max(logits, axis=-1, keepdims=True)
    return shifted - np.log(np.sum(np.exp(shifted), axis=-1, keepdims=True))


@dataclass(frozen=True, eq=False)
class ClassifierParams:
    """Layer sizes with one weight matrix and bias vector per layer.

    The hidden layer, when present, uses a ReLU activation.
    """

    layer_sizes: tuple[int, ...]
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]

    def __post_init__(self):
        object.__setattr__(self, "layer_sizes", tuple(int(size) for size in self.layer_sizes))
        object.__setattr__(
            self, "weights", tuple(np.asarray(w, dtype=np.float64) for w in self.weights)
        )
        object.__setattr__(
            self, "biases", tuple(np.asarray(b, dtype=np.float64) for b in self.biases)
        )

        if len(self.layer_sizes) < 2:
            raise ConfigError(f"need at least input and output sizes, got {self.layer_sizes}")
        if len(self.weights) != len(self.layer_sizes) - 1 or len(self.biases) != len(self.weights):
            raise ConfigError("one weight matrix and bias vector is needed per layer")

        for layer, (weight, bias) in enumerate(zip(self.weights, self.biases)):
            expected = (self.layer_sizes[layer], self.layer_sizes[layer + 1])
            if weight.shape != expected or bias.shape != (expected[1],):
                raise ConfigError(
                    f"layer {layer} has weights {weight.shape} and bias {bias.shape}, "
                    f"expected {expected} and ({expected[1]},)"
                )

    @property
    def input_dims(self) -> int:
        """Feature dimension the parameters accept."""
        return self.layer_sizes[0]

    @property
    def num_outputs(self) -> int:
        """Class or superclass count of the output layer."""
        return self.layer_sizes[-1]

    @classmethod
    def zeros(cls, layer_sizes: list[int]) -> "ClassifierParams":
        """All-zero parameters, predicting the uniform distribution."""
        return cls(
            layer_sizes=tuple(layer_sizes),
            weights=tuple(
                np.zeros((fan_in, fan_out))
                for fan_in, fan_out in zip(layer_sizes, layer_sizes[1:])
            ),
            biases=tuple(np.zeros(fan_out) for fan_out in layer_sizes[1:]),
        )

    @classmethod
    def glorot(cls, layer_sizes: list[int], rng: np.random.Generator) -> "ClassifierParams":
        """Uniform weights in [-a, a] with a = sqrt(6 / (fan_in + fan_out)), zero biases."""
        weights = []
        for fan_in, fan_out in zip(layer_sizes, layer_sizes[1:]):
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))

        return cls(
            layer_sizes=tuple(layer_sizes),
            weights=tuple(weights),
            biases=tuple(np.zeros(fan_out) for fan_out in layer_sizes[1:]),
        )


def _forward(
    params: ClassifierParams, features: np.ndarray
) -> tuple[np.ndarray, list[np.ndarray]]:
    """Returns output logits and the pre-activation of every hidden layer."""
    activations = features
    pre_activations = []
    for weight, bias in zip(params.weights[:-1], params.biases[:-1]):
        hidden = activations @ weight + bias
        pre_activations.append(hidden)
        activations = np.maximum(hidden, 0.0)

    return activations @ params.weights[-1] + params.biases[-1], pre_activations


def cross_entropy_and_gradients(
    params: ClassifierParams, features: np.ndarray, labels: np.ndarray
) -> tuple[float, list[np.ndarray], list[np.ndarray]]:
    """Mean cross-entropy of a batch and its gradients.

    Args:
        params: the classifier parameters
        features: batch feature matrix, already standardised
        labels: batch class indices

    Returns:
        Tuple of (loss, weight gradients, bias gradients), gradients ordered like the layers
    """
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    batch = len(labels)

    logits, pre_activations = _forward(params, features)
    log_probs = _log_softmax(logits)
    loss = -float(np.mean(log_probs[np.arange(batch), labels]))

    delta = np.exp(log_probs)
    delta[np.arange(batch), labels] -= 1.0
    delta /= batch

    layer_inputs = [features] + [np.maximum(hidden, 0.0) for hidden in pre_activations]
    weight_grads: list[np.ndarray] = [np.empty(0)] * len(params.weights)
    bias_grads: list[np.ndarray] = [np.empty(0)] * len(params.biases)
    for layer in reversed(range(len(params.weights))):
        weight_grads[layer] = layer_inputs[layer].T @ delta
        bias_grads[layer] = delta.sum(axis=0)
        if layer:
            delta = (delta @ params.weights[layer].T) * (pre_activations[layer - 1] > 0.0)

    return loss, weight_grads, bias_grads


class Classifier:
    """A trained classifier, with the feature standardiser fitted on its training split."""

    def __init__(
        self,
        params: ClassifierParams,
        mean: np.ndarray | None = None,
        scale: np.ndarray | None = None,
        config: TrainConfig | None = None,
    ):
        self.params = params
        self.mean = None if mean is None else np.asarray(mean, dtype=np.float64)
        self.scale = None if scale is None else np.asarray(scale, dtype=np.float64)
        self.config = config

    @property
    def input_dims(self) -> int:
        """Feature dimension seen during training."""
        return self.params.input_dims

    @property
    def num_outputs(self) -> int:
        """Number of classes or superclasses predicted."""
        return self.params.num_outputs

    def transform(self, features: np.ndarray) -> np.ndarray:
        """Applies the stored standardiser, if any."""
        features = np.asarray(features, dtype=np.float64)
        if features.ndim == 1 and features.size == 0:
            features = features.reshape(0, self.input_dims)
        if features.ndim != 2 or features.shape[1] != self.input_dims:
            raise DimensionMismatchError(
                f"features of shape {features.shape} for a classifier trained on "
                f"{self.input_dims} dims"
            )
        if self.mean is None or self.scale is None:
            return features

        return (features - self.mean) / self.scale

    def predict_proba(self, features: np.ndarray) -> np.ndarray:
        """Class probability matrix, one row per example."""
        logits, _ = _forward(self.params, self.transform(features))
        return softmax(logits)

    def scores(self, features: np.ndarray) -> np.ndarray:
        """Alias of `predict_proba`, shared with the ensemble models."""
        return self.predict_proba(features)


def predict_proba(classifier: Classifier, features: np.ndarray) -> np.ndarray:
    """Class probability matrix of `classifier` over `features`.

    Raises:
        DimensionMismatchError: if the feature width differs from the training width
    """
    return classifier.predict_proba(features)


def fit_standardizer(features: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-feature mean and standard deviation, constant features getting a scale of 1."""
    mean = features.mean(axis=0)
    scale = features.std(axis=0)
    scale[scale == 0.0] = 1.0
    return mean, scale


def _mean_loss(params: ClassifierParams, features: np.ndarray, labels: np.ndarray) -> float:
    logits, _ = _forward(params, features)
    return -float(np.mean(_log_softmax(logits)[np.arange(len(labels)), labels]))


def train(dataset: LabeledDataset, config: TrainConfig) -> Classifier:
    """Fits a classifier by mini-batch gradient descent with momentum on mean cross-entropy.

    The parameters with the lowest full-data loss seen at an epoch boundary, the initial ones
    included, are returned, so the final training loss never exceeds the initial loss.

    Args:
        dataset: the training data; its `num_classes` sets the output width
        config: the hyperparameters

    Returns:
        The trained `Classifier`

    Raises:
        ConfigError: invalid hyperparameters
        DegenerateDataError: if the labels hold fewer than two distinct classes
    """
    if not isinstance(config, TrainConfig):
        raise ConfigError(f"expected a TrainConfig, got {type(config).__name__}")
    if len(dataset) == 0:
        raise DegenerateDataError("cannot train on an empty dataset")
    if len(dataset.classes_present) < 2:
        raise DegenerateDataError(
            f"training labels cover only classes {dataset.classes_present}, need at least 2"
        )

    features, labels = dataset.features, dataset.labels
    mean = scale = None
    if config.standardize:
        mean, scale = fit_standardizer(features)
        features = (features - mean) / scale

    layer_sizes = [dataset.dims]
    if config.hidden_width:
        layer_sizes.append(config.hidden_width)
    layer_sizes.append(dataset.num_classes)

    rng = np.random.default_rng(config.seed)
    params = ClassifierParams.glorot(layer_sizes, rng)
    weights = [w.copy() for w in params.weights]
    biases = [b.copy() for b in params.biases]
    weight_velocity = [np.zeros_like(w) for w in weights]
    bias_velocity = [np.zeros_like(b) for b in biases]

    best_params = params
    best_loss = initial_loss = _mean_loss(params, features, labels)
    logger.debug(f"initial training loss {initial_loss:.6f} on {len(labels)} examples")

    for epoch in range(config.epochs):
        learning_rate = config.learning_rate * config.lr_decay ** (epoch // config.lr_decay_period)
        order = rng.permutation(len(labels))
        for start in range(0, len(labels), config.batch_size):
            batch = order[start : start + config.batch_size]
            current = ClassifierParams(tuple(layer_sizes), tuple(weights), tuple(biases))
            _, weight_grads, bias_grads = cross_entropy_and_gradients(
                current, features[batch], labels[batch]
            )
            for layer in range(len(weights)):
                weight_velocity[layer] = (
                    config.momentum * weight_velocity[layer] - learning_rate * weight_grads[layer]
                )
                bias_velocity[layer] = (
                    config.momentum * bias_velocity[layer] - learning_rate * bias_grads[layer]
                )
                weights[layer] = weights[layer] + weight_velocity[layer]
                biases[layer] = biases[layer] + bias_velocity[layer]

        params = ClassifierParams(tuple(layer_sizes), tuple(weights), tuple(biases))
        epoch_loss = _mean_loss(params, features, labels)
        if epoch_loss < best_loss:
            best_params, best_loss = params, epoch_loss

    logger.debug(f"final training loss {best_loss:.6f} after {config.epochs} epochs")
    return Classifier(params=best_params, mean=mean, scale=scale, config=config)


def model_to_dict(classifier: Classifier) -> dict[str, Any]:
    """Plain-data form of a classifier, weights flattened in row-major order."""
    params = classifier.params
    return {
        "layer_sizes": list(params.layer_sizes),
        "weights": [[float(v) for v in w.ravel(order="C")] for w in params.weights],
        "biases": [[float(v) for v in b] for b in params.biases],
        "standardizer": (
            None
            if classifier.mean is None or classifier.scale is None
            else {
                "mean": [float(v) for v in classifier.mean],
                "scale": [float(v) for v in classifier.scale],
            }
        ),
        "train_config": classifier.config.dict() if classifier.config else None,
    }


def model_from_dict(data: dict[str, Any]) -> Classifier:
    """Inverse of `model_to_dict`."""
    try:
        layer_sizes = [int(size) for size in data["layer_sizes"]]
        weights = [
            np.asarray(flat, dtype=np.float64).reshape(fan_in, fan_out)
            for flat, fan_in, fan_out in zip(data["weights"], layer_sizes, layer_sizes[1:])
        ]
        biases = [np.asarray(b, dtype=np.float64) for b in data["biases"]]
        standardizer = data.get("standardizer")
        config = data.get("train_config")
    except (KeyError, TypeError, ValueError) as e:
        raise ParseError(f"malformed model: {e}")

    return Classifier(
        params=ClassifierParams(tuple(layer_sizes), tuple(weights), tuple(biases)),
        mean=standardizer["mean"] if standardizer else None,
        scale=standardizer["scale"] if standardizer else None,
        config=TrainConfig(**config) if config else None,
    )


def dump_model(classifier: Classifier) -> str:
    """YAML text of a classifier; floats keep their shortest round-trip repr."""
    return yaml.safe_dump(model_to_dict(classifier), sort_keys=False)


def parse_model(text: str, path: str | None = None) -> Classifier:
    """Parses the YAML text written by `dump_model`."""
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ParseError(f"invalid YAML: {e}", path=path)
    if not isinstance(data, dict):
        raise ParseError("model file must hold a mapping", path=path)

    return model_from_dict(data)


def save_model(classifier: Classifier, path: str, workload: WorkloadBase) -> None:
    """Writes a classifier to a YAML model file through the workload."""
    workload.write(content=dump_model(classifier), path=path)


def load_model(path: str, workload: WorkloadBase) -> Classifier:
    """Reads a YAML model file written by `save_model`."""
    if not workload.exists(path):
        raise ParseError("model file not found", path=path)

    return parse_model("\n".join(workload.read(path)), path=path)
