#!/usr/bin/env python3
# Copyright 2024 Canonical Ltd.
# See LICENSE file for licensing details.

"""Synthetic datasets, class-disjoint splits, artificial OOD sets and CSV ingestion."""

import csv
import logging
from pathlib import Path
from typing import Iterable

import numpy as np

from core.exceptions import ConfigError, ParseError, SchemaError, UnknownClassError
from core.models import LabeledDataset
from core.structured_config import OodKind, SyntheticSpec
from core.workload import WorkloadBase
from literals import FLOAT_FORMAT, INGEST_ROW_SUM_TOLERANCE

logger = logging.getLogger(__name__)


def class_means(spec: SyntheticSpec) -> np.ndarray:
    """Deterministic class centres, one row per class.

    `simplex` places class k at `scale * e_k` and needs `dims >= num_classes`; `circle` spreads
    the classes evenly on a circle in the first two dims, or along a line when `dims == 1`.
    """
    means = np.zeros((spec.num_classes, spec.dims))
    if spec.layout == "simplex":
        if spec.dims < spec.num_classes:
            raise ConfigError(
                f"simplex layout needs dims >= num_classes, got {spec.dims} < {spec.num_classes}"
            )
        means[:, : spec.num_classes] = spec.class_mean_scale * np.eye(spec.num_classes)
        return means

    if spec.dims == 1:
        means[:, 0] = spec.class_mean_scale * np.arange(spec.num_classes)
        return means

    angles = 2.0 * np.pi * np.arange(spec.num_classes) / spec.num_classes
    means[:, 0] = spec.class_mean_scale * np.cos(angles)
    means[:, 1] = spec.class_mean_scale * np.sin(angles)
    return means


def gen_gaussian_blobs(spec: SyntheticSpec) -> LabeledDataset:
    """Isotropic Gaussian points around each class centre, `per_class_count` rows per class.

    Class k draws from its own stream seeded by `(spec.seed, k)`; rows are grouped by class.
    """
    means = class_means(spec)
    seed = spec.seed if spec.seed is not None else 0
    features = []
    for class_index in range(spec.num_classes):
        rng = np.random.default_rng(np.random.SeedSequence([seed, class_index]))
        noise = rng.normal(0.0, spec.noise_sigma, size=(spec.per_class_count, spec.dims))
        features.append(means[class_index] + noise)

    return LabeledDataset(
        features=np.concatenate(features),
        labels=np.repeat(np.arange(spec.num_classes), spec.per_class_count),
        num_classes=spec.num_classes,
    )


def split_by_classes(
    dataset: LabeledDataset, keep: Iterable[int], relabel_dense: bool = False
) -> LabeledDataset:
    """Rows whose label is in `keep`, optionally remapped to 0..len(keep)-1 in ascending order.

    Raises:
        UnknownClassError: if `keep` names a class outside the dataset's class set
    """
    kept = sorted({int(index) for index in keep})
    if not kept:
        raise ConfigError("split_by_classes needs at least one class to keep")
    unknown = [index for index in kept if not 0 <= index < dataset.num_classes]
    if unknown:
        raise UnknownClassError(f"classes {unknown} outside 0..{dataset.num_classes - 1}")

    rows = np.isin(dataset.labels, kept)
    labels = dataset.labels[rows]
    if not relabel_dense:
        return LabeledDataset(dataset.features[rows], labels, dataset.num_classes)

    remap = np.full(dataset.num_classes, -1, dtype=np.int64)
    remap[kept] = np.arange(len(kept))
    return LabeledDataset(dataset.features[rows], remap[labels], len(kept))


def _take(dataset: LabeledDataset, rows: np.ndarray) -> LabeledDataset:
    return LabeledDataset(dataset.features[rows], dataset.labels[rows], dataset.num_classes)


def train_test_split(
    dataset: LabeledDataset, test_fraction: float, seed: int
) -> tuple[LabeledDataset, LabeledDataset]:
    """Seeded split stratified by class.

    Each class sends round(count * test_fraction) of its rows to the test side, keeping at least
    one row for training, so a single-row class always goes to train. Both sides keep the
    original row order.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ConfigError(f"test_fraction must be in (0, 1), got {test_fraction}")

    rng = np.random.default_rng(seed)
    test_rows = []
    for class_index in range(dataset.num_classes):
        rows = np.flatnonzero(dataset.labels == class_index)
        if not len(rows):
            continue
        num_test = min(int(np.floor(len(rows) * test_fraction + 0.5)), len(rows) - 1)
        test_rows.append(rng.permutation(rows)[:num_test])

    is_test = np.zeros(len(dataset), dtype=bool)
    if test_rows:
        is_test[np.concatenate(test_rows)] = True

    return _take(dataset, np.flatnonzero(~is_test)), _take(dataset, np.flatnonzero(is_test))


def hold_out_classes(
    dataset: LabeledDataset, held_out: Iterable[int]
) -> tuple[LabeledDataset, np.ndarray]:
    """Splits off whole classes as OOD features; the remaining labels are re-densified."""
    held = sorted({int(index) for index in held_out})
    keep = [index for index in range(dataset.num_classes) if index not in held]
    if len(keep) < 2:
        raise ConfigError(f"holding out {held} leaves fewer than 2 in-distribution classes")

    ood = split_by_classes(dataset, held)
    return split_by_classes(dataset, keep, relabel_dense=True), ood.features


def gen_artificial_ood(
    kind: OodKind | str, count: int, dims: int, scale: float, seed: int
) -> np.ndarray:
    """Artificial OOD features: uniform on [-scale, scale], N(0, scale^2) or +-scale signs.

    Rows are drawn from a generator seeded with `seed`.
    """
    if count < 1 or dims < 1:
        raise ConfigError(f"count and dims must be at least 1, got {count} and {dims}")

    rng = np.random.default_rng(seed)
    kind = OodKind(kind)
    if kind == OodKind.UNIFORM:
        return rng.uniform(-scale, scale, size=(count, dims))
    if kind == OodKind.GAUSSIAN:
        return rng.normal(0.0, scale, size=(count, dims))
    return scale * rng.choice([-1.0, 1.0], size=(count, dims))


def undecodable_line(error: UnicodeDecodeError) -> int:
    """1-based line number of the first byte that failed to decode."""
    return error.object[: error.start].count(b"\n") + 1


def _read_rows(path: str) -> list[tuple[int, list[str]]]:
    """Non-blank CSV rows of a file, with their 1-based line numbers."""
    if not Path(path).is_file():
        raise ParseError("file not found", path=path)

    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except UnicodeDecodeError as e:
        raise ParseError("invalid UTF-8", line=undecodable_line(e), path=path)

    return [
        (line_number, row)
        for line_number, row in enumerate(csv.reader(lines), start=1)
        if row and any(cell.strip() for cell in row)
    ]


def _parse_float(text: str, line: int, path: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"non-numeric value {text!r}", line=line, path=path)
    if not np.isfinite(value):
        raise ParseError(f"non-finite value {text!r}", line=line, path=path)
    return value


def load_csv_dataset(path: str, num_classes: int | None = None) -> LabeledDataset:
    """Reads a `label,f0,f1,...` CSV file.

    Args:
        path: the CSV filepath
        num_classes: the class count; defaults to the largest label plus one

    Raises:
        SchemaError: if the header is not `label,f0,...,f{d-1}`
        ParseError: on a malformed or non-finite value or an out-of-range label, naming the line
    """
    rows = _read_rows(path)
    if not rows:
        raise SchemaError(f"{path}: empty dataset file")

    _, header = rows[0]
    header = [cell.strip() for cell in header]
    expected = ["label"] + [f"f{index}" for index in range(len(header) - 1)]
    if len(header) < 2 or header != expected:
        raise SchemaError(f"{path}: header must be label,f0,...,f{{d-1}}, got {','.join(header)}")

    labels, features = [], []
    for line, row in rows[1:]:
        if len(row) != len(header):
            raise ParseError(
                f"expected {len(header)} fields, got {len(row)}", line=line, path=path
            )
        try:
            label = int(row[0])
        except ValueError:
            raise ParseError(f"non-integer label {row[0]!r}", line=line, path=path)
        if label < 0 or (num_classes is not None and label >= num_classes):
            upper = "" if num_classes is None else f" or above {num_classes - 1}"
            raise ParseError(f"label {label} below 0{upper}", line=line, path=path)
        labels.append(label)
        features.append([_parse_float(cell, line, path) for cell in row[1:]])

    dims = len(header) - 1
    if num_classes is None:
        num_classes = max(max(labels, default=0) + 1, 2)

    logger.debug(f"loaded {len(labels)} rows of {dims} features from {path}")
    return LabeledDataset(
        features=np.asarray(features, dtype=np.float64).reshape(len(features), dims),
        labels=np.asarray(labels, dtype=np.int64),
        num_classes=num_classes,
    )


def format_csv_dataset(dataset: LabeledDataset) -> str:
    """CSV text of a dataset, features with 17 significant digits."""
    lines = [",".join(["label"] + [f"f{index}" for index in range(dataset.dims)])]
    for label, row in zip(dataset.labels, dataset.features):
        lines.append(",".join([str(int(label))] + [FLOAT_FORMAT.format(v) for v in row]))
    return "\n".join(lines) + "\n"


def save_csv_dataset(dataset: LabeledDataset, path: str, workload: WorkloadBase) -> None:
    """Writes a dataset CSV through the workload."""
    workload.write(content=format_csv_dataset(dataset), path=path)


def read_prediction_matrix(
    path: str, tolerance: float = INGEST_ROW_SUM_TOLERANCE
) -> tuple[list[str], np.ndarray]:
    """Reads an `id,p0,...,p{C-1}` prediction CSV.

    Rows must be row-stochastic within `tolerance`; accepted rows are clipped to [0, 1].

    Returns:
        Tuple of (example ids, probability matrix)

    Raises:
        SchemaError: if the header is not `id,p0,...,p{C-1}`
        ParseError: on a malformed value or a row failing the row-stochastic check, naming the line
    """
    rows = _read_rows(path)
    if not rows:
        raise SchemaError(f"{path}: empty prediction file")

    _, header = rows[0]
    header = [cell.strip() for cell in header]
    expected = ["id"] + [f"p{index}" for index in range(len(header) - 1)]
    if len(header) < 2 or header != expected:
        raise SchemaError(f"{path}: header must be id,p0,...,p{{C-1}}, got {','.join(header)}")

    ids, values = [], []
    for line, row in rows[1:]:
        if len(row) != len(header):
            raise ParseError(
                f"expected {len(header)} fields, got {len(row)}", line=line, path=path
            )
        probabilities = [_parse_float(cell, line, path) for cell in row[1:]]
        if min(probabilities) < -tolerance or max(probabilities) > 1.0 + tolerance:
            raise ParseError("probabilities outside [0, 1]", line=line, path=path)
        if abs(sum(probabilities) - 1.0) > tolerance:
            raise ParseError(
                f"probabilities sum to {sum(probabilities)!r}, not 1", line=line, path=path
            )
        ids.append(row[0].strip())
        values.append(probabilities)

    matrix = np.asarray(values, dtype=np.float64).reshape(len(values), len(header) - 1)
    matrix = np.clip(matrix, 0.0, 1.0)
    return ids, matrix


def format_prediction_matrix(matrix: np.ndarray, ids: list[str] | None = None) -> str:
    """CSV text of a prediction matrix, probabilities with 17 significant digits."""
    matrix = np.asarray(matrix, dtype=np.float64)
    ids = ids if ids is not None else [str(index) for index in range(len(matrix))]
    lines = [",".join(["id"] + [f"p{index}" for index in range(matrix.shape[1])])]
    for example_id, row in zip(ids, matrix):
        lines.append(",".join([example_id] + [FLOAT_FORMAT.format(v) for v in row]))
    return "\n".join(lines) + "\n"


def write_prediction_matrix(
    matrix: np.ndarray, path: str, workload: WorkloadBase, ids: list[str] | None = None
) -> None:
    """Writes a prediction CSV through the workload."""
    workload.write(content=format_prediction_matrix(matrix, ids), path=path)


def read_labels(path: str, num_classes: int) -> tuple[list[str], np.ndarray]:
    """Reads an `id,label` CSV of true classes for ingested predictions."""
    rows = _read_rows(path)
    if not rows or [cell.strip() for cell in rows[0][1]] != ["id", "label"]:
        raise SchemaError(f"{path}: header must be id,label")

    ids, labels = [], []
    for line, row in rows[1:]:
        if len(row) != 2:
            raise ParseError(f"expected 2 fields, got {len(row)}", line=line, path=path)
        try:
            label = int(row[1])
        except ValueError:
            raise ParseError(f"non-integer label {row[1]!r}", line=line, path=path)
        if not 0 <= label < num_classes:
            raise ParseError(f"label {label} outside 0..{num_classes - 1}", line=line, path=path)
        ids.append(row[0].strip())
        labels.append(label)

    return ids, np.asarray(labels, dtype=np.int64)
