#!/usr/bin/env python3
# Copyright 2024 Canonical Ltd.
# See LICENSE file for licensing details.

import numpy as np
import pytest

from core.exceptions import ConfigError, ParseError, SchemaError, UnknownClassError
from core.models import LabeledDataset
from core.structured_config import OodKind, SyntheticSpec
from managers.datasets import (
    class_means,
    format_csv_dataset,
    gen_artificial_ood,
    gen_gaussian_blobs,
    hold_out_classes,
    load_csv_dataset,
    read_labels,
    read_prediction_matrix,
    save_csv_dataset,
    split_by_classes,
    train_test_split,
    write_prediction_matrix,
)


@pytest.fixture(scope="module")
def ten_classes() -> LabeledDataset:
    return gen_gaussian_blobs(SyntheticSpec(num_classes=10, per_class_count=100, seed=4))


def test_gen_gaussian_blobs_counts(ten_classes):
    assert len(ten_classes) == 1000
    assert ten_classes.dims == 2
    assert np.bincount(ten_classes.labels).tolist() == [100] * 10


def test_gen_gaussian_blobs_is_deterministic():
    spec = SyntheticSpec(num_classes=3, dims=4, per_class_count=7, layout="simplex", seed=2)

    first, second = gen_gaussian_blobs(spec), gen_gaussian_blobs(spec)
    assert np.array_equal(first.features, second.features)
    assert np.array_equal(first.labels, second.labels)

    other = gen_gaussian_blobs(spec.copy(update={"seed": 3}))
    assert not np.array_equal(first.features, other.features)


def test_gen_gaussian_blobs_tight_noise_sits_on_means():
    spec = SyntheticSpec(num_classes=5, per_class_count=10, noise_sigma=1e-9, seed=0)
    dataset = gen_gaussian_blobs(spec)

    np.testing.assert_allclose(dataset.features, class_means(spec)[dataset.labels], atol=1e-6)


def test_class_means_layouts():
    spec = SyntheticSpec(num_classes=3, dims=4, class_mean_scale=2.0, layout="simplex")
    simplex = class_means(spec)
    np.testing.assert_allclose(simplex[:, :3], 2.0 * np.eye(3))

    line = class_means(SyntheticSpec(num_classes=3, dims=1, class_mean_scale=2.0))
    assert line[:, 0].tolist() == [0.0, 2.0, 4.0]

    with pytest.raises(ConfigError):
        class_means(SyntheticSpec(num_classes=5, dims=2, layout="simplex"))


def test_split_by_classes_keeps_rows(ten_classes):
    first_half = split_by_classes(ten_classes, range(5))

    assert len(first_half) == 500
    assert first_half.classes_present == [0, 1, 2, 3, 4]
    assert first_half.num_classes == 10

    everything = split_by_classes(ten_classes, range(10))
    assert np.array_equal(everything.features, ten_classes.features)
    assert np.array_equal(everything.labels, ten_classes.labels)


def test_split_by_classes_relabel_dense(ten_classes):
    subset = split_by_classes(ten_classes, {7, 3}, relabel_dense=True)

    assert subset.num_classes == 2
    assert subset.labels.tolist() == [0] * 100 + [1] * 100
    assert np.array_equal(subset.features[:100], ten_classes.features[ten_classes.labels == 3])


def test_split_by_classes_errors(ten_classes):
    with pytest.raises(UnknownClassError):
        split_by_classes(ten_classes, [3, 10])
    with pytest.raises(ConfigError):
        split_by_classes(ten_classes, [])


def test_train_test_split_stratified(ten_classes):
    train, test = train_test_split(ten_classes, 0.5, seed=1)

    assert len(train) == len(test) == 500
    assert np.bincount(train.labels).tolist() == [50] * 10
    assert np.bincount(test.labels).tolist() == [50] * 10


def test_train_test_split_disjoint_and_exhaustive(ten_classes):
    train, test = train_test_split(ten_classes, 0.3, seed=8)

    rows = np.concatenate([train.features, test.features])
    assert len(rows) == len(ten_classes)
    assert len(np.unique(rows, axis=0)) == len(ten_classes)
    assert sorted(map(tuple, rows)) == sorted(map(tuple, ten_classes.features))


def test_train_test_split_is_deterministic(ten_classes):
    first = train_test_split(ten_classes, 0.3, seed=8)
    second = train_test_split(ten_classes, 0.3, seed=8)

    for a, b in zip(first, second):
        assert np.array_equal(a.features, b.features)


def test_train_test_split_single_row_class_goes_to_train():
    dataset = LabeledDataset(
        features=np.arange(5, dtype=float).reshape(5, 1), labels=[0, 0, 0, 0, 1], num_classes=2
    )

    train, test = train_test_split(dataset, 0.5, seed=0)

    assert train.labels.tolist().count(1) == 1
    assert test.labels.tolist() == [0, 0]

    with pytest.raises(ConfigError):
        train_test_split(dataset, 1.0, seed=0)


def test_hold_out_classes(ten_classes):
    in_distribution, ood = hold_out_classes(ten_classes, [8, 9])

    assert in_distribution.num_classes == 8
    assert len(in_distribution) == 800
    assert ood.shape == (200, 2)
    assert np.array_equal(ood, ten_classes.features[ten_classes.labels >= 8])

    with pytest.raises(ConfigError):
        hold_out_classes(ten_classes, range(1, 10))


@pytest.mark.parametrize("kind", list(OodKind))
def test_gen_artificial_ood(kind):
    features = gen_artificial_ood(kind, 50, 3, 2.0, seed=5)

    assert features.shape == (50, 3)
    assert np.array_equal(features, gen_artificial_ood(kind.value, 50, 3, 2.0, seed=5))
    if kind == OodKind.UNIFORM:
        assert np.all(np.abs(features) <= 2.0)
    if kind == OodKind.RADEMACHER:
        assert set(np.abs(features).ravel()) == {2.0}


def test_gen_artificial_ood_errors():
    with pytest.raises(ConfigError):
        gen_artificial_ood(OodKind.UNIFORM, 0, 3, 1.0, seed=0)
    with pytest.raises(ValueError):
        gen_artificial_ood("cauchy", 5, 3, 1.0, seed=0)


def test_load_csv_dataset(tmp_path):
    path = tmp_path / "train.csv"
    path.write_text("label,f0,f1\n0,1.5,2\n1,-3,0.25\n\n2,0,0\n")

    dataset = load_csv_dataset(str(path))

    assert len(dataset) == 3
    assert dataset.num_classes == 3
    assert dataset.features.tolist() == [[1.5, 2.0], [-3.0, 0.25], [0.0, 0.0]]


@pytest.mark.parametrize(
    "content,line",
    [
        ("label,f0\n0,1\n1,2\n0,3\n1,x\n", 5),
        ("label,f0\n0,nan\n", 2),
        ("label,f0\n0,inf\n", 2),
        ("label,f0\n0,1,2\n", 2),
        ("label,f0\na,1\n", 2),
        ("label,f0\n0,1\n-1,2\n", 3),
    ],
)
def test_load_csv_dataset_parse_errors(tmp_path, content, line):
    path = tmp_path / "bad.csv"
    path.write_text(content)

    with pytest.raises(ParseError) as e:
        load_csv_dataset(str(path))

    assert e.value.line == line


def test_load_csv_dataset_label_above_class_count(tmp_path):
    path = tmp_path / "data.csv"
    path.write_text("label,f0\n0,1\n1,2\n3,0\n")

    with pytest.raises(ParseError) as e:
        load_csv_dataset(str(path), num_classes=3)

    assert e.value.line == 4
    assert load_csv_dataset(str(path)).num_classes == 4


def test_undecodable_files_name_the_line(tmp_path):
    """Invalid UTF-8 surfaces as a parse error, never a decode traceback."""
    path = tmp_path / "data.csv"
    path.write_bytes(b"label,f0\n0,1.0\n1,\xff\xfe\n")
    with pytest.raises(ParseError) as e:
        load_csv_dataset(str(path))
    assert e.value.line == 3
    assert e.value.path == str(path)

    path = tmp_path / "preds.csv"
    path.write_bytes(b"id,p0,p1\n\xff,0.5,0.5\n")
    with pytest.raises(ParseError) as e:
        read_prediction_matrix(str(path))
    assert e.value.line == 2


def test_load_csv_dataset_schema_errors(tmp_path):
    for content in ["", "label,x0\n0,1\n", "f0,label\n1,0\n"]:
        path = tmp_path / "bad.csv"
        path.write_text(content)
        with pytest.raises(SchemaError):
            load_csv_dataset(str(path))

    with pytest.raises(ParseError):
        load_csv_dataset(str(tmp_path / "missing.csv"))


def test_save_then_load_is_exact(workload, tmp_path):
    dataset = gen_gaussian_blobs(SyntheticSpec(num_classes=3, per_class_count=5, seed=6))
    path = f"{tmp_path}/data.csv"

    save_csv_dataset(dataset, path, workload)
    loaded = load_csv_dataset(path, dataset.num_classes)

    assert np.array_equal(loaded.features, dataset.features)
    assert np.array_equal(loaded.labels, dataset.labels)
    assert format_csv_dataset(loaded) == format_csv_dataset(dataset)


def test_prediction_matrix_round_trip(workload, tmp_path):
    matrix = np.random.default_rng(0).dirichlet(np.ones(4), size=6)
    path = f"{tmp_path}/preds.csv"

    write_prediction_matrix(matrix, path, workload, ids=[f"x{i}" for i in range(6)])
    ids, loaded = read_prediction_matrix(path)

    assert ids == [f"x{i}" for i in range(6)]
    assert np.array_equal(loaded, matrix)


def test_prediction_matrix_clips_within_tolerance(tmp_path):
    path = tmp_path / "preds.csv"
    path.write_text("id,p0,p1\na,1.00001,-0.00001\n")

    _, matrix = read_prediction_matrix(str(path))

    assert matrix.tolist() == [[1.0, 0.0]]


@pytest.mark.parametrize(
    "content,line",
    [
        ("id,p0,p1\na,0.5,0.5\nb,0.7,0.7\n", 3),
        ("id,p0,p1\na,1.5,-0.5\n", 2),
        ("id,p0,p1\na,0.5\n", 2),
        ("id,p0,p1\na,0.5,half\n", 2),
    ],
)
def test_prediction_matrix_errors(tmp_path, content, line):
    path = tmp_path / "preds.csv"
    path.write_text(content)

    with pytest.raises(ParseError) as e:
        read_prediction_matrix(str(path))

    assert e.value.line == line


def test_read_labels(tmp_path):
    path = tmp_path / "labels.csv"
    path.write_text("id,label\na,0\nb,2\n")

    ids, labels = read_labels(str(path), 3)
    assert ids == ["a", "b"]
    assert labels.tolist() == [0, 2]

    with pytest.raises(ParseError) as e:
        read_labels(str(path), 2)
    assert e.value.line == 3

    path.write_text("id,class\na,0\n")
    with pytest.raises(SchemaError):
        read_labels(str(path), 3)
