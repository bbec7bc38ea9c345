#!/usr/bin/env python3
# Copyright 2024 Canonical Ltd.
# See LICENSE file for licensing details.

import os
from pathlib import Path

import numpy as np
import pytest
import yaml

from core.exceptions import (
    ConfigError,
    CoverageError,
    OverlapError,
    ParseError,
    SchemaError,
    ShapeMismatchError,
)
from core.models import ClassSet, FittedEnsembleSpec, Sequel
from core.schemas import SPACES_SCHEMA
from core.structured_config import ExperimentConfig, SclExperimentConfig
from managers.config import ConfigManager, config_hash, derive_seed
from managers.datasets import write_prediction_matrix
from managers.spaces import default_sequels, explicit_space

BASE_DIR = os.path.abspath(os.path.join(os.path.dirname(os.path.realpath(__file__)), "..", ".."))
NOISE = {"artificial": ["uniform"]}


@pytest.fixture
def manager(workload) -> ConfigManager:
    return ConfigManager(workload)


def write_yaml(path: Path, data) -> str:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(yaml.safe_dump(data))
    return str(path)


def test_derive_seed():
    seeds = [derive_seed(0, stage) for stage in ["data", "spaces", "train"]]

    assert len(set(seeds)) == 3
    assert all(0 <= seed < 2**32 for seed in seeds)
    assert derive_seed(0, "data") == seeds[0]
    assert derive_seed(1, "data") != seeds[0]


def test_config_hash():
    assert config_hash({"a": 1, "b": [1, 2]}) == config_hash({"b": [1, 2], "a": 1})
    assert config_hash({"a": 1}) != config_hash({"a": 2})
    assert len(config_hash({})) == 64


def test_repo_configs_load(manager):
    run = manager.load_experiment(f"{BASE_DIR}/config.yaml")
    assert isinstance(run, ExperimentConfig)
    assert run.ood.held_out_classes == [8, 9]

    scl = manager.load_scl(f"{BASE_DIR}/config-scl.yaml")
    assert isinstance(scl, SclExperimentConfig)
    assert scl.runs == 5


def test_load_yaml_errors(manager, tmp_path):
    with pytest.raises(ParseError):
        manager.load_yaml(str(tmp_path / "missing.yaml"))

    broken = tmp_path / "broken.yaml"
    broken.write_text("seed: 0\ndataset: [1, 2\n")
    with pytest.raises(ParseError) as e:
        manager.load_yaml(str(broken))
    assert e.value.line is not None

    listing = tmp_path / "list.yaml"
    listing.write_text("- 1\n- 2\n")
    with pytest.raises(ParseError):
        manager.load_yaml(str(listing))

    garbled = tmp_path / "garbled.yaml"
    garbled.write_bytes(b"seed: 0\nname: \xff\n")
    with pytest.raises(ParseError) as e:
        manager.load_yaml(str(garbled))
    assert e.value.line == 2


@pytest.mark.parametrize(
    "data,key",
    [
        ({"num_classes": 4}, "<root>"),
        ({"num_classes": 4, "sequels": [[[[0, -1]]]]}, "sequels/0/0/0/1"),
        ({"num_classes": 4, "sequels": [[[[0, 1], [2, 3]]]], "extra": 1}, "<root>"),
    ],
)
def test_check_schema_names_key(data, key):
    with pytest.raises(SchemaError) as e:
        ConfigManager.check_schema(data, SPACES_SCHEMA, "spaces.yaml")

    assert f"spaces.yaml: {key}" in str(e.value)


def test_parse_spaces(manager):
    spec = manager.parse_spaces(
        {"num_classes": 4, "sequels": [[[[0, 3], [1, 2]], [[0, 1], [2, 3]]]]}
    )

    assert spec.num_classes == 4
    assert spec.include_identity
    assert spec.sequels[0].spaces[1] == explicit_space([[0, 1], [2, 3]], 4)

    spec = manager.parse_spaces(
        {"num_classes": 4, "include_identity": False, "sequels": [[[[0, 1], [2, 3]]]]}
    )
    assert not spec.include_identity


@pytest.mark.parametrize(
    "in_file,configured,expected",
    [
        (True, False, False),
        (False, True, True),
        (False, None, False),
        (None, None, True),
        (None, False, False),
    ],
)
def test_load_spaces_identity_precedence(manager, tmp_path, in_file, configured, expected):
    """An explicit experiment setting wins over the spaces file, which wins over the default."""
    data = {"num_classes": 4, "sequels": [[[[0, 3], [1, 2]], [[0, 1], [2, 3]]]]}
    if in_file is not None:
        data["include_identity"] = in_file
    path = write_yaml(tmp_path / "spaces.yaml", data)

    assert manager.load_spaces(path, include_identity=configured).include_identity is expected


def test_experiment_identity_unset_by_default(manager, tmp_path):
    data = {"seed": 0, "dataset": {"synthetic": {}}, "ood": NOISE}
    path = write_yaml(tmp_path / "experiment.yaml", data)

    assert manager.load_experiment(path).include_identity is None


def test_parse_spaces_bad_partitions(manager):
    with pytest.raises(OverlapError):
        manager.parse_spaces({"num_classes": 4, "sequels": [[[[0, 1], [1, 2, 3]]]]})
    with pytest.raises(CoverageError):
        manager.parse_spaces({"num_classes": 4, "sequels": [[[[0, 1], [2]]]]})
    with pytest.raises(ConfigError):
        manager.parse_spaces({"num_classes": 4, "sequels": [[]]})


def test_spaces_round_trip_is_byte_stable(manager, tmp_path):
    spec = FittedEnsembleSpec(ClassSet(num_classes=10), tuple(default_sequels(10)), False)
    path = str(tmp_path / "spaces.yaml")

    manager.save_spaces(spec, path)
    loaded = manager.load_spaces(path)

    assert loaded == spec
    assert manager.dump_spaces(loaded) == Path(path).read_text()


def test_dump_spaces_layout():
    sequel = Sequel(
        spaces=(explicit_space([[0, 3], [1, 2]], 4), explicit_space([[0, 1], [2, 3]], 4))
    )
    text = ConfigManager.dump_spaces(FittedEnsembleSpec(ClassSet(num_classes=4), (sequel,)))

    assert text.splitlines() == [
        "num_classes: 4",
        "include_identity: true",
        "sequels:",
        "  - - [[0, 3], [1, 2]]",
        "    - [[0, 1], [2, 3]]",
    ]


def test_load_experiment_resolves_paths(manager, tmp_path):
    path = write_yaml(
        tmp_path / "sub" / "experiment.yaml",
        {
            "seed": 3,
            "dataset": {"train_csv": "data/train.csv", "test_csv": "/abs/test.csv"},
            "spaces": "spaces.yaml",
            "ood": {"artificial": ["gaussian"]},
        },
    )

    config = manager.load_experiment(path)

    assert config.dataset.train_csv == str(tmp_path / "sub" / "data" / "train.csv")
    assert config.dataset.test_csv == "/abs/test.csv"
    assert config.spaces == str(tmp_path / "sub" / "spaces.yaml")


@pytest.mark.parametrize(
    "data",
    [
        {"dataset": {"synthetic": {}, "train_csv": "a.csv"}, "ood": NOISE},
        {"dataset": {"synthetic": {}}},
        {"dataset": {"synthetic": {}}, "ood": NOISE, "typo": 1},
        {"dataset": {"synthetic": {"noise_sigma": 0}}, "ood": NOISE},
    ],
)
def test_load_experiment_config_errors(manager, tmp_path, data):
    path = write_yaml(tmp_path / "experiment.yaml", {"seed": 0, **data})

    with pytest.raises(ConfigError):
        manager.load_experiment(path)


def test_load_experiment_schema_errors(manager, tmp_path):
    path = write_yaml(tmp_path / "experiment.yaml", {"seed": -1, "dataset": {"synthetic": {}}})

    with pytest.raises(SchemaError):
        manager.load_experiment(path)


def test_load_scl_needs_one_partition_source(manager, tmp_path):
    path = write_yaml(
        tmp_path / "scl.yaml",
        {
            "seed": 0,
            "dataset": {"synthetic": {}},
            "partitions": [[[0, 1], [2, 3]]],
            "sampling": {"count": 2},
        },
    )

    with pytest.raises(ConfigError):
        manager.load_scl(path)


@pytest.mark.parametrize(
    "data,kind",
    [
        ({"num_classes": 4, "sequels": []}, "spaces"),
        ({"num_classes": 4, "members": []}, "predictions"),
        ({"seed": 0, "partitions": []}, "scl"),
        ({"seed": 0, "sampling": {}}, "scl"),
        ({"seed": 0, "dataset": {}}, "run"),
    ],
)
def test_detect_kind(data, kind):
    assert ConfigManager.detect_kind(data) == kind


@pytest.fixture
def bundle_dir(workload, tmp_path) -> Path:
    rng = np.random.default_rng(0)
    for name, columns in [("identity", 4), ("pairs", 2)]:
        write_prediction_matrix(
            rng.dirichlet(np.ones(columns), size=5), f"{tmp_path}/{name}_in.csv", workload
        )
        write_prediction_matrix(
            rng.dirichlet(np.ones(columns), size=3), f"{tmp_path}/{name}_noise.csv", workload
        )
    rows = "".join(f"{i},{i % 4}\n" for i in range(5))
    (tmp_path / "labels.csv").write_text("id,label\n" + rows)
    return tmp_path


def sidecar(pairs_space=None, pairs_ood=None, labels="labels.csv") -> dict:
    data = {
        "num_classes": 4,
        "members": [
            {
                "space": [[0], [1], [2], [3]],
                "in_distribution": "identity_in.csv",
                "ood": {"noise": "identity_noise.csv"},
            },
            {
                "space": pairs_space or [[0, 3], [1, 2]],
                "in_distribution": "pairs_in.csv",
                "ood": pairs_ood or {"noise": "pairs_noise.csv"},
            },
        ],
    }
    if labels:
        data["labels"] = labels
    return data


def test_load_predictions(manager, bundle_dir):
    bundle = manager.load_predictions(write_yaml(bundle_dir / "bundle.yaml", sidecar()))

    assert bundle.num_classes == 4
    assert bundle.ood_sources == ["noise"]
    assert bundle.identity_member is bundle.members[0]
    assert bundle.members[1].in_distribution.matrix.shape == (5, 2)
    assert bundle.members[1].ood["noise"].matrix.shape == (3, 2)
    assert bundle.labels.tolist() == [0, 1, 2, 3, 0]


def test_load_predictions_shape_mismatch_names_file(manager, bundle_dir):
    path = write_yaml(bundle_dir / "bundle.yaml", sidecar(pairs_space=[[0], [1], [2, 3]]))

    with pytest.raises(ShapeMismatchError) as e:
        manager.load_predictions(path)

    assert "pairs_in.csv" in str(e.value)


def test_load_predictions_source_mismatch(manager, bundle_dir):
    path = write_yaml(bundle_dir / "bundle.yaml", sidecar(pairs_ood={"other": "pairs_noise.csv"}))

    with pytest.raises(SchemaError):
        manager.load_predictions(path)


def test_load_predictions_label_count(manager, bundle_dir):
    (bundle_dir / "short.csv").write_text("id,label\n0,0\n")
    path = write_yaml(bundle_dir / "bundle.yaml", sidecar(labels="short.csv"))

    with pytest.raises(ShapeMismatchError):
        manager.load_predictions(path)
