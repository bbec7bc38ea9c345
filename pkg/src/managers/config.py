#!/usr/bin/env python3
# Copyright 2023 Canonical Ltd.
# See LICENSE file for licensing details.

"""Manager for loading, validating and writing toolkit configuration files."""

import hashlib
import json
import logging
from pathlib import Path
from typing import Any

import jsonschema
import yaml
from pydantic import BaseModel, ValidationError

from core.exceptions import ConfigError, ParseError, SchemaError, ShapeMismatchError
from core.models import (
    BundleMember,
    ClassSet,
    FittedEnsembleSpec,
    MemberPrediction,
    PredictionBundle,
    Sequel,
)
from core.schemas import (
    EXPERIMENT_SCHEMA,
    PREDICTIONS_SCHEMA,
    SCL_SCHEMA,
    SPACES_SCHEMA,
)
from core.structured_config import ExperimentConfig, SclExperimentConfig, SpacesFile
from core.workload import WorkloadBase
from managers.datasets import read_labels, read_prediction_matrix, undecodable_line
from managers.spaces import check_sequel, explicit_space

logger = logging.getLogger(__name__)


def derive_seed(master_seed: int, stage: str) -> int:
    """Seed of one stage: first 8 bytes of sha256("<master_seed>:<stage>"), modulo 2**32."""
    digest = hashlib.sha256(f"{master_seed}:{stage}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") % 2**32


def config_hash(config: BaseModel | dict[str, Any]) -> str:
    """sha256 of the canonical JSON dump of a parsed config."""
    data = config.dict() if isinstance(config, BaseModel) else config
    canonical = json.dumps(data, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _validation_message(error: ValidationError) -> str:
    return "; ".join(
        f"{'.'.join(str(part) for part in e['loc'])}: {e['msg']}" for e in error.errors()
    )


class ConfigManager:
    """Object for reading and writing config, spaces and sidecar files."""

    def __init__(self, workload: WorkloadBase):
        self.workload = workload

    def load_yaml(self, path: str) -> dict[str, Any]:
        """Reads a YAML mapping.

        Raises:
            ParseError: if the file is missing, is not UTF-8 or is not a YAML mapping
        """
        if not self.workload.exists(path):
            raise ParseError("file not found", path=path)

        try:
            data = yaml.safe_load("\n".join(self.workload.read(path)))
        except UnicodeDecodeError as e:
            raise ParseError("invalid UTF-8", line=undecodable_line(e), path=path)
        except yaml.YAMLError as e:
            mark = getattr(e, "problem_mark", None)
            raise ParseError(f"invalid YAML: {e}", line=mark.line + 1 if mark else None, path=path)

        if not isinstance(data, dict):
            raise ParseError("top level must be a mapping", path=path)
        return data

    @staticmethod
    def check_schema(data: Any, schema: dict[str, Any], path: str | None = None) -> None:
        """Validates data against a JSON schema.

        Raises:
            SchemaError: naming the file and the offending key path
        """
        try:
            jsonschema.validate(instance=data, schema=schema)
        except jsonschema.ValidationError as e:
            where = "/".join(str(part) for part in e.absolute_path) or "<root>"
            raise SchemaError(f"{path or '<data>'}: {where}: {e.message}")

    @staticmethod
    def _resolve(path: str | None, base: str) -> str | None:
        """Resolves `path` against the directory of the file that names it."""
        if path is None or Path(path).is_absolute():
            return path
        return str(Path(base).parent / path)

    # --- SPACES ---

    def parse_spaces(
        self, data: dict[str, Any], path: str | None = None, include_identity: bool | None = None
    ) -> FittedEnsembleSpec:
        """Builds a fitted-ensemble spec from a parsed spaces mapping.

        An explicit `include_identity` argument wins over the file's value; with neither set the
        identity member is included.
        """
        self.check_schema(data, SPACES_SCHEMA, path)
        try:
            spaces_file = SpacesFile(**data)
        except ValidationError as e:
            raise ConfigError(f"{path or '<data>'}: {_validation_message(e)}")

        n = spaces_file.num_classes
        sequels = []
        for sequel_blocks in spaces_file.sequels:
            if not sequel_blocks:
                raise ConfigError(f"{path or '<data>'}: empty sequel")
            sequel = Sequel(spaces=tuple(explicit_space(blocks, n) for blocks in sequel_blocks))
            check_sequel(sequel)
            sequels.append(sequel)

        if include_identity is None:
            include_identity = spaces_file.include_identity
        if include_identity is None:
            include_identity = True
        return FittedEnsembleSpec(
            class_set=ClassSet(num_classes=n),
            sequels=tuple(sequels),
            include_identity=include_identity,
        )

    def load_spaces(self, path: str, include_identity: bool | None = None) -> FittedEnsembleSpec:
        """Reads and validates a spaces file."""
        return self.parse_spaces(self.load_yaml(path), path, include_identity)

    @staticmethod
    def dump_spaces(spec: FittedEnsembleSpec) -> str:
        """Spaces file text, one flow-style space per line.

        Parsing this output and dumping it again gives identical bytes.
        """
        lines = [
            f"num_classes: {spec.num_classes}",
            f"include_identity: {'true' if spec.include_identity else 'false'}",
            "sequels:",
        ]
        for sequel in spec.sequels:
            for space_index, space in enumerate(sequel.spaces):
                prefix = "  - - " if space_index == 0 else "    - "
                lines.append(prefix + json.dumps(space.to_lists(), separators=(", ", ": ")))
        return "\n".join(lines) + "\n"

    def save_spaces(self, spec: FittedEnsembleSpec, path: str) -> None:
        """Writes a spaces file through the workload."""
        self.workload.write(content=self.dump_spaces(spec), path=path)

    # --- EXPERIMENTS ---

    def _parse_model(self, data: dict[str, Any], schema: dict, model: type, path: str):
        self.check_schema(data, schema, path)
        try:
            return model(**data)
        except ValidationError as e:
            raise ConfigError(f"{path}: {_validation_message(e)}")

    def _resolve_dataset(self, config: ExperimentConfig | SclExperimentConfig, path: str) -> None:
        dataset = config.dataset
        dataset.train_csv = self._resolve(dataset.train_csv, path)
        dataset.test_csv = self._resolve(dataset.test_csv, path)
        dataset.predictions = self._resolve(dataset.predictions, path)

    def load_experiment(self, path: str) -> ExperimentConfig:
        """Reads the config of the `run` command; relative paths resolve against its directory."""
        config: ExperimentConfig = self._parse_model(
            self.load_yaml(path), EXPERIMENT_SCHEMA, ExperimentConfig, path
        )
        self._resolve_dataset(config, path)
        config.spaces = self._resolve(config.spaces, path)
        return config

    def load_scl(self, path: str) -> SclExperimentConfig:
        """Reads the config of the `scl` command."""
        config: SclExperimentConfig = self._parse_model(
            self.load_yaml(path), SCL_SCHEMA, SclExperimentConfig, path
        )
        self._resolve_dataset(config, path)
        return config

    @staticmethod
    def detect_kind(data: dict[str, Any]) -> str:
        """Guesses which kind of file a parsed mapping is: spaces, predictions, scl or run."""
        if "sequels" in data:
            return "spaces"
        if "members" in data:
            return "predictions"
        if "partitions" in data or "sampling" in data:
            return "scl"
        return "run"

    # --- PREDICTIONS ---

    def load_predictions(self, path: str) -> PredictionBundle:
        """Reads a sidecar file and every prediction matrix it binds to a space.

        Raises:
            SchemaError: if the sidecar breaks its schema or members name different OOD sources
            ShapeMismatchError: if a matrix's columns disagree with its space, naming the file
        """
        data = self.load_yaml(path)
        self.check_schema(data, PREDICTIONS_SCHEMA, path)
        n = data["num_classes"]

        members = []
        sources: list[str] | None = None
        for index, entry in enumerate(data["members"]):
            space = explicit_space(entry["space"], n)
            if sources is None:
                sources = list(entry["ood"])
            elif list(entry["ood"]) != sources:
                raise SchemaError(f"{path}: member {index} names OOD sources {list(entry['ood'])}")

            matrices = {}
            for name, matrix_path in [("in_distribution", entry["in_distribution"])] + list(
                entry["ood"].items()
            ):
                resolved = self._resolve(matrix_path, path) or matrix_path
                _, matrix = read_prediction_matrix(resolved)
                if matrix.shape[1] != space.num_blocks:
                    raise ShapeMismatchError(
                        f"{resolved}: {matrix.shape[1]} columns for space {space} "
                        f"with {space.num_blocks} blocks"
                    )
                matrices[name] = MemberPrediction(space=space, matrix=matrix)

            in_prediction = matrices.pop("in_distribution")
            members.append(BundleMember(space=space, in_distribution=in_prediction, ood=matrices))

        labels = None
        if "labels" in data:
            labels_path = self._resolve(data["labels"], path) or data["labels"]
            _, labels = read_labels(labels_path, n)
            if len(labels) != members[0].in_distribution.rows:
                raise ShapeMismatchError(
                    f"{labels_path}: {len(labels)} labels for "
                    f"{members[0].in_distribution.rows} prediction rows"
                )

        logger.info(f"ingested {len(members)} members with OOD sources {sources} from {path}")
        return PredictionBundle(num_classes=n, members=tuple(members), labels=labels)
