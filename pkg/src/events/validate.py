#!/usr/bin/env python3
# Copyright 2024 Canonical Ltd.
# See LICENSE file for licensing details.

"""Handler for the `validate` command."""

import argparse
import logging
from typing import TYPE_CHECKING

from core.structured_config import DatasetSource
from literals import Status
from managers.datasets import load_csv_dataset

if TYPE_CHECKING:
    from cli import FittedEnsembleToolkit

logger = logging.getLogger(__name__)


class ValidateHandler:
    """Checks config, spaces and sidecar files, and the data they point at, without training."""

    def __init__(self, toolkit):
        self.toolkit: "FittedEnsembleToolkit" = toolkit

    def register(self, subparsers, parents: list[argparse.ArgumentParser]) -> None:
        """Adds the `validate` sub-command."""
        parser = subparsers.add_parser(
            "validate", parents=parents, help="check config and data files without running"
        )
        parser.add_argument("files", nargs="+", help="config, spaces or predictions files")
        parser.set_defaults(handler=self._on_validate)

    def check_dataset(self, dataset: DatasetSource) -> None:
        """Parses every data file a dataset source references."""
        if dataset.train_csv:
            train = load_csv_dataset(dataset.train_csv)
            logger.debug(f"{dataset.train_csv}: {len(train)} rows, {train.num_classes} classes")
            if dataset.test_csv:
                load_csv_dataset(dataset.test_csv, train.num_classes)
        if dataset.predictions:
            self.toolkit.config_manager.load_predictions(dataset.predictions)

    def check_file(self, path: str) -> str:
        """Validates one file according to its detected kind, returning the kind."""
        manager = self.toolkit.config_manager
        kind = manager.detect_kind(manager.load_yaml(path))

        if kind == "spaces":
            manager.load_spaces(path)
        elif kind == "predictions":
            manager.load_predictions(path)
        elif kind == "scl":
            self.check_dataset(manager.load_scl(path).dataset)
        else:
            config = manager.load_experiment(path)
            self.check_dataset(config.dataset)
            if config.spaces:
                manager.load_spaces(config.spaces, config.include_identity)

        logger.info(f"{path}: valid {kind} file")
        return kind

    def _on_validate(self, args: argparse.Namespace) -> Status:
        """Handler for the `validate` command."""
        with self.toolkit.stage("config"):
            for path in args.files:
                self.check_file(path)

        return Status.VALID
