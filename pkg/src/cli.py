#!/usr/bin/env python3
# Copyright 2024 Canonical Ltd.
# See LICENSE file for licensing details.

"""Command-line toolkit for fitted ensembles, split-class learning and OOD evaluation."""

import argparse
import logging
import sys
from contextlib import contextmanager
from typing import Iterator

from pydantic import ValidationError

from core.exceptions import (
    ConfigError,
    DimensionMismatchError,
    FittedEnsembleError,
    ParseError,
    SchemaError,
    ShapeMismatchError,
    UnknownClassError,
)
from core.structured_config import LogLevel
from events.run import RunHandler
from events.scl import SclHandler
from events.spaces import SpacesHandler
from events.validate import ValidateHandler
from literals import TOOLKIT_KEY, TOOLKIT_VERSION, DebugLevel, Status
from managers.config import ConfigManager
from managers.report import ReportManager
from workload import LocalWorkload

logger = logging.getLogger(__name__)

CONFIG_ERRORS = (ConfigError, SchemaError, ValidationError)
DATA_ERRORS = (ParseError, ShapeMismatchError, UnknownClassError, DimensionMismatchError)


def error_status(error: Exception) -> Status:
    """The status a failed stage ends the command with."""
    if isinstance(error, CONFIG_ERRORS):
        return Status.CONFIG_INVALID
    if isinstance(error, DATA_ERRORS):
        return Status.DATA_INVALID
    return Status.STAGE_FAILED


class FittedEnsembleToolkit:
    """Entry point object holding the workload, managers and one handler per command."""

    def __init__(self, out_dir: str = "."):
        self.name = TOOLKIT_KEY
        self.current_stage = "cli"

        # HANDLERS

        self.spaces = SpacesHandler(self)
        self.run = RunHandler(self)
        self.scl = SclHandler(self)
        self.validate = ValidateHandler(self)

        # MANAGERS

        self.set_output(out_dir)

    def set_output(self, out_dir: str) -> None:
        """Points the workload and the managers at an output directory."""
        self.workload = LocalWorkload(out_dir=out_dir)
        self.config_manager = ConfigManager(workload=self.workload)
        self.report_manager = ReportManager(workload=self.workload)

    @contextmanager
    def stage(self, name: str) -> Iterator[None]:
        """Marks the running stage; errors raised inside are reported against it."""
        self.current_stage = name
        logger.debug(f"stage {name} started")
        yield
        logger.debug(f"stage {name} finished")

    def echo(self, text: str) -> None:
        """Human-readable rendering to stdout."""
        sys.stdout.write(text if text.endswith("\n") else f"{text}\n")

    def build_parser(self) -> argparse.ArgumentParser:
        """Parser with the shared options on every sub-command."""
        common = argparse.ArgumentParser(add_help=False)
        common.add_argument("--out", help="output directory")
        common.add_argument("--seed", type=int, help="master seed, overriding the config")
        common.add_argument("--pretty", action="store_true", help="print a readable summary")
        common.add_argument(
            "--log-level",
            type=LogLevel,
            choices=list(LogLevel),
            default=LogLevel.INFO,
            metavar="{DEBUG,INFO,WARNING,ERROR}",
        )

        parser = argparse.ArgumentParser(prog=TOOLKIT_KEY, description="Fitted ensembles toolkit")
        parser.add_argument("--version", action="version", version=TOOLKIT_VERSION)
        subparsers = parser.add_subparsers(dest="command", required=True)
        for handler in (self.spaces, self.run, self.scl, self.validate):
            handler.register(subparsers, parents=[common])
        return parser

    def dispatch(self, args: argparse.Namespace) -> Status:
        """Runs the handler of the parsed command, mapping toolkit errors to a status."""
        try:
            return args.handler(args)
        except (FittedEnsembleError, ValidationError) as e:
            logger.error(f"{self.current_stage}: {e}")
            return error_status(e)

    def _set_status(self, key: Status) -> int:
        """Logs the final status and returns its exit code."""
        log_level: DebugLevel = key.value.log_level

        getattr(logger, log_level.lower())(key.value.message)
        return key.value.exit_code


def main(argv: list[str] | None = None) -> int:
    """Parses the command line, runs the command and returns the exit code."""
    toolkit = FittedEnsembleToolkit()
    args = toolkit.build_parser().parse_args(argv)

    logging.basicConfig(
        level=args.log_level.value,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )
    return toolkit._set_status(toolkit.dispatch(args))


if __name__ == "__main__":
    sys.exit(main())
