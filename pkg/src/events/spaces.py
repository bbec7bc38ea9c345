#!/usr/bin/env python3
# Copyright 2024 Canonical Ltd.
# See LICENSE file for licensing details.

"""Handler for the `spaces` command."""

import argparse
import logging
from typing import TYPE_CHECKING

from core.exceptions import ConfigError
from core.models import ClassSet, FittedEnsembleSpec, Sequel, SuperclassSpace
from literals import Status
from managers.spaces import (
    check_sequel,
    construct_random_spec,
    default_sequels,
    explicit_space,
    gen_consecutive_pairs,
    gen_strided_pairs,
)

if TYPE_CHECKING:
    from cli import FittedEnsembleToolkit

logger = logging.getLogger(__name__)

SPACES_FILENAME = "spaces.yaml"


def parse_blocks(text: str) -> list[list[int]]:
    """Parses `0,3;1,2` into `[[0, 3], [1, 2]]`."""
    try:
        return [
            [int(index) for index in block.split(",") if index.strip()]
            for block in text.split(";")
        ]
    except ValueError:
        raise ConfigError(f"blocks must look like '0,3;1,2', got {text!r}")


class SpacesHandler:
    """Generates superclass spaces and writes them as a spaces file."""

    def __init__(self, toolkit):
        self.toolkit: "FittedEnsembleToolkit" = toolkit

    def register(self, subparsers, parents: list[argparse.ArgumentParser]) -> None:
        """Adds the `spaces` sub-command."""
        parser = subparsers.add_parser(
            "spaces", parents=parents, help="generate superclass spaces and sequels"
        )
        parser.add_argument("--n", type=int, required=True, help="number of classes")
        parser.add_argument(
            "--scheme",
            choices=["consecutive", "strided", "random", "explicit", "default"],
            default="consecutive",
        )
        parser.add_argument(
            "--offset",
            type=int,
            action="append",
            help="pairing offset, repeat for one space per offset (default 0)",
        )
        parser.add_argument("--stride", type=int, default=2)
        parser.add_argument("--block-size", type=int, default=2)
        parser.add_argument("--count", type=int, default=1, help="number of random spaces")
        parser.add_argument(
            "--blocks", action="append", help="explicit space as '0,3;1,2', repeatable"
        )
        parser.add_argument("--uneven", choices=["allow", "error"], default="error")
        parser.add_argument(
            "--no-identity", action="store_true", help="exclude the identity member"
        )
        parser.set_defaults(handler=self._on_spaces)

    def build_spec(self, args: argparse.Namespace) -> FittedEnsembleSpec:
        """The fitted-ensemble spec described by the command-line arguments."""
        n = args.n
        class_set = ClassSet(num_classes=n)
        include_identity = not args.no_identity
        offsets = args.offset or [0]

        if args.scheme == "default":
            sequels = tuple(default_sequels(n, args.uneven))
            return FittedEnsembleSpec(class_set, sequels, include_identity)

        if args.scheme == "random":
            seed = args.seed if args.seed is not None else 0
            return construct_random_spec(
                class_set, [args.count], args.block_size, seed, include_identity
            )

        spaces: list[SuperclassSpace]
        if args.scheme == "consecutive":
            spaces = [gen_consecutive_pairs(n, offset, args.uneven) for offset in offsets]
        elif args.scheme == "strided":
            spaces = [gen_strided_pairs(n, args.stride, offset, args.uneven) for offset in offsets]
        else:
            if not args.blocks:
                raise ConfigError("--scheme explicit needs at least one --blocks")
            spaces = [explicit_space(parse_blocks(text), n) for text in args.blocks]

        sequel = Sequel(spaces=tuple(spaces))
        check_sequel(sequel)
        return FittedEnsembleSpec(class_set, (sequel,), include_identity)

    def _on_spaces(self, args: argparse.Namespace) -> Status:
        """Handler for the `spaces` command."""
        with self.toolkit.stage("spaces"):
            spec = self.build_spec(args)

        with self.toolkit.stage("report"):
            text = self.toolkit.config_manager.dump_spaces(spec)
            if args.out:
                self.toolkit.set_output(args.out)
                path = f"{self.toolkit.workload.paths.out_dir}/{SPACES_FILENAME}"
                self.toolkit.config_manager.save_spaces(spec, path)
                logger.info(f"wrote {spec.num_members} member spaces to {path}")
            if args.pretty or not args.out:
                self.toolkit.echo(text)

        return Status.ACTIVE
