#!/usr/bin/env python3
# Copyright 2024 Canonical Ltd.
# See LICENSE file for licensing details.

"""Handler for the `scl` command."""

import argparse
import logging
from typing import TYPE_CHECKING

from core.models import LabeledDataset, SclPartition, SclResult
from core.structured_config import PartitionSampling, SclExperimentConfig
from literals import STAGES, Status
from managers.config import derive_seed
from managers.datasets import gen_gaussian_blobs, load_csv_dataset, train_test_split
from managers.scl import run_scl_experiment, sample_partitions

if TYPE_CHECKING:
    from cli import FittedEnsembleToolkit

logger = logging.getLogger(__name__)


class SclHandler:
    """Runs split-class learning experiments over partitions and builders."""

    def __init__(self, toolkit):
        self.toolkit: "FittedEnsembleToolkit" = toolkit

    def register(self, subparsers, parents: list[argparse.ArgumentParser]) -> None:
        """Adds the `scl` sub-command."""
        parser = subparsers.add_parser(
            "scl", parents=parents, help="compare plain and fitted part models under SCL"
        )
        parser.add_argument("config", help="SCL experiment config file")
        parser.add_argument(
            "--partitions",
            choices=["config", "sample"],
            default="config",
            help="use the configured partitions, or sample random ones",
        )
        parser.add_argument("--count", type=int, help="number of sampled partitions")
        parser.set_defaults(handler=self._on_scl)

    def load_dataset(
        self, config: SclExperimentConfig, data_seed: int
    ) -> tuple[LabeledDataset, LabeledDataset | None]:
        """The labeled dataset, and the fixed test set when one is configured."""
        source = config.dataset
        if source.synthetic is not None:
            spec = source.synthetic
            if spec.seed is None:
                spec = spec.copy(update={"seed": data_seed})
            return gen_gaussian_blobs(spec), None

        dataset = load_csv_dataset(str(source.train_csv))
        if source.test_csv:
            return dataset, load_csv_dataset(source.test_csv, dataset.num_classes)
        return dataset, None

    def partitions(
        self, config: SclExperimentConfig, args: argparse.Namespace, num_classes: int, seed: int
    ) -> list[SclPartition]:
        """Configured partitions, or sampled ones when asked for on the command line."""
        if args.partitions == "config" and config.partitions is not None:
            return [
                SclPartition(parts=tuple(tuple(p) for p in parts), num_classes=num_classes)
                for parts in config.partitions
            ]

        sampling = config.sampling or PartitionSampling()
        if args.count is not None:
            sampling = sampling.copy(update={"count": args.count})
        return sample_partitions(
            num_classes, sampling.count, sampling.min_part_size, seed, sampling.num_parts
        )

    def _on_scl(self, args: argparse.Namespace) -> Status:
        """Handler for the `scl` command."""
        with self.toolkit.stage("config"):
            config = self.toolkit.config_manager.load_scl(args.config)
            if args.seed is not None:
                config.seed = args.seed
            self.toolkit.set_output(args.out or config.output_dir or ".")

        seeds = {stage: derive_seed(config.seed, stage) for stage in STAGES}

        with self.toolkit.stage("data"):
            dataset, fixed_test = self.load_dataset(config, seeds["data"])

        with self.toolkit.stage("spaces"):
            partitions = self.partitions(config, args, dataset.num_classes, seeds["spaces"])
            logger.info(f"{len(partitions)} partitions of {dataset.num_classes} classes")

        results: dict[tuple[int, str], list[SclResult]] = {}
        with self.toolkit.stage("train"):
            for run in range(config.runs):
                run_seed = derive_seed(config.seed, f"run-{run}")
                if fixed_test is None:
                    train, test = train_test_split(dataset, config.test_fraction, run_seed)
                else:
                    train, test = dataset, fixed_test
                train_config = config.train.copy(update={"seed": run_seed})

                for index, partition in enumerate(partitions):
                    for builder in config.builders:
                        result = run_scl_experiment(
                            train,
                            partition,
                            builder,
                            train_config,
                            test,
                            part_spaces=config.part_spaces,
                            include_identity=config.include_identity,
                            num_ensembles=config.num_ensembles,
                        )
                        results.setdefault((index, builder.value), []).append(result)
                        logger.info(
                            f"run {run} {builder.value} {partition.to_lists()}: "
                            f"accuracy {result.scl_accuracy:.4f}, "
                            f"bound {result.routed_accuracy_bound:.4f}"
                        )

        experiments = [
            (partitions[index], builder, runs) for (index, builder), runs in results.items()
        ]
        with self.toolkit.stage("report"):
            self.toolkit.report_manager.write_scl(experiments)
            for run in range(config.runs):
                seeds[f"run-{run}"] = derive_seed(config.seed, f"run-{run}")
            self.toolkit.report_manager.write_manifest("scl", config, config.seed, seeds)
            if args.pretty:
                self.toolkit.echo(self.toolkit.report_manager.render_scl_table(experiments))

        return Status.ACTIVE
