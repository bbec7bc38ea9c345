#!/usr/bin/env python3
# Copyright 2024 Canonical Ltd.
# See LICENSE file for licensing details.

"""Manager for writing metrics reports, histograms, SCL reports and run manifests."""

import logging
from datetime import datetime, timezone
from typing import Any

import yaml
from pydantic import BaseModel

from core.models import MeanStd, MetricsReport, SclPartition, SclResult
from core.schemas import MANIFEST_SCHEMA, REPORT_SCHEMA, SCL_REPORT_SCHEMA
from core.workload import WorkloadBase
from literals import TOOLKIT_KEY, TOOLKIT_VERSION
from managers.config import ConfigManager, config_hash
from managers.metrics import bin_edges, render_table
from managers.scl import summarize_scl

logger = logging.getLogger(__name__)


def _percent(value: float | None) -> float | None:
    """A rate as a percentage rounded to two decimals."""
    return None if value is None else round(100.0 * value, 2)


def _mean_std(value: MeanStd | None) -> dict[str, Any] | None:
    if value is None:
        return None
    return {"mean": _percent(value.mean), "std": _percent(value.std), "count": value.count}


def _dump(data: dict[str, Any]) -> str:
    return yaml.safe_dump(data, sort_keys=False, default_flow_style=None, width=100)


class ReportManager:
    """Object for rendering and writing experiment outputs through the workload."""

    def __init__(self, workload: WorkloadBase):
        self.workload = workload
        self.written: list[str] = []

    def _write(self, content: str, path: str) -> None:
        self.workload.write(content=content, path=path)
        self.written.append(path)

    def _relative(self, path: str) -> str:
        prefix = f"{self.workload.paths.out_dir}/"
        return path[len(prefix) :] if path.startswith(prefix) else path

    @staticmethod
    def format_histogram(report: MetricsReport) -> str:
        """Histogram CSV text, `bin_low,bin_high,count_in,count_out`."""
        lines = ["bin_low,bin_high,count_in,count_out"]
        edges = bin_edges(len(report.histogram_in))
        for (low, high), count_in, count_out in zip(
            edges, report.histogram_in, report.histogram_out
        ):
            lines.append(f"{low},{high},{count_in},{count_out}")
        return "\n".join(lines) + "\n"

    def metrics_entry(self, model: str, source: str, report: MetricsReport) -> dict[str, Any]:
        """Report object of one (model, OOD source) pair, rates as percentages."""
        return {
            "model": model,
            "ood_source": source,
            "num_in": report.num_in,
            "num_out": report.num_out,
            "fpr_at_95_tpr": _percent(report.fpr_at_95_tpr),
            "auroc": _percent(report.auroc),
            "detection_error": _percent(report.detection_error),
            "avg_miss_conf": _mean_std(report.avg_miss_conf),
            "avg_correct_conf": _mean_std(report.avg_correct_conf),
            "avg_total_conf": _mean_std(report.avg_total_conf),
            "accuracy": _percent(report.accuracy),
            "histogram": self._relative(self.workload.paths.histogram(model, source)),
        }

    def write_metrics(self, results: dict[str, dict[str, MetricsReport]]) -> dict[str, Any]:
        """Writes the metrics report, one histogram CSV per pair and the table rendering.

        Args:
            results: reports keyed by OOD source, then by model name

        Returns:
            The report mapping as written
        """
        self.workload.make_dir(self.workload.paths.histograms_dir)
        entries = []
        tables = []
        for source, columns in results.items():
            for model, report in columns.items():
                entries.append(self.metrics_entry(model, source, report))
                self._write(
                    self.format_histogram(report), self.workload.paths.histogram(model, source)
                )
            tables.append(f"OOD source: {source}\n{render_table(columns)}")

        data = {"toolkit": TOOLKIT_KEY, "version": TOOLKIT_VERSION, "results": entries}
        ConfigManager.check_schema(data, REPORT_SCHEMA, self.workload.paths.report)
        self._write(_dump(data), self.workload.paths.report)
        self._write("\n".join(tables), self.workload.paths.table)
        return data

    def write_scl(
        self, experiments: list[tuple[SclPartition, str, list[SclResult]]]
    ) -> dict[str, Any]:
        """Writes the SCL report: every run's result and the mean/std per (partition, builder)."""
        entries = [
            {
                "partition": partition.to_lists(),
                "builder": builder,
                "runs": [result.to_dict() for result in results],
                "summary": summarize_scl(results),
            }
            for partition, builder, results in experiments
        ]
        data = {"toolkit": TOOLKIT_KEY, "version": TOOLKIT_VERSION, "experiments": entries}
        ConfigManager.check_schema(data, SCL_REPORT_SCHEMA, self.workload.paths.scl_report)
        self._write(_dump(data), self.workload.paths.scl_report)
        return data

    @staticmethod
    def render_scl_table(experiments: list[tuple[SclPartition, str, list[SclResult]]]) -> str:
        """Comparative SCL accuracy table, one row per partition, `mean (std)` per builder."""
        builders = list(dict.fromkeys(builder for _, builder, _ in experiments))
        rows: dict[str, dict[str, str]] = {}
        for partition, builder, results in experiments:
            summary = summarize_scl(results)["scl_accuracy"]
            cell = f"{100 * summary['mean']:.2f} ({100 * summary['std']:.2f})"
            rows.setdefault(str(partition.to_lists()), {})[builder] = cell

        table = [["partition"] + builders]
        table += [[name] + [cells.get(b, "") for b in builders] for name, cells in rows.items()]
        widths = [max(len(row[col]) for row in table) for col in range(len(table[0]))]
        return (
            "\n".join(
                "  ".join(cell.ljust(widths[col]) for col, cell in enumerate(row)).rstrip()
                for row in table
            )
            + "\n"
        )

    def write_manifest(
        self,
        command: str,
        config: BaseModel,
        seed: int,
        stage_seeds: dict[str, int],
        timestamp: str | None = None,
    ) -> dict[str, Any]:
        """Writes the run manifest; `timestamp` is always the last line of the file."""
        data = {
            "toolkit": TOOLKIT_KEY,
            "version": TOOLKIT_VERSION,
            "command": command,
            "config_hash": config_hash(config),
            "seed": seed,
            "stage_seeds": dict(stage_seeds),
            "files": [self._relative(path) for path in self.written],
            "timestamp": timestamp or datetime.now(timezone.utc).isoformat(timespec="seconds"),
        }
        ConfigManager.check_schema(data, MANIFEST_SCHEMA, self.workload.paths.manifest)
        self.workload.write(content=_dump(data), path=self.workload.paths.manifest)
        return data
