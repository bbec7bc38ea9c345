#!/usr/bin/env python3
# Copyright 2024 Canonical Ltd.
# See LICENSE file for licensing details.

from pathlib import Path

import pytest
import yaml

from core.models import ConfidenceSample, SclPartition, SclResult
from core.structured_config import TrainConfig
from literals import TOOLKIT_KEY
from managers.metrics import evaluate_ood
from managers.report import ReportManager


@pytest.fixture
def report_manager(workload) -> ReportManager:
    return ReportManager(workload)


@pytest.fixture
def results():
    in_conf = [0.9, 0.8, 0.95, 0.7]
    samples = [ConfidenceSample(c, True, c > 0.75) for c in in_conf]
    report = evaluate_ood(in_conf, [0.1, 0.2, 0.75], num_bins=4, samples=samples)
    return {"noise": {"fitted": report, "identity": report}}


def test_write_metrics(report_manager, results, tmp_path):
    data = report_manager.write_metrics(results)

    written = yaml.safe_load((tmp_path / "metrics.yaml").read_text())
    assert written == data
    assert written["toolkit"] == TOOLKIT_KEY
    assert [(e["model"], e["ood_source"]) for e in written["results"]] == [
        ("fitted", "noise"),
        ("identity", "noise"),
    ]

    entry = written["results"][0]
    assert entry["auroc"] == round(100 * results["noise"]["fitted"].auroc, 2)
    assert entry["accuracy"] == 75.0
    assert entry["histogram"] == "histograms/fitted__noise.csv"
    assert (tmp_path / "table.txt").read_text().startswith("OOD source: noise\n")


def test_write_metrics_creates_histograms_dir(report_manager, results, workload, mocker):
    make_dir = mocker.spy(workload, "make_dir")

    report_manager.write_metrics(results)

    make_dir.assert_called_once_with(workload.paths.histograms_dir)
    assert Path(workload.paths.histograms_dir).is_dir()


def test_histogram_csv(report_manager, results, tmp_path):
    report_manager.write_metrics(results)

    lines = (tmp_path / "histograms" / "fitted__noise.csv").read_text().splitlines()
    assert lines == [
        "bin_low,bin_high,count_in,count_out",
        "0.0,0.25,0,2",
        "0.25,0.5,0,0",
        "0.5,0.75,1,0",
        "0.75,1.0,3,1",
    ]


@pytest.fixture
def experiments():
    partition = SclPartition(parts=((0, 1), (2, 3)), num_classes=4)
    plain = [SclResult(0.5, 1.0, (1.0, None), partition, 0.5, 2)] * 2
    fitted = [SclResult(1.0, 1.0, (1.0, 1.0), partition, 0.0, 2)] * 2
    return [(partition, "plain", plain), (partition, "fitted", fitted)]


def test_write_scl(report_manager, experiments, tmp_path):
    data = report_manager.write_scl(experiments)

    written = yaml.safe_load((tmp_path / "scl.yaml").read_text())
    assert written == data
    assert [e["builder"] for e in written["experiments"]] == ["plain", "fitted"]
    assert written["experiments"][0]["partition"] == [[0, 1], [2, 3]]
    assert written["experiments"][0]["summary"]["gap"] == {"mean": 0.5, "std": 0.0}
    assert written["experiments"][0]["runs"][0]["per_part_accuracy"] == [1.0, None]


def test_render_scl_table(experiments):
    lines = ReportManager.render_scl_table(experiments).splitlines()

    assert lines[0].split() == ["partition", "plain", "fitted"]
    assert lines[1].startswith("[[0, 1], [2, 3]]")
    assert lines[1].endswith("50.00 (0.00)  100.00 (0.00)")


def test_write_manifest(report_manager, results, tmp_path):
    report_manager.write_metrics(results)
    config = TrainConfig(seed=4)

    data = report_manager.write_manifest(
        "run", config, 4, {"data": 1, "train": 2}, timestamp="2024-01-01T00:00:00+00:00"
    )

    text = (tmp_path / "manifest.yaml").read_text()
    assert yaml.safe_load(text) == data
    assert text.rstrip().splitlines()[-1].startswith("timestamp:")
    assert data["stage_seeds"] == {"data": 1, "train": 2}
    assert "metrics.yaml" in data["files"]
    assert "histograms/identity__noise.csv" in data["files"]
    assert Path(tmp_path / "metrics.yaml").exists()


def test_manifest_is_stable_apart_from_timestamp(report_manager):
    config = TrainConfig(seed=4)

    first = report_manager.write_manifest("run", config, 4, {"data": 1})
    second = report_manager.write_manifest("run", config, 4, {"data": 1})

    first.pop("timestamp")
    second.pop("timestamp")
    assert first == second
