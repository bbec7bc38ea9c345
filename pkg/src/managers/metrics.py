#!/usr/bin/env python3
# Copyright 2024 Canonical Ltd.
# See LICENSE file for licensing details.

"""OOD detection metrics, confidence histograms and confidence statistics.

In-distribution examples are positives and out-of-distribution examples negatives. An
example is detected as in-distribution when its confidence is >= the threshold, and
thresholds are restricted to observed values, so every metric is an exact finite computation.
"""

import logging
from typing import Iterable, Sequence

import numpy as np

from core.exceptions import ConfigError, EmptyInputError, OutOfRangeError
from core.models import ConfidenceSample, MeanStd, MetricsReport
from literals import DEFAULT_NUM_BINS, DEFAULT_TPR_TARGET, TABLE_ROWS, UNDEFINED

logger = logging.getLogger(__name__)


def _as_confidences(values: Iterable[float], name: str) -> np.ndarray:
    array = np.asarray(list(values) if not isinstance(values, np.ndarray) else values, float)
    if array.size == 0:
        raise EmptyInputError(f"{name} confidences are empty")
    return array.ravel()


def _rate(numerator: int, denominator: int) -> float:
    """`numerator / denominator` rounded so that rate(a, d) + rate(d - a, d) == 1.0 exactly."""
    if 2 * numerator <= denominator:
        return numerator / denominator
    return 1.0 - (denominator - numerator) / denominator


def fpr_at_tpr(
    in_conf: Iterable[float], out_conf: Iterable[float], tpr_target: float = DEFAULT_TPR_TARGET
) -> float:
    """False positive rate at the largest threshold keeping at least `tpr_target` of positives.

    Raises:
        EmptyInputError: if either list is empty
    """
    in_values = _as_confidences(in_conf, "in-distribution")
    out_values = _as_confidences(out_conf, "out-of-distribution")
    if not 0.0 < tpr_target <= 1.0:
        raise ConfigError(f"tpr_target must be in (0, 1], got {tpr_target}")

    num_in = len(in_values)
    # smallest count k of positives kept whose rate k / num_in reaches the target
    needed = min(max(int(np.ceil(tpr_target * num_in)), 1), num_in)
    while needed > 1 and (needed - 1) / num_in >= tpr_target:
        needed -= 1
    while needed < num_in and needed / num_in < tpr_target:
        needed += 1

    threshold = np.sort(in_values)[::-1][needed - 1]
    return int(np.count_nonzero(out_values >= threshold)) / len(out_values)


def auroc(in_conf: Iterable[float], out_conf: Iterable[float]) -> float:
    """Probability that an in-distribution confidence beats an OOD one, ties counting half.

    Raises:
        EmptyInputError: if either list is empty
    """
    in_values = _as_confidences(in_conf, "in-distribution")
    out_values = np.sort(_as_confidences(out_conf, "out-of-distribution"))

    below = np.searchsorted(out_values, in_values, side="left")
    at_or_below = np.searchsorted(out_values, in_values, side="right")
    wins = int(below.sum())
    ties = int((at_or_below - below).sum())

    return _rate(2 * wins + ties, 2 * len(in_values) * len(out_values))


def detection_error(in_conf: Iterable[float], out_conf: Iterable[float]) -> float:
    """Minimum over thresholds of 0.5 * FNR + 0.5 * FPR.

    Candidate thresholds are every observed confidence plus -inf and +inf, so the result never
    exceeds 0.5.

    Raises:
        EmptyInputError: if either list is empty
    """
    in_values = np.sort(_as_confidences(in_conf, "in-distribution"))
    out_values = np.sort(_as_confidences(out_conf, "out-of-distribution"))
    thresholds = np.concatenate(
        [[-np.inf], np.unique(np.concatenate([in_values, out_values])), [np.inf]]
    )

    missed = np.searchsorted(in_values, thresholds, side="left")
    passed = len(out_values) - np.searchsorted(out_values, thresholds, side="left")
    errors = 0.5 * (missed / len(in_values)) + 0.5 * (passed / len(out_values))
    return float(errors.min())


def confidence_histogram(
    confidences: Iterable[float], num_bins: int = DEFAULT_NUM_BINS
) -> list[int]:
    """Counts over `num_bins` uniform bins on [0, 1]; 1.0 lands in the last bin.

    Raises:
        OutOfRangeError: for a confidence outside [0, 1]
    """
    if num_bins < 1:
        raise ConfigError(f"num_bins must be at least 1, got {num_bins}")

    values = np.asarray(
        list(confidences) if not isinstance(confidences, np.ndarray) else confidences, float
    ).ravel()
    if values.size and (values.min() < 0.0 or values.max() > 1.0 or np.isnan(values).any()):
        raise OutOfRangeError("confidences must lie in [0, 1]")

    bins = np.minimum(np.floor(values * num_bins).astype(np.int64), num_bins - 1)
    return [int(count) for count in np.bincount(bins, minlength=num_bins)]


def bin_edges(num_bins: int = DEFAULT_NUM_BINS) -> list[tuple[float, float]]:
    """Lower and upper edge of each histogram bin."""
    return [(index / num_bins, (index + 1) / num_bins) for index in range(num_bins)]


def _mean_std(values: list[float]) -> MeanStd:
    if not values:
        return MeanStd(mean=None, std=None, count=0)
    return MeanStd(mean=float(np.mean(values)), std=float(np.std(values)), count=len(values))


def confidence_stats(samples: Sequence[ConfidenceSample]) -> MetricsReport:
    """Mean and std of confidence over missed, correct and all in-distribution samples.

    Samples without a correctness flag count towards the total only. Empty groups are reported as
    undefined rather than zero.

    Raises:
        EmptyInputError: if there is no in-distribution sample
    """
    in_samples = [sample for sample in samples if sample.in_distribution]
    if not in_samples:
        raise EmptyInputError("confidence statistics need an in-distribution sample")

    correct = [s.confidence for s in in_samples if s.correct is True]
    missed = [s.confidence for s in in_samples if s.correct is False]
    if not correct or not missed:
        logger.warning(
            f"confidence statistics over {len(in_samples)} samples with {len(correct)} correct "
            f"and {len(missed)} missed predictions"
        )

    judged = len(correct) + len(missed)
    return MetricsReport(
        avg_miss_conf=_mean_std(missed),
        avg_correct_conf=_mean_std(correct),
        avg_total_conf=_mean_std([s.confidence for s in in_samples]),
        accuracy=len(correct) / judged if judged else None,
        num_in=len(in_samples),
    )


def evaluate_ood(
    in_conf: Iterable[float],
    out_conf: Iterable[float],
    num_bins: int = DEFAULT_NUM_BINS,
    tpr_target: float = DEFAULT_TPR_TARGET,
    samples: Sequence[ConfidenceSample] | None = None,
) -> MetricsReport:
    """All detection metrics and histograms for one (model, OOD source) pair.

    Raw set sizes are reported alongside; no reweighting between the two sets is applied.
    When in-distribution `samples` are given, their confidence statistics are merged in.
    """
    in_values = _as_confidences(in_conf, "in-distribution")
    out_values = _as_confidences(out_conf, "out-of-distribution")

    report = confidence_stats(samples) if samples else MetricsReport()
    report.fpr_at_95_tpr = fpr_at_tpr(in_values, out_values, tpr_target)
    report.auroc = auroc(in_values, out_values)
    report.detection_error = detection_error(in_values, out_values)
    report.histogram_in = confidence_histogram(in_values, num_bins)
    report.histogram_out = confidence_histogram(out_values, num_bins)
    report.num_in = len(in_values)
    report.num_out = len(out_values)
    return report


def format_percent(value: float | None) -> str:
    """A rate as a percentage with two decimals."""
    if value is None:
        return UNDEFINED
    return f"{100.0 * value:.2f}"


def format_mean_std(value: MeanStd | None) -> str:
    """`mean (std)` as percentages."""
    if value is None or not value.defined:
        return UNDEFINED
    return f"{format_percent(value.mean)} ({format_percent(value.std)})"


def render_table(columns: dict[str, MetricsReport]) -> str:
    """Text table with one row per metric and one column per model."""
    names = list(columns)
    rows = [[""] + names]
    for key, label in TABLE_ROWS.items():
        cells = []
        for name in names:
            value = getattr(columns[name], key)
            if isinstance(value, MeanStd) or (value is None and key.startswith("avg_")):
                cells.append(format_mean_std(value))
            else:
                cells.append(format_percent(value))
        rows.append([label] + cells)

    widths = [max(len(row[col]) for row in rows) for col in range(len(rows[0]))]
    lines = [
        "  ".join(
            cell.ljust(widths[col]) if col == 0 else cell.rjust(widths[col])
            for col, cell in enumerate(row)
        ).rstrip()
        for row in rows
    ]
    return "\n".join(lines) + "\n"
