#!/usr/bin/env python3
# Copyright 2024 Canonical Ltd.
# See LICENSE file for licensing details.

"""Collection of globals common to the fitted-ensembles toolkit."""

from dataclasses import dataclass
from enum import Enum
from typing import Literal

TOOLKIT_KEY = "fitted-ensembles"
TOOLKIT_VERSION = "1.0"

Scheme = Literal["consecutive", "strided", "random", "explicit"]
Uneven = Literal["allow", "error"]
Builder = Literal["plain", "fitted"]
OodKind = Literal["uniform", "gaussian", "rademacher"]
MeanLayout = Literal["simplex", "circle"]
DebugLevel = Literal["DEBUG", "INFO", "WARNING", "ERROR"]

# row-stochastic tolerances
ROW_SUM_TOLERANCE = 1e-6
PREDICT_ROW_SUM_TOLERANCE = 1e-9
INGEST_ROW_SUM_TOLERANCE = 1e-4

DEFAULT_TPR_TARGET = 0.95
DEFAULT_NUM_BINS = 20
FLOAT_FORMAT = "{:.17g}"

# identity member key, ordered after every (sequel, space) key
IDENTITY_KEY = "identity"

STAGES = ["data", "spaces", "train", "predict", "metrics", "report"]

PATHS = {
    "REPORT": "metrics.yaml",
    "SCL_REPORT": "scl.yaml",
    "MANIFEST": "manifest.yaml",
    "HISTOGRAMS": "histograms",
    "TABLE": "table.txt",
}

TABLE_ROWS = {
    "avg_miss_conf": "Avg. miss-prediction conf.",
    "avg_correct_conf": "Avg. correct prediction conf.",
    "avg_total_conf": "Avg. total prediction conf.",
    "accuracy": "Classification Accuracy",
    "fpr_at_95_tpr": "FPR at 95% TPR",
    "auroc": "Area under ROC curve",
    "detection_error": "Best detection error",
}

UNDEFINED = "undefined"


@dataclass
class StatusLevel:
    """Status object helper."""

    message: str
    log_level: DebugLevel
    exit_code: int


class Status(Enum):
    """Collection of possible outcomes for a toolkit command."""

    ACTIVE = StatusLevel("all stages completed", "INFO", 0)
    CONFIG_INVALID = StatusLevel("configuration rejected", "ERROR", 2)
    DATA_INVALID = StatusLevel("input data rejected", "ERROR", 3)
    STAGE_FAILED = StatusLevel("stage failed", "ERROR", 1)
    VALID = StatusLevel("configuration and data files are valid", "INFO", 0)
