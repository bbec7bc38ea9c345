#!/usr/bin/env python3
# Copyright 2024 Canonical Ltd.
# See LICENSE file for licensing details.

"""JSON schemas of the files the toolkit reads and writes."""

_BLOCKS = {
    "type": "array",
    "items": {"type": "array", "items": {"type": "integer", "minimum": 0}},
}

_SEQUELS = {"type": "array", "minItems": 1, "items": {"type": "array", "items": _BLOCKS}}

SPACES_SCHEMA = {
    "type": "object",
    "required": ["num_classes", "sequels"],
    "additionalProperties": False,
    "properties": {
        "num_classes": {"type": "integer", "minimum": 2},
        "include_identity": {"type": "boolean"},
        "sequels": _SEQUELS,
    },
}

_TRAIN = {"type": "object"}

_DATASET = {
    "type": "object",
    "minProperties": 1,
    "properties": {
        "synthetic": {"type": "object"},
        "train_csv": {"type": "string"},
        "test_csv": {"type": "string"},
        "predictions": {"type": "string"},
    },
}

EXPERIMENT_SCHEMA = {
    "type": "object",
    "required": ["seed", "dataset"],
    "properties": {
        "seed": {"type": "integer", "minimum": 0},
        "dataset": _DATASET,
        "spaces": {"type": ["string", "null"]},
        "include_identity": {"type": ["boolean", "null"]},
        "train": _TRAIN,
        "ood": {
            "type": "object",
            "properties": {
                "held_out_classes": {"type": "array", "items": {"type": "integer"}},
                "artificial": {
                    "type": "array",
                    "items": {"enum": ["uniform", "gaussian", "rademacher"]},
                },
            },
        },
        "num_ensembles": {"type": "integer"},
        "test_fraction": {"type": "number"},
        "num_bins": {"type": "integer"},
        "tpr_target": {"type": "number"},
        "uneven": {"enum": ["allow", "error"]},
        "output_dir": {"type": ["string", "null"]},
    },
}

SCL_SCHEMA = {
    "type": "object",
    "required": ["seed", "dataset"],
    "properties": {
        "seed": {"type": "integer", "minimum": 0},
        "dataset": _DATASET,
        "partitions": {"type": "array", "items": _BLOCKS},
        "sampling": {"type": "object"},
        "builders": {"type": "array", "items": {"enum": ["plain", "fitted"]}},
        "part_spaces": {"type": "array", "items": _BLOCKS},
        "train": _TRAIN,
        "runs": {"type": "integer"},
        "num_ensembles": {"type": "integer"},
        "test_fraction": {"type": "number"},
        "output_dir": {"type": ["string", "null"]},
    },
}

PREDICTIONS_SCHEMA = {
    "type": "object",
    "required": ["num_classes", "members"],
    "additionalProperties": False,
    "properties": {
        "num_classes": {"type": "integer", "minimum": 2},
        "labels": {"type": "string"},
        "members": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["space", "in_distribution", "ood"],
                "additionalProperties": False,
                "properties": {
                    "space": _BLOCKS,
                    "in_distribution": {"type": "string"},
                    "ood": {
                        "type": "object",
                        "minProperties": 1,
                        "additionalProperties": {"type": "string"},
                    },
                },
            },
        },
    },
}

_RATE = {"type": ["number", "null"]}

_MEAN_STD = {
    "type": "object",
    "required": ["mean", "std", "count"],
    "properties": {"mean": _RATE, "std": _RATE, "count": {"type": "integer"}},
}

REPORT_SCHEMA = {
    "type": "object",
    "required": ["toolkit", "version", "results"],
    "properties": {
        "toolkit": {"type": "string"},
        "version": {"type": "string"},
        "results": {
            "type": "array",
            "items": {
                "type": "object",
                "required": [
                    "model",
                    "ood_source",
                    "num_in",
                    "num_out",
                    "fpr_at_95_tpr",
                    "auroc",
                    "detection_error",
                    "histogram",
                ],
                "properties": {
                    "model": {"type": "string"},
                    "ood_source": {"type": "string"},
                    "num_in": {"type": "integer"},
                    "num_out": {"type": "integer"},
                    "fpr_at_95_tpr": _RATE,
                    "auroc": _RATE,
                    "detection_error": _RATE,
                    "avg_miss_conf": {"oneOf": [_MEAN_STD, {"type": "null"}]},
                    "avg_correct_conf": {"oneOf": [_MEAN_STD, {"type": "null"}]},
                    "avg_total_conf": {"oneOf": [_MEAN_STD, {"type": "null"}]},
                    "accuracy": _RATE,
                    "histogram": {"type": "string"},
                },
            },
        },
    },
}

_SUMMARY_VALUE = {
    "type": "object",
    "required": ["mean", "std"],
    "properties": {"mean": {"type": "number"}, "std": {"type": "number"}},
}

SCL_REPORT_SCHEMA = {
    "type": "object",
    "required": ["toolkit", "version", "experiments"],
    "properties": {
        "toolkit": {"type": "string"},
        "version": {"type": "string"},
        "experiments": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["partition", "builder", "runs", "summary"],
                "properties": {
                    "partition": _BLOCKS,
                    "builder": {"enum": ["plain", "fitted"]},
                    "runs": {
                        "type": "array",
                        "items": {
                            "type": "object",
                            "required": [
                                "scl_accuracy",
                                "routed_accuracy_bound",
                                "gap",
                                "per_part_accuracy",
                                "partition",
                            ],
                        },
                    },
                    "summary": {
                        "type": "object",
                        "properties": {
                            "scl_accuracy": _SUMMARY_VALUE,
                            "routed_accuracy_bound": _SUMMARY_VALUE,
                            "gap": _SUMMARY_VALUE,
                        },
                    },
                },
            },
        },
    },
}

MANIFEST_SCHEMA = {
    "type": "object",
    "required": [
        "toolkit",
        "version",
        "command",
        "config_hash",
        "seed",
        "stage_seeds",
        "timestamp",
    ],
    "properties": {
        "toolkit": {"type": "string"},
        "version": {"type": "string"},
        "command": {"type": "string"},
        "config_hash": {"type": "string", "pattern": "^[0-9a-f]{64}$"},
        "seed": {"type": "integer"},
        "stage_seeds": {"type": "object", "additionalProperties": {"type": "integer"}},
        "files": {"type": "array", "items": {"type": "string"}},
        "timestamp": {"type": "string"},
    },
}
