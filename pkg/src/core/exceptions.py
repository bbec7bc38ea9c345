#!/usr/bin/env python3
# Copyright 2024 Canonical Ltd.
# See LICENSE file for licensing details.

"""Exceptions raised across the fitted-ensembles toolkit."""


class FittedEnsembleError(Exception):
    """Base class for all toolkit errors."""


# --- SPACES ---


class SpaceValidationError(FittedEnsembleError, ValueError):
    """A superclass space is not a partition of the class set."""


class OverlapError(SpaceValidationError):
    """A class index appears in more than one block."""

    def __init__(self, class_index: int):
        super().__init__(f"class {class_index} appears in more than one block")
        self.class_index = class_index


class CoverageError(SpaceValidationError):
    """Some class indices are in no block, or a block holds an out-of-range index."""

    def __init__(self, missing: list[int], extra: list[int] | None = None):
        message = f"classes {missing} are not covered by any block"
        if extra:
            message = f"{message}; indices {extra} are outside the class set"
        super().__init__(message)
        self.missing = missing
        self.extra = extra or []


class EmptyBlockError(SpaceValidationError):
    """A block of a superclass space is empty."""

    def __init__(self, block_index: int):
        super().__init__(f"block {block_index} is empty")
        self.block_index = block_index


class PairingError(FittedEnsembleError, ValueError):
    """The stride walk cannot pair all classes."""


class OddClassCountError(PairingError):
    """A pair generator was asked to pair an odd number of classes."""


class UnknownClassError(FittedEnsembleError, ValueError):
    """A label is outside the known class set."""


# --- CONFIG AND DATA ---


class ConfigError(FittedEnsembleError, ValueError):
    """Invalid hyperparameters or experiment configuration."""


class SchemaError(FittedEnsembleError, ValueError):
    """A structured file does not match its documented schema."""


class ParseError(FittedEnsembleError, ValueError):
    """A text file could not be parsed."""

    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        location = ":".join(str(part) for part in (path, line) if part is not None)
        super().__init__(f"{location}: {message}" if location else message)
        self.line = line
        self.path = path


class DegenerateDataError(FittedEnsembleError, ValueError):
    """Training data holds fewer than two distinct classes."""


class EmptyPartDataError(FittedEnsembleError, ValueError):
    """A partition part has no training examples."""


# --- INFERENCE ---


class DimensionMismatchError(FittedEnsembleError, ValueError):
    """Feature dimension differs from the training dimension."""


class ShapeMismatchError(FittedEnsembleError, ValueError):
    """Prediction matrices disagree with each other or with their spaces."""


class EmptyMemberListError(FittedEnsembleError, ValueError):
    """Rectification was asked to run without members."""


class SpecMismatchError(FittedEnsembleError, ValueError):
    """Aggregated ensembles were built from different specs."""


class ArityMismatchError(FittedEnsembleError, ValueError):
    """A part output has a different length than its part."""


class InfeasibleConstraintError(FittedEnsembleError, ValueError):
    """No partition satisfies the requested size constraints."""


# --- METRICS ---


class EmptyInputError(FittedEnsembleError, ValueError):
    """A metric received an empty confidence list."""


class OutOfRangeError(FittedEnsembleError, ValueError):
    """A confidence value lies outside [0, 1]."""
