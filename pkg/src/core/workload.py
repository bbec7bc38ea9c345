#!/usr/bin/env python3
# Copyright 2024 Canonical Ltd.
# See LICENSE file for licensing details.

"""Supporting objects for reading and writing toolkit files."""

from abc import ABC, abstractmethod

from literals import PATHS


class ExperimentPaths:
    """Object to store the output paths of an experiment."""

    def __init__(self, out_dir: str = "."):
        self.out_dir = out_dir.rstrip("/") or "/"

    @property
    def report(self) -> str:
        """The metrics report filepath.

        Contains one object per (model, OOD source) pair.
        """
        return f"{self.out_dir}/{PATHS['REPORT']}"

    @property
    def scl_report(self) -> str:
        """The SCL report filepath."""
        return f"{self.out_dir}/{PATHS['SCL_REPORT']}"

    @property
    def manifest(self) -> str:
        """The run manifest filepath.

        Records the config hash, seeds and a trailing timestamp.
        """
        return f"{self.out_dir}/{PATHS['MANIFEST']}"

    @property
    def table(self) -> str:
        """The human-readable table rendering of the report."""
        return f"{self.out_dir}/{PATHS['TABLE']}"

    @property
    def histograms_dir(self) -> str:
        """Directory holding one histogram CSV per (model, OOD source) pair."""
        return f"{self.out_dir}/{PATHS['HISTOGRAMS']}"

    def histogram(self, model: str, source: str) -> str:
        """The histogram CSV filepath for a model and OOD source."""
        return f"{self.histograms_dir}/{model}__{source}.csv"


class WorkloadBase(ABC):
    """Base interface for common file operations."""

    paths = ExperimentPaths()

    @abstractmethod
    def read(self, path: str) -> list[str]:
        """Reads a text file.

        Args:
            path: the full filepath to read from

        Returns:
            List of string lines from the specified path
        """
        ...

    @abstractmethod
    def write(self, content: str, path: str, mode: str = "w") -> None:
        """Writes content to a text file.

        Args:
            content: string of content to write
            path: the full filepath to write to
            mode: the write mode. Usually "w" for write, or "a" for append. Default "w"
        """
        ...

    @abstractmethod
    def exists(self, path: str) -> bool:
        """Checks whether a file exists."""
        ...

    @abstractmethod
    def make_dir(self, path: str) -> None:
        """Creates a directory and its parents."""
        ...
