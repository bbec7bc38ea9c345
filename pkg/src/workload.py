#!/usr/bin/env python3
# Copyright 2023 Canonical Ltd.
# See LICENSE file for licensing details.

"""LocalWorkload class and methods."""

import logging
from pathlib import Path

from typing_extensions import override

from core.workload import ExperimentPaths, WorkloadBase

logger = logging.getLogger(__name__)


class LocalWorkload(WorkloadBase):
    """Wrapper for performing file operations on the local filesystem."""

    def __init__(self, out_dir: str = ".") -> None:
        self.paths = ExperimentPaths(out_dir=out_dir)

    @override
    def read(self, path: str) -> list[str]:
        if not Path(path).exists():
            return []

        return Path(path).read_text(encoding="utf-8").split("\n")

    @override
    def write(self, content: str, path: str, mode: str = "w") -> None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, mode, encoding="utf-8", newline="\n") as f:
            f.write(content)
        logger.debug(f"Wrote {len(content)} characters to {path}")

    @override
    def exists(self, path: str) -> bool:
        return Path(path).exists()

    @override
    def make_dir(self, path: str) -> None:
        Path(path).mkdir(parents=True, exist_ok=True)
