#!/usr/bin/env python3
# Copyright 2024 Canonical Ltd.
# See LICENSE file for licensing details.

import os

import pytest

from cli import FittedEnsembleToolkit

BASE_DIR = os.path.abspath(os.path.join(os.path.dirname(os.path.realpath(__file__)), "..", ".."))


@pytest.fixture(scope="module")
def demo_config() -> str:
    """The `run` config shipped at the repository root."""
    return f"{BASE_DIR}/config.yaml"


@pytest.fixture(scope="module")
def demo_scl_config() -> str:
    """The `scl` config shipped at the repository root."""
    return f"{BASE_DIR}/config-scl.yaml"


@pytest.fixture
def toolkit(tmp_path) -> FittedEnsembleToolkit:
    return FittedEnsembleToolkit(out_dir=str(tmp_path))


@pytest.fixture
def patched_basic_config(mocker):
    return mocker.patch("cli.logging.basicConfig")
