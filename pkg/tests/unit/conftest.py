#!/usr/bin/env python3
# Copyright 2024 Canonical Ltd.
# See LICENSE file for licensing details.

from typing import Callable

import pytest

from core.models import LabeledDataset
from core.structured_config import SyntheticSpec
from managers.datasets import gen_gaussian_blobs
from workload import LocalWorkload


@pytest.fixture(scope="session")
def blobs_factory() -> Callable[..., LabeledDataset]:
    """Well separated circle-layout blobs, small enough for quick training."""

    def make(
        num_classes: int = 4,
        seed: int = 0,
        per_class_count: int = 40,
        dims: int = 2,
        class_mean_scale: float = 6.0,
    ) -> LabeledDataset:
        return gen_gaussian_blobs(
            SyntheticSpec(
                num_classes=num_classes,
                dims=dims,
                per_class_count=per_class_count,
                class_mean_scale=class_mean_scale,
                noise_sigma=0.5,
                seed=seed,
            )
        )

    return make


@pytest.fixture
def workload(tmp_path) -> LocalWorkload:
    return LocalWorkload(out_dir=str(tmp_path))
