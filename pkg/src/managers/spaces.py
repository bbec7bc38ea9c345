#!/usr/bin/env python3
# Copyright 2024 Canonical Ltd.
# See LICENSE file for licensing details.

"""Generation, validation and relabelling of superclass spaces and sequels."""

import logging
from itertools import combinations
from typing import Iterable

import numpy as np

from core.exceptions import (
    ConfigError,
    CoverageError,
    EmptyBlockError,
    OddClassCountError,
    OverlapError,
    PairingError,
    UnknownClassError,
)
from core.models import ClassSet, FittedEnsembleSpec, Sequel, SuperclassSpace
from literals import Uneven

logger = logging.getLogger(__name__)


def validate_space(space: SuperclassSpace) -> SuperclassSpace:
    """Checks a space is a partition of its class set.

    Args:
        space: the space to check

    Returns:
        The same space, for chaining

    Raises:
        EmptyBlockError: if any block is empty
        OverlapError: if a class index is in more than one block
        CoverageError: if a class index is in no block, or a block holds an
            index outside the class set
    """
    seen: set[int] = set()
    for block_index, block in enumerate(space.blocks):
        if not block:
            raise EmptyBlockError(block_index)

        for class_index in block:
            if class_index in seen:
                raise OverlapError(class_index)
            seen.add(class_index)

    expected = set(range(space.class_set_size))
    if seen != expected:
        raise CoverageError(missing=sorted(expected - seen), extra=sorted(seen - expected))

    return space


def is_resolving(sequel: Sequel) -> bool:
    """Whether every pair of distinct classes is separated by some space of the sequel.

    Equivalent to each class having a distinct signature of block indices across the spaces.
    """
    signatures = np.stack([space.block_lookup for space in sequel.spaces], axis=1)
    return len({tuple(row) for row in signatures}) == sequel.class_set_size


def unresolved_pairs(sequel: Sequel) -> list[tuple[int, int]]:
    """Class pairs that share a block in every space of the sequel."""
    lookups = [space.block_lookup for space in sequel.spaces]
    return [
        (a, b)
        for a, b in combinations(range(sequel.class_set_size), 2)
        if all(lookup[a] == lookup[b] for lookup in lookups)
    ]


def check_sequel(sequel: Sequel) -> bool:
    """Validates every space of a sequel and warns when it is not resolving."""
    for space in sequel.spaces:
        validate_space(space)

    if is_resolving(sequel):
        return True

    logger.warning(
        f"sequel {[str(space) for space in sequel.spaces]} does not resolve pairs "
        f"{unresolved_pairs(sequel)}"
    )
    return False


def _check_class_count(n: int) -> None:
    if n < 2:
        raise ConfigError(f"a class set needs at least 2 classes, got {n}")


def _stride_walk(n: int, stride: int) -> list[int]:
    """Visits 0, stride, 2*stride, ... mod n, restarting at the smallest unvisited class."""
    if stride % n == 0:
        raise PairingError(f"stride {stride} is a multiple of the class count {n}")

    visited = [False] * n
    walk: list[int] = []
    current = 0
    while len(walk) < n:
        if visited[current]:
            current = visited.index(False)
        visited[current] = True
        walk.append(current)
        current = (current + stride) % n

    return walk


def _pair_walk(walk: list[int], offset: int, uneven: Uneven) -> SuperclassSpace:
    """Rotates the walk left by `offset` and pairs consecutive entries."""
    n = len(walk)
    if n % 2 and uneven != "allow":
        raise OddClassCountError(f"cannot pair {n} classes, set uneven=allow for a block of 3")

    shift = offset % n
    rotated = walk[shift:] + walk[:shift]
    paired = n - 3 if n % 2 else n
    blocks = [rotated[i : i + 2] for i in range(0, paired, 2)]
    if n % 2:
        blocks.append(rotated[paired:])

    return SuperclassSpace.canonical(blocks, n)


def gen_consecutive_pairs(n: int, offset: int = 0, uneven: Uneven = "error") -> SuperclassSpace:
    """Pairs every two consecutive classes, starting from `offset`.

    With an odd class count and `uneven="allow"`, the final block holds three classes.

    Raises:
        OddClassCountError: odd `n` without `uneven="allow"`
    """
    _check_class_count(n)
    return _pair_walk(list(range(n)), offset, uneven)


def gen_strided_pairs(
    n: int, stride: int = 2, offset: int = 0, uneven: Uneven = "error"
) -> SuperclassSpace:
    """Pairs each class with the one `stride` steps further along the stride walk.

    The walk visits 0, stride, 2*stride, ... modulo `n`, moving on to the smallest unvisited
    class whenever it closes a cycle. The walk is rotated left by `offset` and consecutive
    entries are paired, so `stride=1` gives `gen_consecutive_pairs`, and offsets 0 and 1 of
    the same stride always form a resolving sequel for even `n >= 4`.

    With a nonzero offset, pairs span the boundaries between walk cycles and the last entry
    wraps round to the first, so the result differs from greedy ascending pairing:
    `n=8, stride=2, offset=1` gives {0,7},{1,6},{2,4},{3,5}
    where the greedy rule gives {0,6},{1,3},{2,4},{5,7}.

    Raises:
        PairingError: if `stride` is a multiple of `n`
        OddClassCountError: odd `n` without `uneven="allow"`
    """
    _check_class_count(n)
    return _pair_walk(_stride_walk(n, stride), offset, uneven)


def gen_random_partition(n: int, block_size: int, seed: int) -> SuperclassSpace:
    """Slices a seeded shuffle of the classes into runs of `block_size`.

    The final block is smaller when `block_size` does not divide `n`.
    """
    _check_class_count(n)
    if not 1 <= block_size <= n:
        raise ConfigError(f"block_size must be in 1..{n}, got {block_size}")

    order = np.random.default_rng(seed).permutation(n)
    blocks = [order[start : start + block_size] for start in range(0, n, block_size)]
    return SuperclassSpace.canonical(blocks, n)


def explicit_space(blocks: Iterable[Iterable[int]], n: int) -> SuperclassSpace:
    """Builds and validates a space from literal block lists."""
    return validate_space(SuperclassSpace.canonical(blocks, n))


def identity_space(n: int) -> SuperclassSpace:
    """The discrete partition, every class its own block."""
    _check_class_count(n)
    return SuperclassSpace(blocks=tuple((index,) for index in range(n)), class_set_size=n)


def relabel(labels: np.ndarray | list[int], space: SuperclassSpace) -> np.ndarray:
    """Maps each class label to the index of the block containing it.

    Raises:
        UnknownClassError: if a label is outside the space's class set
    """
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= space.class_set_size):
        bad = sorted({int(label) for label in labels if not 0 <= label < space.class_set_size})
        raise UnknownClassError(f"labels {bad} outside 0..{space.class_set_size - 1}")

    return space.block_lookup[labels]


def default_sequels(n: int, uneven: Uneven = "error") -> list[Sequel]:
    """The structured scheme: consecutive pairs, then stride-2 pairs, each at offsets 0 and 1."""
    sequels = [
        Sequel(spaces=(gen_consecutive_pairs(n, 0, uneven), gen_consecutive_pairs(n, 1, uneven))),
        Sequel(spaces=(gen_strided_pairs(n, 2, 0, uneven), gen_strided_pairs(n, 2, 1, uneven))),
    ]
    for sequel in sequels:
        check_sequel(sequel)

    return sequels


def adjacent_merge_sequel(n: int) -> Sequel:
    """One space per adjacent pair (j, j+1), merging that pair and keeping every other class alone.

    Resolving for `n >= 3`; each pair is merged in exactly one space.
    """
    if n < 3:
        raise ConfigError(f"adjacent merges need at least 3 classes, got {n}")

    spaces = []
    for first in range(n - 1):
        blocks = [(index,) for index in range(n) if index not in (first, first + 1)]
        blocks.append((first, first + 1))
        spaces.append(SuperclassSpace.canonical(blocks, n))

    return Sequel(spaces=tuple(spaces))


def construct_random_spec(
    class_set: ClassSet,
    sequel_sizes: list[int],
    block_size: int,
    seed: int,
    include_identity: bool = True,
) -> FittedEnsembleSpec:
    """Draws the random superclass spaces of a fitted ensemble.

    Sequel `i` gets `sequel_sizes[i]` random partitions, space `j` drawn with a seed derived
    from `(seed, i, j)`.
    """
    if not sequel_sizes or any(size < 1 for size in sequel_sizes):
        raise ConfigError(f"every sequel needs at least one space, got sizes {sequel_sizes}")

    sequels = []
    for sequel_index, size in enumerate(sequel_sizes):
        spaces = []
        for space_index in range(size):
            space_seed = int(
                np.random.SeedSequence([seed, sequel_index, space_index]).generate_state(1)[0]
            )
            spaces.append(gen_random_partition(class_set.num_classes, block_size, space_seed))

        sequel = Sequel(spaces=tuple(spaces))
        check_sequel(sequel)
        sequels.append(sequel)

    return FittedEnsembleSpec(
        class_set=class_set, sequels=tuple(sequels), include_identity=include_identity
    )
