"""Shared generators for random spaces, partitions, and operator instances."""

import numpy as np
import pytest

from condop import (
    FunctionOnSpace,
    MeasureSpace,
    PartitionAlgebra,
    function_on,
    make_partition,
    make_space,
)


def random_space(rng: np.random.Generator, max_points: int = 64, min_points: int = 2) -> MeasureSpace:
    n = int(rng.integers(min_points, max_points + 1))
    return make_space(rng.uniform(0.05, 2.0, n))


def random_partition(rng: np.random.Generator, space: MeasureSpace, max_blocks: int = 16) -> PartitionAlgebra:
    n = space.n_points
    m = int(rng.integers(1, min(max_blocks, n) + 1))
    assignment = np.concatenate([np.arange(m), rng.integers(0, m, n - m)])
    rng.shuffle(assignment)
    return make_partition(space, assignment)


def random_function(
    rng: np.random.Generator,
    space: MeasureSpace,
    real: bool = False,
    nonneg: bool = False,
) -> FunctionOnSpace:
    n = space.n_points
    if nonneg:
        return function_on(space, rng.uniform(0.0, 3.0, n).astype(complex))
    values = rng.standard_normal(n)
    if not real:
        values = values + 1j * rng.standard_normal(n)
    return function_on(space, values)


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
