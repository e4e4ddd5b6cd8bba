"""Shared fixtures: the worked four-target example and small helpers."""

import numpy as np
import pytest

from leakygames.game import (
    GameInstance,
    LeakageModel,
    MixedStrategy,
    PairwiseMarginals,
)

F = np.array  # terse alias for fixture literals


@pytest.fixture
def example_game() -> GameInstance:
    """Four targets, two resources; baseline value 0 at x = (2/3, 2/3, 1/3, 1/3)."""
    return GameInstance(n=4, k=2, rewards=F([1.0, 1.0, 2.0, 2.0]), costs=F([-2.0, -2.0, -1.0, -1.0]))


@pytest.fixture
def leak_first_target() -> LeakageModel:
    """Target 0 always leaks its protection status."""
    return LeakageModel.pril(p=[1.0, 0.0, 0.0, 0.0])


@pytest.fixture
def fragile_strategy() -> MixedStrategy:
    """Implements the baseline marginals but collapses once target 0 is observed."""
    return MixedStrategy.from_pairs([((0, 1), 2 / 3), ((2, 3), 1 / 3)])


@pytest.fixture
def balanced_strategy() -> MixedStrategy:
    """Same marginals, spread over all six pairs; loses 8/9 under the leak."""
    return MixedStrategy.from_pairs(
        [
            ((0, 1), 10 / 27),
            ((0, 2), 4 / 27),
            ((0, 3), 4 / 27),
            ((1, 2), 4 / 27),
            ((1, 3), 4 / 27),
            ((2, 3), 1 / 27),
        ]
    )


@pytest.fixture
def optimal_strategy() -> MixedStrategy:
    """The leak-aware optimum: always cover the leaking target."""
    return MixedStrategy.from_pairs([((0, 1), 5 / 9), ((0, 2), 2 / 9), ((0, 3), 2 / 9)])


def brute_pairwise(atoms, n) -> PairwiseMarginals:
    """Independent oracle for pairwise marginals: per-pair enumeration."""
    x = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            x[i, j] = sum(p for targets, p in atoms if i in targets and j in targets)
    return PairwiseMarginals(x)
