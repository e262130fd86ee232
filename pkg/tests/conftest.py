from __future__ import annotations

import math

import numpy as np
import pytest

from queryplan.instances import Instance, ModelSpec
from queryplan.setcover import SetCoverInstance


def symmetric_binary(p: float, cost: float, name: str) -> ModelSpec:
    """Two-symbol model emitting its label's preferred symbol with prob p."""
    return ModelSpec(
        name=name,
        alphabet=("a", "b"),
        conditional=np.array([[p, 1.0 - p], [1.0 - p, p]]),
        cost=cost,
    )


@pytest.fixture
def bsc() -> Instance:
    """Binary symmetric channel: the hand-checked reference instance."""
    return Instance(
        labels=("1", "2"),
        prior=np.array([0.5, 0.5]),
        models=(symmetric_binary(0.9, 1.0, "bsc"),),
        tolerances=np.array([0.05, 0.05]),
    )


@pytest.fixture
def asym() -> Instance:
    """Same channel with a lopsided prior, for endpoint-tilt checks."""
    return Instance(
        labels=("1", "2"),
        prior=np.array([0.9, 0.1]),
        models=(symmetric_binary(0.9, 1.0, "bsc"),),
        tolerances=np.array([0.05, 0.05]),
    )


@pytest.fixture
def duo() -> Instance:
    """Greedy foil: a cheap weak model vs a pricey sharp one.

    cheap: p(1-p) = 1/16 so the affinity at s=1/2 is exactly 0.5, cost 1.
    sharp: q(1-q) = 0.0024 so the affinity is ~0.098, cost 2.5.
    At alpha = 1e-3 the myopic baseline buys ten cheap queries (cost 10)
    while three sharp queries (cost 7.5) already meet the tolerance.
    """
    p = (2.0 + math.sqrt(3.0)) / 4.0
    q = (1.0 + math.sqrt(0.9904)) / 2.0
    return Instance(
        labels=("1", "2"),
        prior=np.array([0.5, 0.5]),
        models=(
            symmetric_binary(p, 1.0, "cheap"),
            symmetric_binary(q, 2.5, "sharp"),
        ),
        tolerances=np.array([1e-3, 1e-3]),
    )


@pytest.fixture
def sc3() -> SetCoverInstance:
    """Three-element cover whose cheapest cover is the single big set."""
    return SetCoverInstance(
        n=3,
        sets=(frozenset({1, 2}), frozenset({2, 3}), frozenset({1, 2, 3})),
        weights=(2.0, 2.0, 3.0),
    )
