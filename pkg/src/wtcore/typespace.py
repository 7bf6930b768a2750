"""Random linear type spaces that always contain the bidder's true bids.

Each constraint reads ``sum_S X(S) c(S) v~(S) >= alpha * sum_S X(S) c(S) v(S)``
over the bidder's bid bundles with ``X(S) ~ Bernoulli(beta)``,
``c(S) = 1 + #successes`` of a coin with ``decay_success`` before the first
failure, and ``alpha ~ U[alpha_range]``.

Draws for constraint ``k`` of bidder ``i`` come from a Philox stream keyed by
``(seed, i, k)`` (plus ``K`` when not nested), so constraint ``k`` does not
depend on how many constraints are generated after it.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Optional, Sequence

import numpy as np

from .model import Instance, LinearTypeSpace, TypeConstraint

DEFAULT_K_LIST = (1, 2, 4, 8, 16)


@dataclass(frozen=True)
class TypeSpaceGenConfig:
    k: int = 8
    beta: float = 0.3
    alpha_range: tuple[float, float] = (0.5, 1.0)
    decay_success: float = 0.2
    seed: int = 0
    nested: bool = True

    def __post_init__(self):
        if self.k < 0:
            raise ValueError("k must be nonnegative")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError("beta must lie in [0, 1]")
        lo, hi = self.alpha_range
        if not 0.0 <= lo <= hi <= 1.0:
            raise ValueError("alpha_range must be a subinterval of [0, 1]")
        if not 0.0 <= self.decay_success < 1.0:
            raise ValueError("decay_success must lie in [0, 1)")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")


def constraint_stream(seed: int, bidder: int, index: int, salt: Sequence[int] = ()) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, bidder, *salt, index])))


def sample_multiplicity(rng: np.random.Generator, decay_success: float, size: int) -> np.ndarray:
    """``c`` starts at 1 and grows while a ``decay_success`` coin keeps landing heads."""
    return rng.geometric(1.0 - decay_success, size=size).astype(float)


def _constraint(values: np.ndarray, rng: np.random.Generator, config: TypeSpaceGenConfig) -> TypeConstraint:
    alpha = rng.uniform(*config.alpha_range)
    chosen = rng.random(len(values)) < config.beta
    mult = sample_multiplicity(rng, config.decay_success, len(values))
    coeffs = np.where(chosen, mult, 0.0)
    total = float(sum(a * v for a, v in zip(coeffs, values)))
    return TypeConstraint(tuple(float(a) for a in coeffs), alpha * total)


def generate_type_space(
    instance: Instance, bidder: int, config: TypeSpaceGenConfig, k: Optional[int] = None
) -> LinearTypeSpace:
    k = config.k if k is None else k
    if not 0 <= bidder < instance.n:
        raise ValueError(f"unknown bidder {bidder}")
    bids = instance.bidders[bidder].bids
    values = np.array([b.value for b in bids])
    salt = () if config.nested else (k,)
    cons = tuple(
        _constraint(values, constraint_stream(config.seed, bidder, j, salt), config) for j in range(k)
    )
    return LinearTypeSpace(bidder, tuple(b.bundle for b in bids), cons)


def generate_type_spaces(
    instance: Instance, config: TypeSpaceGenConfig, bidders: Optional[Iterable[int]] = None
) -> list[LinearTypeSpace]:
    ids = range(instance.n) if bidders is None else bidders
    return [generate_type_space(instance, i, config) for i in ids]


def nested_family(
    instance: Instance, bidder: int, config: TypeSpaceGenConfig, k_list: Sequence[int] = DEFAULT_K_LIST
) -> list[LinearTypeSpace]:
    """Type spaces for each ``K`` in ``k_list`` where each one's constraints are a
    prefix of the next, so the spaces shrink as ``K`` grows."""
    if list(k_list) != sorted(k_list):
        raise ValueError("k_list must be ascending")
    if not k_list:
        return []
    full = generate_type_space(instance, bidder, replace(config, nested=True), max(k_list))
    return [LinearTypeSpace(bidder, full.bundles, full.constraints[:k]) for k in k_list]
