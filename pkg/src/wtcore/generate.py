"""Small synthetic auction instances for tests and sweeps.

Each good has a common base value; a bundle's bid is the sum of its goods'
base values, perturbed per bid and scaled up with bundle size so that
packages carry complementarities. A fraction of bidders are multi-minded
and submit an XOR group of several bundles.
"""
from __future__ import annotations

import numpy as np

from .model import Bid, Bidder, Instance


def generate_instance(
    goods: int,
    bids: int,
    seed: int,
    max_bundle: int = 4,
    xor_prob: float = 0.3,
    max_xor: int = 3,
    synergy: float = 0.15,
) -> Instance:
    if goods <= 0 or bids <= 0:
        raise ValueError("goods and bids must be positive")
    rng = np.random.default_rng(seed)
    base = rng.uniform(1.0, 10.0, goods)
    max_bundle = max(1, min(max_bundle, goods))
    bidders = []
    remaining = bids
    while remaining > 0:
        want = 1
        if max_xor > 1 and rng.random() < xor_prob:
            want = int(rng.integers(2, max_xor + 1))
        want = min(want, remaining)
        mine: dict[tuple[int, ...], float] = {}
        for _ in range(20 * want):
            if len(mine) == want:
                break
            size = 1 + int(rng.binomial(max_bundle - 1, 0.4)) if max_bundle > 1 else 1
            chosen = tuple(sorted(int(g) for g in rng.choice(goods, size=size, replace=False)))
            if chosen in mine:
                continue
            value = base[list(chosen)].sum() * rng.uniform(0.75, 1.25) * (1.0 + synergy * (size - 1))
            mine[chosen] = round(float(value), 2)
        if not mine:
            break
        bidders.append(Bidder(len(bidders), tuple(Bid(b, v) for b, v in mine.items())))
        remaining -= len(mine)
    return Instance(goods, tuple(bidders))


def no_competition_instance(values=(10.0, 10.0)) -> Instance:
    """One single-good bidder per good, so nobody competes with anybody."""
    return Instance.from_bids(len(values), [[((g,), v)] for g, v in enumerate(values)])
