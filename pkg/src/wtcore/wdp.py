"""Winner determination over XOR bids.

Every welfare term the pricing code needs (``w(v)``, ``w(0, v_-i)``,
``w(v~_i, v_-i)``, ``w(0, v_C)``) is one call to :func:`solve_wdp` with a
:class:`ValuationOverlay` that swaps out or drops some bidders' bids.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Optional, Sequence

from .model import Allocation, Bundle, Instance
from .solvers import ProgramBuilder, SolverError, solve_ip


class AllocationCapExceeded(ValueError):
    pass


@dataclass(frozen=True)
class ValuationOverlay:
    """Per-bidder bid replacements and exclusions applied on top of an instance."""

    replace: Mapping[int, Sequence[tuple[Bundle, float]]] = field(default_factory=dict)
    exclude: frozenset[int] = frozenset()

    @classmethod
    def only(cls, instance: Instance, coalition: Iterable[int]) -> "ValuationOverlay":
        keep = set(coalition)
        return cls(exclude=frozenset(i for i in range(instance.n) if i not in keep))

    def bids_of(self, instance: Instance, bidder: int) -> list[tuple[Bundle, float]]:
        if bidder in self.exclude:
            return []
        if bidder in self.replace:
            return [(tuple(b), float(v)) for b, v in self.replace[bidder]]
        return [(bid.bundle, bid.value) for bid in instance.bidders[bidder].bids]


NO_OVERLAY = ValuationOverlay()


def solve_wdp(instance: Instance, overlay: Optional[ValuationOverlay] = None) -> tuple[Allocation, float]:
    """Welfare-maximizing allocation and its welfare under ``overlay``.

    Bids worth 0 or less are left out of the program; they can never raise
    welfare and the tie-break would not select them anyway.
    """
    overlay = overlay or NO_OVERLAY
    pb = ProgramBuilder()
    owners: list[tuple[int, Bundle, float]] = []
    by_good: dict[int, dict[int, float]] = {}
    for i in range(instance.n):
        mine = {}
        for b, v in overlay.bids_of(instance, i):
            if v <= 0.0:
                continue
            if any(g < 0 or g >= instance.num_goods for g in b):
                raise ValueError(f"bundle {b} references an invalid good")
            j = pb.var(f"x_{i}_{len(mine)}", 0.0, 1.0, v)
            owners.append((i, b, v))
            mine[j] = 1.0
            for g in b:
                by_good.setdefault(g, {})[j] = 1.0
        if len(mine) > 1:
            pb.add(mine, "<=", 1.0)
    for g in sorted(by_good):
        if len(by_good[g]) > 1:
            pb.add(by_good[g], "<=", 1.0)
    assignment: list[Optional[Bundle]] = [None] * instance.n
    if not owners:
        return Allocation(tuple(assignment)), 0.0
    res = solve_ip(pb.ip(maximize=True))
    if not res.optimal:
        raise SolverError(f"winner determination returned {res.status.value}")
    welfare = 0.0
    for j, (i, b, v) in enumerate(owners):
        if res.x[j] > 0.5:
            assignment[i] = b
            welfare += v
    return Allocation(tuple(assignment)), welfare


def coalition_welfare(instance: Instance, coalition: Iterable[int]) -> float:
    """``w(0, v_C)``: best welfare using only the coalition's bids."""
    members = set(coalition)
    bad = [i for i in members if not 0 <= i < instance.n]
    if bad:
        raise ValueError(f"unknown bidder ids {sorted(bad)}")
    if not members:
        return 0.0
    return solve_wdp(instance, ValuationOverlay.only(instance, members))[1]


def _walk(bid_lists: Sequence[Sequence[tuple[Bundle, float]]]) -> Iterator[tuple[int, ...]]:
    """Yield, per feasible allocation, the chosen bid index per bidder (-1 = none)."""
    n = len(bid_lists)
    masks = [[sum(1 << g for g in b) for b, _ in bl] for bl in bid_lists]
    choice = [-1] * n

    def rec(i: int, used: int):
        if i == n:
            yield tuple(choice)
            return
        choice[i] = -1
        yield from rec(i + 1, used)
        for k, m in enumerate(masks[i]):
            if not m & used:
                choice[i] = k
                yield from rec(i + 1, used | m)
        choice[i] = -1

    yield from rec(0, 0)


def enumerate_feasible_allocations(
    instance: Instance, cap: int, overlay: Optional[ValuationOverlay] = None
) -> list[Allocation]:
    """Every feasible allocation (the empty one included), in a fixed order.

    Raises :class:`AllocationCapExceeded` if there are more than ``cap``.
    """
    overlay = overlay or NO_OVERLAY
    bid_lists = [overlay.bids_of(instance, i) for i in range(instance.n)]
    out = []
    for choice in _walk(bid_lists):
        if len(out) >= cap:
            raise AllocationCapExceeded(f"allocation count exceeds cap {cap}")
        out.append(Allocation(tuple(bid_lists[i][k][0] if k >= 0 else None for i, k in enumerate(choice))))
    return out


def count_feasible_allocations(instance: Instance, cap: int) -> int:
    """Number of feasible allocations, or ``cap + 1`` once it passes ``cap``."""
    bid_lists = [NO_OVERLAY.bids_of(instance, i) for i in range(instance.n)]
    count = 0
    for _ in _walk(bid_lists):
        count += 1
        if count > cap:
            break
    return count
