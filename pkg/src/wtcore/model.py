"""Domain types for XOR combinatorial auctions.

Bundles are sorted tuples of good indices, so two bundles are the same set
iff they compare equal. Bidder ids are dense integers ``0..n-1`` and double as
positions in :attr:`Instance.bidders` and :attr:`Allocation.assignment`.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

EPS = 1e-6

Bundle = tuple[int, ...]
PriceVector = dict[int, float]


def bundle(goods: Iterable[int]) -> Bundle:
    return tuple(sorted({int(g) for g in goods}))


@dataclass(frozen=True)
class Bid:
    bundle: Bundle
    value: float


@dataclass(frozen=True)
class Bidder:
    id: int
    bids: tuple[Bid, ...]

    def value(self, b: Optional[Bundle]) -> float:
        """Reported value for ``b``; the empty bundle (``None``) is worth 0."""
        if not b:
            return 0.0
        for bid in self.bids:
            if bid.bundle == b:
                return bid.value
        raise KeyError(f"bidder {self.id} has no bid on {b}")


@dataclass(frozen=True)
class Instance:
    num_goods: int
    bidders: tuple[Bidder, ...]

    @property
    def n(self) -> int:
        return len(self.bidders)

    @property
    def num_bids(self) -> int:
        return sum(len(b.bids) for b in self.bidders)

    def value(self, bidder: int, b: Optional[Bundle]) -> float:
        return self.bidders[bidder].value(b)

    @classmethod
    def from_bids(cls, num_goods: int, bids: Sequence[Sequence[tuple[Iterable[int], float]]]) -> "Instance":
        """Build from ``bids[i] = [(goods, value), ...]`` for each bidder ``i``."""
        bidders = tuple(
            Bidder(i, tuple(Bid(bundle(g), float(v)) for g, v in bl)) for i, bl in enumerate(bids)
        )
        return cls(int(num_goods), bidders)


@dataclass(frozen=True)
class Allocation:
    """``assignment[i]`` is bidder ``i``'s winning bundle or ``None``."""

    assignment: tuple[Optional[Bundle], ...]

    @property
    def winners(self) -> tuple[int, ...]:
        return tuple(i for i, b in enumerate(self.assignment) if b)

    def bundle_of(self, bidder: int) -> Optional[Bundle]:
        return self.assignment[bidder]

    def welfare(self, instance: Instance) -> float:
        return sum(instance.value(i, b) for i, b in enumerate(self.assignment) if b)


@dataclass(frozen=True)
class TypeConstraint:
    """``sum(coeffs[k] * v(bundles[k])) >= rhs``."""

    coeffs: tuple[float, ...]
    rhs: float


@dataclass(frozen=True)
class LinearTypeSpace:
    bidder_id: int
    bundles: tuple[Bundle, ...] = ()
    constraints: tuple[TypeConstraint, ...] = ()

    @classmethod
    def unrestricted(cls, bidder_id: int) -> "LinearTypeSpace":
        return cls(bidder_id)

    def constrained_bundles(self) -> tuple[Bundle, ...]:
        """Bundles carrying a nonzero coefficient in at least one constraint."""
        used = [
            b for k, b in enumerate(self.bundles)
            if any(c.coeffs[k] != 0.0 for c in self.constraints)
        ]
        return tuple(used)

    def satisfied_by(self, values: Mapping[Bundle, float], tol: float = EPS) -> bool:
        for c in self.constraints:
            lhs = sum(a * values.get(b, 0.0) for a, b in zip(c.coeffs, self.bundles))
            if lhs < c.rhs - tol:
                return False
        return True


@dataclass(frozen=True)
class CoreConstraint:
    """``sum(p_i for i in lhs_winners) >= rhs`` for blocking coalition ``coalition``."""

    coalition: frozenset[int]
    lhs_winners: frozenset[int]
    rhs: float

    def slack(self, prices: Mapping[int, float]) -> float:
        return sum(prices[i] for i in self.lhs_winners) - self.rhs

    def to_json(self) -> dict:
        return {
            "coalition": sorted(self.coalition),
            "lhs_winners": sorted(self.lhs_winners),
            "rhs": self.rhs,
        }


# -- validation ---------------------------------------------------------------

def validate_instance(instance: Instance) -> list[str]:
    problems = []
    if instance.num_goods <= 0:
        problems.append("num_goods must be positive")
    for pos, bidder in enumerate(instance.bidders):
        if bidder.id != pos:
            problems.append(f"bidder at position {pos} has id {bidder.id}")
        seen = set()
        for bid in bidder.bids:
            if not bid.bundle:
                problems.append(f"bidder {bidder.id}: empty bundle")
            if any(g < 0 or g >= instance.num_goods for g in bid.bundle):
                problems.append(f"bidder {bidder.id}: bundle references invalid good {bid.bundle}")
            if len(set(bid.bundle)) != len(bid.bundle) or list(bid.bundle) != sorted(bid.bundle):
                problems.append(f"bidder {bidder.id}: bundle not canonical {bid.bundle}")
            if bid.bundle in seen:
                problems.append(f"bidder {bidder.id}: duplicate bundle {bid.bundle}")
            seen.add(bid.bundle)
            if not bid.value >= 0.0:
                problems.append(f"bidder {bidder.id}: negative value {bid.value}")
    return problems


def validate_allocation(instance: Instance, allocation: Allocation) -> list[str]:
    problems = []
    if len(allocation.assignment) != instance.n:
        return [f"allocation covers {len(allocation.assignment)} bidders, instance has {instance.n}"]
    owner: dict[int, int] = {}
    for i, b in enumerate(allocation.assignment):
        if not b:
            continue
        if all(bid.bundle != b for bid in instance.bidders[i].bids):
            problems.append(f"bidder {i}: assigned bundle {b} was not bid on")
        for g in b:
            if g in owner:
                problems.append(f"good {g} assigned to bidders {owner[g]} and {i}")
            owner[g] = i
    return problems


def validate_typespace(instance: Instance, ts: LinearTypeSpace) -> list[str]:
    problems = []
    if not 0 <= ts.bidder_id < instance.n:
        return [f"unknown bidder {ts.bidder_id}"]
    own = {bid.bundle for bid in instance.bidders[ts.bidder_id].bids}
    for k, c in enumerate(ts.constraints):
        if len(c.coeffs) != len(ts.bundles):
            problems.append(f"constraint {k}: {len(c.coeffs)} coefficients for {len(ts.bundles)} bundles")
            continue
        for a, b in zip(c.coeffs, ts.bundles):
            if a != 0.0 and b not in own:
                problems.append(f"constraint {k}: bundle {b} is not a bid of bidder {ts.bidder_id}")
    return problems


# -- fixtures -----------------------------------------------------------------

def fixture_ex1() -> tuple[Instance, list[LinearTypeSpace]]:
    """Three goods a, b, c and ten single-minded bidders.

    The efficient winners are ids 0, 1, 2. Bidder 0 is unrestricted, bidder 1
    is known to value ``b`` at 17 or more and bidder 2 values ``c`` at 15 or more.
    """
    a, b, c = 0, 1, 2
    bids = [
        [((a,), 20)], [((b,), 20)], [((c,), 20)],
        [((a, b), 28)], [((a, c), 26)], [((b, c), 23)],
        [((a,), 10)], [((b,), 10)], [((c,), 10)],
        [((a, b, c), 41)],
    ]
    inst = Instance.from_bids(3, bids)
    spaces = [
        LinearTypeSpace.unrestricted(0),
        LinearTypeSpace(1, ((b,),), (TypeConstraint((1.0,), 17.0),)),
        LinearTypeSpace(2, ((c,),), (TypeConstraint((1.0,), 15.0),)),
    ]
    return inst, spaces


def floor_typespace(instance: Instance, bidder: int, floors: Mapping[Bundle, float]) -> LinearTypeSpace:
    """Type space ``{v(S) >= floors[S]}`` for each listed bundle."""
    bundles = tuple(bundle(s) for s in floors)
    cons = tuple(
        TypeConstraint(tuple(1.0 if k == j else 0.0 for k in range(len(bundles))), float(floors[s]))
        for j, s in enumerate(floors)
    )
    return LinearTypeSpace(bidder, bundles, cons)


def true_bids_typespace(instance: Instance, bidder: int) -> LinearTypeSpace:
    """The singleton type space containing only the bidder's reported values."""
    bids = instance.bidders[bidder].bids
    bundles = tuple(b.bundle for b in bids)
    cons = []
    for j, bid in enumerate(bids):
        row = tuple(1.0 if k == j else 0.0 for k in range(len(bids)))
        cons.append(TypeConstraint(row, bid.value))
        cons.append(TypeConstraint(tuple(-x for x in row), -bid.value))
    return LinearTypeSpace(bidder, bundles, tuple(cons))


# -- JSON ---------------------------------------------------------------------

def instance_to_json(instance: Instance) -> dict:
    return {
        "goods": instance.num_goods,
        "bidders": [
            {"id": b.id, "bids": [{"bundle": list(bid.bundle), "value": bid.value} for bid in b.bids]}
            for b in instance.bidders
        ],
    }


def instance_from_json(obj: Mapping) -> Instance:
    bidders = []
    for pos, b in enumerate(sorted(obj["bidders"], key=lambda b: b["id"])):
        bids = tuple(Bid(bundle(x["bundle"]), float(x["value"])) for x in b["bids"])
        bidders.append(Bidder(int(b["id"]), bids))
    return Instance(int(obj["goods"]), tuple(bidders))


def typespace_to_json(ts: LinearTypeSpace) -> dict:
    return {
        "bidder": ts.bidder_id,
        "bundles": [list(b) for b in ts.bundles],
        "constraints": [{"coeffs": list(c.coeffs), "rhs": c.rhs} for c in ts.constraints],
    }


def typespace_from_json(obj: Mapping) -> LinearTypeSpace:
    return LinearTypeSpace(
        int(obj["bidder"]),
        tuple(bundle(b) for b in obj["bundles"]),
        tuple(TypeConstraint(tuple(float(a) for a in c["coeffs"]), float(c["rhs"])) for c in obj["constraints"]),
    )


def dumps_instance(instance: Instance) -> str:
    return json.dumps(instance_to_json(instance), indent=1)


def loads_instance(text: str) -> Instance:
    return instance_from_json(json.loads(text))


def dumps_typespaces(spaces: Iterable[LinearTypeSpace]) -> str:
    return json.dumps([typespace_to_json(t) for t in spaces], indent=1)


def loads_typespaces(text: str) -> list[LinearTypeSpace]:
    obj = json.loads(text)
    if isinstance(obj, dict):
        obj = [obj]
    return [typespace_from_json(t) for t in obj]
