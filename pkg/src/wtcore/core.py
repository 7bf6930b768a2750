"""Core-selecting payment rules by core-constraint generation.

Prices live on the winners ``W`` of the efficient allocation. The core asks
every coalition ``C`` to leave enough on the table:
``sum_{i in W \\ C} p_i >= w(0, v_C) - sum_{j in C} v_j(S_j*)``, plus IR.
The rules here pick the point of the minimum-revenue face above a floor
(VCG or WT prices) that is nearest to a reference point.
"""
from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .model import EPS, Allocation, CoreConstraint, Instance, PriceVector
from .payments import Formulation, TypeSpaces, _check_deadline, wt_prices
from .solvers import ProgramBuilder, SolverError, Status, solve_lp, solve_qp
from .wdp import AllocationCapExceeded, ValuationOverlay, _walk, coalition_welfare, solve_wdp

MAX_DIAGNOSIS_BIDDERS = 20


class PaymentRule(str, Enum):
    VANILLA_VCG_NEAREST = "VanillaVcgNearest"
    VANILLA_ZERO_NEAREST = "VanillaZeroNearest"
    WT_NEAREST = "WtNearest"
    ZERO_NEAREST_ABOVE_WT = "ZeroNearestAboveWt"
    VCG_NEAREST_ABOVE_WT = "VcgNearestAboveWt"

    @property
    def vanilla(self) -> bool:
        return self in (PaymentRule.VANILLA_VCG_NEAREST, PaymentRule.VANILLA_ZERO_NEAREST)

    @property
    def reference_kind(self) -> str:
        return {
            PaymentRule.VANILLA_VCG_NEAREST: "vcg",
            PaymentRule.VANILLA_ZERO_NEAREST: "zero",
            PaymentRule.WT_NEAREST: "wt",
            PaymentRule.ZERO_NEAREST_ABOVE_WT: "zero",
            PaymentRule.VCG_NEAREST_ABOVE_WT: "vcg",
        }[self]

    def floor(self, vcg: PriceVector, wt: Optional[PriceVector]) -> PriceVector:
        if self.vanilla:
            return dict(vcg)
        if wt is None:
            raise ValueError(f"{self.value} needs WT prices")
        return dict(wt)

    def reference(self, vcg: PriceVector, wt: Optional[PriceVector]) -> PriceVector:
        kind = self.reference_kind
        if kind == "zero":
            return {i: 0.0 for i in vcg}
        if kind == "wt":
            if wt is None:
                raise ValueError(f"{self.value} needs WT prices")
            return dict(wt)
        return dict(vcg)

    def vanilla_counterpart(self) -> "PaymentRule":
        if self.reference_kind == "zero":
            return PaymentRule.VANILLA_ZERO_NEAREST
        return PaymentRule.VANILLA_VCG_NEAREST

    @classmethod
    def parse(cls, name: str) -> "PaymentRule":
        key = name.replace("-", "").replace("_", "").lower()
        for r in cls:
            if r.value.lower() == key or r.name.replace("_", "").lower() == key:
                return r
        raise ValueError(f"unknown payment rule {name!r}; choose from {[r.value for r in cls]}")


@dataclass
class CcgResult:
    prices: PriceVector
    revenue: float
    generated_constraints: list[CoreConstraint]
    ccg_iterations: int
    lp_revenue_history: list[float]
    rule: Optional[PaymentRule] = None
    wall_time: float = 0.0

    def to_json(self) -> dict:
        return {
            "rule": self.rule.value if self.rule else None,
            "prices": {str(i): p for i, p in sorted(self.prices.items())},
            "revenue": self.revenue,
            "iterations": self.ccg_iterations,
            "lp_revenue_history": self.lp_revenue_history,
            "constraints": [c.to_json() for c in self.generated_constraints],
        }


def _winning_bids(instance: Instance, allocation: Allocation) -> dict[int, float]:
    return {i: instance.value(i, allocation.bundle_of(i)) for i in allocation.winners}


def core_constraint(instance: Instance, allocation: Allocation, coalition: Iterable[int]) -> CoreConstraint:
    members = frozenset(coalition)
    rhs = coalition_welfare(instance, members) - sum(
        instance.value(j, allocation.bundle_of(j)) for j in members if allocation.bundle_of(j)
    )
    return CoreConstraint(members, frozenset(allocation.winners) - members, rhs)


def separate_core(
    instance: Instance, allocation: Allocation, candidate: Mapping[int, float]
) -> Optional[CoreConstraint]:
    """Most violated core constraint at ``candidate``, or None if it is in the core.

    Every bid of winner ``i`` is lowered by its opportunity cost
    ``v_i(S_i*) - p_i`` (floored at 0) and winner determination is re-run; the
    candidate is blocked iff that welfare beats its revenue.
    """
    won = _winning_bids(instance, allocation)
    replace = {}
    for i, b in won.items():
        cost = b - candidate[i]
        replace[i] = [(bid.bundle, max(bid.value - cost, 0.0)) for bid in instance.bidders[i].bids]
    aux, z = solve_wdp(instance, ValuationOverlay(replace=replace))
    if z <= sum(candidate[i] for i in won) + EPS:
        return None
    blocking = []
    for j, s in enumerate(aux.assignment):
        if not s:
            continue
        value = dict(replace[j])[s] if j in replace else instance.value(j, s)
        if value > 0.0:
            blocking.append(j)
    return core_constraint(instance, allocation, blocking)


def _bounds(instance, allocation, floor):
    won = _winning_bids(instance, allocation)
    W = sorted(won)
    lo = {}
    for i in W:
        f = floor.get(i, 0.0)
        if f > won[i] + EPS:
            raise ValueError(f"floor exceeds winning bids (bidder {i}: {f} > {won[i]})")
        lo[i] = min(f, won[i])
    return W, lo, won


def _restricted(W, lo, won, pool):
    pb = ProgramBuilder()
    cols = {i: pb.var(f"p_{i}", lo[i], won[i], 1.0) for i in W}
    for c in pool:
        if c.lhs_winners:
            pb.add({cols[i]: 1.0 for i in c.lhs_winners}, ">=", c.rhs)
        elif c.rhs > EPS:
            pb.add({}, ">=", c.rhs)
    return pb, cols


def _min_revenue(W, lo, won, pool):
    pb, cols = _restricted(W, lo, won, pool)
    res = solve_lp(pb.lp())
    if res.status is not Status.OPTIMAL:
        raise ValueError("floor exceeds winning bids: minimum-revenue LP is infeasible")
    return float(res.objective), {i: float(res.x[k]) for i, k in cols.items()}


def min_revenue_above(
    instance: Instance,
    allocation: Allocation,
    floor: Mapping[int, float],
    constraint_pool: Sequence[CoreConstraint] = (),
    generate: bool = False,
    deadline: Optional[float] = None,
) -> tuple[float, list[CoreConstraint]]:
    """``min sum(p)`` over the pool, ``floor <= p <= winning bids``.

    With ``generate=True`` core constraints are separated and added until the
    LP solution is in the core, so the returned value is the true minimum
    core revenue above ``floor``.
    """
    W, lo, won = _bounds(instance, allocation, floor)
    pool = list(constraint_pool)
    if not W:
        return 0.0, pool
    while True:
        _check_deadline(deadline)
        r_hat, p = _min_revenue(W, lo, won, pool)
        if not generate:
            return r_hat, pool
        cut = separate_core(instance, allocation, p)
        if cut is None:
            return r_hat, pool
        if any(c.coalition == cut.coalition for c in pool):
            raise SolverError("core separation repeated a coalition already in the pool")
        pool.append(cut)


def _nearest(W, lo, won, pool, reference, r_hat):
    pb, cols = _restricted(W, lo, won, pool)
    total = {cols[i]: 1.0 for i in W}
    row = pb.add(total, "<=", r_hat)
    for slack in (0.0, 1e-10, 1e-9, 1e-8, 1e-7):
        pb.rhs[row] = r_hat + slack * max(1.0, abs(r_hat))
        res = solve_qp(pb.qp(q=np.ones(len(W)), r=[reference.get(i, 0.0) for i in W]))
        if res.optimal:
            return {i: float(res.x[k]) for i, k in cols.items()}
    raise SolverError(f"QP on the minimum-revenue face is infeasible at revenue {r_hat}")


def ccg_nearest(
    instance: Instance,
    allocation: Allocation,
    floor: Mapping[int, float],
    reference: Mapping[int, float],
    constraint_pool: Sequence[CoreConstraint] = (),
    deadline: Optional[float] = None,
) -> CcgResult:
    """Point of the minimum-revenue core above ``floor`` nearest to ``reference``.

    Alternates the restricted revenue LP, the restricted QP on its optimal
    face and core separation until separation finds nothing.
    """
    t0 = time.perf_counter()
    W, lo, won = _bounds(instance, allocation, floor)
    pool = list(constraint_pool)
    if not W:
        return CcgResult({}, 0.0, pool, 0, [], wall_time=time.perf_counter() - t0)
    history = []
    iterations = 0
    while True:
        _check_deadline(deadline)
        iterations += 1
        r_hat, _ = _min_revenue(W, lo, won, pool)
        history.append(r_hat)
        p_hat = _nearest(W, lo, won, pool, reference, r_hat)
        cut = separate_core(instance, allocation, p_hat)
        if cut is None:
            break
        if any(c.coalition == cut.coalition for c in pool):
            raise SolverError("core separation repeated a coalition already in the pool")
        pool.append(cut)
    return CcgResult(
        prices=p_hat, revenue=sum(p_hat.values()), generated_constraints=pool,
        ccg_iterations=iterations, lp_revenue_history=history, wall_time=time.perf_counter() - t0,
    )


def price_rule(
    instance: Instance,
    allocation: Allocation,
    rule: PaymentRule,
    vcg: PriceVector,
    wt: Optional[PriceVector] = None,
    deadline: Optional[float] = None,
) -> CcgResult:
    res = ccg_nearest(instance, allocation, rule.floor(vcg, wt), rule.reference(vcg, wt), deadline=deadline)
    res.rule = rule
    return res


# -- full coalition enumeration ----------------------------------------------

def coalition_welfare_table(instance: Instance, cap: int = 500_000) -> np.ndarray:
    """``table[mask] = w(0, v_C)`` for every coalition bitmask over the bidders.

    Enumerates feasible allocations once and takes subset maxima; falls back to
    one winner determination per coalition when there are too many allocations.
    """
    n = instance.n
    table = np.zeros(1 << n)
    bid_lists = [[(b.bundle, b.value) for b in bidder.bids] for bidder in instance.bidders]
    try:
        count = 0
        for choice in _walk(bid_lists):
            count += 1
            if count > cap:
                raise AllocationCapExceeded(str(cap))
            mask, value = 0, 0.0
            for i, k in enumerate(choice):
                if k >= 0:
                    mask |= 1 << i
                    value += bid_lists[i][k][1]
            if value > table[mask]:
                table[mask] = value
    except AllocationCapExceeded:
        for mask in range(1 << n):
            table[mask] = coalition_welfare(instance, [i for i in range(n) if mask >> i & 1])
        return table
    for b in range(n):
        view = table.reshape(-1, 2, 1 << b)
        np.maximum(view[:, 1, :], view[:, 0, :], out=view[:, 1, :])
    return table


def enumerate_core_constraints(instance: Instance, allocation: Allocation) -> list[CoreConstraint]:
    """One constraint per coalition ``C`` of bidders, ordered by bitmask."""
    n = instance.n
    table = coalition_welfare_table(instance)
    own = [instance.value(i, allocation.bundle_of(i)) if allocation.bundle_of(i) else 0.0 for i in range(n)]
    winners = frozenset(allocation.winners)
    out = []
    for mask in range(1 << n):
        members = frozenset(i for i in range(n) if mask >> i & 1)
        rhs = float(table[mask]) - sum(own[i] for i in members)
        out.append(CoreConstraint(members, winners - members, rhs))
    return out


def in_core(instance: Instance, allocation: Allocation, prices: Mapping[int, float]) -> bool:
    won = _winning_bids(instance, allocation)
    if any(prices[i] > won[i] + EPS or prices[i] < -EPS for i in won):
        return False
    return separate_core(instance, allocation, prices) is None


# -- impossibility diagnostic --------------------------------------------------

class Verdict(str, Enum):
    NO_IC_CORE_CA = "NoIcCoreCA"
    WT_UNIQUE_IC_CORE_CA = "WtUniqueIcCoreCA"
    CONTINUUM_OF_IC_CORE_CAS = "ContinuumOfIcCoreCAs"


class InstanceTooLarge(ValueError):
    pass


@dataclass
class ImpossibilityReport:
    wt_prices: PriceVector
    wt_in_core: bool
    binding_coalitions: list[frozenset[int]]
    disjoint_family: list[frozenset[int]]
    slacks: dict[frozenset[int], float]
    verdict: Verdict
    constraint_slacks: dict[frozenset[int], float] = field(default_factory=dict)

    def attainable(self) -> list[dict]:
        """Price sets reachable by lowering WT prices of ``W ∩ C'`` by at most ``s(C')`` in total."""
        winners = set(self.wt_prices)
        out = []
        for c in self.disjoint_family:
            s = self.slacks[c]
            if s > EPS and winners & c:
                out.append({"coalition": sorted(c), "winners": sorted(winners & c), "budget": s})
        return out

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "wt_prices": {str(i): p for i, p in sorted(self.wt_prices.items())},
            "wt_in_core": self.wt_in_core,
            "binding_coalitions": [sorted(c) for c in self.binding_coalitions],
            "disjoint_family": [sorted(c) for c in self.disjoint_family],
            "slacks": [{"coalition": sorted(c), "slack": s} for c, s in self.slacks.items()],
            "constraint_slacks": [{"coalition": sorted(c), "slack": s} for c, s in self.constraint_slacks.items()],
            "attainable": self.attainable(),
        }


def impossibility_diagnosis(
    instance: Instance,
    typespaces: TypeSpaces = None,
    allocation: Optional[Allocation] = None,
    formulation: Formulation = Formulation.BPS,
) -> ImpossibilityReport:
    """Classify whether an IC core-selecting auction exists at these bids.

    Coalitions containing every winner give the vacuous constraint ``0 >= 0``
    and are left out of the binding set.
    """
    n = instance.n
    if n > MAX_DIAGNOSIS_BIDDERS:
        raise InstanceTooLarge(f"diagnosis requires full enumeration; instance too large ({n} bidders)")
    if allocation is None:
        allocation, _ = solve_wdp(instance)
    wt, _ = wt_prices(instance, typespaces, formulation, allocation=allocation)
    won = _winning_bids(instance, allocation)
    constraints = enumerate_core_constraints(instance, allocation)
    real = [c for c in constraints if c.lhs_winners]
    constraint_slacks = {c.coalition: c.slack(wt) for c in real}
    wt_in_core = all(s >= -EPS for s in constraint_slacks.values()) and all(
        wt[i] <= won[i] + EPS for i in won
    )
    binding = [c for c, s in constraint_slacks.items() if abs(s) <= EPS]
    disjoint: list[frozenset[int]] = []
    slacks: dict[frozenset[int], float] = {}
    verdict = Verdict.NO_IC_CORE_CA
    if wt_in_core:
        touched = frozenset().union(*binding) if binding else frozenset()
        free = [i for i in range(n) if i not in touched]
        by_coalition = {c.coalition: c for c in constraints}
        for k in range(len(free) + 1):
            for combo in itertools.combinations(free, k):
                cp = frozenset(combo)
                disjoint.append(cp)
                slacks[cp] = by_coalition[cp].slack(wt)
        winners = set(won)
        continuum = any(s > EPS and winners & c for c, s in slacks.items())
        verdict = Verdict.CONTINUUM_OF_IC_CORE_CAS if continuum else Verdict.WT_UNIQUE_IC_CORE_CA
    return ImpossibilityReport(
        wt_prices=wt, wt_in_core=wt_in_core, binding_coalitions=binding, disjoint_family=disjoint,
        slacks=slacks, verdict=verdict, constraint_slacks=constraint_slacks,
    )
