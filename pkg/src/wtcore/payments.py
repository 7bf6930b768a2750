"""VCG and weakest-type (WT) payments.

The WT pivot term ``min_{v~ in Theta_i} w(v~, v_-i)`` is an LP with one
constraint per feasible allocation. Both formulations below start from the
efficient allocation alone and add the allocation returned by a winner
determination call whenever it violates the current restricted solution.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Optional, Sequence, Union

from .model import EPS, Allocation, Bundle, Instance, LinearTypeSpace, PriceVector, validate_typespace
from .solvers import ProgramBuilder, SolverError, Status, solve_lp
from .wdp import ValuationOverlay, solve_wdp


class Formulation(str, Enum):
    BPS = "BPS"
    BO = "BO"


class EmptyTypeSpace(ValueError):
    def __init__(self, bidder: int):
        super().__init__(f"empty type space for bidder {bidder}")


class UnboundedTypeSpace(ValueError):
    def __init__(self, bidder: int):
        super().__init__(f"type space does not bound pivot for bidder {bidder}")


@dataclass
class WtResult:
    bidder: int
    payment: float
    weakest_type: dict[Bundle, float]
    pivot_value: float
    cg_iterations: int
    generated_allocations: list[Allocation]
    formulation: Formulation
    wall_time: float = 0.0
    lp_history: list[float] = field(default_factory=list)

    def stats(self) -> dict:
        return {
            "bidder": self.bidder,
            "formulation": self.formulation.value,
            "iterations": self.cg_iterations,
            "wall_ms": 1e3 * self.wall_time,
            "payment": self.payment,
        }


def _efficient(instance: Instance, allocation: Optional[Allocation]) -> tuple[Allocation, float]:
    if allocation is None:
        return solve_wdp(instance)
    return allocation, allocation.welfare(instance)


def _check_deadline(deadline: Optional[float]) -> None:
    if deadline is not None and time.monotonic() > deadline:
        raise TimeoutError("time limit reached")


def vcg_payments(instance: Instance, allocation: Optional[Allocation] = None) -> PriceVector:
    """``p_i = w(0, v_-i) - sum_{j != i} v_j(S_j*)`` for each winner."""
    alloc, welfare = _efficient(instance, allocation)
    prices = {}
    for i in alloc.winners:
        others = welfare - instance.value(i, alloc.bundle_of(i))
        without = solve_wdp(instance, ValuationOverlay(exclude=frozenset({i})))[1]
        prices[i] = without - others
    return prices


def _prepare(instance, bidder, typespace, allocation):
    alloc, welfare = _efficient(instance, allocation)
    if not alloc.bundle_of(bidder):
        raise ValueError(f"bidder {bidder} does not win; WT payments are defined for winners only")
    if typespace.bidder_id != bidder:
        raise ValueError(f"type space belongs to bidder {typespace.bidder_id}, not {bidder}")
    problems = validate_typespace(instance, typespace)
    if problems:
        raise ValueError("; ".join(problems))
    others = welfare - instance.value(bidder, alloc.bundle_of(bidder))
    constrained = typespace.constrained_bundles()
    return alloc, others, constrained


def _add_type_rows(pb: ProgramBuilder, typespace: LinearTypeSpace, cols: Mapping[Bundle, int]) -> None:
    for c in typespace.constraints:
        row = {cols[b]: a for a, b in zip(c.coeffs, typespace.bundles) if a != 0.0}
        if row:
            pb.add(row, ">=", c.rhs)
        elif c.rhs > EPS:
            # 0 >= rhs with rhs > 0 can never hold
            pb.add({}, ">=", c.rhs)


def wt_payment_bps(
    instance: Instance,
    bidder: int,
    typespace: LinearTypeSpace,
    allocation: Optional[Allocation] = None,
    deadline: Optional[float] = None,
) -> WtResult:
    """WT payment from the min-gamma formulation.

    Restricted LP: ``min gamma`` s.t. ``v~(S_i) + sum_{j != i} v_j(S_j) <= gamma``
    for each allocation generated so far and ``v~`` in the type space.
    """
    t0 = time.perf_counter()
    alloc, others, constrained = _prepare(instance, bidder, typespace, allocation)
    pb = ProgramBuilder()
    gamma = pb.var("gamma", -math.inf, math.inf, 1.0)
    cols = {b: pb.var(f"v_{'_'.join(map(str, b))}") for b in constrained}
    _add_type_rows(pb, typespace, cols)

    pool: list[Allocation] = []

    def add_allocation(a: Allocation) -> None:
        row = {gamma: -1.0}
        own = a.bundle_of(bidder)
        if own in cols:
            row[cols[own]] = 1.0
        rest = sum(instance.value(j, b) for j, b in enumerate(a.assignment) if b and j != bidder)
        pb.add(row, "<=", -rest)
        pool.append(a)

    add_allocation(alloc)
    history = []
    while True:
        _check_deadline(deadline)
        res = solve_lp(pb.lp())
        if res.status is Status.INFEASIBLE:
            raise EmptyTypeSpace(bidder)
        if res.status is Status.UNBOUNDED:
            raise UnboundedTypeSpace(bidder)
        g_hat = float(res.x[gamma])
        v_hat = {b: max(float(res.x[k]), 0.0) for b, k in cols.items()}
        history.append(g_hat)
        overlay = ValuationOverlay(replace={bidder: list(v_hat.items())})
        sep, w_sep = solve_wdp(instance, overlay)
        if g_hat - w_sep < -EPS:
            if sep in pool:
                raise SolverError(f"BPS separation returned an allocation already in the pool (bidder {bidder})")
            add_allocation(sep)
            continue
        break

    return WtResult(
        bidder=bidder, payment=g_hat - others, weakest_type=v_hat, pivot_value=g_hat,
        cg_iterations=len(pool), generated_allocations=pool, formulation=Formulation.BPS,
        wall_time=time.perf_counter() - t0, lp_history=history,
    )


def wt_payment_bo(
    instance: Instance,
    bidder: int,
    typespace: LinearTypeSpace,
    allocation: Optional[Allocation] = None,
    deadline: Optional[float] = None,
) -> WtResult:
    """WT payment from the dual of the allocation-enumerating winner determination LP.

    Variables are bidder utilities ``pi_j``, seller revenue ``pi_s``, supporting
    bundle prices ``p_j(S)`` and the free values ``v~(S)``; all nonnegative.
    Separation prices each allocation at the current supporting prices.
    """
    t0 = time.perf_counter()
    alloc, others, constrained = _prepare(instance, bidder, typespace, allocation)
    pb = ProgramBuilder()
    pi = [pb.var(f"pi_{j}", 0.0, math.inf, 1.0) for j in range(instance.n)]
    pi_s = pb.var("pi_s", 0.0, math.inf, 1.0)
    price_cols: list[dict[Bundle, int]] = []
    for j, b in enumerate(instance.bidders):
        if j == bidder:
            price_cols.append({s: pb.var(f"p_{j}_{'_'.join(map(str, s))}") for s in constrained})
        else:
            price_cols.append({bid.bundle: pb.var(f"p_{j}_{'_'.join(map(str, bid.bundle))}") for bid in b.bids})
    cols = {s: pb.var(f"v_{'_'.join(map(str, s))}") for s in constrained}
    for s in constrained:
        pb.add({pi[bidder]: 1.0, price_cols[bidder][s]: 1.0, cols[s]: -1.0}, ">=", 0.0)
    for j, b in enumerate(instance.bidders):
        if j == bidder:
            continue
        for bid in b.bids:
            pb.add({pi[j]: 1.0, price_cols[j][bid.bundle]: 1.0}, ">=", bid.value)
    _add_type_rows(pb, typespace, cols)

    pool: list[Allocation] = []

    def add_allocation(a: Allocation) -> None:
        row = {pi_s: 1.0}
        for j, s in enumerate(a.assignment):
            if s and s in price_cols[j]:
                row[price_cols[j][s]] = row.get(price_cols[j][s], 0.0) - 1.0
        pb.add(row, ">=", 0.0)
        pool.append(a)

    add_allocation(alloc)
    history = []
    while True:
        _check_deadline(deadline)
        res = solve_lp(pb.lp())
        if res.status is Status.INFEASIBLE:
            raise EmptyTypeSpace(bidder)
        if res.status is Status.UNBOUNDED:
            raise UnboundedTypeSpace(bidder)
        history.append(res.objective)
        replace = {
            j: [(s, max(float(res.x[k]), 0.0)) for s, k in price_cols[j].items()]
            for j in range(instance.n)
        }
        sep, w_sep = solve_wdp(instance, ValuationOverlay(replace=replace))
        if res.x[pi_s] - w_sep < -EPS:
            if sep in pool:
                raise SolverError(f"BO separation returned an allocation already in the pool (bidder {bidder})")
            add_allocation(sep)
            continue
        break

    pivot = float(res.objective)
    v_hat = {s: max(float(res.x[k]), 0.0) for s, k in cols.items()}
    return WtResult(
        bidder=bidder, payment=pivot - others, weakest_type=v_hat, pivot_value=pivot,
        cg_iterations=len(pool), generated_allocations=pool, formulation=Formulation.BO,
        wall_time=time.perf_counter() - t0, lp_history=history,
    )


def wt_payment(instance, bidder, typespace, formulation=Formulation.BPS, **kw) -> WtResult:
    fn = wt_payment_bps if Formulation(formulation) is Formulation.BPS else wt_payment_bo
    return fn(instance, bidder, typespace, **kw)


TypeSpaces = Union[Mapping[int, LinearTypeSpace], Sequence[LinearTypeSpace], None]


def typespace_map(typespaces: TypeSpaces) -> dict[int, LinearTypeSpace]:
    if typespaces is None:
        return {}
    if isinstance(typespaces, Mapping):
        return dict(typespaces)
    return {t.bidder_id: t for t in typespaces}


def wt_prices(
    instance: Instance,
    typespaces: TypeSpaces = None,
    formulation: Formulation = Formulation.BPS,
    allocation: Optional[Allocation] = None,
    deadline: Optional[float] = None,
) -> tuple[PriceVector, dict[int, WtResult]]:
    """WT payment of every winner; winners without a type space are unrestricted."""
    alloc, _ = _efficient(instance, allocation)
    spaces = typespace_map(typespaces)
    results = {}
    for i in alloc.winners:
        ts = spaces.get(i) or LinearTypeSpace.unrestricted(i)
        results[i] = wt_payment(instance, i, ts, formulation, allocation=alloc, deadline=deadline)
    return {i: r.payment for i, r in results.items()}, results
