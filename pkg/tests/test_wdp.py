import pytest
from hypothesis import given, settings

from oracles import all_allocations, best_welfare
from strategies import instances
from wtcore.model import fixture_ex1, validate_allocation
from wtcore.wdp import (
    AllocationCapExceeded, ValuationOverlay, coalition_welfare, count_feasible_allocations,
    enumerate_feasible_allocations, solve_wdp,
)


def test_ex1_efficient_allocation():
    inst, _ = fixture_ex1()
    alloc, w = solve_wdp(inst)
    assert w == 60.0
    assert alloc.winners == (0, 1, 2)


def test_ex1_welfare_without_and_within_coalitions():
    inst, _ = fixture_ex1()
    assert solve_wdp(inst, ValuationOverlay(exclude=frozenset({0})))[1] == 50.0
    assert coalition_welfare(inst, range(3, 10)) == 41.0
    assert coalition_welfare(inst, []) == 0.0
    with pytest.raises(ValueError):
        coalition_welfare(inst, [42])


def test_ex1_allocation_count_and_cap():
    inst, _ = fixture_ex1()
    assert len(enumerate_feasible_allocations(inst, 1000)) == 37
    assert count_feasible_allocations(inst, 1000) == 37
    with pytest.raises(AllocationCapExceeded, match="allocation count exceeds cap"):
        enumerate_feasible_allocations(inst, 10)


def test_overlay_replaces_bids():
    inst, _ = fixture_ex1()
    # bidder 0 now bids 0 on {a}; the abc bidder still loses to 10 + 20 + 20
    alloc, w = solve_wdp(inst, ValuationOverlay(replace={0: [((0,), 0.0)]}))
    assert w == 50.0
    assert alloc.bundle_of(0) is None


@settings(max_examples=80, deadline=None)
@given(instances())
def test_wdp_matches_enumeration(inst):
    alloc, w = solve_wdp(inst)
    assert not validate_allocation(inst, alloc)
    assert w == pytest.approx(best_welfare(inst), abs=1e-9)
    assert alloc.welfare(inst) == pytest.approx(w, abs=1e-9)
    assert count_feasible_allocations(inst, 10**6) == len(all_allocations(inst))


@settings(max_examples=40, deadline=None)
@given(instances())
def test_wdp_is_deterministic(inst):
    assert solve_wdp(inst) == solve_wdp(inst)
