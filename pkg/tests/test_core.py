import pytest
from hypothesis import given, settings, strategies as st

from oracles import best_welfare, core_rows
from strategies import instances
from wtcore.core import (
    MAX_DIAGNOSIS_BIDDERS, InstanceTooLarge, PaymentRule, Verdict, ccg_nearest, coalition_welfare_table,
    core_constraint, enumerate_core_constraints, impossibility_diagnosis, in_core, min_revenue_above,
    price_rule, separate_core,
)
from wtcore.generate import generate_instance, no_competition_instance
from wtcore.model import Instance, fixture_ex1, floor_typespace
from wtcore.payments import vcg_payments, wt_prices
from wtcore.typespace import TypeSpaceGenConfig, generate_type_spaces
from wtcore.wdp import solve_wdp

TOL = 1e-6

EX1_PRICES = {
    PaymentRule.VANILLA_VCG_NEAREST: {0: 14, 1: 14, 2: 13},
    PaymentRule.VANILLA_ZERO_NEAREST: {0: 14, 1: 14, 2: 13},
    PaymentRule.WT_NEAREST: {0: 11, 1: 17, 2: 15},
    PaymentRule.ZERO_NEAREST_ABOVE_WT: {0: 11, 1: 17, 2: 15},
    PaymentRule.VCG_NEAREST_ABOVE_WT: {0: 11, 1: 17, 2: 15},
}


@pytest.fixture(scope="module")
def ex1():
    inst, spaces = fixture_ex1()
    alloc, _ = solve_wdp(inst)
    return inst, alloc, vcg_payments(inst, alloc), wt_prices(inst, spaces, allocation=alloc)[0]


@pytest.mark.parametrize("rule", list(PaymentRule))
def test_ex1_rules(ex1, rule):
    inst, alloc, vcg, wt = ex1
    res = price_rule(inst, alloc, rule, vcg, wt)
    assert res.prices == pytest.approx(EX1_PRICES[rule], abs=TOL)
    assert res.rule is rule
    assert in_core(inst, alloc, res.prices)


def test_ex1_separation(ex1):
    inst, alloc, vcg, wt = ex1
    cut = separate_core(inst, alloc, vcg)
    assert cut.coalition == frozenset({9}) and cut.rhs == 41.0
    assert separate_core(inst, alloc, {0: 11.0, 1: 17.0, 2: 15.0}) is None
    assert not in_core(inst, alloc, wt)


def test_ex1_min_revenue(ex1):
    inst, alloc, vcg, wt = ex1
    assert min_revenue_above(inst, alloc, vcg, generate=True)[0] == pytest.approx(41.0)
    assert min_revenue_above(inst, alloc, wt, generate=True)[0] == pytest.approx(43.0)


def test_core_constraint_matches_hand_value(ex1):
    inst, alloc, _, _ = ex1
    c = core_constraint(inst, alloc, {2, 3})
    assert c.lhs_winners == frozenset({0, 1}) and c.rhs == 28.0


def test_rule_parsing():
    assert PaymentRule.parse("wt-nearest") is PaymentRule.WT_NEAREST
    assert PaymentRule.parse("VanillaVcgNearest") is PaymentRule.VANILLA_VCG_NEAREST
    with pytest.raises(ValueError):
        PaymentRule.parse("nope")
    assert PaymentRule.ZERO_NEAREST_ABOVE_WT.vanilla_counterpart() is PaymentRule.VANILLA_ZERO_NEAREST


def test_floor_above_bid_is_rejected(ex1):
    inst, alloc, _, _ = ex1
    with pytest.raises(ValueError, match="floor exceeds winning bids"):
        ccg_nearest(inst, alloc, {0: 25.0, 1: 0.0, 2: 0.0}, {})


def test_no_winners_gives_empty_prices():
    inst = Instance.from_bids(1, [[((0,), 0.0)]])
    alloc, _ = solve_wdp(inst)
    res = price_rule(inst, alloc, PaymentRule.VANILLA_VCG_NEAREST, {})
    assert res.prices == {} and res.revenue == 0.0


def test_prices_equal_to_bids_are_in_core(ex1):
    inst, alloc, _, _ = ex1
    assert in_core(inst, alloc, {0: 20.0, 1: 20.0, 2: 20.0})
    assert not in_core(inst, alloc, {0: 21.0, 1: 20.0, 2: 20.0})


def test_ccg_result_json(ex1):
    inst, alloc, vcg, wt = ex1
    j = price_rule(inst, alloc, PaymentRule.WT_NEAREST, vcg, wt).to_json()
    assert j["rule"] == "WtNearest" and j["constraints"]


def test_ex1_diagnosis():
    inst, spaces = fixture_ex1()
    rep = impossibility_diagnosis(inst, spaces)
    assert rep.verdict is Verdict.NO_IC_CORE_CA
    assert not rep.wt_in_core
    assert rep.constraint_slacks[frozenset({2, 3})] == pytest.approx(-1.0)


def test_diagnosis_rejects_large_instances():
    inst = Instance.from_bids(MAX_DIAGNOSIS_BIDDERS + 1, [[((g,), 1.0)] for g in range(MAX_DIAGNOSIS_BIDDERS + 1)])
    with pytest.raises(InstanceTooLarge, match="instance too large"):
        impossibility_diagnosis(inst)


def test_diagnosis_unique_and_continuum():
    inst = no_competition_instance((10.0, 10.0))
    assert impossibility_diagnosis(inst).verdict is Verdict.WT_UNIQUE_IC_CORE_CA
    spaces = [floor_typespace(inst, i, {(i,): 5.0}) for i in range(2)]
    rep = impossibility_diagnosis(inst, spaces)
    assert rep.verdict is Verdict.CONTINUUM_OF_IC_CORE_CAS
    assert rep.attainable()


@settings(max_examples=40, deadline=None)
@given(instances(max_bidders=7))
def test_coalition_table_matches_brute_force(inst):
    table = coalition_welfare_table(inst)
    for mask in range(1 << inst.n):
        members = {i for i in range(inst.n) if mask >> i & 1}
        assert table[mask] == pytest.approx(best_welfare(inst, members), abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(instances(max_bidders=7))
def test_enumerated_constraints_match_oracle(inst):
    alloc, _ = solve_wdp(inst)
    ours = {c.coalition: c.rhs for c in enumerate_core_constraints(inst, alloc)}
    _, rows = core_rows(inst, alloc.assignment)
    assert ours == pytest.approx({c: rhs for c, _, rhs in rows}, abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 8), st.floats(0.0, 1.0))
def test_rule_properties(seed, k, beta):
    inst = generate_instance(5, 9, seed)
    alloc, _ = solve_wdp(inst)
    vcg = vcg_payments(inst, alloc)
    spaces = generate_type_spaces(inst, TypeSpaceGenConfig(k=k, beta=beta, seed=seed), alloc.winners)
    wt, _ = wt_prices(inst, spaces, allocation=alloc)
    devs = []
    for rule in PaymentRule:
        res = price_rule(inst, alloc, rule, vcg, wt)
        floor = vcg if rule.vanilla else wt
        assert all(res.prices[i] >= floor[i] - TOL for i in floor)
        assert separate_core(inst, alloc, res.prices) is None
        # re-solving with the final pool reproduces the revenue
        r_hat, _ = min_revenue_above(inst, alloc, floor, res.generated_constraints)
        assert r_hat == pytest.approx(res.revenue, abs=TOL)
        if not rule.vanilla:
            devs.append(sum(res.prices[i] - wt[i] for i in wt))
    assert max(devs) - min(devs) <= TOL


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6))
def test_deviation_sum_shrinks_as_floor_rises(seed):
    inst = generate_instance(5, 9, seed)
    alloc, _ = solve_wdp(inst)
    vcg = vcg_payments(inst, alloc)
    won = {i: inst.value(i, alloc.bundle_of(i)) for i in alloc.winners}
    prev = None
    for t in (0.0, 0.25, 0.5, 0.75, 1.0):
        floor = {i: vcg[i] + t * (won[i] - vcg[i]) for i in won}
        r_hat, _ = min_revenue_above(inst, alloc, floor, generate=True)
        dev = r_hat - sum(floor.values())
        if prev is not None:
            assert dev <= prev + TOL
        prev = dev
