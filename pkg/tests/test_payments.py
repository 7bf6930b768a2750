import pytest
from hypothesis import given, settings, strategies as st

from oracles import vcg_oracle, wt_oracle
from strategies import instances
from wtcore.model import LinearTypeSpace, TypeConstraint, fixture_ex1, floor_typespace, true_bids_typespace
from wtcore.payments import (
    EmptyTypeSpace, Formulation, vcg_payments, wt_payment, wt_payment_bo, wt_payment_bps, wt_prices,
)
from wtcore.typespace import TypeSpaceGenConfig, generate_type_space
from wtcore.wdp import solve_wdp

TOL = 1e-6


def test_ex1_vcg():
    inst, _ = fixture_ex1()
    assert vcg_payments(inst) == {0: 10.0, 1: 10.0, 2: 10.0}


@pytest.mark.parametrize("form", list(Formulation))
def test_ex1_wt(form):
    inst, spaces = fixture_ex1()
    prices, res = wt_prices(inst, spaces, form)
    assert prices == pytest.approx({0: 10.0, 1: 17.0, 2: 15.0}, abs=TOL)
    assert all(r.formulation is form for r in res.values())


def test_ex1_iteration_counts():
    inst, spaces = fixture_ex1()
    _, bps = wt_prices(inst, spaces, Formulation.BPS)
    _, bo = wt_prices(inst, spaces, Formulation.BO)
    assert [bps[i].cg_iterations for i in (0, 1, 2)] == [2, 1, 1]
    assert [bo[i].cg_iterations for i in (0, 1, 2)] == [5, 6, 7]


def test_weakest_type_is_reported():
    inst, spaces = fixture_ex1()
    r = wt_payment_bps(inst, 1, spaces[1])
    assert r.weakest_type == pytest.approx({(1,): 17.0})
    assert r.pivot_value == pytest.approx(57.0)


def test_true_bids_type_space_charges_the_bid():
    inst, _ = fixture_ex1()
    for form in Formulation:
        r = wt_payment(inst, 0, true_bids_typespace(inst, 0), form)
        assert r.payment == pytest.approx(20.0, abs=TOL)


def test_empty_type_space_is_rejected():
    inst, _ = fixture_ex1()
    ts = LinearTypeSpace(0, ((0,),), (TypeConstraint((1.0,), 5.0), TypeConstraint((-1.0,), -3.0)))
    for fn in (wt_payment_bps, wt_payment_bo):
        with pytest.raises(EmptyTypeSpace, match="empty type space"):
            fn(inst, 0, ts)


def test_losers_and_foreign_type_spaces_are_rejected():
    inst, spaces = fixture_ex1()
    with pytest.raises(ValueError):
        wt_payment(inst, 5, LinearTypeSpace.unrestricted(5))
    with pytest.raises(ValueError):
        wt_payment(inst, 0, spaces[1])


def test_deadline_raises():
    inst, spaces = fixture_ex1()
    with pytest.raises(TimeoutError):
        wt_prices(inst, spaces, deadline=0.0)


@settings(max_examples=60, deadline=None)
@given(instances(), st.integers(0, 6), st.floats(0.0, 1.0), st.integers(0, 2**32 - 1))
def test_payments_match_oracles_and_are_ordered(inst, k, beta, seed):
    alloc, _ = solve_wdp(inst)
    vcg = vcg_payments(inst, alloc)
    assert vcg == pytest.approx(vcg_oracle(inst, alloc.assignment), abs=TOL)
    cfg = TypeSpaceGenConfig(k=k, beta=beta, seed=seed)
    for i in alloc.winners:
        ts = generate_type_space(inst, i, cfg)
        want = wt_oracle(inst, alloc.assignment, i, ts)
        bps = wt_payment_bps(inst, i, ts, alloc).payment
        bo = wt_payment_bo(inst, i, ts, alloc).payment
        assert bps == pytest.approx(want, abs=TOL)
        assert bo == pytest.approx(want, abs=TOL)
        assert vcg[i] - TOL <= bps <= inst.value(i, alloc.bundle_of(i)) + TOL


@settings(max_examples=40, deadline=None)
@given(instances(), st.floats(0.0, 1.0))
def test_floor_raises_payment_to_at_least_floor_minus_competition(inst, frac):
    alloc, _ = solve_wdp(inst)
    for i in alloc.winners:
        s = alloc.bundle_of(i)
        bid = inst.value(i, s)
        wt = wt_payment(inst, i, floor_typespace(inst, i, {s: frac * bid}), allocation=alloc).payment
        # with v(S_i) >= f the bidder can always be charged at least f, and never more than the bid
        assert frac * bid - TOL <= wt <= bid + TOL
