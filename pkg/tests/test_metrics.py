import math

import pytest

from wtcore.generate import no_competition_instance
from wtcore.metrics import (
    CSV_COLUMNS, ZERO_BURDEN, aggregate, build_report, core_burden_split, core_membership_flags, gmean_gsd,
    sum_deviations,
)
from wtcore.model import fixture_ex1
from wtcore.payments import vcg_payments
from wtcore.wdp import solve_wdp


def test_sum_deviations():
    assert sum_deviations({0: 11, 1: 17, 2: 15}, {0: 10, 1: 17, 2: 15}) == 1.0
    assert sum_deviations({0: 14, 1: 14, 2: 13}, {0: 10, 1: 10, 2: 10}) == 11.0
    assert sum_deviations({0: 3.0}, {0: 3.0}) == 0.0
    with pytest.raises(ValueError):
        sum_deviations({0: 1.0}, {1: 1.0})


def test_burden_split_examples():
    # all the increase falls on bidder 0, the lowest id among equal bids
    assert core_burden_split({0: 11, 1: 17, 2: 15}, {0: 10, 1: 17, 2: 15}, {0: 20, 1: 20, 2: 20}) == (1.0, 0.0)
    assert core_burden_split({0: 5, 1: 5}, {0: 5, 1: 5}, {0: 9, 1: 9}) is ZERO_BURDEN
    assert core_burden_split({0: 1.25, 1: 1.75}, {0: 1.0, 1: 1.0}, {0: 3.0, 1: 8.0}) == (0.25, 0.75)


def test_burden_split_sums_to_one():
    lo, hi = core_burden_split({0: 3, 1: 5, 2: 9}, {0: 1, 1: 1, 2: 1}, {0: 4, 1: 9, 2: 2})
    assert lo + hi == pytest.approx(1.0)


def test_membership_flags():
    inst, _ = fixture_ex1()
    alloc, _ = solve_wdp(inst)
    vcg = vcg_payments(inst, alloc)
    assert core_membership_flags(inst, alloc, vcg, {0: 10.0, 1: 17.0, 2: 15.0}) == (False, False, False)
    nc = no_competition_instance()
    a2, _ = solve_wdp(nc)
    v2 = vcg_payments(nc, a2)
    assert core_membership_flags(nc, a2, v2, v2) == (True, True, True)
    assert core_membership_flags(nc, a2, v2, {0: 10.0, 1: 10.0})[1]


def test_report_row_schema_and_invariants():
    inst, _ = fixture_ex1()
    alloc, w = solve_wdp(inst)
    vcg = {0: 10.0, 1: 10.0, 2: 10.0}
    wt = {0: 10.0, 1: 17.0, 2: 15.0}
    rep = build_report(
        instance_id="ex1", seed=0, K=1, beta=0.3, instance=inst, allocation=alloc, welfare=w, rule="WtNearest",
        vanilla=False, prices={0: 11.0, 1: 17.0, 2: 15.0}, vcg=vcg, wt=wt, flags=(False, False, False),
        wt_cg_iters=4, ccg_iters=2, wt_ms=1.0, ccg_ms=2.0,
    )
    assert rep.sum_dev == 1.0 and rep.burden_lower_wt == 1.0
    assert not rep.problems(above_wt=True)
    row = rep.to_row()
    assert tuple(row) == CSV_COLUMNS
    assert row["wt_in_core"] == "0"


def test_aggregate():
    rows = [
        dict(K="1", rule="R", revenue="2", wt_revenue="1", vcg_revenue="1", sum_dev="1", burden_lower_wt="",
             burden_upper_wt="", burden_lower_vcg="0.5", burden_upper_vcg="0.5", wt_cg_iters="2", ccg_iters="1",
             wt_ms="1", ccg_ms="4", vcg_in_core="0", wt_in_core="1", zero_rev_vanilla="0"),
        dict(K="1", rule="R", revenue="4", wt_revenue="1", vcg_revenue="1", sum_dev="3", burden_lower_wt="",
             burden_upper_wt="", burden_lower_vcg="", burden_upper_vcg="", wt_cg_iters="8", ccg_iters="1",
             wt_ms="4", ccg_ms="1", vcg_in_core="1", wt_in_core="1", zero_rev_vanilla="1"),
    ]
    (rec,) = aggregate(rows)
    assert rec["mean_revenue"] == 3.0 and rec["mean_sum_dev"] == 2.0
    assert rec["gm_wt_cg_iters"] == pytest.approx(4.0)
    assert math.isnan(rec["mean_burden_lower_wt"])
    assert rec["mean_burden_lower_vcg"] == 0.5
    assert rec["frac_vcg_out_wt_in"] == 0.5 and rec["frac_zero_rev_vanilla"] == 0.5


def test_gmean_gsd():
    gm, gsd = gmean_gsd([1.0, 100.0])
    assert gm == pytest.approx(10.0)
    assert gsd > 1.0
    assert gmean_gsd([3.0]) == (pytest.approx(3.0), 1.0)
