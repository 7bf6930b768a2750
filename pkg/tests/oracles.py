"""Brute-force reference implementations used to check the engine.

These deliberately avoid the engine's solver layer: allocations are
enumerated directly, LPs go straight to scipy and the QP goes to cvxpy.
"""
from __future__ import annotations

import cvxpy as cp
import numpy as np
from scipy.optimize import linprog

from wtcore.model import Instance


def all_allocations(instance: Instance):
    """Every feasible allocation as a tuple of (bundle or None) per bidder."""
    out = []

    def rec(i, used, acc):
        if i == instance.n:
            out.append(tuple(acc))
            return
        rec(i + 1, used, acc + [None])
        for bid in instance.bidders[i].bids:
            if not used & set(bid.bundle):
                rec(i + 1, used | set(bid.bundle), acc + [bid.bundle])

    rec(0, frozenset(), [])
    return out


def value_of(instance, assignment, members=None):
    return sum(
        instance.value(i, s) for i, s in enumerate(assignment) if s and (members is None or i in members)
    )


def best_welfare(instance, members=None):
    best = 0.0
    for a in all_allocations(instance):
        if members is not None and any(s and i not in members for i, s in enumerate(a)):
            continue
        best = max(best, value_of(instance, a))
    return best


def vcg_oracle(instance, assignment):
    w = value_of(instance, assignment)
    out = {}
    for i, s in enumerate(assignment):
        if s:
            others = set(range(instance.n)) - {i}
            out[i] = best_welfare(instance, others) - (w - instance.value(i, s))
    return out


def wt_oracle(instance, assignment, bidder, typespace):
    """``min_{v~} max_a [v~(a_i) + sum_{j != i} v_j(a_j)] - sum_{j != i} v_j(S_j*)``
    written as one LP with a row per feasible allocation."""
    bundles = list(typespace.bundles) if typespace else []
    col = {b: k + 1 for k, b in enumerate(bundles)}
    nv = 1 + len(bundles)
    c = np.zeros(nv)
    c[0] = 1.0
    A, b = [], []
    for a in all_allocations(instance):
        row = np.zeros(nv)
        row[0] = -1.0
        own = a[bidder]
        if own is not None and own in col:
            row[col[own]] = 1.0
        # bundles outside the type space's support are worth 0 at the weakest type
        A.append(row)
        b.append(-value_of(instance, a, set(range(instance.n)) - {bidder}))
    if typespace:
        for con in typespace.constraints:
            row = np.zeros(nv)
            for coef, bb in zip(con.coeffs, bundles):
                row[col[bb]] -= coef
            A.append(row)
            b.append(-con.rhs)
    bounds = [(None, None)] + [(0, None)] * len(bundles)
    res = linprog(c, A_ub=np.array(A), b_ub=np.array(b), bounds=bounds, method="highs")
    assert res.status == 0, res.message
    others = value_of(instance, assignment) - instance.value(bidder, assignment[bidder])
    return res.fun - others


def core_rows(instance, assignment):
    """(coalition, lhs winners, rhs) for every coalition of bidders."""
    n = instance.n
    winners = [i for i, s in enumerate(assignment) if s]
    table = {}
    for a in all_allocations(instance):
        mask = sum(1 << i for i, s in enumerate(a) if s)
        table[mask] = max(table.get(mask, 0.0), value_of(instance, a))
    rows = []
    for C in range(1 << n):
        w, sub = 0.0, C
        while True:
            w = max(w, table.get(sub, 0.0))
            if sub == 0:
                break
            sub = (sub - 1) & C
        members = frozenset(i for i in range(n) if C >> i & 1)
        rhs = w - sum(instance.value(j, assignment[j]) for j in members if assignment[j])
        rows.append((members, [i for i in winners if i not in members], rhs))
    return winners, rows


def one_shot_core_price(instance, assignment, floor, reference):
    """Minimum-revenue core point above ``floor`` nearest to ``reference``,
    with every coalition constraint written out."""
    winners, rows = core_rows(instance, assignment)
    if not winners:
        return {}, 0.0
    idx = {i: k for k, i in enumerate(winners)}
    lo = np.array([floor.get(i, 0.0) for i in winners])
    hi = np.array([instance.value(i, assignment[i]) for i in winners])
    lo = np.minimum(lo, hi)
    A, b = [], []
    for _, lhs, rhs in rows:
        if not lhs:
            continue
        row = np.zeros(len(winners))
        for i in lhs:
            row[idx[i]] = 1.0
        A.append(row)
        b.append(rhs)
    A, b = np.array(A), np.array(b)
    lp = linprog(np.ones(len(winners)), A_ub=-A, b_ub=-b, bounds=list(zip(lo, hi)), method="highs")
    assert lp.status == 0, lp.message
    r_hat = lp.fun
    p = cp.Variable(len(winners))
    ref = np.array([reference.get(i, 0.0) for i in winners])
    cons = [A @ p >= b - 1e-9, p >= lo, p <= hi, cp.sum(p) <= r_hat + 1e-9]
    cp.Problem(cp.Minimize(cp.sum_squares(p - ref)), cons).solve(solver=cp.CLARABEL, tol_gap_abs=1e-10,
                                                                tol_gap_rel=1e-10, tol_feas=1e-10)
    return {i: float(p.value[idx[i]]) for i in winners}, r_hat
