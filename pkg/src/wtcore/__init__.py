"""Weakest-type payments and core-selecting combinatorial auctions."""
from .model import (
    EPS, Allocation, Bid, Bidder, CoreConstraint, Instance, LinearTypeSpace, TypeConstraint,
    fixture_ex1, floor_typespace,
)
from .wdp import solve_wdp
from .payments import Formulation, vcg_payments, wt_payment, wt_prices
from .core import PaymentRule, Verdict, ccg_nearest, impossibility_diagnosis, in_core, price_rule, separate_core

__version__ = "0.1.0"

__all__ = [
    "EPS", "Allocation", "Bid", "Bidder", "CoreConstraint", "Instance", "LinearTypeSpace", "TypeConstraint",
    "fixture_ex1", "floor_typespace", "solve_wdp", "Formulation", "vcg_payments", "wt_payment", "wt_prices",
    "PaymentRule", "Verdict", "ccg_nearest", "impossibility_diagnosis", "in_core", "price_rule", "separate_core",
]
