"""Walk through the three-good, ten-bidder example: VCG, WT and all core rules."""
from wtcore import PaymentRule, fixture_ex1, impossibility_diagnosis, price_rule, solve_wdp, vcg_payments, wt_prices


def fmt(p):
    return "(" + ", ".join(f"{p[i]:.4g}" for i in sorted(p)) + ")"


def main():
    inst, spaces = fixture_ex1()
    alloc, welfare = solve_wdp(inst)
    vcg = vcg_payments(inst, alloc)
    wt, _ = wt_prices(inst, spaces, allocation=alloc)
    print(f"winners {alloc.winners}, welfare {welfare}")
    print(f"VCG {fmt(vcg)}  WT {fmt(wt)}")
    for rule in PaymentRule:
        res = price_rule(inst, alloc, rule, vcg, wt)
        print(f"{rule.value:<22} {fmt(res.prices)}  revenue {res.revenue:.4g}  CCG iterations {res.ccg_iterations}")
    print("diagnosis:", impossibility_diagnosis(inst, spaces, alloc).verdict.value)


if __name__ == "__main__":
    main()
