"""Deviation, revenue and core-burden trends as the number of type-space
constraints K grows.

    python scripts/k_sweep.py [--out results/k_sweep] [--instances 50] [--jobs 4]

Writes the sweep CSVs under --out and prints per-(K, rule) means.
"""
import argparse
import csv
from collections import defaultdict

from wtcore.experiment import ExperimentConfig, run_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results/k_sweep")
    ap.add_argument("--goods", default="6,8")
    ap.add_argument("--bids", default="12")
    ap.add_argument("--instances", type=int, default=25)
    ap.add_argument("--beta", type=float, default=0.3)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--cats", default="", help="glob of CATS files instead of generated instances")
    args = ap.parse_args()

    cfg = ExperimentConfig(out=args.out, beta=args.beta, jobs=args.jobs, cats=args.cats, formulations=("BPS",))
    cfg.update(goods=args.goods, bids=args.bids, instances=str(args.instances))
    s = run_sweep(cfg)
    print(f"{s.cells} cells, {s.ran} run, {s.errors} errors -> {s.out_dir}")

    with open(f"{args.out}/summary.csv") as fh:
        summary = list(csv.DictReader(fh))
    by_rule = defaultdict(dict)
    for r in summary:
        by_rule[r["rule"]][int(r["K"])] = r
    ks = sorted({int(r["K"]) for r in summary})
    print("\nmean sum of deviations")
    print(f"{'rule':<22}" + "".join(f"{'K=' + str(k):>10}" for k in ks))
    for rule, rows in by_rule.items():
        print(f"{rule:<22}" + "".join(f"{float(rows[k]['mean_sum_dev']):>10.3f}" for k in ks))
    print("\nmean revenue")
    for rule, rows in by_rule.items():
        print(f"{rule:<22}" + "".join(f"{float(rows[k]['mean_revenue']):>10.3f}" for k in ks))
    print("\nWT-nearest core burden relative to WT (lower half / upper half)")
    rows = by_rule.get("WtNearest", {})
    for k in ks:
        if k in rows:
            print(f"K={k:<3} {float(rows[k]['mean_burden_lower_wt']):.3f} / {float(rows[k]['mean_burden_upper_wt']):.3f}")
    print("\nshare of instances with VCG outside the core but WT inside")
    for k in ks:
        if k in rows:
            print(f"K={k:<3} {float(rows[k]['frac_vcg_out_wt_in']):.3f}")


if __name__ == "__main__":
    main()
