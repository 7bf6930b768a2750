"""Compare the two WT formulations: column-generation iterations and wall
time per winner.

    python scripts/formulation_compare.py [--out results/formulations] [--instances 100]
"""
import argparse
import csv

import numpy as np

from wtcore.experiment import ExperimentConfig, run_sweep
from wtcore.metrics import gmean_gsd


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results/formulations")
    ap.add_argument("--goods", default="8")
    ap.add_argument("--bids", default="16")
    ap.add_argument("--instances", type=int, default=100)
    ap.add_argument("--k", default="8")
    ap.add_argument("--beta", type=float, default=0.3)
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()

    cfg = ExperimentConfig(out=args.out, beta=args.beta, jobs=args.jobs, rules=("WtNearest",))
    cfg.update(goods=args.goods, bids=args.bids, instances=str(args.instances), k=args.k)
    run_sweep(cfg)

    with open(f"{args.out}/wt_bidders.csv") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        print("no winners")
        return
    per_instance = {}
    for r in rows:
        acc = per_instance.setdefault((r["instance_id"], r["K"]), [0, 0])
        acc[0] += int(r["iters_bps"])
        acc[1] += int(r["iters_bo"])
    for tag in ("bps", "bo"):
        it = gmean_gsd([float(r[f"iters_{tag}"]) for r in rows])
        ms = gmean_gsd([float(r[f"ms_{tag}"]) for r in rows])
        print(f"{tag.upper():<4} iterations GM {it[0]:.2f} (GSD {it[1]:.2f})   time ms GM {ms[0]:.2f} (GSD {ms[1]:.2f})")
    fewer = np.mean([b < o for b, o in per_instance.values()])
    print(f"BPS needs fewer iterations on {100 * fewer:.0f}% of instances")
    print(f"max |BPS - BO| payment gap: {max(float(r['abs_diff']) for r in rows):.2e}")


if __name__ == "__main__":
    main()
