"""Write CATS-style sample files used by the round-trip tests.

The files imitate CATS output: comment preamble, headers in varying order,
tab-separated rows, long decimal values, and dummy goods for XOR groups.

    python scripts/make_cats_samples.py [out_dir]
"""
import sys
from pathlib import Path

import numpy as np

from wtcore.cats import from_instance
from wtcore.generate import generate_instance

HEADER_ORDERS = [("goods", "bids", "dummy"), ("bids", "goods", "dummy"), ("dummy", "goods", "bids")]


def render(cf, rng, name):
    lines = [f"% {name}", "% generated for round-trip tests", "%", ""]
    counts = {"goods": cf.num_goods, "bids": cf.num_bids, "dummy": cf.num_dummy}
    for h in HEADER_ORDERS[int(rng.integers(len(HEADER_ORDERS)))]:
        lines.append(f"{h} {counts[h]}")
    lines.append("")
    for b in cf.bids:
        # extra decimal digits so values are not round numbers
        value = f"{b.value + float(rng.integers(0, 10**6)) * 1e-8:.8f}"
        lines.append("\t".join([str(b.index), value, *map(str, b.goods), "#"]))
    return "\n".join(lines) + "\n"


def main(out_dir="tests/data/cats", count=20):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(2024)
    for k in range(count):
        goods = int(rng.integers(4, 13))
        bids = int(rng.integers(5, 31))
        inst = generate_instance(goods, bids, seed=1000 + k, xor_prob=0.5, max_xor=4)
        name = f"sample_{k:02d}.txt"
        (out / name).write_text(render(from_instance(inst), rng, name))
    print(f"wrote {count} files to {out}")


if __name__ == "__main__":
    main(*sys.argv[1:2])
