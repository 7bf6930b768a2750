"""Per-instance incentive, revenue, core and fairness statistics, plus aggregates."""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import asdict, dataclass, fields
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np
from scipy import stats

from .core import in_core
from .model import EPS, Allocation, Instance, PriceVector

CSV_COLUMNS = (
    "instance_id", "seed", "K", "beta", "goods", "bids", "rule", "revenue", "wt_revenue",
    "vcg_revenue", "welfare", "sum_dev", "wt_in_core", "vcg_in_core", "zero_rev_vanilla",
    "burden_lower_wt", "burden_upper_wt", "burden_lower_vcg", "burden_upper_vcg",
    "wt_cg_iters", "ccg_iters", "wt_ms", "ccg_ms",
)
TIMING_COLUMNS = ("wt_ms", "ccg_ms")

# returned by core_burden_split when no price moved off the baseline
ZERO_BURDEN = None


def sum_deviations(prices: Mapping[int, float], wt: Mapping[int, float]) -> float:
    """Total gain available from misreporting; ``sum_i p_i - p_i^WT`` for prices above WT."""
    if set(prices) != set(wt):
        raise ValueError(f"price vectors cover different bidders: {sorted(prices)} vs {sorted(wt)}")
    return float(sum(prices[i] - wt[i] for i in prices))


def core_burden_split(
    prices: Mapping[int, float], baseline: Mapping[int, float], winning_bids: Mapping[int, float]
) -> Optional[tuple[float, float]]:
    """Share of the price increase over ``baseline`` borne by the lower and upper half
    of winners ranked by winning bid (ties by id). The lower half has ``|W| // 2``
    members. Returns ``ZERO_BURDEN`` when prices equal the baseline."""
    if set(prices) != set(baseline):
        raise ValueError("price vectors cover different bidders")
    total = sum(prices[i] - baseline[i] for i in prices)
    if total <= EPS:
        return ZERO_BURDEN
    order = sorted(prices, key=lambda i: (winning_bids[i], i))
    half = len(order) // 2
    lower = sum(prices[i] - baseline[i] for i in order[:half]) / total
    upper = sum(prices[i] - baseline[i] for i in order[half:]) / total
    return lower, upper


def core_membership_flags(
    instance: Instance, allocation: Allocation, vcg: PriceVector, wt: PriceVector
) -> tuple[bool, bool, bool]:
    """(vcg_in_core, wt_in_core, zero_revenue_vanilla_mrc)."""
    vcg_ok = in_core(instance, allocation, vcg)
    wt_ok = in_core(instance, allocation, wt)
    zero = vcg_ok and sum(abs(p) for p in vcg.values()) <= EPS
    return vcg_ok, wt_ok, zero


@dataclass
class InstanceReport:
    instance_id: str
    seed: int
    K: int
    beta: float
    goods: int
    bids: int
    rule: str
    revenue: float
    wt_revenue: float
    vcg_revenue: float
    welfare: float
    sum_dev: float
    wt_in_core: bool
    vcg_in_core: bool
    zero_rev_vanilla: bool
    burden_lower_wt: Optional[float]
    burden_upper_wt: Optional[float]
    burden_lower_vcg: Optional[float]
    burden_upper_vcg: Optional[float]
    wt_cg_iters: int
    ccg_iters: int
    wt_ms: float
    ccg_ms: float

    def problems(self, above_wt: bool) -> list[str]:
        out = []
        if above_wt and self.sum_dev < -EPS:
            out.append("negative deviation sum")
        if above_wt and self.revenue < self.wt_revenue - EPS:
            out.append("revenue below WT revenue")
        if self.revenue > self.welfare + EPS:
            out.append("revenue above efficient welfare")
        return out

    def to_row(self) -> dict:
        return {k: format_cell(v) for k, v in asdict(self).items()}


assert tuple(f.name for f in fields(InstanceReport)) == CSV_COLUMNS


def format_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return f"{v:.10g}"
    return str(v)


def build_report(
    *, instance_id: str, seed: int, K: int, beta: float, instance: Instance, allocation: Allocation,
    welfare: float, rule: str, vanilla: bool, prices: PriceVector, vcg: PriceVector, wt: PriceVector,
    flags: tuple[bool, bool, bool], wt_cg_iters: int, ccg_iters: int, wt_ms: float, ccg_ms: float,
) -> InstanceReport:
    """Vanilla rules measure deviations and WT burdens against VCG, since VCG is
    the truthful payment without type-space knowledge."""
    won = {i: instance.value(i, allocation.bundle_of(i)) for i in allocation.winners}
    base = vcg if vanilla else wt
    split_wt = None if vanilla else core_burden_split(prices, wt, won)
    split_vcg = core_burden_split(prices, vcg, won)
    return InstanceReport(
        instance_id=instance_id, seed=seed, K=K, beta=beta, goods=instance.num_goods,
        bids=instance.num_bids, rule=rule, revenue=sum(prices.values()),
        wt_revenue=sum(wt.values()), vcg_revenue=sum(vcg.values()), welfare=welfare,
        sum_dev=sum_deviations(prices, base), vcg_in_core=flags[0], wt_in_core=flags[1],
        zero_rev_vanilla=flags[2],
        burden_lower_wt=split_wt[0] if split_wt else None, burden_upper_wt=split_wt[1] if split_wt else None,
        burden_lower_vcg=split_vcg[0] if split_vcg else None,
        burden_upper_vcg=split_vcg[1] if split_vcg else None,
        wt_cg_iters=wt_cg_iters, ccg_iters=ccg_iters, wt_ms=wt_ms, ccg_ms=ccg_ms,
    )


# -- aggregation ---------------------------------------------------------------

def gmean_gsd(values: Sequence[float], floor: float = 1e-9) -> tuple[float, float]:
    x = np.maximum(np.asarray(values, dtype=float), floor)
    if len(x) == 0:
        return math.nan, math.nan
    gsd = float(stats.gstd(x)) if len(x) > 1 and np.ptp(x) > 0 else 1.0
    return float(stats.gmean(x)), gsd


def _num(v) -> Optional[float]:
    if v is None or v == "":
        return None
    return float(v)


def aggregate(rows: Iterable[Mapping], keys: Sequence[str] = ("K", "rule")) -> list[dict]:
    """Group rows (dicts from ``to_row`` or CSV) and summarise each group.

    Revenues and deviations use arithmetic means; times and iteration counts
    use geometric mean and geometric standard deviation. Zero-burden rows are
    left out of burden averages.
    """
    groups: dict[tuple, list[Mapping]] = defaultdict(list)
    for r in rows:
        groups[tuple(str(r[k]) for k in keys)].append(r)
    out = []
    for key, rs in groups.items():
        rec = dict(zip(keys, key))
        rec["instances"] = len(rs)
        for col in ("revenue", "wt_revenue", "vcg_revenue", "sum_dev"):
            rec[f"mean_{col}"] = float(np.mean([_num(r[col]) for r in rs]))
        for col in ("burden_lower_wt", "burden_upper_wt", "burden_lower_vcg", "burden_upper_vcg"):
            vals = [_num(r[col]) for r in rs if _num(r[col]) is not None]
            rec[f"mean_{col}"] = float(np.mean(vals)) if vals else math.nan
        for col in ("wt_cg_iters", "ccg_iters", "wt_ms", "ccg_ms"):
            rec[f"gm_{col}"], rec[f"gsd_{col}"] = gmean_gsd([_num(r[col]) for r in rs])
        vcg_out = [not int(r["vcg_in_core"]) for r in rs]
        wt_in = [bool(int(r["wt_in_core"])) for r in rs]
        rec["frac_vcg_out_wt_in"] = float(np.mean([a and b for a, b in zip(vcg_out, wt_in)]))
        rec["frac_zero_rev_vanilla"] = float(np.mean([bool(int(r["zero_rev_vanilla"])) for r in rs]))
        out.append(rec)
    return out
