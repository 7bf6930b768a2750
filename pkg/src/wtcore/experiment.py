"""Seeded parameter sweeps over instances, type-space sizes and payment rules.

A cell is one (instance, K) pair. Each cell computes VCG and WT payments once
and then every requested rule, producing one metrics row per rule and one
per-bidder row comparing the WT formulations. Cells are independent, so they
run in a process pool; rows are written by the parent in cell order.
"""
from __future__ import annotations

import csv
import glob
import logging
import os
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Iterator, Optional

import numpy as np

from .cats import read_cats_instance
from .core import PaymentRule, price_rule
from .generate import generate_instance
from .metrics import CSV_COLUMNS, aggregate, build_report, core_membership_flags, format_cell
from .model import Instance
from .payments import Formulation, vcg_payments, wt_prices
from .solvers import set_lp_dump_dir
from .typespace import TypeSpaceGenConfig, generate_type_space
from .wdp import solve_wdp

log = logging.getLogger(__name__)

ALL_RULES = tuple(r.value for r in PaymentRule)
BIDDER_COLUMNS = (
    "instance_id", "K", "bidder", "wt_bps", "wt_bo", "iters_bps", "iters_bo", "ms_bps", "ms_bo", "abs_diff",
)
ERROR_COLUMNS = ("instance_id", "K", "error")


@dataclass
class ExperimentConfig:
    cats: str = ""
    goods: tuple[int, ...] = (6,)
    bids: tuple[int, ...] = (10,)
    instances: int = 10
    seed: int = 0
    max_bundle: int = 4
    xor_prob: float = 0.3
    k: tuple[int, ...] = (1, 2, 4, 8, 16)
    beta: float = 0.3
    nested: bool = True
    ts_seed: int = 0
    formulations: tuple[str, ...] = ("BPS", "BO")
    rules: tuple[str, ...] = ALL_RULES
    out: str = "results"
    jobs: int = 1
    time_limit_s: float = 0.0
    dump_lp: str = ""
    fresh: bool = False

    def validate(self) -> None:
        if not self.cats and (not self.goods or not self.bids or self.instances <= 0):
            raise ValueError("no instance source: give a CATS glob or generator goods/bids/instances")
        for f in self.formulations:
            Formulation(f)
        for r in self.rules:
            PaymentRule.parse(r)
        if not self.k:
            raise ValueError("k list is empty")

    def update(self, **overrides) -> "ExperimentConfig":
        for key, raw in overrides.items():
            if raw is None:
                continue
            setattr(self, key, coerce(key, raw))
        return self


def _field_types() -> dict[str, str]:
    return {f.name: str(f.type) for f in fields(ExperimentConfig)}


def coerce(key: str, raw):
    types = _field_types()
    if key not in types:
        raise ValueError(f"unknown config key {key!r}")
    if not isinstance(raw, str):
        return tuple(raw) if isinstance(raw, list) else raw
    t = types[key]
    raw = raw.strip()
    if t.startswith("tuple[int"):
        return tuple(int(x) for x in raw.replace(" ", "").split(",") if x)
    if t.startswith("tuple[str"):
        items = tuple(x.strip() for x in raw.split(",") if x.strip())
        if key == "rules" and items == ("all",):
            return ALL_RULES
        return items
    if t == "bool":
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"{key}: expected a boolean, got {raw!r}")
    if t == "int":
        return int(raw)
    if t == "float":
        return float(raw)
    return raw


def load_config(path) -> ExperimentConfig:
    """Flat ``key = value`` file; ``#`` starts a comment."""
    cfg = ExperimentConfig()
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            setattr(cfg, key, coerce(key, value))
    return cfg


# -- cells ---------------------------------------------------------------------

@dataclass(frozen=True)
class Source:
    instance_id: str
    path: str = ""
    goods: int = 0
    bids: int = 0
    seed: int = 0

    def load(self, cfg: ExperimentConfig) -> Instance:
        if self.path:
            return read_cats_instance(self.path)
        return generate_instance(self.goods, self.bids, self.seed, cfg.max_bundle, cfg.xor_prob)


@dataclass(frozen=True)
class Cell:
    index: int
    source: Source
    K: int

    @property
    def key(self) -> tuple[str, str]:
        return self.source.instance_id, str(self.K)


def _derive(*parts: int) -> int:
    return int(np.random.SeedSequence(list(parts)).generate_state(1, np.uint32)[0])


def sources(cfg: ExperimentConfig) -> list[Source]:
    out = []
    if cfg.cats:
        for path in sorted(glob.glob(cfg.cats)):
            out.append(Source(Path(path).stem, path=path))
    else:
        for g in cfg.goods:
            for b in cfg.bids:
                for r in range(cfg.instances):
                    out.append(Source(f"g{g}_b{b}_{r:03d}", goods=g, bids=b, seed=_derive(cfg.seed, g, b, r)))
    return out


def cells(cfg: ExperimentConfig) -> list[Cell]:
    out = []
    for s in sources(cfg):
        for k in cfg.k:
            out.append(Cell(len(out), s, k))
    return out


def typespace_seed(cfg: ExperimentConfig, instance_id: str) -> int:
    return _derive(cfg.ts_seed, zlib.crc32(instance_id.encode()))


@dataclass
class CellResult:
    cell: Cell
    metrics: list[dict] = field(default_factory=list)
    bidders: list[dict] = field(default_factory=list)
    error: Optional[str] = None


def run_cell(cell: Cell, cfg: ExperimentConfig) -> CellResult:
    out = CellResult(cell)
    if cfg.dump_lp:
        set_lp_dump_dir(Path(cfg.dump_lp) / f"{cell.source.instance_id}_K{cell.K}")
    deadline = time.monotonic() + cfg.time_limit_s if cfg.time_limit_s > 0 else None
    try:
        inst = cell.source.load(cfg)
        alloc, welfare = solve_wdp(inst)
        vcg = vcg_payments(inst, alloc)
        ts_seed = typespace_seed(cfg, cell.source.instance_id)
        ts_cfg = TypeSpaceGenConfig(k=cell.K, beta=cfg.beta, seed=ts_seed, nested=cfg.nested)
        spaces = {i: generate_type_space(inst, i, ts_cfg) for i in alloc.winners}
        per_form = {}
        for f in cfg.formulations:
            per_form[Formulation(f)] = wt_prices(inst, spaces, Formulation(f), alloc, deadline)
        primary = Formulation.BPS if Formulation.BPS in per_form else next(iter(per_form))
        wt, wt_res = per_form[primary]
        for i in alloc.winners:
            row = {"instance_id": cell.source.instance_id, "K": cell.K, "bidder": i}
            for f, tag in ((Formulation.BPS, "bps"), (Formulation.BO, "bo")):
                r = per_form[f][1][i] if f in per_form else None
                row[f"wt_{tag}"] = r.payment if r else None
                row[f"iters_{tag}"] = r.cg_iterations if r else None
                row[f"ms_{tag}"] = 1e3 * r.wall_time if r else None
            both = [row["wt_bps"], row["wt_bo"]]
            row["abs_diff"] = abs(both[0] - both[1]) if None not in both else None
            out.bidders.append(row)
        flags = core_membership_flags(inst, alloc, vcg, wt)
        wt_iters = sum(r.cg_iterations for r in wt_res.values())
        wt_ms = 1e3 * sum(r.wall_time for r in wt_res.values())
        for name in cfg.rules:
            rule = PaymentRule.parse(name)
            res = price_rule(inst, alloc, rule, vcg, wt, deadline=deadline)
            rep = build_report(
                instance_id=cell.source.instance_id, seed=ts_seed, K=cell.K, beta=cfg.beta, instance=inst,
                allocation=alloc, welfare=welfare, rule=rule.value, vanilla=rule.vanilla, prices=res.prices,
                vcg=vcg, wt=wt, flags=flags, wt_cg_iters=wt_iters, ccg_iters=res.ccg_iterations,
                wt_ms=wt_ms, ccg_ms=1e3 * res.wall_time,
            )
            out.metrics.append(rep.to_row())
    except Exception as exc:  # recorded per cell; the sweep carries on
        out.metrics, out.bidders = [], []
        out.error = f"{type(exc).__name__}: {exc}"
    out.bidders = [{k: format_cell(v) for k, v in r.items()} for r in out.bidders]
    return out


# -- output --------------------------------------------------------------------

def _read(path: Path) -> list[dict]:
    if not path.exists():
        return []
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _write(path: Path, columns, rows) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    os.replace(tmp, path)


def _append(path: Path, columns, rows) -> None:
    with open(path, "a", newline="") as fh:
        csv.DictWriter(fh, fieldnames=columns, lineterminator="\n").writerows(rows)


def _run(todo: list[Cell], cfg: ExperimentConfig) -> Iterator[CellResult]:
    if cfg.jobs <= 1 or len(todo) <= 1:
        for c in todo:
            yield run_cell(c, cfg)
        return
    with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
        yield from pool.map(run_cell, todo, [cfg] * len(todo), chunksize=1)


@dataclass
class SweepSummary:
    cells: int
    ran: int
    skipped: int
    errors: int
    out_dir: Path


def run_sweep(cfg: ExperimentConfig) -> SweepSummary:
    """Run every cell not already present in ``metrics.csv`` and rewrite all outputs in cell order."""
    cfg.validate()
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    mpath, bpath, epath = out / "metrics.csv", out / "wt_bidders.csv", out / "errors.csv"
    all_cells = cells(cfg)
    wanted = {PaymentRule.parse(r).value for r in cfg.rules}

    old_m = [] if cfg.fresh else _read(mpath)
    old_b = [] if cfg.fresh else _read(bpath)
    have: dict[tuple, set] = {}
    for r in old_m:
        have.setdefault((r["instance_id"], r["K"]), set()).add(r["rule"])
    done = {c.key for c in all_cells if wanted <= have.get(c.key, set())}
    keep_m = [r for r in old_m if (r["instance_id"], r["K"]) in done and r["rule"] in wanted]
    keep_b = [r for r in old_b if (r["instance_id"], r["K"]) in done]
    _write(mpath, CSV_COLUMNS, keep_m)
    _write(bpath, BIDDER_COLUMNS, keep_b)
    _write(epath, ERROR_COLUMNS, [])

    todo = [c for c in all_cells if c.key not in done]
    errors = 0
    for res in _run(todo, cfg):
        if res.error:
            errors += 1
            log.warning("cell %s K=%s failed: %s", *res.cell.key, res.error)
            _append(epath, ERROR_COLUMNS, [{"instance_id": res.cell.key[0], "K": res.cell.K, "error": res.error}])
            continue
        _append(mpath, CSV_COLUMNS, res.metrics)
        _append(bpath, BIDDER_COLUMNS, res.bidders)

    order = {c.key: c.index for c in all_cells}
    rule_order = {r: k for k, r in enumerate(ALL_RULES)}

    def mkey(r):
        return order.get((r["instance_id"], r["K"]), len(order)), rule_order.get(r["rule"], 99)

    def bkey(r):
        return order.get((r["instance_id"], r["K"]), len(order)), int(r["bidder"])

    metrics = sorted(_read(mpath), key=mkey)
    _write(mpath, CSV_COLUMNS, metrics)
    _write(bpath, BIDDER_COLUMNS, sorted(_read(bpath), key=bkey))
    summary = aggregate(metrics) if metrics else []
    if summary:
        _write(out / "summary.csv", list(summary[0]), summary)
    return SweepSummary(len(all_cells), len(todo), len(all_cells) - len(todo), errors, out)
