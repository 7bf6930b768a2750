"""Reader and writer for CATS 2.1 bid files.

A CATS file lists ``goods``, ``bids`` and ``dummy`` counts followed by one bid
per line: ``index value good good ... #``. Goods numbered ``>= goods`` are
dummy goods; bids that share a dummy good belong to one XOR bidder.
"""
from __future__ import annotations

import io
import logging
from dataclasses import dataclass
from typing import Optional, TextIO, Union

from .model import Bid, Bidder, Instance, bundle

log = logging.getLogger(__name__)

HEADERS = ("goods", "bids", "dummy")


class CatsParseError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class CatsBid:
    index: int
    value: float
    goods: tuple[int, ...]


@dataclass(frozen=True)
class CatsFile:
    num_goods: int
    num_bids: int
    num_dummy: int
    bids: tuple[CatsBid, ...]

    def dummy_of(self, bid: CatsBid) -> Optional[int]:
        d = [g for g in bid.goods if g >= self.num_goods]
        return d[0] if d else None


def _int(tok: str, what: str, lineno: int) -> int:
    try:
        return int(tok)
    except ValueError:
        raise CatsParseError(f"malformed row: {what} {tok!r} is not an integer", lineno) from None


def parse_cats(text: Union[str, TextIO]) -> CatsFile:
    stream = io.StringIO(text) if isinstance(text, str) else text
    header: dict[str, int] = {}
    bids: list[CatsBid] = []
    seen: set[int] = set()
    for lineno, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line or line.startswith("%"):
            continue
        first = line.split(None, 1)[0]
        if not first.lstrip("-").isdigit():
            parts = line.split()
            key = parts[0].lower()
            if key in HEADERS:
                if bids:
                    raise CatsParseError(f"header {key!r} after bid rows", lineno)
                if len(parts) != 2:
                    raise CatsParseError(f"malformed header {line!r}", lineno)
                header[key] = _int(parts[1], key, lineno)
                if header[key] < 0:
                    raise CatsParseError(f"negative {key} count", lineno)
            else:
                log.warning("ignoring unknown CATS line %d: %s", lineno, line)
            continue
        missing = [h for h in HEADERS if h not in header]
        if missing:
            raise CatsParseError(f"missing header {missing[0]!r} before bid rows", lineno)
        if not line.endswith("#"):
            raise CatsParseError("malformed row: missing terminating '#'", lineno)
        toks = line[:-1].split()
        if len(toks) < 3:
            raise CatsParseError("malformed row: need index, value and at least one good", lineno)
        idx = _int(toks[0], "bid index", lineno)
        try:
            value = float(toks[1])
        except ValueError:
            raise CatsParseError(f"malformed row: value {toks[1]!r}", lineno) from None
        goods = tuple(_int(t, "good", lineno) for t in toks[2:])
        limit = header["goods"] + header["dummy"]
        bad = [g for g in goods if g < 0 or g >= limit]
        if bad:
            raise CatsParseError(f"good index {bad[0]} out of range [0, {limit})", lineno)
        if sum(g >= header["goods"] for g in goods) > 1:
            raise CatsParseError("bid references more than one dummy good", lineno)
        if len(set(goods)) != len(goods):
            raise CatsParseError("bid repeats a good", lineno)
        if idx in seen:
            raise CatsParseError(f"duplicate bid index {idx}", lineno)
        if value < 0:
            raise CatsParseError(f"negative bid value {value}", lineno)
        seen.add(idx)
        bids.append(CatsBid(idx, value, goods))
    missing = [h for h in HEADERS if h not in header]
    if missing:
        raise CatsParseError(f"missing header {missing[0]!r}")
    if len(bids) != header["bids"]:
        raise CatsParseError(f"header announces {header['bids']} bids, found {len(bids)}")
    return CatsFile(header["goods"], header["bids"], header["dummy"], tuple(bids))


def to_instance(cf: CatsFile) -> Instance:
    """Group bids by dummy good into XOR bidders; ids follow first appearance."""
    groups: dict[tuple, list[Bid]] = {}
    for b in cf.bids:
        d = cf.dummy_of(b)
        key = ("dummy", d) if d is not None else ("bid", b.index)
        real = bundle(g for g in b.goods if g < cf.num_goods)
        if not real:
            raise CatsParseError(f"bid {b.index} contains no real goods")
        group = groups.setdefault(key, [])
        if any(x.bundle == real for x in group):
            raise CatsParseError(f"bid {b.index} repeats a bundle within its XOR group")
        group.append(Bid(real, b.value))
    bidders = tuple(Bidder(i, tuple(bl)) for i, bl in enumerate(groups.values()))
    return Instance(cf.num_goods, bidders)


def from_instance(instance: Instance) -> CatsFile:
    """Canonical CATS encoding: bidders with two or more bids get a dummy good."""
    rows = []
    dummy = 0
    for bidder in instance.bidders:
        tag = None
        if len(bidder.bids) > 1:
            tag = instance.num_goods + dummy
            dummy += 1
        for bid in bidder.bids:
            goods = bid.bundle + ((tag,) if tag is not None else ())
            rows.append(CatsBid(len(rows), bid.value, goods))
    return CatsFile(instance.num_goods, len(rows), dummy, tuple(rows))


def format_cats(cf: CatsFile) -> str:
    out = [f"goods {cf.num_goods}", f"bids {cf.num_bids}", f"dummy {cf.num_dummy}", ""]
    for b in cf.bids:
        out.append("\t".join([str(b.index), repr(float(b.value)), *map(str, b.goods), "#"]))
    return "\n".join(out) + "\n"


def write_cats(instance: Instance) -> str:
    return format_cats(from_instance(instance))


def read_cats_instance(path) -> Instance:
    with open(path) as fh:
        return to_instance(parse_cats(fh))
