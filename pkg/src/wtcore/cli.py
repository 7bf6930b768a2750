"""Command-line entry point: ``wtcore <subcommand> ...``.

Exit codes: 0 success, 1 solver or runtime failure, 2 unreadable or malformed
input, 3 instance too large for diagnosis.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional

from . import __version__
from .cats import CatsParseError, parse_cats, to_instance, write_cats
from .core import InstanceTooLarge, PaymentRule, impossibility_diagnosis, in_core, price_rule
from .experiment import ExperimentConfig, load_config, run_sweep
from .generate import generate_instance, no_competition_instance
from .metrics import sum_deviations
from .model import (
    Instance, dumps_instance, dumps_typespaces, fixture_ex1, instance_from_json, loads_typespaces,
    validate_instance,
)
from .payments import Formulation, vcg_payments, wt_prices
from .solvers import set_lp_dump_dir
from .typespace import TypeSpaceGenConfig, generate_type_spaces
from .wdp import solve_wdp

log = logging.getLogger("wtcore")


class InputError(Exception):
    pass


def _read_text(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    try:
        with open(path) as fh:
            return fh.read()
    except OSError as exc:
        raise InputError(f"cannot open {path}: {exc.strerror or exc}") from None


def load_instance(path: str) -> Instance:
    text = _read_text(path)
    try:
        if path.endswith(".json") or text.lstrip().startswith("{"):
            inst = instance_from_json(json.loads(text))
        else:
            inst = to_instance(parse_cats(text))
    except (ValueError, KeyError, TypeError) as exc:
        raise InputError(f"cannot parse {path}: {exc}") from None
    problems = validate_instance(inst)
    if problems:
        raise InputError(f"invalid instance {path}: {'; '.join(problems)}")
    return inst


def load_typespaces(args, instance: Instance, winners):
    if getattr(args, "typespaces", None):
        try:
            return loads_typespaces(_read_text(args.typespaces))
        except (ValueError, KeyError, TypeError) as exc:
            raise InputError(f"cannot parse {args.typespaces}: {exc}") from None
    if getattr(args, "k", None):
        cfg = TypeSpaceGenConfig(k=args.k, beta=args.beta, seed=args.seed, nested=not args.non_nested)
        return generate_type_spaces(instance, cfg, winners)
    return None


def _emit(obj, out: Optional[str]) -> None:
    text = json.dumps(obj, indent=2) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _prices(p) -> dict:
    return {str(i): v for i, v in sorted(p.items())}


def cmd_price(args) -> int:
    inst = load_instance(args.instance)
    alloc, welfare = solve_wdp(inst)
    spaces = load_typespaces(args, inst, alloc.winners)
    vcg = vcg_payments(inst, alloc)
    wt, wt_res = wt_prices(inst, spaces, Formulation(args.formulation), alloc)
    rules = list(PaymentRule) if args.rule == "all" else [PaymentRule.parse(r) for r in args.rule.split(",")]
    results = {}
    for rule in rules:
        res = price_rule(inst, alloc, rule, vcg, wt)
        rep = res.to_json()
        rep["certified_in_core"] = in_core(inst, alloc, res.prices)
        rep["sum_deviations"] = sum_deviations(res.prices, vcg if rule.vanilla else wt)
        results[rule.value] = rep
    first = results[rules[0].value]
    _emit({
        "allocation": {str(i): list(alloc.bundle_of(i)) for i in alloc.winners},
        "welfare": welfare,
        "vcg": _prices(vcg),
        "wt": _prices(wt),
        "wt_stats": [r.stats() for r in wt_res.values()],
        "rule": rules[0].value,
        "prices": first["prices"],
        "revenue": first["revenue"],
        "certified_in_core": first["certified_in_core"],
        "results": results,
    }, args.out)
    return 0


def cmd_diagnose(args) -> int:
    inst = load_instance(args.instance)
    alloc, _ = solve_wdp(inst)
    spaces = load_typespaces(args, inst, alloc.winners)
    rep = impossibility_diagnosis(inst, spaces, alloc, Formulation(args.formulation))
    _emit(rep.to_json(), args.out)
    return 0


def cmd_gen_typespace(args) -> int:
    inst = load_instance(args.instance)
    cfg = TypeSpaceGenConfig(k=args.k, beta=args.beta, seed=args.seed, nested=not args.non_nested)
    ids = None if args.all_bidders else solve_wdp(inst)[0].winners
    text = dumps_typespaces(generate_type_spaces(inst, cfg, ids))
    _write_text(text, args.out)
    return 0


def cmd_parse_cats(args) -> int:
    inst = load_instance(args.file)
    _write_text(dumps_instance(inst), args.out)
    return 0


def cmd_gen_instance(args) -> int:
    spaces = None
    if args.fixture == "ex1":
        inst, spaces = fixture_ex1()
    elif args.fixture == "no-competition":
        inst = no_competition_instance()
    else:
        inst = generate_instance(args.goods, args.bids, args.seed, args.max_bundle, args.xor_prob)
    text = write_cats(inst) if args.format == "cats" else dumps_instance(inst)
    _write_text(text, args.out)
    if args.typespaces_out:
        if spaces is None:
            raise InputError("--typespaces-out is only available with --fixture ex1")
        Path(args.typespaces_out).write_text(dumps_typespaces(spaces))
    return 0


def cmd_sweep(args) -> int:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    cfg.update(
        cats=args.cats, goods=args.goods, bids=args.bids, instances=args.instances, seed=args.seed,
        k=args.k, beta=args.beta, ts_seed=args.ts_seed, formulations=args.formulation, rules=args.rule,
        out=args.out, jobs=args.jobs, time_limit_s=args.time_limit_s, dump_lp=args.dump_lp,
    )
    if args.no_nested:
        cfg.nested = False
    if args.fresh:
        cfg.fresh = True
    s = run_sweep(cfg)
    print(f"cells={s.cells} ran={s.ran} skipped={s.skipped} errors={s.errors} out={s.out_dir}")
    return 0


def _write_text(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _typespace_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--typespaces", help="type-space JSON file (list of per-bidder spaces)")
    p.add_argument("--k", type=int, help="generate K constraints per winner instead of reading a file")
    p.add_argument("--beta", type=float, default=0.3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--non-nested", action="store_true")
    p.add_argument("--formulation", choices=[f.value for f in Formulation], default="BPS")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wtcore", description="Weakest-type and core-selecting payments.")
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("--dump-lp", help="write every LP/QP/IP solved to this directory")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("price", help="allocation, VCG, WT and core prices for one instance")
    p.add_argument("instance", help="instance file (.json or CATS)")
    _typespace_flags(p)
    p.add_argument("--rule", default=PaymentRule.WT_NEAREST.value, help="rule name, comma list or 'all'")
    p.add_argument("--out")
    p.set_defaults(func=cmd_price)

    p = sub.add_parser("diagnose", help="classify IC core-selecting feasibility")
    p.add_argument("instance")
    _typespace_flags(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("gen-typespace", help="random linear type spaces for an instance")
    p.add_argument("instance")
    p.add_argument("--k", type=int, default=8)
    p.add_argument("--beta", type=float, default=0.3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--non-nested", action="store_true")
    p.add_argument("--all-bidders", action="store_true", help="not just winners")
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen_typespace)

    p = sub.add_parser("parse-cats", help="convert a CATS file to instance JSON")
    p.add_argument("file")
    p.add_argument("--out")
    p.set_defaults(func=cmd_parse_cats)

    p = sub.add_parser("gen-instance", help="synthetic instance or a built-in fixture")
    p.add_argument("--goods", type=int, default=6)
    p.add_argument("--bids", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-bundle", type=int, default=4)
    p.add_argument("--xor-prob", type=float, default=0.3)
    p.add_argument("--fixture", choices=["ex1", "no-competition"])
    p.add_argument("--format", choices=["json", "cats"], default="json")
    p.add_argument("--typespaces-out")
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen_instance)

    p = sub.add_parser("sweep", help="run an experiment grid and write CSV files")
    p.add_argument("--config", help="flat key = value file; flags override it")
    p.add_argument("--cats", help="glob of CATS files (replaces the internal generator)")
    p.add_argument("--goods", help="comma list")
    p.add_argument("--bids", help="comma list")
    p.add_argument("--instances", help="instances per goods/bids pair")
    p.add_argument("--seed", help="instance generator seed")
    p.add_argument("--k", help="comma list of constraint counts")
    p.add_argument("--beta")
    p.add_argument("--ts-seed", help="type-space seed")
    p.add_argument("--no-nested", action="store_true")
    p.add_argument("--formulation", help="comma list of BPS,BO")
    p.add_argument("--rule", help="comma list of rules or 'all'")
    p.add_argument("--out", help="output directory")
    p.add_argument("--jobs")
    p.add_argument("--time-limit-s")
    p.add_argument("--fresh", action="store_true", help="ignore rows from a previous run")
    p.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.dump_lp and args.command != "sweep":
        set_lp_dump_dir(args.dump_lp)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except InstanceTooLarge as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (CatsParseError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except BrokenPipeError:
        return 0
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    finally:
        set_lp_dump_dir(None)


if __name__ == "__main__":
    sys.exit(main())
