"""Command-line front end.

Subcommands: run an auction engine, check structural properties, replay
the built-in demonstration instances, query the brute-force oracle, and
inspect demand at a price. Results are JSON on stdout (optionally copied
to --out); diagnostics go to stderr.

Exit codes: 0 success (run: certified termination; check: all clean),
1 input error or failed check, 2 iteration cap hit.
"""

from __future__ import annotations

import argparse
import json
import random
import sys
from typing import Optional, Sequence

from . import auctions, demand, ggs2, oracle, structure
from .model import (
    Instance, ModelError, Prices, add_indicator, instance_from_json,
    iter_items, make_instance, make_truncation, make_unit_demand, popcount,
    prices_from_json,
)

ALGORITHMS = ("gs", "ausubel", "fine", "ggs2")
CHECKS = ("gs", "matroid", "lemmas", "ggs2-shape")
ORACLE_KINDS = ("welfare", "min-walrasian", "envy-free")
DEMOS = ("ggs2-not-gs", "no-obstacle-no-allocation")


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return 1


def _load_instance(path: str) -> Instance:
    with open(path, "r", encoding="utf-8") as fh:
        return instance_from_json(fh.read())


def _emit(payload: dict, out: Optional[str]) -> None:
    text = json.dumps(payload, indent=2, sort_keys=False)
    print(text)
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")


def _labels(instance: Instance, bundle: int) -> list[str]:
    return instance.label_bundle(bundle)


def _price_map(instance: Instance, prices: Prices) -> dict:
    return {instance.items[j]: prices[j] for j in range(instance.m)}


def _seeded_policy(seed: int):
    rng = random.Random(seed)

    def policy(ob: demand.ObstacleReport, prices: Prices, t: int) -> int:
        items = list(iter_items(ob.bundle))
        take = rng.randint(1, len(items))
        return sum(1 << j for j in rng.sample(items, take))

    return policy


def cmd_run(args) -> int:
    try:
        instance = _load_instance(args.instance)
    except (OSError, ModelError, json.JSONDecodeError) as exc:
        return _fail(f"cannot load instance: {exc}")

    algorithm = args.algorithm
    cert = None
    try:
        if algorithm == "gs":
            trace = auctions.gul_stacchetti(instance)
        elif algorithm == "ausubel":
            trace = auctions.ausubel_ascending(instance)
        elif algorithm == "fine":
            trace = auctions.fine_auction(instance)
        elif algorithm == "ggs2":
            trace, cert = ggs2.ggs2_auction(instance)
        elif algorithm.startswith("policy:"):
            trace = auctions.run_with_policy(
                instance, _seeded_policy(args.seed), name=algorithm)
        else:
            return _fail(f"unknown algorithm {algorithm!r}; "
                         f"choose from {ALGORITHMS + ('policy:<name>',)}")
    except (ggs2.NotGgs2Instance, auctions.PolicyViolation) as exc:
        return _fail(str(exc))

    if cert is None and trace.terminated:
        cert = oracle.is_walrasian(instance, trace.final_price)

    payload = {"trace": auctions.trace_to_json(trace, instance)}
    if cert is not None:
        payload["certificate"] = ggs2.certificate_to_json(cert, instance)
    _emit(payload, args.out)

    if trace.iteration_cap_hit:
        return 2
    if not trace.terminated or cert is None or not cert.valid:
        return 1
    return 0


def _price_battery(instance: Instance) -> list[Prices]:
    """Deterministic prices worth checking: the whole ascending-auction path
    plus a unit bump of each item at the start and at the end."""
    trace = auctions.gul_stacchetti(instance)
    battery = [s.price_before for s in trace.steps] + [trace.final_price]
    for j in range(instance.m):
        battery.append(add_indicator(instance.zero_prices(), 1 << j))
        battery.append(add_indicator(trace.final_price, 1 << j))
    seen, uniq = set(), []
    for p in battery:
        if p not in seen:
            seen.add(p)
            uniq.append(p)
    return uniq


def _check_gs(instance: Instance) -> list[dict]:
    findings = []
    for i, v in enumerate(instance.players):
        try:
            w = structure.check_gs_on_grid(v)
        except structure.GridTooLarge as exc:
            findings.append({"player": i, "kind": "grid too large",
                             "detail": str(exc)})
            continue
        if w is not None:
            findings.append({
                "player": i,
                "kind": "substitutes violation",
                "price_low_doubled": list(w.price_low),
                "price_high_doubled": list(w.price_high),
                "bundle": _labels(instance, w.bundle),
                "kept": _labels(instance, w.kept_bundle),
                "violated_item": (None if w.violated_item is None
                                  else instance.items[w.violated_item]),
            })
    return findings


def _check_matroid(instance: Instance) -> list[dict]:
    findings = []
    for p in _price_battery(instance):
        for i, v in enumerate(instance.players):
            fam = demand.demand_sets(v, p).minimal_demand
            bad = structure.check_matroid_bases(fam)
            if bad is not None:
                findings.append({
                    "player": i, "price": _price_map(instance, p),
                    "kind": f"matroid {bad.kind}",
                    "family": [_labels(instance, b) for b in fam],
                })
    return findings


def _check_lemmas(instance: Instance) -> list[dict]:
    findings = []
    m = instance.m
    for p in _price_battery(instance):
        for i, v in enumerate(instance.players):
            base_u = demand.demand_sets(v, p).utility
            for s in range(1, 1 << m):
                shifted = add_indicator(p, s)
                drop = demand.min_demand_overlap(v, p, s)
                lhs = demand.demand_sets(v, shifted).utility
                if lhs != base_u - drop:
                    findings.append({
                        "player": i, "price": _price_map(instance, p),
                        "kind": "utility-drop identity",
                        "bundle": _labels(instance, s),
                        "expected": base_u - drop, "observed": lhs,
                    })
            for j in range(m):
                try:
                    structure.classify_transition(v, p, j)
                except structure.UnclassifiableTransition as exc:
                    findings.append({
                        "player": i, "price": _price_map(instance, p),
                        "kind": "unclassifiable transition",
                        "item": instance.items[j], "detail": str(exc),
                    })
            for s in range(1 << m):
                rep = structure.check_utility_distance(v, p, s)
                if not rep.ok:
                    findings.append({
                        "player": i, "price": _price_map(instance, p),
                        "kind": "utility distance witness missing",
                        "bundle": _labels(instance, s),
                    })
        for x in range(m):
            for y in range(x + 1, m):
                rep = structure.check_decreasing_marginal(instance, p, x, y)
                if not rep.ok:
                    findings.append({
                        "price": _price_map(instance, p),
                        "kind": "lyapunov submodularity",
                        "items": [instance.items[x], instance.items[y]],
                        "lhs": rep.lhs, "rhs": rep.rhs,
                    })
    return findings


def _check_ggs2_shape(instance: Instance) -> list[dict]:
    try:
        cap = ggs2.common_cap(instance)
    except ggs2.NotGgs2Instance as exc:
        return [{"kind": "shape violation", "detail": str(exc)}]
    return [] if cap is None else []


def cmd_check(args) -> int:
    try:
        instance = _load_instance(args.instance)
    except (OSError, ModelError, json.JSONDecodeError) as exc:
        return _fail(f"cannot load instance: {exc}")
    runner = {
        "gs": _check_gs,
        "matroid": _check_matroid,
        "lemmas": _check_lemmas,
        "ggs2-shape": _check_ggs2_shape,
    }[args.what]
    findings = runner(instance)
    _emit({"check": args.what, "violations": findings,
           "ok": not findings}, args.out)
    return 0 if not findings else 1


def demo_not_gs_valuation():
    base = make_unit_demand((2, 2, 4))
    return make_truncation(base, k=2, cap=4)


def demo_claim_instance() -> Instance:
    players = []
    for _ in range(3):
        players.append(make_truncation(make_unit_demand((1,) * 8), 2, 2))
    for _ in range(2):
        players.append(make_truncation(make_unit_demand((1,) * 7 + (2,)), 2, 2))
    return make_instance([f"i{j}" for j in range(1, 9)], players)


def cmd_demo(args) -> int:
    if args.name == "ggs2-not-gs":
        v = demo_not_gs_valuation()
        inst = make_instance(["a", "b", "c"], [v])
        witness = structure.check_gs_on_grid(v)
        doubled_v = type(v)(m=v.m, table=tuple(2 * x for x in v.table))
        low, high = (0, 2, 4), (4, 2, 4)
        d_low = demand.demand_sets(doubled_v, low).demand
        d_high = demand.demand_sets(doubled_v, high).demand
        pair_reproduced = (
            0b011 in d_low
            and all(not s >> 1 & 1 for s in d_high)
        )
        report = {
            "demo": args.name,
            "expected": {
                "witness_found": True,
                "reference_pair_doubled": {"low": list(low), "high": list(high)},
                "bundle_at_low": ["a", "b"],
                "item_dropped_at_high": "b",
            },
            "observed": {
                "witness_found": witness is not None,
                "witness": None if witness is None else {
                    "price_low_doubled": list(witness.price_low),
                    "price_high_doubled": list(witness.price_high),
                    "bundle": _labels(inst, witness.bundle),
                    "violated_item": (None if witness.violated_item is None
                                      else inst.items[witness.violated_item]),
                },
                "demand_at_low": [_labels(inst, s) for s in d_low],
                "demand_at_high": [_labels(inst, s) for s in d_high],
                "reference_pair_reproduced": pair_reproduced,
            },
        }
        ok = witness is not None and pair_reproduced
        _emit(report, args.out)
        return 0 if ok else 1

    if args.name == "no-obstacle-no-allocation":
        inst = demo_claim_instance()
        p0 = inst.zero_prices()
        ob = demand.over_demanded_set(inst, p0)
        alloc = oracle.envy_free_exists(inst, p0)
        report = {
            "demo": args.name,
            "expected": {"max_excess_at_zero": "<= 0",
                         "envy_free_allocation": None},
            "observed": {
                "over_demanded_set": _labels(inst, ob.bundle),
                "excess": ob.excess,
                "envy_free_allocation": (
                    None if alloc is None
                    else [_labels(inst, b) for b in alloc]),
            },
        }
        ok = ob.excess <= 0 and alloc is None
        _emit(report, args.out)
        return 0 if ok else 1

    print(f"error: unknown demo {args.name!r}; choose from {DEMOS}",
          file=sys.stderr)
    return 1


def cmd_oracle(args) -> int:
    try:
        instance = _load_instance(args.instance)
    except (OSError, ModelError, json.JSONDecodeError) as exc:
        return _fail(f"cannot load instance: {exc}")
    budget = args.budget

    try:
        if args.what == "welfare":
            res = oracle.max_welfare(instance, budget=budget)
            _emit({"value": res.welfare,
                   "allocation": [_labels(instance, b) for b in res.allocation]},
                  args.out)
            return 0
        if args.what == "min-walrasian":
            rep = oracle.minimal_walrasian_price(instance, budget=budget)
            if rep is None:
                _emit({"minimal_walrasian_price": None,
                       "note": "no walrasian equilibrium exists"}, args.out)
                return 0
            if not rep.unique:
                print("note: lyapunov minimizers form no lattice; "
                      "reporting the lexicographically least minimal price",
                      file=sys.stderr)
            _emit(_price_map(instance, rep.price), args.out)
            return 0
        if args.what == "envy-free":
            if not args.price:
                return _fail("envy-free needs --price")
            prices = prices_from_json(args.price, instance)
            alloc = oracle.envy_free_exists(instance, prices)
            _emit({"envy_free_allocation": (
                None if alloc is None
                else [_labels(instance, b) for b in alloc])}, args.out)
            return 0
    except oracle.BudgetExceeded as exc:
        print(json.dumps({"error": "budget exceeded", "detail": str(exc)}))
        return 1
    except ModelError as exc:
        return _fail(str(exc))
    return _fail(f"unknown oracle query {args.what!r}")


def cmd_inspect(args) -> int:
    try:
        instance = _load_instance(args.instance)
        prices = prices_from_json(args.price, instance)
    except (OSError, ModelError, json.JSONDecodeError) as exc:
        return _fail(str(exc))
    reports = demand.demand_reports(instance, prices)
    ob = demand.over_demanded_set(instance, prices)
    mm = demand.minimal_minimizer_report(instance, prices)
    _emit({
        "price": _price_map(instance, prices),
        "lyapunov": demand.lyapunov(instance, prices),
        "players": [
            {
                "player": r.player,
                "utility": r.utility,
                "demand": [_labels(instance, s) for s in r.demand],
                "minimal_demand": [_labels(instance, s) for s in r.minimal_demand],
            }
            for r in reports
        ],
        "over_demanded_set": {
            "bundle": _labels(instance, ob.bundle),
            "excess": ob.excess,
            "unique": ob.unique,
        },
        "minimal_minimizer": {
            "bundle": _labels(instance, mm.bundle),
            "lyapunov_after": mm.lyapunov_after,
            "unique": mm.unique,
        },
    }, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="walras",
        description="Combinatorial-auction equilibrium laboratory.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an auction engine")
    p_run.add_argument("--instance", required=True)
    p_run.add_argument("--algorithm", required=True,
                       help="gs | ausubel | fine | ggs2 | policy:<name>")
    p_run.add_argument("--seed", type=int, default=0)
    p_run.add_argument("--out")
    p_run.set_defaults(func=cmd_run)

    p_check = sub.add_parser("check", help="run a structural checker suite")
    p_check.add_argument("what", choices=CHECKS)
    p_check.add_argument("--instance", required=True)
    p_check.add_argument("--out")
    p_check.set_defaults(func=cmd_check)

    p_demo = sub.add_parser("demo", help="reproduce a built-in demonstration")
    p_demo.add_argument("name")
    p_demo.add_argument("--out")
    p_demo.set_defaults(func=cmd_demo)

    p_oracle = sub.add_parser("oracle", help="query the brute-force oracle")
    p_oracle.add_argument("what", choices=ORACLE_KINDS)
    p_oracle.add_argument("--instance", required=True)
    p_oracle.add_argument("--price")
    p_oracle.add_argument("--budget", type=int)
    p_oracle.add_argument("--out")
    p_oracle.set_defaults(func=cmd_oracle)

    p_inspect = sub.add_parser("inspect", help="demand and obstacle at a price")
    p_inspect.add_argument("--instance", required=True)
    p_inspect.add_argument("--price", required=True)
    p_inspect.add_argument("--out")
    p_inspect.set_defaults(func=cmd_inspect)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
