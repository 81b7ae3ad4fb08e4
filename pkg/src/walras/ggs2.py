"""Ascending auction for pair-capped truncation markets.

Every player values all bundles of two or more items at one shared
constant, so demand below that cap is driven by singletons and pairs
only. The engine alternates two moves: while some player demands only
singletons and those players cannot all be matched to distinct items,
it runs one step of the substitutes auction induced on them; once a
saturating matching exists it counts unmatched players n' against
unmatched minimum-price items m' and either stops (2n' <= m') or
raises every minimum-price item by one and rebuilds.

At the stop state matched players take their singleton, unmatched
players take disjoint minimum-price pairs, and a completion pass hands
leftover positively priced items to indifferent players. The result is
certified against the independent oracle rather than trusted.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from . import demand, oracle
from .auctions import AuctionStep, AuctionTrace, iteration_cap
from .model import (
    Allocation, Instance, Prices, add_indicator, dominated, iter_items,
    make_instance, make_unit_demand, popcount,
)


class NotGgs2Instance(ValueError):
    """A valuation lacks the constant-above-singletons truncation shape."""


class NoObstacle(RuntimeError):
    """The singleton-only players admit a matching; no induced raise exists."""


class HallViolation(RuntimeError):
    """A player set with fewer neighboring items than members."""

    def __init__(self, witness: tuple[int, ...]):
        super().__init__(f"players {witness} share too few items")
        self.witness = witness


@dataclass(frozen=True)
class PlayerClass:
    small: tuple[int, ...]          # positive utility, singleton demands only
    pair_players: tuple[int, ...]   # positive utility, some demanded pair
    empty_demand: tuple[int, ...]   # zero utility; set aside until the end


@dataclass(frozen=True)
class MinReport:
    min_bundle: int
    min2_bundle: int                # second price level, only when |MIN| = 1


@dataclass(frozen=True)
class DemandGraph:
    left: tuple[int, ...]           # player indices
    right: tuple[int, ...]          # item indices
    edges: tuple[tuple[int, int], ...]
    min_bundle: int


@dataclass(frozen=True)
class MatchingResult:
    matching: tuple[tuple[int, int], ...]
    unmatched_players: tuple[int, ...]
    unmatched_min_items: int
    cover_players: tuple[int, ...]
    cover_items: tuple[int, ...]


def common_cap(instance: Instance) -> Optional[int]:
    """The shared constant on multi-item bundles, or None when no pairs exist.

    Raises NotGgs2Instance if any player breaks the shape or caps differ.
    """
    if instance.m < 2:
        return None
    cap = None
    for i, v in enumerate(instance.players):
        mine = v.table[(1 << instance.m) - 1]
        for s in range(1 << instance.m):
            size = popcount(s)
            if size >= 2 and v.table[s] != mine:
                raise NotGgs2Instance(f"player {i}: multi-item values vary")
            if size == 1 and v.table[s] > mine:
                raise NotGgs2Instance(f"player {i}: singleton above the cap")
        if cap is None:
            cap = mine
        elif mine != cap:
            raise NotGgs2Instance(f"player {i}: cap {mine} differs from {cap}")
    return cap


def classify_players(instance: Instance, prices: Prices) -> PlayerClass:
    """Partition players by their demand at these prices.

    Zero-utility players (empty set demanded) are set aside; the rest are
    small when every demanded bundle is a singleton, pair players when some
    demanded bundle has two or more items.
    """
    common_cap(instance)
    prices = tuple(prices)
    small, pairs, empty = [], [], []
    for i, v in enumerate(instance.players):
        rep = demand.demand_sets(v, prices)
        if rep.utility == 0:
            empty.append(i)
        elif any(popcount(s) >= 2 for s in rep.demand):
            pairs.append(i)
        else:
            small.append(i)
    return PlayerClass(tuple(small), tuple(pairs), tuple(empty))


def min_items(prices: Prices) -> MinReport:
    """Minimum-price items, plus the second level when the minimum is unique."""
    prices = tuple(prices)
    if not prices:
        return MinReport(0, 0)
    low = min(prices)
    min_bundle = sum(1 << j for j, x in enumerate(prices) if x == low)
    min2 = 0
    if popcount(min_bundle) == 1 and len(prices) >= 2:
        rest = [x for j, x in enumerate(prices) if not min_bundle >> j & 1]
        low2 = min(rest)
        min2 = sum(
            1 << j for j, x in enumerate(prices)
            if x == low2 and not min_bundle >> j & 1
        )
    return MinReport(min_bundle, min2)


def build_demand_graph(instance: Instance, prices: Prices,
                       players: Sequence[int]) -> DemandGraph:
    """Edges (i, x) for every singleton {x} demanded by player i."""
    prices = tuple(prices)
    edges = []
    for i in sorted(players):
        rep = demand.demand_sets(instance.players[i], prices)
        for s in rep.demand:
            if popcount(s) == 1:
                edges.append((i, s.bit_length() - 1))
    return DemandGraph(
        left=tuple(sorted(players)),
        right=tuple(range(instance.m)),
        edges=tuple(edges),
        min_bundle=min_items(prices).min_bundle,
    )


def max_matching(g: DemandGraph, must_match: Sequence[int]) -> MatchingResult:
    """Deterministic maximum matching saturating must_match.

    Saturates must_match first (raising HallViolation with a witness set
    when impossible), then rematches to cover as many non-minimum-price
    items as possible, then grows to maximum size. The returned cover is
    the standard alternating-reachability construction and always has the
    same size as the matching.
    """
    must = sorted(must_match)
    if set(must) - set(g.left):
        raise ValueError("must_match outside the graph")
    adj: dict[int, list[int]] = {i: [] for i in g.left}
    adj_item: dict[int, list[int]] = {}
    for i, x in g.edges:
        adj[i].append(x)
        adj_item.setdefault(x, []).append(i)
    for i in adj:
        adj[i].sort()
    for x in adj_item:
        adj_item[x].sort()

    match_p: dict[int, int] = {}
    match_i: dict[int, int] = {}

    def augment(i: int, seen_items: set[int]) -> bool:
        for x in adj[i]:
            if x in seen_items:
                continue
            seen_items.add(x)
            if x not in match_i or augment(match_i[x], seen_items):
                match_p[i] = x
                match_i[x] = i
                return True
        return False

    for i in must:
        seen: set[int] = set()
        if not augment(i, seen):
            # the failed search closes under neighbors, so the players
            # matched into the seen items plus i overfill those items
            witness = tuple(sorted({i} | {match_i[x] for x in seen}))
            raise HallViolation(witness)

    # prefer covering items outside the minimum-price set, releasing
    # minimum-price items or chaining displaced items elsewhere
    def cover_item(x: int, seen_players: set[int]) -> bool:
        for i in adj_item.get(x, []):
            if i in seen_players:
                continue
            seen_players.add(i)
            y = match_p.get(i)
            if y is None or g.min_bundle >> y & 1 or cover_item(y, seen_players):
                if y is not None and match_i.get(y) == i:
                    del match_i[y]
                match_p[i] = x
                match_i[x] = i
                return True
        return False

    for x in g.right:
        if not g.min_bundle >> x & 1 and x not in match_i:
            cover_item(x, set())

    for i in g.left:
        if i not in match_p:
            augment(i, set())

    # alternating reachability from unmatched players yields the cover
    reach_p: set[int] = {i for i in g.left if i not in match_p}
    reach_i: set[int] = set()
    frontier = list(reach_p)
    while frontier:
        i = frontier.pop()
        for x in adj[i]:
            if x not in reach_i:
                reach_i.add(x)
                holder = match_i.get(x)
                if holder is not None and holder not in reach_p:
                    reach_p.add(holder)
                    frontier.append(holder)
    cover_players = tuple(i for i in g.left if i not in reach_p)
    cover_items = tuple(x for x in sorted(reach_i))
    matching = tuple(sorted(match_p.items()))
    assert len(cover_players) + len(cover_items) == len(matching), \
        "cover size mismatch; matching was not maximum"

    unmatched_players = tuple(i for i in g.left if i not in match_p)
    unmatched_min = g.min_bundle & ~sum(1 << x for x in match_i)
    return MatchingResult(matching, unmatched_players, unmatched_min,
                          cover_players, cover_items)


def _induced_instance(instance: Instance, small: Sequence[int]) -> Instance:
    singles = [
        tuple(instance.players[i].table[1 << j] for j in range(instance.m))
        for i in small
    ]
    return make_instance(instance.items, [make_unit_demand(s) for s in singles])


def induced_gs_step(instance: Instance, prices: Prices) -> int:
    """Over-demanded set of the unit-demand market induced on small players.

    Raises NoObstacle when no small player exists or their singleton market
    has no over-demanded set, which is exactly when a saturating matching
    exists and the caller should move on to matching.
    """
    prices = tuple(prices)
    cls = classify_players(instance, prices)
    if not cls.small:
        raise NoObstacle("no singleton-only players")
    induced = _induced_instance(instance, cls.small)
    ob = demand.over_demanded_set(induced, prices)
    if ob.excess <= 0:
        raise NoObstacle("singleton-only players admit a matching")
    return ob.bundle


def _completion_pass(instance: Instance, prices: Prices,
                     alloc: list[int]) -> bool:
    """Hand uncovered positively priced items to indifferent players.

    Extends bundles only along demand (the grown bundle must stay demanded),
    searching player choices with backtracking. Returns True when every
    positively priced item ends up allocated.
    """
    taken = 0
    for b in alloc:
        taken |= b
    uncovered = [j for j in range(instance.m)
                 if prices[j] > 0 and not taken >> j & 1]
    if not uncovered:
        return True
    tops = [demand.demand_sets(v, prices) for v in instance.players]

    def place(idx: int) -> bool:
        if idx == len(uncovered):
            return True
        x = uncovered[idx]
        for i in range(instance.n):
            grown = alloc[i] | 1 << x
            if grown == alloc[i]:
                continue
            if grown in tops[i].demand:
                alloc[i] = grown
                if place(idx + 1):
                    return True
                alloc[i] = grown ^ 1 << x
        return False

    return place(0)


def ggs2_auction(instance: Instance) -> tuple[AuctionTrace, oracle.WalrasianCertificate]:
    """Run the pair-capped auction from zero prices to a certified stop.

    The trace records induced-substitutes raises and minimum-price raises
    alike; the terminal allocation is rebuilt from the final matching and
    always cross-checked by the oracle certificate.
    """
    common_cap(instance)
    cap = iteration_cap(instance)
    p = instance.zero_prices()
    steps: list[AuctionStep] = []
    anomalies: list[str] = []

    while True:
        if len(steps) >= cap:
            anomalies.append(f"iteration cap {cap} hit")
            cert = oracle.check_allocation(instance, p, (0,) * instance.n)
            trace = AuctionTrace("ggs2", tuple(steps), p, False, True,
                                 tuple(anomalies))
            return trace, cert
        cls = classify_players(instance, p)
        raised = 0
        f_val = 0
        if cls.small:
            induced = _induced_instance(instance, cls.small)
            ob = demand.over_demanded_set(induced, p)
            if ob.excess > 0:
                raised, f_val = ob.bundle, ob.excess
        if raised == 0:
            # per-player overlap counts are nonnegative, so the whole
            # market's excess dominates the induced one; an over-demanded
            # set here rules out stopping and its unit raise stays under
            # every Walrasian price, covering states the singleton-only
            # step cannot see (e.g. items nobody values at the current
            # margin whose price must not rise)
            ob = demand.over_demanded_set(instance, p)
            if ob.excess > 0:
                raised, f_val = ob.bundle, ob.excess
        if raised:
            lyap = demand.lyapunov(instance, p)
            steps.append(AuctionStep(len(steps), p, raised, lyap, f_val))
            p = add_indicator(p, raised)
            continue

        active = tuple(sorted(cls.small + cls.pair_players))
        g = build_demand_graph(instance, p, active)
        mr = max_matching(g, must_match=cls.small)
        n_prime = len(mr.unmatched_players)
        m_prime = popcount(mr.unmatched_min_items)

        if 2 * n_prime <= m_prime:
            alloc = [0] * instance.n
            for i, x in mr.matching:
                alloc[i] = 1 << x
            pool = list(iter_items(mr.unmatched_min_items))
            for i in mr.unmatched_players:
                pair = 1 << pool.pop(0) | 1 << pool.pop(0)
                alloc[i] = pair
            if not _completion_pass(instance, p, alloc):
                anomalies.append("completion pass failed to cover items")
            cert = oracle.check_allocation(instance, p, tuple(alloc))
            if not cert.valid:
                anomalies.append("terminal certificate invalid")
            trace = AuctionTrace("ggs2", tuple(steps), p, True, False,
                                 tuple(anomalies))
            return trace, cert

        raised = min_items(p).min_bundle
        lyap = demand.lyapunov(instance, p)
        f_val = demand.excess_demand(instance, p, raised)
        steps.append(AuctionStep(len(steps), p, raised, lyap, f_val))
        p = add_indicator(p, raised)


def gen_dom_check(instance: Instance, prices: Prices, p_star: Prices,
                  alloc: Allocation) -> Optional[str]:
    """Certify a dominated price via an envy-free allocation.

    An envy-free allocation at p <= p_star with p_star Walrasian forces
    the Lyapunov values equal, making p Walrasian as well. Returns None
    when the whole chain checks out, else the first broken link.
    """
    prices = tuple(prices)
    p_star = tuple(p_star)
    if not dominated(prices, p_star):
        return "price not dominated by p_star"
    star = oracle.is_walrasian(instance, p_star)
    if not star.valid:
        return "p_star is not Walrasian"
    mine = oracle.check_allocation(instance, prices, alloc)
    if not mine.envy_free:
        return "allocation is not envy-free at p"
    if demand.lyapunov(instance, prices) != demand.lyapunov(instance, p_star):
        return "lyapunov values differ"
    if not oracle.is_walrasian(instance, prices).valid:
        return "p fails the equilibrium check despite equal lyapunov"
    return None


def certificate_to_json(cert: oracle.WalrasianCertificate,
                        instance: Instance) -> dict:
    return {
        "price": {instance.items[j]: cert.price[j] for j in range(instance.m)},
        "allocation": None if cert.allocation is None else [
            instance.label_bundle(b) for b in cert.allocation
        ],
        "envy_free": cert.envy_free,
        "all_positive_priced_allocated": cert.coverage,
        "lyapunov": cert.lyapunov,
        "max_welfare": cert.max_welfare,
    }
