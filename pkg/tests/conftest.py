"""Seeded random-instance generators shared by the test modules.

All corpora are deterministic functions of an explicit seed so failures
replay exactly. Value scales stay small (vmax 8) because every check is
backed by a brute-force oracle whose cost grows with the price grid.
"""

import itertools
import random
import string

from walras import model

VMAX = 8


def _item_labels(m: int) -> list[str]:
    return list(string.ascii_lowercase[:m])


def assignment_table(m: int, weights: list[list[int]]) -> list[int]:
    """OXS valuation: best matching of the bundle's items to unit slots."""
    slots = range(len(weights[0]))
    table = [0] * (1 << m)
    for s in range(1, 1 << m):
        members = [j for j in range(m) if s >> j & 1]
        best = 0
        for assigned in itertools.permutations(slots, min(len(members), len(slots))):
            for chosen in itertools.combinations(members, len(assigned)):
                best = max(best, sum(weights[j][t] for j, t in zip(chosen, assigned)))
        table[s] = best
    return table


def random_gs_valuation(rng: random.Random, m: int, vmax: int = VMAX) -> model.Valuation:
    kind = rng.choice(("unit", "additive", "assignment"))
    if kind == "unit":
        return model.make_unit_demand([rng.randint(0, vmax) for _ in range(m)])
    if kind == "additive":
        # keep bundle sums within vmax so the whole corpus shares one scale
        budget = vmax
        singles = []
        for _ in range(m):
            x = rng.randint(0, min(3, budget))
            singles.append(x)
            budget -= x
        rng.shuffle(singles)
        return model.make_additive(singles)
    k = rng.randint(1, min(3, m))
    parts = sorted(rng.sample(range(1, vmax), k - 1)) if k > 1 else []
    bounds = [b - a for a, b in zip([0] + parts, parts + [vmax])]
    weights = [[rng.randint(0, bounds[t]) for t in range(k)] for _ in range(m)]
    return model.make_table(m, assignment_table(m, weights))


def random_gs_instance(rng: random.Random, max_m: int = 6, max_n: int = 4) -> model.Instance:
    m = rng.randint(1, max_m)
    n = rng.randint(1, max_n)
    players = [random_gs_valuation(rng, m) for _ in range(n)]
    return model.make_instance(_item_labels(m), players)


def gs_corpus(seed: int, count: int) -> list[model.Instance]:
    rng = random.Random(seed)
    return [random_gs_instance(rng) for _ in range(count)]


def random_ggs2_valuation(rng: random.Random, m: int, cap: int) -> model.Valuation:
    # submodularity of the truncation needs every pair of singleton values
    # to sum to at least the cap
    while True:
        singles = [rng.randint(0, cap) for _ in range(m)]
        two_smallest = sorted(singles)[:2]
        if sum(two_smallest) >= cap:
            return model.make_truncation(model.make_additive(singles), 2, cap)


def random_ggs2_instance(rng: random.Random, max_m: int = 6, max_n: int = 4,
                         max_cap: int = 8) -> model.Instance:
    m = rng.randint(2, max_m)
    n = rng.randint(1, max_n)
    cap = rng.randint(1, max_cap)
    players = [random_ggs2_valuation(rng, m, cap) for _ in range(n)]
    return model.make_instance(_item_labels(m), players)


def ggs2_corpus(seed: int, count: int) -> list[model.Instance]:
    rng = random.Random(seed)
    return [random_ggs2_instance(rng) for _ in range(count)]


def random_monotone_valuation(rng: random.Random, m: int, vmax: int = VMAX) -> model.Valuation:
    """Monotone but otherwise unconstrained: usually not gross substitutes."""
    table = [0] * (1 << m)
    for s in range(1, 1 << m):
        floor = max(table[s & ~(1 << j)] for j in range(m) if s >> j & 1)
        table[s] = min(vmax, floor + rng.choice((0, 0, 1, 2)))
    return model.make_table(m, table)


def random_monotone_instance(rng: random.Random, max_m: int = 5,
                             max_n: int = 4) -> model.Instance:
    m = rng.randint(1, max_m)
    n = rng.randint(1, max_n)
    players = [random_monotone_valuation(rng, m) for _ in range(n)]
    return model.make_instance(_item_labels(m), players)


def random_prices(rng: random.Random, instance: model.Instance,
                  hi: int | None = None) -> tuple[int, ...]:
    top = instance.vmax + 1 if hi is None else hi
    return tuple(rng.randint(0, top) for _ in range(instance.m))


def random_bundle(rng: random.Random, m: int) -> int:
    return rng.randint(0, (1 << m) - 1)
