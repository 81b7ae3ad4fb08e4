"""Demand families, excess demand, and the Lyapunov potential.

Every vectorized quantity is cross-checked against a from-the-definition
computation on small random instances.
"""

import random

from hypothesis import given, settings, strategies as st

from walras import demand, model, oracle
from walras.model import add_indicator, make_instance, make_unit_demand, popcount

import conftest

seeds = st.integers(0, 2 ** 31 - 1)


def two_buyers_one_item():
    return make_instance(["x"], [make_unit_demand((5,)), make_unit_demand((5,))])


def test_utility_and_demand_basics():
    v = make_unit_demand((2, 5, 3))
    assert demand.utility(v, (1, 1, 1), 0b010) == 4
    rep = demand.demand_sets(v, (1, 1, 1))
    assert rep.utility == 4
    assert rep.demand == (0b010,)
    assert rep.minimal_demand == (0b010,)

    rep0 = demand.demand_sets(v, (0, 0, 0))
    assert rep0.utility == 5
    assert set(rep0.demand) == {s for s in range(8) if s & 0b010}
    assert rep0.minimal_demand == (0b010,)


def test_demand_contains_empty_set_when_priced_out():
    v = make_unit_demand((2,))
    rep = demand.demand_sets(v, (2,))
    assert rep.utility == 0
    assert 0 in rep.demand
    assert rep.minimal_demand == (0,)


def test_min_demand_overlap_definition():
    rng = random.Random(7)
    for _ in range(40):
        inst = conftest.random_gs_instance(rng, max_m=4)
        p = conftest.random_prices(rng, inst)
        s = conftest.random_bundle(rng, inst.m)
        for v in inst.players:
            dstar = demand.demand_sets(v, p).minimal_demand
            expect = min(popcount(d & s) for d in dstar)
            assert demand.min_demand_overlap(v, p, s) == expect


def test_excess_demand_definition():
    inst = two_buyers_one_item()
    assert demand.excess_demand(inst, (0,), 0b1) == 1
    assert demand.excess_demand(inst, (5,), 0b1) == -1


def brute_obstacle(inst, p):
    best, argmins = 0, []
    for s in range(1, 1 << inst.m):
        val = demand.excess_demand(inst, p, s)
        if val > best:
            best, argmins = val, [s]
        elif val == best and best > 0:
            argmins.append(s)
    minimal = [s for s in argmins
               if not any(t != s and t & s == t for t in argmins)]
    return best, minimal


def test_over_demanded_set_matches_brute_force():
    rng = random.Random(13)
    for _ in range(60):
        inst = conftest.random_gs_instance(rng, max_m=4)
        p = conftest.random_prices(rng, inst, hi=3)
        ob = demand.over_demanded_set(inst, p)
        best, minimal = brute_obstacle(inst, p)
        if best <= 0:
            assert ob.bundle == 0
            assert ob.excess <= 0
        else:
            assert ob.excess == best
            assert ob.bundle in minimal
            assert ob.unique == (len(minimal) == 1)


def test_obstacle_anchor():
    ob = demand.over_demanded_set(two_buyers_one_item(), (0,))
    assert ob.bundle == 0b1
    assert ob.excess == 1
    assert ob.per_player == (1, 1)
    assert ob.unique


def test_lyapunov_values():
    inst = two_buyers_one_item()
    assert demand.lyapunov(inst, (0,)) == 10
    assert demand.lyapunov(inst, (5,)) == 5
    assert demand.lyapunov(inst, (7,)) == 7


def test_minimal_minimizer_matches_brute_force():
    rng = random.Random(29)
    for _ in range(60):
        inst = conftest.random_gs_instance(rng, max_m=4)
        p = conftest.random_prices(rng, inst, hi=4)
        rep = demand.minimal_minimizer_report(inst, p)
        vals = {s: demand.lyapunov(inst, add_indicator(p, s))
                for s in range(1 << inst.m)}
        best = min(vals.values())
        winners = [s for s, val in vals.items() if val == best]
        minimal = [s for s in winners
                   if not any(t != s and t & s == t for t in winners)]
        assert rep.lyapunov_after == best
        assert rep.bundle in minimal
        assert rep.unique == (len(minimal) == 1)


@settings(max_examples=80, deadline=None)
@given(seeds)
def test_overlap_monotone_in_bundle(seed):
    rng = random.Random(seed)
    inst = conftest.random_gs_instance(rng, max_m=5)
    p = conftest.random_prices(rng, inst)
    small = conftest.random_bundle(rng, inst.m)
    extra = conftest.random_bundle(rng, inst.m)
    big = small | extra
    for v in inst.players:
        assert demand.min_demand_overlap(v, p, small) <= \
            demand.min_demand_overlap(v, p, big)


@settings(max_examples=80, deadline=None)
@given(seeds)
def test_lyapunov_submodular_on_gs(seed):
    rng = random.Random(seed)
    inst = conftest.random_gs_instance(rng, max_m=5)
    p = conftest.random_prices(rng, inst)
    q = conftest.random_prices(rng, inst)
    join = tuple(max(a, b) for a, b in zip(p, q))
    meet = tuple(min(a, b) for a, b in zip(p, q))
    assert demand.lyapunov(inst, join) + demand.lyapunov(inst, meet) <= \
        demand.lyapunov(inst, p) + demand.lyapunov(inst, q)


@settings(max_examples=80, deadline=None)
@given(seeds)
def test_lyapunov_step_equals_negated_excess_on_gs(seed):
    rng = random.Random(seed)
    inst = conftest.random_gs_instance(rng, max_m=5)
    p = conftest.random_prices(rng, inst)
    s = conftest.random_bundle(rng, inst.m)
    assert demand.lyapunov(inst, add_indicator(p, s)) == \
        demand.lyapunov(inst, p) - demand.excess_demand(inst, p, s)


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_positive_excess_blocks_envy_free(seed):
    rng = random.Random(seed)
    kind = rng.choice(("gs", "ggs2", "mono"))
    if kind == "gs":
        inst = conftest.random_gs_instance(rng, max_m=4)
    elif kind == "ggs2":
        inst = conftest.random_ggs2_instance(rng, max_m=4)
    else:
        inst = conftest.random_monotone_instance(rng, max_m=4)
    p = conftest.random_prices(rng, inst, hi=3)
    ob = demand.over_demanded_set(inst, p)
    if ob.excess > 0:
        assert oracle.envy_free_exists(inst, p) is None


def test_lyapunov_descent_reports_none_at_optimum():
    inst = two_buyers_one_item()
    assert demand.lyapunov_descent(inst, (5,)) is None
    step = demand.lyapunov_descent(inst, (0,))
    assert step is not None
    assert step.lyapunov_after < demand.lyapunov(inst, (0,))
