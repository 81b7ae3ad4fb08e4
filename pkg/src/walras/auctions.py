"""Ascending-auction engines driven by the over-demand witness.

Three concrete engines share one loop: raise a chosen subset of the
current minimal over-demanded set by one unit until no set is
over-demanded. The full-set choice and the single-item choice are the
classic variants; run_with_policy exposes the choice as a hook. A
separate engine raises the minimal Lyapunov-minimizing set instead;
on substitutes input it walks the identical price path.

Engines never reject input. On valuations outside the substitutes
class the loop may misbehave, so each step is watched: a Lyapunov
increase is recorded as an anomaly and a hard iteration cap turns
into a flagged, unterminated trace rather than an endless run.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

from . import demand
from .model import Instance, Prices, add_indicator, iter_items, popcount


class PolicyViolation(RuntimeError):
    """A step policy chose a set outside the current over-demanded set."""


@dataclass(frozen=True)
class AuctionStep:
    t: int
    price_before: Prices
    raised: int
    lyapunov_before: int
    f_value: int


@dataclass(frozen=True)
class AuctionTrace:
    algorithm: str
    steps: tuple[AuctionStep, ...]
    final_price: Prices
    terminated: bool
    iteration_cap_hit: bool
    anomalies: tuple[str, ...]


def iteration_cap(instance: Instance) -> int:
    # on substitutes input prices never pass the max value per item,
    # so this fires only on inputs outside the class
    return max(1, instance.n * instance.m * instance.vmax)


Policy = Callable[[demand.ObstacleReport, Prices, int], int]


def _obstacle_loop(instance: Instance, algorithm: str, choose: Policy) -> AuctionTrace:
    cap = iteration_cap(instance)
    p = instance.zero_prices()
    steps: list[AuctionStep] = []
    anomalies: list[str] = []
    lyap = demand.lyapunov(instance, p)
    while True:
        obstacle = demand.over_demanded_set(instance, p)
        if obstacle.bundle == 0 or obstacle.excess <= 0:
            return AuctionTrace(algorithm, tuple(steps), p, True, False,
                                tuple(anomalies))
        if len(steps) >= cap:
            anomalies.append(f"iteration cap {cap} hit")
            return AuctionTrace(algorithm, tuple(steps), p, False, True,
                                tuple(anomalies))
        raised = choose(obstacle, p, len(steps))
        if raised == 0 or raised & ~obstacle.bundle:
            raise PolicyViolation(
                f"step {len(steps)}: chose {raised:#x} outside obstacle "
                f"{obstacle.bundle:#x}"
            )
        f_val = demand.excess_demand(instance, p, raised)
        steps.append(AuctionStep(len(steps), p, raised, lyap, f_val))
        p = add_indicator(p, raised)
        new_lyap = demand.lyapunov(instance, p)
        if new_lyap > lyap:
            anomalies.append(f"lyapunov rose at step {len(steps) - 1}")
        lyap = new_lyap


def gul_stacchetti(instance: Instance) -> AuctionTrace:
    """Raise the whole minimal over-demanded set each step."""
    return _obstacle_loop(instance, "gs", lambda ob, p, t: ob.bundle)


def fine_auction(instance: Instance) -> AuctionTrace:
    """Raise only the smallest-index item of the over-demanded set."""
    def lowest(ob: demand.ObstacleReport, p: Prices, t: int) -> int:
        return ob.bundle & -ob.bundle
    return _obstacle_loop(instance, "fine", lowest)


def run_with_policy(instance: Instance, policy: Policy,
                    name: str = "policy") -> AuctionTrace:
    """Generic loop: policy picks a nonempty subset of the obstacle."""
    return _obstacle_loop(instance, name, policy)


def ausubel_ascending(instance: Instance) -> AuctionTrace:
    """Raise the minimal Lyapunov-minimizing set until it is empty."""
    cap = iteration_cap(instance)
    p = instance.zero_prices()
    steps: list[AuctionStep] = []
    anomalies: list[str] = []
    lyap = demand.lyapunov(instance, p)
    while True:
        raised = demand.minimal_minimizer(instance, p)
        if raised == 0:
            return AuctionTrace("ausubel", tuple(steps), p, True, False,
                                tuple(anomalies))
        if len(steps) >= cap:
            anomalies.append(f"iteration cap {cap} hit")
            return AuctionTrace("ausubel", tuple(steps), p, False, True,
                                tuple(anomalies))
        f_val = demand.excess_demand(instance, p, raised)
        steps.append(AuctionStep(len(steps), p, raised, lyap, f_val))
        p = add_indicator(p, raised)
        new_lyap = demand.lyapunov(instance, p)
        if new_lyap > lyap:
            anomalies.append(f"lyapunov rose at step {len(steps) - 1}")
        lyap = new_lyap


def monitor_domination(trace: AuctionTrace, p_star: Prices) -> Optional[int]:
    """Check every trace price sits coordinatewise at or below p_star.

    Returns None when dominated throughout, else the first offending
    step index (len(steps) names the final price).
    """
    for step in trace.steps:
        if any(a > b for a, b in zip(step.price_before, p_star)):
            return step.t
    if any(a > b for a, b in zip(trace.final_price, p_star)):
        return len(trace.steps)
    return None


def trace_to_json(trace: AuctionTrace, instance: Instance) -> dict:
    def price_map(p: Prices) -> dict:
        return {instance.items[j]: p[j] for j in range(instance.m)}

    return {
        "algorithm": trace.algorithm,
        "steps": [
            {
                "t": s.t,
                "price": price_map(s.price_before),
                "raised": [instance.items[j] for j in iter_items(s.raised)],
                "lyapunov": s.lyapunov_before,
                "f": s.f_value,
            }
            for s in trace.steps
        ],
        "final_price": price_map(trace.final_price),
        "terminated": trace.terminated,
        "iteration_cap_hit": trace.iteration_cap_hit,
        "anomalies": list(trace.anomalies),
    }
