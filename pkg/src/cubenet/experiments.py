"""Seeded random-topology generation for sweeps and acceptance runs.

Unit-disk placement with a join order that follows the physical graph
outward from the first node, resampled (deterministically, by bumping an
attempt counter into the RNG) until every node obtains an address.  All
successfully joined nodes are tree-connected, so the logical graph of a
fully joined network is connected by construction.
"""

from __future__ import annotations

import math
import random
from collections import deque
from dataclasses import dataclass

from .scenario import Scenario, ScenarioEvent
from .simulator import Simulator


@dataclass(frozen=True)
class TopologyDraw:
    seed: int
    attempt: int
    names: list[str]
    join_events: list[ScenarioEvent]
    dim: int
    radio_range: float


def _positions(rng: random.Random, n: int, side: float) -> dict[str, tuple[float, float]]:
    return {f"n{i:02d}": (rng.uniform(0, side), rng.uniform(0, side)) for i in range(n)}


def _bfs_order(positions: dict[str, tuple[float, float]], radius: float) -> list[str] | None:
    """Names ordered so each (after the first) has an earlier physical neighbor."""
    names = sorted(positions)
    start = names[0]
    order = [start]
    seen = {start}
    q = deque([start])
    while q:
        cur = q.popleft()
        for other in names:
            if other not in seen and math.dist(positions[cur], positions[other]) <= radius:
                seen.add(other)
                order.append(other)
                q.append(other)
    return order if len(order) == len(names) else None


def draw_connected_topology(
    seed: int, n: int = 32, dim: int = 9, avg_degree: float = 7.0, mode: str = "reactive"
) -> TopologyDraw:
    """A placement whose join program gets every node an address.

    Each candidate placement is probed with a joins-only simulation; the
    draw is retried with a new deterministic sub-seed until all n nodes
    join.
    """
    side = math.sqrt(n * math.pi / avg_degree)
    for attempt in range(200):
        rng = random.Random(seed * 100003 + attempt)
        positions = _positions(rng, n, side)
        order = _bfs_order(positions, 1.0)
        if order is None:
            continue
        events = [
            ScenarioEvent(tick, "join", (name, *positions[name]))
            for tick, name in enumerate(order, start=1)
        ]
        probe = Scenario(dim=dim, mode=mode, seed=seed, radio_range=1.0, events=list(events))
        result = Simulator(probe, record_trace=False).run()
        if len(result.sim.net.nodes) == n and not result.sim.detached:
            return TopologyDraw(seed, attempt, order, events, dim, 1.0)
    raise RuntimeError(f"no joinable topology found for seed {seed}")


def all_pairs_send_scenario(draw: TopologyDraw, mode: str, start_tick: int = 100) -> Scenario:
    events = list(draw.join_events)
    for src in draw.names:
        for dst in draw.names:
            if src != dst:
                events.append(ScenarioEvent(start_tick, "send", (src, dst, 1)))
    return Scenario(dim=draw.dim, mode=mode, seed=draw.seed, radio_range=draw.radio_range, events=events)


def all_pairs_resolve_scenario(
    draw: TopologyDraw, mode: str, cache_lifetime: int = 1000
) -> tuple[Scenario, dict]:
    """Lookups between every ordered pair, then a leaf move with cache probes.

    The moved node is a delegation-tree leaf relocated next to the first
    joined node; a chosen origin re-resolves it while its old answer is
    still cached and again after the cache expires.  The move happens
    well after every lookup round trip has drained so no reply chases a
    released address.  Returns the scenario and the probe bookkeeping.
    """
    probe = Scenario(dim=draw.dim, mode=mode, seed=draw.seed, radio_range=draw.radio_range, events=list(draw.join_events))
    sim = Simulator(probe, record_trace=False).run().sim
    net = sim.net
    parents = {net.owner(n.parent.value) for n in net.nodes.values() if n.parent is not None}
    leaves = sorted(n for n in net.nodes if n not in parents)
    anchor = draw.names[0]
    ax, ay = net.positions[anchor]

    resolve_tick = 100
    move_tick = 400
    stale_tick = move_tick + 20
    fresh_tick = move_tick + cache_lifetime + 200

    # The probes need the move to produce a different address (otherwise a
    # stale cache is indistinguishable from a fresh answer), so try leaf
    # movers until one rejoins elsewhere in the space.
    mover = old_e = None
    for candidate in reversed(leaves):
        trial = Scenario(
            dim=draw.dim,
            mode=mode,
            seed=draw.seed,
            radio_range=draw.radio_range,
            events=list(draw.join_events) + [ScenarioEvent(move_tick, "move", (candidate, ax + 0.05, ay + 0.05))],
        )
        tsim = Simulator(trial, record_trace=False).run().sim
        if candidate not in tsim.net.nodes or tsim.detached:
            continue
        before = net.nodes[candidate].main.value
        after = tsim.net.nodes[candidate].main.value
        if before != after:
            mover, old_e = candidate, before
            break
    if mover is None:
        raise RuntimeError(f"no usable mover for seed {draw.seed}")
    asker = next(n for n in sorted(net.nodes) if n != mover)
    events = list(draw.join_events)
    for src in draw.names:
        for dst in draw.names:
            if src != dst:
                events.append(ScenarioEvent(resolve_tick, "resolve", (src, dst)))
    events.append(ScenarioEvent(move_tick, "move", (mover, ax + 0.05, ay + 0.05)))
    events.append(ScenarioEvent(stale_tick, "resolve", (asker, mover)))
    events.append(ScenarioEvent(fresh_tick, "resolve", (asker, mover)))
    sc = Scenario(
        dim=draw.dim,
        mode=mode,
        seed=draw.seed,
        radio_range=draw.radio_range,
        cache_lifetime=cache_lifetime,
        events=events,
    )
    info = {
        "mover": mover,
        "asker": asker,
        "resolve_tick": resolve_tick,
        "move_tick": move_tick,
        "stale_tick": stale_tick,
        "fresh_tick": fresh_tick,
        "old_e": old_e,
    }
    return sc, info


def complete_hypercube_scenario(dim: int, mode: str = "reactive", send_tick: int = 500) -> Scenario:
    """Every address joins at one spot (all mutually in range): the full hypercube."""
    events = [
        ScenarioEvent(tick, "join", (f"h{v:0{dim}b}", 0.0, 0.0))
        for tick, v in enumerate(range(1 << dim), start=1)
    ]
    sc = Scenario(dim=dim, mode=mode, seed=0, radio_range=1.0, events=events)
    sc.events.extend(
        ScenarioEvent(send_tick, "send", (f"h{a:0{dim}b}", f"h{b:0{dim}b}", 1))
        for a in range(1 << dim)
        for b in range(1 << dim)
        if a != b
    )
    sc.events = sc.sorted_events()
    return sc


def chain_scenario(dim: int = 8, attempts: int | None = None, spacing: float = 0.9) -> Scenario:
    """A physical line of nodes, each hearing only its predecessor and successor."""
    count = attempts if attempts is not None else dim + 2
    events = [
        ScenarioEvent(i + 1, "join", (f"c{i:02d}", spacing * i, 0.0)) for i in range(count)
    ]
    return Scenario(dim=dim, mode="proactive", seed=0, radio_range=1.0, events=events)
