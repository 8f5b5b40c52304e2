"""Earliest-arrival best responses via dynamic programming, with a brute-force
oracle and the vertex-domination predicate."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

from .dynamics import Configuration, RoutingTrace, run_paths
from .errors import Unreachable, VertexNotOnPath
from .netcore import Agent, Graph


class QueueCounters:
    """|Q_e^t| and the 'entered at t from priority no higher than e'' counts,
    read off one simulation of the fixed agents."""

    def __init__(self, graph: Graph, trace: Optional[RoutingTrace] = None):
        self.graph = graph
        self.sizes: dict[str, dict[int, int]] = {}
        self.entrant_ranks: dict[str, dict[int, list[int]]] = {}
        if trace is not None:
            self.sizes = trace.queue_sizes
            for edge, events in trace.edge_events.items():
                per_t = self.entrant_ranks.setdefault(edge, {})
                for t, _agent, prev in events:
                    # initial queue members rank as strictly ahead of any entrant
                    rank = -1 if prev is None else graph.rank(prev)
                    per_t.setdefault(t, []).append(rank)

    def size(self, edge: str, t: int) -> int:
        return self.sizes.get(edge, {}).get(t, 0)

    def entered_no_higher(self, edge: str, t: int, ref_rank: int) -> int:
        ranks = self.entrant_ranks.get(edge, {}).get(t, ())
        return sum(1 for r in ranks if 0 <= ref_rank <= r)


@dataclass
class EarliestArrivalTable:
    """tau[v]: earliest arrival of the deviator at v; estar[v]: the highest-priority
    entering edge achieving it; achieving[v]: all achieving entering edges in
    priority order."""

    zeta: Agent
    start_time: int
    start_vertex: str
    tau: dict[str, int]
    estar: dict[str, str]
    achieving: dict[str, tuple[str, ...]]

    def arrival(self, vertex: str) -> float:
        return self.tau.get(vertex, math.inf)


def dp_from_vertex(
    graph: Graph,
    zeta: Agent,
    start_vertex: str,
    start_time: int,
    start_edge: Optional[str],
    start_rank: int,
    counters: QueueCounters,
) -> EarliestArrivalTable:
    """Run the earliest-arrival recursion from a seeded vertex in topological order.

    start_edge/start_rank describe how the deviator shows up at start_vertex for
    same-time priority comparisons on the first hop.
    """
    tau: dict[str, int] = {start_vertex: start_time}
    estar: dict[str, str] = {}
    ref_rank: dict[str, int] = {start_vertex: start_rank}
    achieving: dict[str, tuple[str, ...]] = {}
    if start_edge is not None:
        estar[start_vertex] = start_edge
        achieving[start_vertex] = (start_edge,)
    for v in graph.topo_order():
        if v == start_vertex:
            continue
        best = math.inf
        winners: list[str] = []
        for name in graph.in_edges(v):  # priority order: first winner is e*(v)
            u = graph.edge(name).tail
            tu = tau.get(u)
            if tu is None:
                continue
            ahead = counters.size(name, tu) - counters.entered_no_higher(name, tu, ref_rank[u])
            val = tu + 1 + ahead
            if val < best:
                best = val
                winners = [name]
            elif val == best:
                winners.append(name)
        if winners:
            tau[v] = int(best)
            estar[v] = winners[0]
            achieving[v] = tuple(winners)
            ref_rank[v] = graph.rank(winners[0])
    return EarliestArrivalTable(
        zeta=zeta,
        start_time=start_time,
        start_vertex=start_vertex,
        tau=tau,
        estar=estar,
        achieving=achieving,
    )


def fixed_counters(
    graph: Graph,
    config: Configuration,
    fixed: Mapping[Agent, Sequence[str]],
    zeta: Agent,
) -> QueueCounters:
    """Simulate the fixed agents with the deviator removed and index the queues."""
    others = [a for a in config.agents() if a in fixed and a != zeta]
    if not others:
        return QueueCounters(graph)
    sub = config.restrict(others)
    trace = run_paths(graph, sub, {a: fixed[a] for a in others})
    return QueueCounters(graph, trace)


def earliest_arrival_table(
    graph: Graph,
    config: Configuration,
    fixed: Mapping[Agent, Sequence[str]],
    zeta: Agent,
    counters: Optional[QueueCounters] = None,
) -> EarliestArrivalTable:
    """Earliest times the deviator can reach every vertex given the others' paths.

    The deviator's queue position on its current edge seeds the recursion; the
    interim set is the fixed agents plus the deviator, everyone else vanishes.
    """
    world = config.restrict([a for a in config.agents() if a in fixed or a == zeta])
    edge_name, idx = world.locate(zeta)
    if counters is None:
        counters = fixed_counters(graph, world, fixed, zeta)
    v0 = graph.edge(edge_name).head
    table = dp_from_vertex(
        graph,
        zeta,
        start_vertex=v0,
        start_time=config.time + idx + 1,
        start_edge=edge_name,
        start_rank=graph.rank(edge_name),
        counters=counters,
    )
    # the deviator counts as reaching its current tail at the configuration time
    table.tau[graph.edge(edge_name).tail] = config.time
    return table


def best_response_path(
    graph: Graph,
    config: Configuration,
    fixed: Mapping[Agent, Sequence[str]],
    zeta: Agent,
    table: Optional[EarliestArrivalTable] = None,
) -> tuple[str, ...]:
    """The unique earliest-arrival best response: trace e*(v) back from the destination."""
    if table is None:
        table = earliest_arrival_table(graph, config, fixed, zeta)
    d = graph.destination
    if d not in table.tau:
        raise Unreachable(f"{zeta} cannot reach {d!r}")
    edge_name, _ = config.locate(zeta)
    path: list[str] = []
    v = d
    while v != table.start_vertex:
        e = table.estar[v]
        path.append(e)
        v = graph.edge(e).tail
    path.append(edge_name)
    return tuple(reversed(path))


def brute_force_best_response(
    graph: Graph,
    config: Configuration,
    fixed: Mapping[Agent, Sequence[str]],
    zeta: Agent,
    guard: int = 100_000,
) -> tuple[int, tuple[tuple[str, ...], ...]]:
    """Enumerate the deviator's whole strategy set and simulate every choice.

    Returns the minimum destination arrival and all paths attaining it; this is
    the independent oracle for the dynamic program.
    """
    world = config.restrict([a for a in config.agents() if a in fixed or a == zeta])
    edge_name, _ = world.locate(zeta)
    candidates = graph.paths(edge_name, graph.destination, guard=guard)
    fixed_only = {a: tuple(p) for a, p in fixed.items() if a != zeta}
    best = math.inf
    argmin: list[tuple[str, ...]] = []
    for path in candidates:
        trace = run_paths(graph, world, {**fixed_only, zeta: path})
        t = trace.exit_times[zeta]
        if t < best:
            best = t
            argmin = [path]
        elif t == best:
            argmin.append(path)
    if not argmin:
        raise Unreachable(f"{zeta} has no path to {graph.destination!r}")
    return int(best), tuple(argmin)


def rival_earliest_arrival(
    graph: Graph,
    config: Configuration,
    alpha: Mapping[Agent, Sequence[str]],
    zeta: Agent,
    rival: Agent,
    vertex: str,
    guard: int = 100_000,
) -> float:
    """Earliest the rival (keeping its own path) reaches the vertex over all of
    the deviator's path choices, by guarded enumeration."""
    world = config.restrict(alpha)
    edge_name, _ = world.locate(zeta)
    best = math.inf
    others = {a: tuple(p) for a, p in alpha.items() if a != zeta}
    for path in graph.paths(edge_name, graph.destination, guard=guard):
        trace = run_paths(graph, world, {**others, zeta: path})
        best = min(best, trace.arrival(rival, vertex))
    return best


def dominates(
    graph: Graph,
    config: Configuration,
    alpha: Mapping[Agent, Sequence[str]],
    zeta: Agent,
    rival: Agent,
    vertex: str,
    guard: int = 100_000,
) -> bool:
    """Does the deviator dominate the rival at the vertex under the profile?

    True iff the deviator's earliest possible arrival beats the rival's, or ties
    it with an entering edge of priority at least the rival's there.
    """
    rival_path = tuple(alpha[rival])
    rival_vertices = graph.path_vertices(rival_path)
    if vertex not in rival_vertices:
        raise VertexNotOnPath(f"{vertex!r} not on the path of {rival}")
    if vertex == rival_vertices[0]:
        return False  # the rival starts there at the configuration time, unbeatable
    fixed = {a: tuple(p) for a, p in alpha.items() if a != zeta}
    table = earliest_arrival_table(graph, config, fixed, zeta)
    tau_v = table.arrival(vertex)
    if math.isinf(tau_v):
        return False
    tau_rival = rival_earliest_arrival(graph, config, alpha, zeta, rival, vertex, guard)
    if tau_v < tau_rival:
        return True
    if tau_v > tau_rival:
        return False
    entering = next(e for e in rival_path if graph.edge(e).head == vertex)
    return graph.rank(table.estar[vertex]) <= graph.rank(entering)
