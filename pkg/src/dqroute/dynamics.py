"""Configurations, the deterministic queuing rule, and path-profile simulation."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

from .errors import HorizonExceeded, InvalidAction, PathNotFromCurrentEdge, UnknownAgent
from .netcore import Agent, Graph

EXIT = None  # action taken by a queue head whose edge ends at the destination


@dataclass(frozen=True)
class Configuration:
    """Disjoint ordered agent queues per edge at one time step (head first).

    Queues are stored as a sorted tuple of (edge, agents) pairs with empty
    queues omitted, so equal configurations compare and hash equal.
    """

    time: int
    queues: tuple[tuple[str, tuple[Agent, ...]], ...]

    @classmethod
    def from_mapping(cls, time: int, queues: Mapping[str, Sequence[Agent]]) -> "Configuration":
        items = tuple(sorted((e, tuple(q)) for e, q in queues.items() if q))
        return cls(time=time, queues=items)

    def mapping(self) -> dict[str, tuple[Agent, ...]]:
        return dict(self.queues)

    def queue(self, edge: str) -> tuple[Agent, ...]:
        for e, q in self.queues:
            if e == edge:
                return q
        return ()

    def agents(self) -> tuple[Agent, ...]:
        return tuple(a for _, q in self.queues for a in q)

    def locate(self, agent: Agent) -> tuple[str, int]:
        """(edge, queue index) of the agent."""
        for e, q in self.queues:
            if agent in q:
                return e, q.index(agent)
        raise UnknownAgent(str(agent))

    def is_empty(self) -> bool:
        return not self.queues

    def content_key(self) -> tuple:
        """Time-independent identity of the queue contents (for Markov memoization)."""
        return self.queues

    def restrict(self, agents: Iterable[Agent]) -> "Configuration":
        """Keep only the given agents, preserving queue order."""
        keep = set(agents)
        items = tuple(
            (e, tuple(a for a in q if a in keep)) for e, q in self.queues
        )
        return Configuration(self.time, tuple((e, q) for e, q in items if q))


def action_set(graph: Graph, config: Configuration, agent: Agent) -> frozenset[str]:
    """Available actions: empty set means the forced exit at the destination."""
    edge_name, idx = config.locate(agent)
    if idx > 0:
        return frozenset([edge_name])
    head = graph.edge(edge_name).head
    if head == graph.destination:
        return frozenset()
    return frozenset(graph.out_edges(head))


def step(graph: Graph, config: Configuration, actions: Mapping[Agent, Optional[str]]) -> Configuration:
    """Apply one round of simultaneous actions under the queuing rule.

    Entrants joining an edge are ordered behind the surviving queue by the
    priority order at the edge's tail over their previous edges; the sort is
    stable so injected same-edge entrants keep their relative order.
    """
    queues = {e: list(q) for e, q in config.queues}
    entrants: dict[str, list[tuple[int, Agent]]] = {}
    for e, q in config.queues:
        for idx, agent in enumerate(q):
            if agent not in actions:
                raise InvalidAction(agent, "missing from action profile")
            act = actions[agent]
            allowed = action_set(graph, config, agent)
            if act is EXIT:
                if allowed:
                    raise InvalidAction(agent, "exit is only available at the destination head")
                queues[e].pop(0)
            elif act == e and idx > 0:
                continue  # stays put
            elif act in allowed and idx == 0:
                queues[e].pop(0)
                entrants.setdefault(act, []).append((graph.rank(e), agent))
            else:
                raise InvalidAction(agent, f"{act!r} not in action set {sorted(allowed)}")
    for e, incoming in entrants.items():
        incoming.sort(key=lambda item: item[0])  # stable: same-rank entrants keep order
        queues.setdefault(e, []).extend(agent for _, agent in incoming)
    return Configuration.from_mapping(config.time + 1, queues)


@dataclass
class RoutingTrace:
    """Full arrival-time ledger of one simulated routing.

    vertex_times[i][v] is when agent i reaches v; edge_entries[i][e] is when i
    enters e (the starting edge counts as entered at the start time); absent
    vertices and edges read as infinity via the accessors.
    """

    start_time: int
    paths: dict[Agent, tuple[str, ...]]
    vertex_times: dict[Agent, dict[str, int]]
    edge_entries: dict[Agent, dict[str, int]]
    exit_times: dict[Agent, int]
    queue_sizes: dict[str, dict[int, int]]
    edge_events: dict[str, list[tuple[int, Agent, Optional[str]]]]
    horizon: int

    def arrival(self, agent: Agent, vertex: str) -> float:
        return self.vertex_times.get(agent, {}).get(vertex, math.inf)

    def entry(self, agent: Agent, edge: str) -> float:
        return self.edge_entries.get(agent, {}).get(edge, math.inf)

    def exit_time(self, agent: Agent) -> int:
        return self.exit_times[agent]

    def travel_cost(self, agent: Agent, origin: str) -> float:
        return self.exit_times[agent] - self.arrival(agent, origin)

    def queue_length(self, edge: str, t: int) -> int:
        return self.queue_sizes.get(edge, {}).get(t, 0)

    def agents(self) -> tuple[Agent, ...]:
        return tuple(self.paths)

    def rows(self) -> list[tuple[str, str, int]]:
        """Tabular (agent, vertex, time) report rows, sorted by time then agent."""
        out = []
        for agent, times in self.vertex_times.items():
            for v, t in times.items():
                out.append((agent.name, v, t))
        return sorted(out, key=lambda row: (row[2], row[0], row[1]))


def default_horizon(graph: Graph, config: Configuration) -> int:
    n = len(config.agents())
    m = len(graph.edges)
    return config.time + n * m + m + 2


def validate_paths(graph: Graph, config: Configuration, paths: Mapping[Agent, Sequence[str]]) -> None:
    agents = config.agents()
    for agent in agents:
        if agent not in paths:
            raise PathNotFromCurrentEdge(agent, "no path given")
    for agent, path in paths.items():
        edge_name, _ = config.locate(agent)  # raises UnknownAgent for strays
        if not path or path[0] != edge_name:
            raise PathNotFromCurrentEdge(agent, f"expected first edge {edge_name!r}, got {path[:1]}")
        for a, b in zip(path, path[1:]):
            if graph.edge(a).head != graph.edge(b).tail:
                raise PathNotFromCurrentEdge(agent, f"edges {a!r},{b!r} are not consecutive")
        if graph.edge(path[-1]).head != graph.destination:
            raise PathNotFromCurrentEdge(agent, "path does not end at the destination")


def run_paths(
    graph: Graph,
    config: Configuration,
    paths: Mapping[Agent, Sequence[str]],
    horizon: Optional[int] = None,
) -> RoutingTrace:
    """Simulate all agents along fixed paths until everyone has exited.

    Deterministic: identical inputs produce identical traces.
    """
    validate_paths(graph, config, paths)
    limit = horizon if horizon is not None else default_horizon(graph, config)
    t = config.time

    queues: dict[str, list[Agent]] = {e: list(q) for e, q in config.queues}
    pos: dict[Agent, int] = {}
    vertex_times: dict[Agent, dict[str, int]] = {}
    edge_entries: dict[Agent, dict[str, int]] = {}
    exit_times: dict[Agent, int] = {}
    queue_sizes: dict[str, dict[int, int]] = {}
    edge_events: dict[str, list[tuple[int, Agent, Optional[str]]]] = {}

    for e, q in config.queues:
        events = edge_events.setdefault(e, [])
        for agent in q:
            pos[agent] = 0
            first = paths[agent][0]
            vertex_times[agent] = {graph.edge(first).tail: t}
            edge_entries[agent] = {first: t}
            events.append((t, agent, None))

    while queues:
        if t > limit:
            raise HorizonExceeded(f"simulation passed time {limit}")
        moved: list[tuple[Agent, str, Optional[str]]] = []
        for e in sorted(queues):
            sizes = queue_sizes.setdefault(e, {})
            sizes[t] = len(queues[e])
            head = queues[e][0]
            path = paths[head]
            idx = pos[head]
            nxt = path[idx + 1] if idx + 1 < len(path) else EXIT
            moved.append((head, e, nxt))
        entrants: dict[str, list[tuple[int, Agent, str]]] = {}
        for agent, e, nxt in moved:
            queues[e].pop(0)
            if not queues[e]:
                del queues[e]
            v = graph.edge(e).head
            vertex_times[agent][v] = t + 1
            if nxt is EXIT:
                exit_times[agent] = t + 1
            else:
                entrants.setdefault(nxt, []).append((graph.rank(e), agent, e))
                pos[agent] += 1
        for nxt, incoming in entrants.items():
            incoming.sort(key=lambda item: item[0])
            q = queues.setdefault(nxt, [])
            events = edge_events.setdefault(nxt, [])
            for _, agent, prev in incoming:
                q.append(agent)
                edge_entries[agent][nxt] = t + 1
                events.append((t + 1, agent, prev))
        t += 1

    return RoutingTrace(
        start_time=config.time,
        paths={a: tuple(p) for a, p in paths.items()},
        vertex_times=vertex_times,
        edge_entries=edge_entries,
        exit_times=exit_times,
        queue_sizes=queue_sizes,
        edge_events=edge_events,
        horizon=t,
    )
