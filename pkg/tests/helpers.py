"""Shared generators and independent oracles for the test suite."""

from __future__ import annotations

import random

from dqroute.dynamics import EXIT, Configuration
from dqroute.netcore import Agent, InflowSchedule, Network
from dqroute.spe import StrategyOracle


def random_net(rng: random.Random, max_v: int = 8, max_e: int = 12,
               caps: tuple[int, int] = (1, 1), transits: tuple[int, int] = (1, 1)):
    """Random validated layered DAG; None when the draw fails validation."""
    nv = rng.randint(0, max_v - 2)
    names = ["o"] + [f"v{i}" for i in range(1, nv + 1)] + ["d"]
    edges = []
    for i, v in enumerate(names[:-1]):
        j = rng.randrange(i + 1, len(names))
        edges.append((f"e{len(edges)}", v, names[j],
                      rng.randint(*caps), rng.randint(*transits)))
    while len(edges) < rng.randint(len(names) - 1, max_e):
        i = rng.randrange(len(names) - 1)
        j = rng.randrange(i + 1, len(names))
        edges.append((f"e{len(edges)}", names[i], names[j],
                      rng.randint(*caps), rng.randint(*transits)))
    try:
        net = Network.build("o", "d", edges)
    except Exception:
        return None
    prios = {}
    for v in net.vertices:
        ins = list(net.in_edges(v))
        rng.shuffle(ins)
        prios[v] = ins
    return Network.build("o", "d", edges, priorities=prios)


def random_interim_config(rng: random.Random, net: Network, max_agents: int = 6):
    n = rng.randint(1, max_agents)
    queues: dict[str, list[Agent]] = {}
    agents = []
    for i in range(n):
        e = rng.choice(sorted(net.edges))
        a = Agent(f"a{i}")
        queues.setdefault(e, []).append(a)
        agents.append(a)
    return Configuration.from_mapping(0, queues), agents


def random_schedule(rng: random.Random, waves: int = 2, width: int = 3) -> InflowSchedule:
    out = []
    t = 0
    for _ in range(rng.randint(1, waves)):
        t += rng.randint(1, 2)
        out.append((t, [f"a{t}.{k}" for k in range(rng.randint(1, width))]))
    return InflowSchedule.build(out)


def random_fixed_paths(rng: random.Random, net: Network, config: Configuration, skip=()):
    fixed = {}
    for a in config.agents():
        if a in skip:
            continue
        e, _ = config.locate(a)
        fixed[a] = rng.choice(net.paths(e, net.destination, guard=5_000))
    return fixed


def reference_capacity_sim(net: Network, schedule: InflowSchedule, g_paths) -> dict[Agent, int]:
    """Direct capacity-c/transit-t simulator: each step every edge releases up to
    its capacity from the FIFO queue; entrants are ordered by previous-edge
    priority, then by their order inside the releasing batch."""
    waiting: dict[str, list[Agent]] = {e: [] for e in net.edges}
    transit: list[tuple[int, int, Agent, str]] = []
    pos: dict[Agent, int] = {}
    exits: dict[Agent, int] = {}
    events = {r: list(wave) for r, wave in schedule.waves}
    remaining = {a for _, wave in schedule.waves for a in wave}
    t = 0
    while remaining:
        t += 1
        assert t < 10_000, "reference simulator did not drain"
        joiners = []
        done = [x for x in transit if x[0] == t]
        transit = [x for x in transit if x[0] != t]
        for _, batch_idx, agent, edge in sorted(done, key=lambda x: x[1]):
            head = net.edge(edge).head
            if head == net.destination:
                exits[agent] = t
                remaining.discard(agent)
                continue
            pos[agent] += 1
            joiners.append((g_paths[agent][pos[agent]], net.rank(edge), batch_idx, agent))
        for slot, agent in enumerate(events.pop(t, [])):
            pos[agent] = 0
            joiners.append((g_paths[agent][0], -1, slot, agent))
        joiners.sort(key=lambda x: (x[1], x[2]))
        for edge, _, _, agent in joiners:
            waiting[edge].append(agent)
        for e in sorted(net.edges):
            cap = net.edge(e).capacity
            batch = waiting[e][:cap]
            waiting[e] = waiting[e][cap:]
            for k, agent in enumerate(batch):
                transit.append((t + net.edge(e).transit, k, agent, e))
    return exits


class LaneDispatchOracle(StrategyOracle):
    """Follow a fixed original-edge path on the normalized network, picking the
    least-backlogged lane of every fat edge; simultaneous entrants coordinate by
    entering-edge priority so the expansion emulates the multi-server queue."""

    def __init__(self, graph, unit, g_paths, chain_edges):
        super().__init__(graph)
        self.unit = unit
        self.g_paths = g_paths
        self.chain_edges = chain_edges

    def _hop(self, config, agent):
        edge_name, idx = config.locate(agent)
        if idx > 0:
            return None
        head = self.graph.edge(edge_name).head
        if head == self.graph.destination:
            return None
        path = self.g_paths[agent]
        if edge_name in self.chain_edges:
            if head != self.unit.origin:
                return None
            return head, edge_name, path[0]
        orig, lane, seg = self.unit.provenance[edge_name]
        if seg + 1 < len(self.unit.lanes_of(orig)[lane]):
            return None
        i = path.index(orig)
        if i + 1 == len(path):
            return None
        return head, edge_name, path[i + 1]

    def action(self, history, agent):
        config = history.config
        edge_name, idx = config.locate(agent)
        if idx > 0:
            return edge_name
        head = self.graph.edge(edge_name).head
        if head == self.graph.destination:
            return EXIT
        hop = self._hop(config, agent)
        if hop is None:
            if edge_name in self.chain_edges:
                return self.graph.out_edges(head)[0]
            orig, lane, seg = self.unit.provenance[edge_name]
            lanes = self.unit.lanes_of(orig)
            if seg + 1 < len(lanes[lane]):
                return lanes[lane][seg + 1]
            return EXIT
        v, prev, g_next = hop
        ahead = 0
        for other in config.agents():
            if other == agent:
                continue
            other_hop = self._hop(config, other)
            if (
                other_hop
                and other_hop[0] == v
                and other_hop[2] == g_next
                and self.graph.rank(other_hop[1]) < self.graph.rank(prev)
            ):
                ahead += 1
        lanes = self.unit.lanes_of(g_next)
        order = sorted(range(len(lanes)), key=lambda k: (len(config.queue(lanes[k][0])), k))
        return lanes[order[ahead % len(lanes)]][0]


def random_g_path(rng: random.Random, net: Network) -> list[str]:
    path = []
    v = net.origin
    while v != net.destination:
        e = rng.choice(sorted(net.out_edges(v)))
        path.append(e)
        v = net.edge(e).head
    return path
