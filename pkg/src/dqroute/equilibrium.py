"""Iterative dominating profiles (with or without a base), NE verification,
batch decomposition, exhaustive NE enumeration and the NE property suite."""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

from .bestresponse import (
    EarliestArrivalTable,
    best_response_path,
    earliest_arrival_table,
    fixed_counters,
)
from .dynamics import Configuration, RoutingTrace, run_paths
from .errors import BaseInvarianceViolated, NotAnNE, TooManyProfiles, Unreachable
from .netcore import Agent, Graph

PathProfile = Mapping[Agent, tuple[str, ...]]


@dataclass(frozen=True)
class SolveStage:
    """Snapshot of one solver iteration, kept for the domination checks."""

    agent: Agent
    path: tuple[str, ...]
    tau: dict[str, int]
    assigned_before: tuple[Agent, ...]


@dataclass(frozen=True)
class SolveResult:
    order: tuple[Agent, ...]
    paths: dict[Agent, tuple[str, ...]]
    stages: tuple[SolveStage, ...]


def _check_base_invariance(
    graph: Graph,
    config: Configuration,
    base: PathProfile,
    samples: int,
    rng: random.Random,
) -> None:
    """Sampled re-simulation: base agents' vertex times must not depend on the rest."""
    base_agents = list(base)
    reference = run_paths(graph, config.restrict(base_agents), base)
    others = [a for a in config.agents() if a not in base]
    if not others:
        return
    cache: dict[Agent, list[tuple[str, ...]]] = {}
    for _ in range(samples):
        chosen = [a for a in others if rng.random() < 0.7] or [rng.choice(others)]
        profile = dict(base)
        for a in chosen:
            edge_name, _ = config.locate(a)
            opts = cache.setdefault(a, graph.paths(edge_name, graph.destination, guard=10_000))
            profile[a] = rng.choice(opts)
        trace = run_paths(graph, config.restrict(profile), profile)
        for a in base_agents:
            if trace.vertex_times[a] != reference.vertex_times[a]:
                raise BaseInvarianceViolated(
                    f"base agent {a} is not invariant against sampled completions"
                )


def iterative_dominating_profile(
    graph: Graph,
    config: Configuration,
    base: Optional[PathProfile] = None,
    *,
    base_check_samples: int = 4,
    rng: Optional[random.Random] = None,
) -> SolveResult:
    """Assign dominating paths one agent at a time (the base variant seeds the
    assigned set with fixed paths whose arrival times are already invariant).

    Each iteration recomputes every unassigned agent's earliest-arrival table
    against the assigned routing, walks back from the destination keeping the
    minimal-time candidates and the highest-priority last edges, and hands the
    resulting path to the front-most queuer on its first edge.
    """
    assigned: dict[Agent, tuple[str, ...]] = {a: tuple(p) for a, p in (base or {}).items()}
    if assigned and base_check_samples > 0:
        _check_base_invariance(
            graph, config, assigned, base_check_samples, rng or random.Random(0)
        )
    remaining = [a for a in config.agents() if a not in assigned]
    order: list[Agent] = []
    stages: list[SolveStage] = []
    r = config.time
    while remaining:
        counters = fixed_counters(graph, config, assigned, zeta=Agent("~none"))
        tables: dict[Agent, EarliestArrivalTable] = {
            j: earliest_arrival_table(graph, config, assigned, j, counters=counters)
            for j in remaining
        }
        w = graph.destination
        pool = list(remaining)
        path_rev: list[str] = []
        while True:
            taus = {j: tables[j].arrival(w) for j in pool}
            tau = min(taus.values())
            if math.isinf(tau):
                raise Unreachable(f"no remaining agent reaches {w!r}")
            if tau < r + 1:
                break
            pool = [j for j in pool if taus[j] == tau]
            cands = set()
            for j in pool:
                cands.update(tables[j].achieving.get(w, ()))
            uw = min(cands, key=graph.rank)
            # survivors must share the chosen ending edge (tie-break on last edges)
            pool = [j for j in pool if uw in tables[j].achieving.get(w, ())]
            path_rev.append(uw)
            w = graph.edge(uw).tail
        path = tuple(reversed(path_rev))
        in_line = [a for a in config.queue(path[0]) if a in pool]
        assert in_line, "backward walk must stop at a candidate's current edge"
        chosen = in_line[0]
        order.append(chosen)
        stages.append(
            SolveStage(
                agent=chosen,
                path=path,
                tau=dict(tables[chosen].tau),
                assigned_before=tuple(order[:-1]),
            )
        )
        assigned[chosen] = path
        remaining.remove(chosen)
    paths = {a: assigned[a] for a in config.agents()}
    return SolveResult(order=tuple(order), paths=paths, stages=tuple(stages))


# -- NE verification -----------------------------------------------------------


@dataclass(frozen=True)
class NEWitness:
    agent: Agent
    current_arrival: int
    best_arrival: int
    improving_path: tuple[str, ...]


@dataclass(frozen=True)
class NEReport:
    passed: bool
    witnesses: tuple[NEWitness, ...]
    trace: RoutingTrace


def verify_ne(graph: Graph, config: Configuration, profile: PathProfile) -> NEReport:
    """Compare every agent's realized arrival with its earliest-arrival deviation."""
    world = config.restrict(profile)
    trace = run_paths(graph, world, profile)
    witnesses = []
    for agent in world.agents():
        fixed = {a: p for a, p in profile.items() if a != agent}
        table = earliest_arrival_table(graph, config, fixed, agent)
        best = table.arrival(graph.destination)
        current = trace.exit_times[agent]
        if best < current:
            path = best_response_path(graph, config, fixed, agent, table=table)
            witnesses.append(NEWitness(agent, current, int(best), path))
    return NEReport(passed=not witnesses, witnesses=tuple(witnesses), trace=trace)


# -- batches -------------------------------------------------------------------


@dataclass(frozen=True)
class BatchDecomposition:
    """Agents grouped by their distinct destination arrival times."""

    times: tuple[int, ...]
    batches: tuple[tuple[Agent, ...], ...]

    def batch_of(self, agent: Agent) -> int:
        for k, batch in enumerate(self.batches, start=1):
            if agent in batch:
                return k
        raise KeyError(str(agent))

    def prefix(self, k: int) -> tuple[Agent, ...]:
        return tuple(a for batch in self.batches[:k] for a in batch)


def batch_decompose(trace: RoutingTrace) -> BatchDecomposition:
    by_time: dict[int, list[Agent]] = {}
    for agent, t in trace.exit_times.items():
        by_time.setdefault(t, []).append(agent)
    times = tuple(sorted(by_time))
    batches = tuple(tuple(sorted(by_time[t], key=lambda a: a.name)) for t in times)
    return BatchDecomposition(times=times, batches=batches)


# -- exhaustive enumeration ----------------------------------------------------


def strategy_sets(
    graph: Graph, config: Configuration, guard: int = 1_000_000
) -> dict[Agent, list[tuple[str, ...]]]:
    sets = {}
    total = 1
    for agent in config.agents():
        edge_name, _ = config.locate(agent)
        opts = graph.paths(edge_name, graph.destination, guard=guard)
        sets[agent] = opts
        total *= len(opts)
        if total > guard:
            raise TooManyProfiles(f"joint profile count exceeds {guard}")
    return sets


@dataclass(frozen=True)
class ExitTable:
    """Exit times of every joint profile, shared by enumeration and coalition checks."""

    agents: tuple[Agent, ...]
    sets: dict[Agent, list[tuple[str, ...]]]
    exits: dict[tuple[int, ...], tuple[int, ...]]

    def combo_of(self, profile: PathProfile) -> tuple[int, ...]:
        return tuple(self.sets[a].index(tuple(profile[a])) for a in self.agents)


def build_exit_table(graph: Graph, config: Configuration, guard: int = 1_000_000) -> ExitTable:
    sets = strategy_sets(graph, config, guard)
    agents = tuple(sets)
    exits: dict[tuple[int, ...], tuple[int, ...]] = {}
    for combo in itertools.product(*(range(len(sets[a])) for a in agents)):
        profile = {a: sets[a][combo[i]] for i, a in enumerate(agents)}
        trace = run_paths(graph, config, profile)
        exits[combo] = tuple(trace.exit_times[a] for a in agents)
    return ExitTable(agents=agents, sets=sets, exits=exits)


def enumerate_all_ne(
    graph: Graph,
    config: Configuration,
    guard: int = 1_000_000,
    table: Optional[ExitTable] = None,
) -> list[dict[Agent, tuple[str, ...]]]:
    """Simulate every joint profile and keep those surviving all unilateral checks."""
    table = table or build_exit_table(graph, config, guard)
    agents, sets, exits = table.agents, table.sets, table.exits
    nes = []
    for combo, values in exits.items():
        is_ne = True
        for i, agent in enumerate(agents):
            for alt in range(len(sets[agent])):
                if alt == combo[i]:
                    continue
                deviated = combo[:i] + (alt,) + combo[i + 1:]
                if exits[deviated][i] < values[i]:
                    is_ne = False
                    break
            if not is_ne:
                break
        if is_ne:
            nes.append({a: sets[a][combo[i]] for i, a in enumerate(agents)})
    return nes


# -- property suite ------------------------------------------------------------


@dataclass
class CheckResult:
    name: str
    status: str  # pass | fail | skip
    detail: str = ""
    witness: Optional[dict] = None


@dataclass
class PropertyReport:
    results: list[CheckResult]
    seed: int = 0
    samples: int = 0

    @property
    def passed(self) -> bool:
        return all(res.status != "fail" for res in self.results)

    def result(self, name: str) -> CheckResult:
        for res in self.results:
            if res.name == name:
                return res
        raise KeyError(name)

    def to_text(self) -> str:
        lines = [f"property report (seed={self.seed} samples={self.samples})"]
        for res in self.results:
            line = f"  [{res.status.upper():4s}] {res.name}"
            if res.detail:
                line += f" - {res.detail}"
            lines.append(line)
            if res.witness:
                lines.append(f"         witness: {res.witness}")
        return "\n".join(lines)


@dataclass
class CheckOptions:
    checks: tuple[str, ...] = (
        "fifo",
        "independence",
        "optimality",
        "strong_ne",
        "consecutive_exiting",
        "temporal_overtaking",
    )
    samples: int = 50
    seed: int = 0
    coalition_size: int = 3
    path_budget: int = 20
    exhaustive_guard: int = 20_000
    original_order: Optional[tuple[Agent, ...]] = None


def _arrival_rank(graph: Graph, config: Configuration, profile: PathProfile, agent: Agent):
    """vertex -> (time, kind, rank) sort keys used by the weak-preemption scans.

    kind 0 marks the degenerate start-tail arrival (queue position as rank);
    kind 1 marks arrival via an edge (its priority rank at the vertex)."""
    keys = {}
    path = profile[agent]
    edge_name, idx = config.locate(agent)
    start_tail = graph.edge(edge_name).tail
    keys[start_tail] = (config.time, 0, edge_name, idx)
    for e in path:
        keys[graph.edge(e).head] = (None, 1, e, graph.rank(e))
    return keys


def _weakly_preempts(key_i, key_j, t_i, t_j) -> bool:
    if t_i < t_j:
        return True
    if t_i != t_j:
        return False
    _, kind_i, edge_i, rank_i = key_i
    _, kind_j, edge_j, rank_j = key_j
    if kind_i == 0 and kind_j == 0:
        # simultaneous start tails: comparable only within the same queue
        return edge_i == edge_j and rank_i < rank_j
    if kind_i != kind_j:
        return kind_i == 0  # a starter sits in the queue before any same-time entrant
    return rank_i < rank_j


def _sample_paths(
    graph: Graph,
    config: Configuration,
    agents: Sequence[Agent],
    rng: random.Random,
    cache: dict[Agent, list[tuple[str, ...]]],
) -> dict[Agent, tuple[str, ...]]:
    out = {}
    for a in agents:
        if a not in cache:
            edge_name, _ = config.locate(a)
            cache[a] = graph.paths(edge_name, graph.destination, guard=100_000)
        out[a] = rng.choice(cache[a])
    return out


def check_properties(
    graph: Graph,
    config: Configuration,
    profile: PathProfile,
    options: Optional[CheckOptions] = None,
    exit_table: Optional[ExitTable] = None,
) -> PropertyReport:
    """Run the NE property suite on a verified equilibrium profile."""
    options = options or CheckOptions()
    ne = verify_ne(graph, config, profile)
    if not ne.passed:
        raise NotAnNE(f"profile fails verify_ne: {ne.witnesses[0]}")
    trace = ne.trace
    batches = batch_decompose(trace)
    rng = random.Random(options.seed)
    cache: dict[Agent, list[tuple[str, ...]]] = {}
    agents = list(config.agents())
    report = PropertyReport(results=[], seed=options.seed, samples=options.samples)

    if "fifo" in options.checks:
        report.results.append(_check_fifo(graph, config, profile, trace))
    if "independence" in options.checks:
        report.results.append(
            _check_independence(graph, config, profile, trace, batches, options, rng, cache)
        )
    if "optimality" in options.checks:
        report.results.append(
            _check_optimality(graph, config, profile, batches, options, rng, cache)
        )
    if "strong_ne" in options.checks:
        report.results.append(
            _check_strong_ne(graph, config, profile, trace, options, rng, cache, exit_table)
        )
    order = options.original_order or _derive_original_order(agents)
    if "consecutive_exiting" in options.checks:
        report.results.append(_check_consecutive_exiting(batches, order))
    if "temporal_overtaking" in options.checks:
        report.results.append(_check_temporal_overtaking(graph, trace, order))
    return report


def _derive_original_order(agents: Sequence[Agent]) -> Optional[tuple[Agent, ...]]:
    if all(a.entry is not None and a.slot is not None for a in agents):
        return tuple(sorted(agents, key=lambda a: (a.entry, a.slot)))
    return None


def _check_fifo(graph, config, profile, trace) -> CheckResult:
    keys = {a: _arrival_rank(graph, config, profile, a) for a in profile}
    for i, j in itertools.permutations(profile, 2):
        for v in keys[i]:
            if v not in keys[j]:
                continue
            t_i, t_j = trace.arrival(i, v), trace.arrival(j, v)
            if math.isinf(t_i) or math.isinf(t_j):
                continue
            if _weakly_preempts(keys[i][v], keys[j][v], t_i, t_j):
                if trace.exit_times[i] > trace.exit_times[j]:
                    return CheckResult(
                        "fifo",
                        "fail",
                        f"{i} weakly preempts {j} at {v} but exits later",
                        witness={
                            "agents": [i.name, j.name],
                            "vertex": v,
                            "times": [t_i, t_j],
                            "exits": [trace.exit_times[i], trace.exit_times[j]],
                        },
                    )
    return CheckResult("fifo", "pass")


def _check_independence(graph, config, profile, trace, batches, options, rng, cache) -> CheckResult:
    for k in range(1, len(batches.batches) + 1):
        prefix = batches.prefix(k)
        rest = [a for a in profile if a not in prefix]
        if not rest:
            break
        kept = {a: profile[a] for a in prefix}
        for _ in range(options.samples):
            completion = _sample_paths(graph, config, rest, rng, cache)
            sub = run_paths(graph, config.restrict(profile), {**kept, **completion})
            for a in prefix:
                if sub.vertex_times[a] != trace.vertex_times[a]:
                    return CheckResult(
                        "independence",
                        "fail",
                        f"batch {k} agent {a} moved under a sampled completion",
                        witness={
                            "agent": a.name,
                            "batch": k,
                            "expected": trace.vertex_times[a],
                            "got": sub.vertex_times[a],
                            "completion": {b.name: list(p) for b, p in completion.items()},
                        },
                    )
    return CheckResult("independence", "pass")


def _check_optimality(graph, config, profile, batches, options, rng, cache) -> CheckResult:
    for k in range(1, len(batches.batches) + 1):
        kept = {a: profile[a] for a in batches.prefix(k - 1)}
        rest = [a for a in profile if a not in kept]
        bound = batches.times[k - 1]
        for _ in range(options.samples):
            completion = _sample_paths(graph, config, rest, rng, cache)
            sub = run_paths(graph, config.restrict(profile), {**kept, **completion})
            earliest = min(sub.exit_times[a] for a in rest)
            if earliest < bound:
                return CheckResult(
                    "optimality",
                    "fail",
                    f"batch {k} bound {bound} beaten by a sampled completion ({earliest})",
                    witness={
                        "batch": k,
                        "bound": bound,
                        "earliest": earliest,
                        "completion": {b.name: list(p) for b, p in completion.items()},
                    },
                )
    return CheckResult("optimality", "pass")


def _check_strong_ne(graph, config, profile, trace, options, rng, cache, exit_table=None) -> CheckResult:
    agents = list(profile)
    if exit_table is not None:
        base_combo = exit_table.combo_of(profile)
        base_exits = exit_table.exits[base_combo]
        pos = {a: i for i, a in enumerate(exit_table.agents)}
        for combo, values in exit_table.exits.items():
            movers = [a for a in exit_table.agents if combo[pos[a]] != base_combo[pos[a]]]
            if not movers:
                continue
            if all(values[pos[a]] < base_exits[pos[a]] for a in movers):
                return CheckResult(
                    "strong_ne",
                    "fail",
                    f"coalition {[a.name for a in movers]} strictly improves",
                    witness={
                        "profile": {
                            a.name: list(exit_table.sets[a][combo[pos[a]]])
                            for a in exit_table.agents
                        }
                    },
                )
        return CheckResult("strong_ne", "pass", "exhaustive")
    sets = {}
    total = 1
    for a in agents:
        edge_name, _ = config.locate(a)
        sets[a] = graph.paths(edge_name, graph.destination, guard=options.exhaustive_guard + 1)
        total *= len(sets[a])
    if total <= options.exhaustive_guard:
        for combo in itertools.product(*(sets[a] for a in agents)):
            joint = dict(zip(agents, combo))
            coalition = [a for a in agents if joint[a] != tuple(profile[a])]
            if not coalition:
                continue
            sub = run_paths(graph, config.restrict(profile), joint)
            if all(sub.exit_times[a] < trace.exit_times[a] for a in coalition):
                return CheckResult(
                    "strong_ne",
                    "fail",
                    f"coalition {[a.name for a in coalition]} strictly improves",
                    witness={"profile": {a.name: list(joint[a]) for a in agents}},
                )
        return CheckResult("strong_ne", "pass", "exhaustive")
    for size in range(1, min(options.coalition_size, len(agents)) + 1):
        for coalition in itertools.combinations(agents, size):
            menus = [sets[a][: options.path_budget] for a in coalition]
            for combo in itertools.product(*menus):
                joint = {**{a: tuple(profile[a]) for a in agents}, **dict(zip(coalition, combo))}
                movers = [a for a in coalition if joint[a] != tuple(profile[a])]
                if not movers:
                    continue
                sub = run_paths(graph, config.restrict(profile), joint)
                if all(sub.exit_times[a] < trace.exit_times[a] for a in movers):
                    return CheckResult(
                        "strong_ne",
                        "fail",
                        f"coalition {[a.name for a in movers]} strictly improves",
                        witness={"profile": {a.name: list(joint[a]) for a in agents}},
                    )
    return CheckResult("strong_ne", "pass", "sampled (truncated coalitions)")


def _check_consecutive_exiting(batches, order) -> CheckResult:
    if order is None:
        return CheckResult("consecutive_exiting", "skip", "no original priority metadata")
    index = {a: i for i, a in enumerate(order)}
    for k, batch in enumerate(batches.batches, start=1):
        idxs = sorted(index[a] for a in batch if a in index)
        if idxs and idxs != list(range(idxs[0], idxs[-1] + 1)):
            return CheckResult(
                "consecutive_exiting",
                "fail",
                f"batch {k} indices {idxs} are not consecutive",
                witness={"batch": k, "indices": idxs},
            )
    return CheckResult("consecutive_exiting", "pass")


def _check_temporal_overtaking(graph, trace, order) -> CheckResult:
    if order is None:
        return CheckResult("temporal_overtaking", "skip", "no original priority metadata")
    index = {a: i for i, a in enumerate(order)}
    agents = [a for a in trace.paths if a in index]
    for i, j in itertools.permutations(agents, 2):
        if index[i] <= index[j]:
            continue  # i must have the lower original priority
        for v in trace.vertex_times[i]:
            if v == graph.origin:
                continue
            t_i, t_j = trace.arrival(i, v), trace.arrival(j, v)
            if math.isinf(t_j) or t_i >= t_j:
                continue
            if trace.exit_times[i] != trace.exit_times[j]:
                return CheckResult(
                    "temporal_overtaking",
                    "fail",
                    f"{i} overtakes {j} at {v} but exits differ",
                    witness={
                        "agents": [i.name, j.name],
                        "vertex": v,
                        "times": [t_i, t_j],
                        "exits": [trace.exit_times[i], trace.exit_times[j]],
                    },
                )
    return CheckResult("temporal_overtaking", "pass")
