"""Strategy oracles for extensive-form play: the Markovian replay of the
iterative dominating profile, the NE-preserving construction, induced paths,
and one-deviation auditing."""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

from .dynamics import EXIT, Configuration, RoutingTrace, action_set, default_horizon, run_paths, step
from .equilibrium import batch_decompose, iterative_dominating_profile, verify_ne
from .errors import HorizonExceeded, NotAnNE
from .netcore import Agent, Graph

Action = Optional[str]


def _canonical(actions: Mapping[Agent, Action]) -> tuple:
    return tuple(sorted((a.name, act if act is not None else "") for a, act in actions.items()))


@dataclass(frozen=True)
class HistoryNode:
    """A realized history: the root configuration plus the action profiles taken."""

    config: Configuration
    key: tuple
    parent: Optional["HistoryNode"] = None
    actions: Optional[dict[Agent, Action]] = None  # profile leading here from parent

    @property
    def time(self) -> int:
        return self.config.time


def root_history(config: Configuration) -> HistoryNode:
    return HistoryNode(config=config, key=())


def child_history(graph: Graph, node: HistoryNode, actions: Mapping[Agent, Action]) -> HistoryNode:
    actions = dict(actions)
    new_config = step(graph, node.config, actions)
    return HistoryNode(
        config=new_config,
        key=node.key + (_canonical(actions),),
        parent=node,
        actions=actions,
    )


class StrategyOracle:
    """Deterministic rule (history, agent) -> action; total over live agents."""

    markovian = False

    def __init__(self, graph: Graph):
        self.graph = graph

    def action(self, history: HistoryNode, agent: Agent) -> Action:
        raise NotImplementedError

    def profile(self, history: HistoryNode) -> dict[Agent, Action]:
        return {a: self.action(history, a) for a in history.config.agents()}


def prescribed_actions(
    graph: Graph, config: Configuration, profile: Mapping[Agent, Sequence[str]]
) -> dict[Agent, Action]:
    """Three-case rule: stay when queued behind someone, exit on the final edge,
    otherwise take the path's next edge."""
    acts: dict[Agent, Action] = {}
    for agent in config.agents():
        path = profile[agent]
        edge_name, idx = config.locate(agent)
        if path[0] != edge_name:
            raise NotAnNE(f"profile path of {agent} does not start at its edge")
        if idx > 0:
            acts[agent] = edge_name
        elif len(path) == 1:
            acts[agent] = EXIT
        else:
            acts[agent] = path[1]
    return acts


class SigmaStar(StrategyOracle):
    """Markovian oracle replaying the iterative dominating profile of the
    current configuration; memoized on queue contents."""

    markovian = True

    def __init__(self, graph: Graph):
        super().__init__(graph)
        self._memo: dict[tuple, dict[Agent, Action]] = {}
        self._paths: dict[tuple, dict[Agent, tuple[str, ...]]] = {}

    def prescription(self, config: Configuration) -> dict[Agent, Action]:
        key = config.content_key()
        if key not in self._memo:
            solve = iterative_dominating_profile(self.graph, config)
            self._paths[key] = solve.paths
            self._memo[key] = prescribed_actions(self.graph, config, solve.paths)
        return self._memo[key]

    def planned_paths(self, config: Configuration) -> dict[Agent, tuple[str, ...]]:
        self.prescription(config)
        return self._paths[config.content_key()]

    def action(self, history: HistoryNode, agent: Agent) -> Action:
        return self.prescription(history.config)[agent]


def sigma_star(graph: Graph) -> SigmaStar:
    return SigmaStar(graph)


class NEBasedOracle(StrategyOracle):
    """History-dependent oracle that preserves a given NE on the played path.

    Per visited history it keeps the paths of the batch prefix whose realized
    actions matched the prescription (Construction I) and rebuilds the rest as
    an iterative dominating partial profile on that base (Construction II).
    """

    markovian = False

    def __init__(
        self,
        graph: Graph,
        root_config: Configuration,
        pi: Mapping[Agent, Sequence[str]],
        base_check_samples: int = 0,
    ):
        super().__init__(graph)
        report = verify_ne(graph, root_config, pi)
        if not report.passed:
            raise NotAnNE(f"given profile is not an NE: {report.witnesses[0]}")
        self.root_config = root_config
        self.base_check_samples = base_check_samples
        self._profiles: dict[tuple, dict[Agent, tuple[str, ...]]] = {
            (): {a: tuple(p) for a, p in pi.items()}
        }

    def matched_prefix_size(self, node: HistoryNode) -> int:
        """Batches of the parent NE whose realized actions matched it (the
        maximal k; the whole population when nothing deviated)."""
        rho = self.profile_at(node.parent)
        prescribed = prescribed_actions(self.graph, node.parent.config, rho)
        realized = node.actions or {}
        trace = run_paths(self.graph, node.parent.config.restrict(rho), rho)
        batches = batch_decompose(trace)
        matched = 0
        for k, batch in enumerate(batches.batches, start=1):
            if all(realized.get(a, EXIT) == prescribed[a] for a in batch):
                matched = k
            else:
                break
        return matched

    def profile_at(self, node: HistoryNode) -> dict[Agent, tuple[str, ...]]:
        if node.key in self._profiles:
            return self._profiles[node.key]
        assert node.parent is not None, "root profile must be seeded"
        rho = self.profile_at(node.parent)
        trace = run_paths(self.graph, node.parent.config.restrict(rho), rho)
        batches = batch_decompose(trace)
        matched = self.matched_prefix_size(node)
        keep = set(batches.prefix(matched))
        live = set(node.config.agents())
        base: dict[Agent, tuple[str, ...]] = {}
        for agent in sorted(keep & live, key=lambda a: a.name):
            old = rho[agent]
            edge_name, _ = node.config.locate(agent)
            base[agent] = old if old[0] == edge_name else old[1:]
            assert base[agent][0] == edge_name
        solve = iterative_dominating_profile(
            self.graph, node.config, base=base, base_check_samples=self.base_check_samples
        )
        self._profiles[node.key] = solve.paths
        return solve.paths

    def action(self, history: HistoryNode, agent: Agent) -> Action:
        profile = self.profile_at(history)
        return prescribed_actions(self.graph, history.config, profile)[agent]


def ne_based_spe(
    graph: Graph,
    config: Configuration,
    pi: Mapping[Agent, Sequence[str]],
    base_check_samples: int = 0,
) -> NEBasedOracle:
    return NEBasedOracle(graph, config, pi, base_check_samples=base_check_samples)


# -- induced play ----------------------------------------------------------------


def induced_paths(
    graph: Graph,
    history: HistoryNode,
    oracle: StrategyOracle,
    horizon: Optional[int] = None,
) -> tuple[dict[Agent, tuple[str, ...]], RoutingTrace]:
    """Forward-simulate the oracle from a history until every agent has exited."""
    limit = horizon if horizon is not None else default_horizon(graph, history.config)
    node = history
    realized: dict[Agent, list[str]] = {}
    for agent in history.config.agents():
        edge_name, _ = history.config.locate(agent)
        realized[agent] = [edge_name]
    while not node.config.is_empty():
        if node.config.time > limit:
            raise HorizonExceeded(f"induced play passed time {limit}")
        acts = oracle.profile(node)
        for agent, act in acts.items():
            current, idx = node.config.locate(agent)
            if act is not EXIT and idx == 0 and act != current:
                realized[agent].append(act)
        node = child_history(graph, node, acts)
    paths = {a: tuple(p) for a, p in realized.items()}
    trace = run_paths(graph, history.config, paths)
    return paths, trace


# -- one-deviation audit ----------------------------------------------------------


@dataclass(frozen=True)
class DeviationFinding:
    history_key: tuple
    time: int
    agent: Agent
    alternative: str
    conforming_exit: int
    deviating_exit: int


@dataclass
class DeviationAuditReport:
    audited_histories: int = 0
    audited_deviations: int = 0
    violations: list[DeviationFinding] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_text(self) -> str:
        lines = [
            f"one-deviation audit: {self.audited_histories} histories, "
            f"{self.audited_deviations} deviations, "
            f"{'PASS' if self.passed else 'FAIL'}"
        ]
        for v in self.violations:
            lines.append(
                f"  at t={v.time} agent {v.agent} gains by {v.alternative!r}: "
                f"{v.deviating_exit} < {v.conforming_exit} (history {v.history_key})"
            )
        return "\n".join(lines)


def one_deviation_audit(
    graph: Graph,
    oracle: StrategyOracle,
    histories: Iterable[HistoryNode],
    horizon: Optional[int] = None,
) -> DeviationAuditReport:
    """Check that no single agent gains by deviating once and conforming after."""
    report = DeviationAuditReport()
    exit_memo: dict[tuple, dict[Agent, int]] = {}

    def exits_from(node: HistoryNode) -> dict[Agent, int]:
        if node.key not in exit_memo:
            _, trace = induced_paths(graph, node, oracle, horizon=horizon)
            exit_memo[node.key] = dict(trace.exit_times)
        return exit_memo[node.key]

    for node in histories:
        if node.config.is_empty():
            continue
        report.audited_histories += 1
        base = exits_from(node)
        prof = oracle.profile(node)
        for agent in node.config.agents():
            options = action_set(graph, node.config, agent)
            for alt in sorted(options - {prof[agent]}):
                report.audited_deviations += 1
                deviated = child_history(graph, node, {**prof, agent: alt})
                t_dev = exits_from(deviated)[agent]
                if t_dev < base[agent]:
                    report.violations.append(
                        DeviationFinding(
                            history_key=node.key,
                            time=node.time,
                            agent=agent,
                            alternative=alt,
                            conforming_exit=base[agent],
                            deviating_exit=t_dev,
                        )
                    )
    return report


# -- history samplers --------------------------------------------------------------


def exhaustive_histories(
    graph: Graph,
    config: Configuration,
    depth: Optional[int] = None,
    guard: int = 200_000,
) -> list[HistoryNode]:
    """Every history reachable under arbitrary play, to the given depth
    (default: until everyone exits)."""
    limit = depth if depth is not None else default_horizon(graph, config) - config.time
    root = root_history(config)
    out = [root]
    frontier = deque([root])
    while frontier:
        node = frontier.popleft()
        if node.config.is_empty() or node.config.time - config.time >= limit:
            continue
        agents = node.config.agents()
        menus = []
        for agent in agents:
            options = action_set(graph, node.config, agent)
            menus.append(sorted(options) if options else [EXIT])
        combos = [[]]
        for menu in menus:
            combos = [c + [m] for c in combos for m in menu]
        for combo in combos:
            child = child_history(graph, node, dict(zip(agents, combo)))
            out.append(child)
            frontier.append(child)
            if len(out) > guard:
                raise HorizonExceeded(f"history tree exceeds {guard} nodes")
    return out


def play_histories(
    graph: Graph, config: Configuration, oracle: StrategyOracle
) -> list[HistoryNode]:
    """The on-path chain of histories under the oracle."""
    node = root_history(config)
    out = [node]
    limit = default_horizon(graph, config)
    while not node.config.is_empty():
        if node.config.time > limit:
            raise HorizonExceeded("oracle play does not terminate")
        node = child_history(graph, node, oracle.profile(node))
        out.append(node)
    return out


def sampled_histories(
    graph: Graph,
    config: Configuration,
    rng: random.Random,
    playouts: int,
    depth: Optional[int] = None,
    oracle: Optional[StrategyOracle] = None,
) -> list[HistoryNode]:
    """Random playouts to the given depth, always including oracle play when given."""
    seen: dict[tuple, HistoryNode] = {}

    def add(node: HistoryNode) -> None:
        seen.setdefault(node.key, node)

    if oracle is not None:
        for node in play_histories(graph, config, oracle):
            add(node)
    limit = depth if depth is not None else default_horizon(graph, config) - config.time
    for _ in range(playouts):
        node = root_history(config)
        add(node)
        while not node.config.is_empty() and node.config.time - config.time < limit:
            acts = {}
            for agent in node.config.agents():
                options = sorted(action_set(graph, node.config, agent))
                acts[agent] = rng.choice(options) if options else EXIT
            node = child_history(graph, node, acts)
            add(node)
    return list(seen.values())
