"""Reachable-state-graph construction and deadlock analysis.

The graph is explored breadth first, so the parent links double as
shortest-path counterexamples.  Analyses require a complete graph: an
exploration cut short by limits yields an explicitly inconclusive
verdict, never a false "no deadlock".
"""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

from .imds import (
    Action,
    AgentId,
    Configuration,
    ModelError,
    SystemModel,
    apply_action,
    enabled_actions,
    validate_model,
)


class IncompleteLts(ModelError):
    """Raised when an analysis needs full reachability but the graph was cut."""


class StepRejected(ModelError):
    """An interactive step chose an action that is not currently enabled."""

    def __init__(self, action: Action, enabled: list[Action]):
        super().__init__(f"action not enabled: {action}")
        self.action = action
        self.enabled = enabled


@dataclass(frozen=True)
class ExplorationLimits:
    max_nodes: int = 1_000_000
    max_depth: Optional[int] = None

    def __post_init__(self) -> None:
        if self.max_nodes < 1:
            raise ValueError("max_nodes must be at least 1")


@dataclass
class Lts:
    """Explicit reachable graph: nodes are configurations, edges actions."""

    nodes: list[Configuration]
    edges: list[tuple[int, Action, int]]
    initial: int = 0
    complete: bool = True
    parent_edge: list[Optional[int]] = field(default_factory=list)
    out_edges: list[list[int]] = field(default_factory=list)
    depth: list[int] = field(default_factory=list)

    def index_of(self, config: Configuration) -> Optional[int]:
        try:
            return self.nodes.index(config)
        except ValueError:
            return None


@dataclass(frozen=True)
class Witness:
    """A replayable path: the initial snapshot plus (action, successor) steps."""

    initial: Configuration
    steps: tuple[tuple[Action, Configuration], ...]

    @property
    def final(self) -> Configuration:
        return self.steps[-1][1] if self.steps else self.initial

    def __len__(self) -> int:
        return len(self.steps)


@dataclass(frozen=True)
class TotalDeadlock:
    node: int
    config: Configuration
    witness: Witness


@dataclass(frozen=True)
class PartialDeadlock:
    agent: AgentId
    node: int
    config: Configuration
    witness: Witness


@dataclass
class DeadlockReport:
    complete: bool
    total_deadlocks: list[TotalDeadlock]
    partial_deadlocks: list[PartialDeadlock]
    nodes: int
    edges: int
    elapsed: float

    @property
    def clean(self) -> bool:
        return self.complete and not self.total_deadlocks and not self.partial_deadlocks


def build_lts(model: SystemModel, limits: Optional[ExplorationLimits] = None) -> Lts:
    """Breadth-first reachable graph from the initial configuration.

    Nodes are deduplicated by configuration value.  When ``limits`` cut
    the exploration short the result carries ``complete=False``; its
    nodes and edges are valid but not exhaustive.
    """
    violations = validate_model(model)
    if violations:
        raise ModelError(
            "model is not well-formed: " + "; ".join(str(v) for v in violations[:5])
        )
    limits = limits or ExplorationLimits()
    nodes: list[Configuration] = [model.initial]
    index: dict[Configuration, int] = {model.initial: 0}
    edges: list[tuple[int, Action, int]] = []
    parent_edge: list[Optional[int]] = [None]
    out_edges: list[list[int]] = [[]]
    depth: list[int] = [0]
    complete = True
    queue: deque[int] = deque([0])
    while queue:
        src = queue.popleft()
        if limits.max_depth is not None and depth[src] >= limits.max_depth:
            if enabled_actions(model, nodes[src]):
                complete = False
            continue
        for action in enabled_actions(model, nodes[src]):
            target = apply_action(nodes[src], action)
            dst = index.get(target)
            if dst is None:
                if len(nodes) >= limits.max_nodes:
                    complete = False
                    continue
                dst = len(nodes)
                index[target] = dst
                nodes.append(target)
                parent_edge.append(len(edges))
                out_edges.append([])
                depth.append(depth[src] + 1)
                queue.append(dst)
            out_edges[src].append(len(edges))
            edges.append((src, action, dst))
    return Lts(
        nodes=nodes,
        edges=edges,
        initial=0,
        complete=complete,
        parent_edge=parent_edge,
        out_edges=out_edges,
        depth=depth,
    )


def _require_complete(lts: Lts, what: str) -> None:
    if not lts.complete:
        raise IncompleteLts(
            f"{what} needs the full reachable graph, but exploration hit a limit;"
            " raise max_nodes/max_depth and rebuild"
        )


def find_total_deadlocks(lts: Lts) -> list[int]:
    """Nodes with no outgoing edge and at least one non-terminated agent.

    Nodes where every agent has terminated are proper termination, not
    deadlock.
    """
    _require_complete(lts, "total-deadlock detection")
    return [
        i
        for i, config in enumerate(lts.nodes)
        if not lts.out_edges[i] and config.pending
    ]


def find_partial_deadlocks(lts: Lts) -> list[tuple[AgentId, int]]:
    """Agents whose pending message can never again be consumed.

    ``(agent, node)`` is deadlocked when the agent has a message pending
    at the node and no edge of that agent is reachable from it.  The
    result is minimized to the earliest such nodes: descendants of an
    already-dead node for the same agent are not repeated.
    """
    _require_complete(lts, "partial-deadlock detection")
    preds: list[list[int]] = [[] for _ in lts.nodes]
    for src, _, dst in lts.edges:
        preds[dst].append(src)

    agents = sorted({m.agent for m in lts.nodes[lts.initial].pending})
    found: list[tuple[AgentId, int]] = []
    for agent in agents:
        # Nodes from which some action of this agent is still reachable.
        live = [False] * len(lts.nodes)
        stack = [src for src, action, _ in lts.edges if action.agent == agent]
        for n in stack:
            live[n] = True
        while stack:
            n = stack.pop()
            for p in preds[n]:
                if not live[p]:
                    live[p] = True
                    stack.append(p)
        dead = [
            i
            for i, config in enumerate(lts.nodes)
            if not live[i] and config.message_of(agent) is not None
        ]
        dead_set = set(dead)
        for i in dead:
            if i == lts.initial or any(p not in dead_set for p in preds[i]):
                found.append((agent, i))
    found.sort(key=lambda pair: (pair[0], pair[1]))
    return found


def extract_counterexample(lts: Lts, node: int) -> Witness:
    """Shortest path (by BFS parent links) from the initial node."""
    if not 0 <= node < len(lts.nodes):
        raise ModelError(f"node {node} is not in the graph")
    chain: list[tuple[Action, Configuration]] = []
    current = node
    while current != lts.initial:
        edge_idx = lts.parent_edge[current]
        assert edge_idx is not None, "non-initial node must have a parent"
        src, action, dst = lts.edges[edge_idx]
        chain.append((action, lts.nodes[dst]))
        current = src
    chain.reverse()
    return Witness(initial=lts.nodes[lts.initial], steps=tuple(chain))


def simulate_step(
    model: SystemModel, config: Configuration, chosen: Action
) -> tuple[Configuration, list[Action]]:
    """Apply one chosen action and report what is enabled afterwards."""
    enabled = enabled_actions(model, config)
    if chosen not in enabled:
        raise StepRejected(chosen, enabled)
    successor = apply_action(config, chosen)
    return successor, enabled_actions(model, successor)


def verify(model: SystemModel, limits: Optional[ExplorationLimits] = None) -> DeadlockReport:
    """Build the graph and classify every deadlock with a witness path."""
    start = time.perf_counter()
    lts = build_lts(model, limits)
    if not lts.complete:
        return DeadlockReport(
            complete=False,
            total_deadlocks=[],
            partial_deadlocks=[],
            nodes=len(lts.nodes),
            edges=len(lts.edges),
            elapsed=time.perf_counter() - start,
        )
    total = [
        TotalDeadlock(node=i, config=lts.nodes[i], witness=extract_counterexample(lts, i))
        for i in find_total_deadlocks(lts)
    ]
    partial = [
        PartialDeadlock(
            agent=agent,
            node=i,
            config=lts.nodes[i],
            witness=extract_counterexample(lts, i),
        )
        for agent, i in find_partial_deadlocks(lts)
    ]
    return DeadlockReport(
        complete=True,
        total_deadlocks=total,
        partial_deadlocks=partial,
        nodes=len(lts.nodes),
        edges=len(lts.edges),
        elapsed=time.perf_counter() - start,
    )
