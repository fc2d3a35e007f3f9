"""Core client-server model: servers hold states, agents carry messages.

A system is a finite set of servers and agents plus a set of atomic
actions.  Each action consumes one pending message together with the
current state of one server and produces a new state of that same server
plus (unless the agent terminates) a new pending message for the same
agent.  Actions interleave; there is no global synchronization.

Everything in this module is an immutable value.  Configurations hash
canonically (components kept in sorted order) so state-space exploration
can deduplicate them.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping, Optional

ServerId = str
AgentId = str
ValueId = str
ServiceId = str


class ModelError(Exception):
    """Base class for errors raised by the model layer."""


class StructuralError(ModelError):
    """A configuration does not fit the model it is used with."""


class ActionNotEnabled(ModelError):
    """An action was applied to a configuration that does not enable it."""

    def __init__(self, action: "Action", config: "Configuration"):
        super().__init__(f"action {action} is not enabled in {config}")
        self.action = action
        self.config = config


@dataclass(frozen=True, slots=True)
class State:
    """A (server, value) pair."""

    server: ServerId
    value: ValueId

    def __str__(self) -> str:
        return f"{self.server}.{self.value}"


@dataclass(frozen=True, slots=True)
class Message:
    """A (agent, server, service) triple: one pending service invocation."""

    agent: AgentId
    server: ServerId
    service: ServiceId

    def __str__(self) -> str:
        return f"{self.agent}.{self.server}.{self.service}"


@dataclass(frozen=True, slots=True)
class Action:
    """One atomic step of the system.

    ``out_message is None`` marks an agent-terminating action: the input
    message is consumed, the server changes state, and the agent stops
    for good.
    """

    in_message: Message
    in_state: State
    out_state: State
    out_message: Optional[Message] = None

    @property
    def agent(self) -> AgentId:
        return self.in_message.agent

    @property
    def server(self) -> ServerId:
        return self.in_state.server

    @property
    def terminating(self) -> bool:
        return self.out_message is None

    def __str__(self) -> str:
        rhs = f"{{{self.out_message}, {self.out_state}}}" if self.out_message else f"{{{self.out_state}}}"
        return f"{{{self.in_message}, {self.in_state}}} -> {rhs}"


@dataclass(frozen=True, slots=True)
class Configuration:
    """Global snapshot: one state per server, at most one message per agent.

    ``states`` is sorted by server name, ``pending`` by agent name and
    ``terminated`` alphabetically, so equal snapshots compare and hash
    equal regardless of construction order.
    """

    states: tuple[tuple[ServerId, ValueId], ...]
    pending: tuple[Message, ...]
    terminated: tuple[AgentId, ...] = ()

    @classmethod
    def make(
        cls,
        states: Mapping[ServerId, ValueId],
        pending: Iterable[Message],
        terminated: Iterable[AgentId] = (),
    ) -> "Configuration":
        msgs = sorted(pending, key=lambda m: m.agent)
        agents = [m.agent for m in msgs]
        if len(set(agents)) != len(agents):
            raise StructuralError(f"more than one pending message for an agent: {agents}")
        return cls(
            states=tuple(sorted(states.items())),
            pending=tuple(msgs),
            terminated=tuple(sorted(terminated)),
        )

    def state_of(self, server: ServerId) -> ValueId:
        for name, value in self.states:
            if name == server:
                return value
        raise StructuralError(f"configuration has no state for server {server!r}")

    def message_of(self, agent: AgentId) -> Optional[Message]:
        for msg in self.pending:
            if msg.agent == agent:
                return msg
        return None

    def is_terminated(self, agent: AgentId) -> bool:
        return agent in self.terminated

    def states_map(self) -> dict[ServerId, ValueId]:
        return dict(self.states)

    def __str__(self) -> str:
        parts = [f"{s}={v}" for s, v in self.states]
        parts += [str(m) for m in self.pending]
        parts += [f"{a}:stopped" for a in self.terminated]
        return "<" + " ".join(parts) + ">"


@dataclass(frozen=True)
class Violation:
    """One well-formedness defect, naming the offending element."""

    kind: str
    subject: str
    detail: str

    def __str__(self) -> str:
        return f"[{self.kind}] {self.subject}: {self.detail}"


@dataclass(frozen=True)
class SystemModel:
    """A complete system: declared sets, actions and the initial snapshot."""

    servers: tuple[ServerId, ...]
    agents: tuple[AgentId, ...]
    states_decl: frozenset[State]
    messages_decl: frozenset[Message]
    actions: tuple[Action, ...]
    initial: Configuration

    @cached_property
    def action_index(self) -> dict[Action, int]:
        """Position of each action in declaration order; stable action ids."""
        return {action: i for i, action in enumerate(self.actions)}

    @cached_property
    def _by_input(self) -> dict[tuple[Message, ValueId], tuple[Action, ...]]:
        table: dict[tuple[Message, ValueId], list[Action]] = {}
        for action in self.actions:
            key = (action.in_message, action.in_state.value)
            table.setdefault(key, []).append(action)
        return {k: tuple(v) for k, v in table.items()}


def enabled_actions(model: SystemModel, config: Configuration) -> list[Action]:
    """All actions whose input message pends and whose input state holds.

    The result is in declaration order of ``model.actions`` so repeated
    calls are deterministic.  May be empty.
    """
    found: list[Action] = []
    states = config.states_map()
    for msg in config.pending:
        try:
            value = states[msg.server]
        except KeyError:
            raise StructuralError(
                f"configuration has no state for server {msg.server!r}"
            ) from None
    for server in model.servers:
        if server not in states:
            raise StructuralError(f"configuration has no state for server {server!r}")
    for msg in config.pending:
        found.extend(model._by_input.get((msg, states[msg.server]), ()))
    found.sort(key=model.action_index.__getitem__)
    return found


def apply_action(config: Configuration, action: Action) -> Configuration:
    """Execute one action: pure, deterministic, frame-preserving.

    Exactly one server state and one agent slot change; raises
    :class:`ActionNotEnabled` when the configuration does not enable the
    action.
    """
    if config.message_of(action.agent) != action.in_message:
        raise ActionNotEnabled(action, config)
    if config.state_of(action.server) != action.in_state.value:
        raise ActionNotEnabled(action, config)

    states = tuple(
        (name, action.out_state.value if name == action.server else value)
        for name, value in config.states
    )
    if action.out_message is not None:
        pending = tuple(
            action.out_message if m.agent == action.agent else m for m in config.pending
        )
        terminated = config.terminated
    else:
        pending = tuple(m for m in config.pending if m.agent != action.agent)
        stopped = list(config.terminated)
        bisect.insort(stopped, action.agent)
        terminated = tuple(stopped)
    return Configuration(states=states, pending=pending, terminated=terminated)


def server_view(model: SystemModel) -> dict[ServerId, frozenset[Action]]:
    """Partition of the action set by the server whose state is consumed."""
    view: dict[ServerId, set[Action]] = {s: set() for s in model.servers}
    for action in model.actions:
        view[action.server].add(action)
    return {s: frozenset(acts) for s, acts in view.items()}


def agent_view(model: SystemModel) -> dict[AgentId, frozenset[Action]]:
    """Partition of the action set by the agent whose message is consumed."""
    view: dict[AgentId, set[Action]] = {a: set() for a in model.agents}
    for action in model.actions:
        view[action.agent].add(action)
    return {a: frozenset(acts) for a, acts in view.items()}


def validate_model(model: SystemModel) -> list[Violation]:
    """Check every well-formedness constraint; violations are data, not errors."""
    out: list[Violation] = []
    servers = set(model.servers)
    agents = set(model.agents)

    if len(servers) != len(model.servers):
        out.append(Violation("duplicate-name", "servers", "server list has duplicates"))
    if len(agents) != len(model.agents):
        out.append(Violation("duplicate-name", "agents", "agent list has duplicates"))

    for st in sorted(model.states_decl, key=str):
        if st.server not in servers:
            out.append(Violation("undeclared-server", str(st), "state of an undeclared server"))
    for msg in sorted(model.messages_decl, key=str):
        if msg.agent not in agents:
            out.append(Violation("undeclared-agent", str(msg), "message of an undeclared agent"))
        if msg.server not in servers:
            out.append(Violation("undeclared-server", str(msg), "message to an undeclared server"))

    for action in model.actions:
        label = str(action)
        if action.in_state.server != action.out_state.server:
            out.append(
                Violation(
                    "server-continuity",
                    label,
                    "input and output states belong to different servers",
                )
            )
        if action.out_message is not None and action.out_message.agent != action.agent:
            out.append(
                Violation(
                    "agent-continuity",
                    label,
                    "output message belongs to a different agent than the input",
                )
            )
        if action.in_message not in model.messages_decl:
            out.append(Violation("undeclared-message", label, f"input message {action.in_message} not declared"))
        if action.in_state not in model.states_decl:
            out.append(Violation("undeclared-state", label, f"input state {action.in_state} not declared"))
        if action.out_state not in model.states_decl:
            out.append(Violation("undeclared-state", label, f"output state {action.out_state} not declared"))
        if action.out_message is not None and action.out_message not in model.messages_decl:
            out.append(Violation("undeclared-message", label, f"output message {action.out_message} not declared"))

    out.extend(_validate_initial(model))
    return out


def _validate_initial(model: SystemModel) -> list[Violation]:
    out: list[Violation] = []
    init = model.initial
    seen_servers: set[ServerId] = set()
    for server, value in init.states:
        if server in seen_servers:
            out.append(Violation("initial-duplicate-state", server, "server initialized twice"))
        seen_servers.add(server)
        if server not in set(model.servers):
            out.append(Violation("undeclared-server", server, "initial state of undeclared server"))
        elif State(server, value) not in model.states_decl:
            out.append(
                Violation("undeclared-state", f"{server}.{value}", "initial state not declared")
            )
    for server in model.servers:
        if server not in seen_servers:
            out.append(
                Violation("initial-missing-state", server, "server has no initial state")
            )

    seen_agents: set[AgentId] = set()
    for msg in init.pending:
        seen_agents.add(msg.agent)
        if msg not in model.messages_decl:
            out.append(Violation("undeclared-message", str(msg), "initial message not declared"))
    for agent in model.agents:
        if agent not in seen_agents:
            out.append(
                Violation("initial-missing-message", agent, "agent has no initial message")
            )
    if init.terminated:
        out.append(
            Violation(
                "initial-terminated",
                ", ".join(init.terminated),
                "no agent may start terminated",
            )
        )
    overlap = set(m.agent for m in init.pending) & set(init.terminated)
    if overlap:
        out.append(
            Violation("pending-terminated-overlap", ", ".join(sorted(overlap)), "agent both pending and terminated")
        )
    return out
