"""Human- and tool-facing renderings of traces, graphs and reports.

The text trace format is line-oriented and stable (golden-file tested):
one line per action plus fixed-size configuration blocks, so diffs of
two traces line up step by step.  Graphs go out in DOT; structured data
goes out as version-tagged JSON.
"""

from __future__ import annotations

from typing import Any, Optional, Union

from .imds import (
    Action,
    AgentId,
    Configuration,
    ServerId,
    SystemModel,
    agent_view,
    enabled_actions,
    server_view,
)
from .lts import DeadlockReport, Lts, Witness

JSON_VERSION = 1


class GraphTooLarge(Exception):
    pass


# ---------------------------------------------------------------------------
# text traces

def _config_lines(config: Configuration) -> list[str]:
    lines = [f"  server {s} = {v}" for s, v in config.states]
    lines += [f"  agent {m.agent} -> {m.server}.{m.service}" for m in config.pending]
    lines += [f"  agent {a} TERMINATED" for a in config.terminated]
    return lines


def render_trace(witness: Witness, model: Optional[SystemModel] = None) -> str:
    """One line per action, between initial and final configuration blocks.

    With a model at hand the footer also names the agents whose pending
    messages have no enabled action at the final configuration.
    """
    out = [f"trace with {len(witness)} steps"]
    out.append("initial configuration:")
    out.extend(_config_lines(witness.initial))
    if not witness.steps:
        return "\n".join(out) + "\n"
    out.append("steps:")
    previous = witness.initial
    for i, (action, after) in enumerate(witness.steps, start=1):
        old = previous.state_of(action.server)
        new = action.out_state.value
        got = f"{action.in_message.server}.{action.in_message.service}"
        if action.out_message is None:
            tail = "TERMINATES"
        else:
            tail = f"sent {action.out_message.server}.{action.out_message.service}"
        out.append(
            f"  {i}. {action.agent}: got {got} | {action.server}: {old} -> {new} | {tail}"
        )
        previous = after
    final = witness.final
    out.append("final configuration:")
    out.extend(_config_lines(final))
    if model is not None:
        blocked = [
            m
            for m in final.pending
            if not any(a.in_message == m for a in enabled_actions(model, final))
        ]
    else:
        blocked = list(final.pending)
    if blocked:
        out.append(
            "blocked: "
            + "; ".join(f"{m.agent} waiting on {m.server}.{m.service}" for m in blocked)
        )
    else:
        out.append("blocked: none")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# DOT graphs

def _quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _config_label(config: Configuration) -> str:
    parts = [" ".join(f"{s}={v}" for s, v in config.states)]
    if config.pending:
        parts.append(" ".join(f"{m.agent}>{m.server}.{m.service}" for m in config.pending))
    if config.terminated:
        parts.append(" ".join(f"{a}#" for a in config.terminated))
    return "\\n".join(parts)


def _edge_label(action: Action) -> str:
    return f"{action.agent}:{action.server}.{action.in_message.service}"


def render_dot(graph: Union[Lts, Witness], *, node_cap: int = 500) -> str:
    """DOT text for a reachable graph or a witness path.

    Deadlock nodes (no successors, agents still pending) are filled;
    the initial node is drawn with a double border.  Graphs above
    ``node_cap`` are refused: render a per-server or per-agent
    projection instead (:func:`render_server_projection`).
    """
    if isinstance(graph, Witness):
        lts = _witness_as_graph(graph)
    else:
        lts = graph
    if len(lts.nodes) > node_cap:
        raise GraphTooLarge(
            f"graph has {len(lts.nodes)} nodes (cap {node_cap}); raise the cap or"
            " use a per-server/per-agent projection"
        )
    out = ["digraph lts {"]
    out.append("  rankdir=TB;")
    out.append('  node [shape=box fontsize=10];')
    for i, config in enumerate(lts.nodes):
        attrs = [f"label={_quote(_config_label(config))}"]
        if i == lts.initial:
            attrs.append("peripheries=2")
        if not lts.out_edges[i] and config.pending:
            attrs.append('style=filled fillcolor="#f4a3a3"')
        out.append(f"  n{i} [{' '.join(attrs)}];")
    for src, action, dst in lts.edges:
        out.append(f"  n{src} -> n{dst} [label={_quote(_edge_label(action))}];")
    out.append("}")
    return "\n".join(out) + "\n"


def _witness_as_graph(witness: Witness) -> Lts:
    nodes = [witness.initial]
    edges = []
    out_edges: list[list[int]] = [[]]
    for action, after in witness.steps:
        src = len(nodes) - 1
        nodes.append(after)
        out_edges[src].append(len(edges))
        edges.append((src, action, len(nodes) - 1))
        out_edges.append([])
    return Lts(nodes=nodes, edges=edges, out_edges=out_edges)


def render_server_projection(model: SystemModel, server: ServerId) -> str:
    """The one server's automaton: its values as nodes, its actions as edges."""
    actions = server_view(model).get(server)
    if actions is None:
        raise KeyError(f"unknown server {server!r}")
    values = sorted({s.value for s in model.states_decl if s.server == server})
    initial_value = model.initial.state_of(server)
    out = [f"digraph {{"]
    out.append(f"  label={_quote('server ' + server)};")
    for v in values:
        shape = "peripheries=2 " if v == initial_value else ""
        out.append(f"  {_quote(v)} [{shape}shape=ellipse];")
    for action in sorted(actions, key=str):
        label = f"{action.agent}:{action.in_message.service}"
        out.append(
            f"  {_quote(action.in_state.value)} -> {_quote(action.out_state.value)}"
            f" [label={_quote(label)}];"
        )
    out.append("}")
    return "\n".join(out) + "\n"


def render_agent_projection(model: SystemModel, agent: AgentId) -> str:
    """The one agent's automaton: its messages as nodes, actions as edges."""
    actions = agent_view(model).get(agent)
    if actions is None:
        raise KeyError(f"unknown agent {agent!r}")
    messages = sorted(
        {a.in_message for a in actions}
        | {a.out_message for a in actions if a.out_message is not None},
        key=str,
    )
    initial_msg = model.initial.message_of(agent)
    out = ["digraph {"]
    out.append(f"  label={_quote('agent ' + agent)};")
    for m in messages:
        name = f"{m.server}.{m.service}"
        shape = "peripheries=2 " if m == initial_msg else ""
        out.append(f"  {_quote(name)} [{shape}shape=ellipse];")
    if any(a.out_message is None for a in actions):
        out.append('  "TERMINATED" [shape=doublecircle];')
    for action in sorted(actions, key=str):
        src = f"{action.in_message.server}.{action.in_message.service}"
        if action.out_message is None:
            dst = "TERMINATED"
        else:
            dst = f"{action.out_message.server}.{action.out_message.service}"
        label = f"@{action.in_state.value}"
        out.append(f"  {_quote(src)} -> {_quote(dst)} [label={_quote(label)}];")
    out.append("}")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# JSON

def config_json(config: Configuration) -> dict[str, Any]:
    return {
        "servers": {s: v for s, v in config.states},
        "pending": {
            m.agent: {"server": m.server, "service": m.service} for m in config.pending
        },
        "terminated": list(config.terminated),
    }


def action_json(model: SystemModel, action: Action) -> dict[str, Any]:
    data: dict[str, Any] = {
        "id": model.action_index[action],
        "agent": action.agent,
        "server": action.server,
        "service": action.in_message.service,
        "in_state": action.in_state.value,
        "out_state": action.out_state.value,
    }
    if action.out_message is None:
        data["out"] = None
    else:
        data["out"] = {
            "server": action.out_message.server,
            "service": action.out_message.service,
        }
    return data


def witness_json(model: SystemModel, witness: Witness) -> dict[str, Any]:
    return {
        "v": JSON_VERSION,
        "initial": config_json(witness.initial),
        "steps": [
            {"action": action_json(model, action), "after": config_json(after)}
            for action, after in witness.steps
        ],
        "final": config_json(witness.final),
    }


def report_json(model: SystemModel, report: DeadlockReport) -> dict[str, Any]:
    return {
        "v": JSON_VERSION,
        "complete": report.complete,
        "nodes": report.nodes,
        "edges": report.edges,
        "elapsed": report.elapsed,
        "total_deadlocks": [
            {
                "node": d.node,
                "config": config_json(d.config),
                "witness": witness_json(model, d.witness),
            }
            for d in report.total_deadlocks
        ],
        "partial_deadlocks": [
            {
                "agent": d.agent,
                "node": d.node,
                "config": config_json(d.config),
                "witness": witness_json(model, d.witness),
            }
            for d in report.partial_deadlocks
        ],
    }


def graph_json(model: SystemModel, lts: Lts) -> dict[str, Any]:
    return {
        "v": JSON_VERSION,
        "complete": lts.complete,
        "initial": lts.initial,
        "nodes": [config_json(c) for c in lts.nodes],
        "edges": [
            {"from": src, "action": action_json(model, action), "to": dst}
            for src, action, dst in lts.edges
        ],
    }
