"""Command-line entry point: compile, verify, graph, simulate, serve.

Exit codes are a stable contract: 0 success / no deadlock, 1 input
diagnostics, 2 deadlock found, 3 verification inconclusive (a limit was
hit).
"""

from __future__ import annotations

import argparse
import json
import os
import random
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, TextIO

from . import dedan, report
from .imds import SystemModel, apply_action, enabled_actions
from .lower import LoweringError, LowerResult, ServerMeta, lower_program
from .lts import ExplorationLimits, Witness, build_lts, verify
from .rybu_check import errors_of, typecheck
from .rybu_parser import RybuSyntaxError, parse_program

EXIT_OK = 0
EXIT_DIAGNOSTICS = 1
EXIT_DEADLOCK = 2
EXIT_INCONCLUSIVE = 3

DEFAULT_PORT = 8642
PORT_ENV_VAR = "RYBU_PORT"


class InputError(Exception):
    def __init__(self, messages: list[str]):
        super().__init__("\n".join(messages))
        self.messages = messages


@dataclass
class LoadedModel:
    model: SystemModel
    meta: dict[str, ServerMeta]
    unit: Optional[dedan.DedanUnit]
    kind: str  # "rybu" | "dedan"
    warnings: list[str] = field(default_factory=list)


def load_model(path: str, lang: Optional[str] = None) -> LoadedModel:
    """Read a ``.rybu`` or ``.dedan`` source and produce the flat model."""
    p = Path(path)
    if not p.exists():
        raise InputError([f"{path}: no such file"])
    kind = lang
    if kind is None:
        if p.suffix == ".rybu":
            kind = "rybu"
        elif p.suffix == ".dedan":
            kind = "dedan"
        else:
            raise InputError(
                [f"{path}: cannot tell the input language from the extension; pass --lang"]
            )
    text = p.read_text(encoding="utf-8")
    if kind == "rybu":
        result = compile_rybu(text, source_name=str(path))
        return LoadedModel(result.model, result.meta, result.unit, "rybu", result.warnings)
    try:
        unit = dedan.parse_dedan(text)
        model = dedan.expand(unit)
    except dedan.DedanError as e:
        raise InputError([f"{path}: {e}"]) from e
    meta = {s: ServerMeta(kind="opaque") for s in model.servers}
    return LoadedModel(model, meta, unit, "dedan")


def compile_rybu(text: str, source_name: str = "<input>") -> LowerResult:
    """Parse, check and lower; raises :class:`InputError` on any diagnostic."""
    try:
        program = parse_program(text)
    except RybuSyntaxError as e:
        raise InputError([f"{source_name}:{e}"]) from e
    diags = typecheck(program)
    errors = errors_of(diags)
    if errors:
        raise InputError([f"{source_name}:{d}" for d in errors])
    try:
        return lower_program(program)
    except LoweringError as e:
        raise InputError([f"{source_name}: {e}"]) from e


def _limits(args: argparse.Namespace) -> ExplorationLimits:
    return ExplorationLimits(
        max_nodes=args.max_nodes, max_depth=getattr(args, "max_depth", None)
    )


def cmd_compile(args: argparse.Namespace) -> int:
    if args.lang == "dedan" or (args.lang is None and args.input.endswith(".dedan")):
        print("compile expects a .rybu source", file=sys.stderr)
        return EXIT_DIAGNOSTICS
    result = compile_rybu(Path(args.input).read_text(encoding="utf-8"), args.input)
    for warning in result.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    text = dedan.print_dedan(result.unit)
    out = Path(args.out) if args.out else Path(args.input).with_suffix(".dedan")
    out.write_text(text, encoding="utf-8")
    print(f"wrote {out}")
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    loaded = load_model(args.input, args.lang)
    result = verify(loaded.model, _limits(args))
    print(f"explored {result.nodes} configurations, {result.edges} transitions"
          f" in {result.elapsed:.2f}s")
    if not result.complete:
        print("inconclusive: exploration limit reached before the graph was exhausted")
        return EXIT_INCONCLUSIVE
    if result.clean:
        print("no deadlocks found")
        return EXIT_OK
    print(f"total deadlocks: {len(result.total_deadlocks)}")
    for d in result.total_deadlocks:
        print(f"  node {d.node}: {d.config}")
    print(f"partially deadlocked agents: {len(result.partial_deadlocks)}")
    for pd in result.partial_deadlocks:
        print(f"  {pd.agent} at node {pd.node}")
    finding = result.total_deadlocks[0] if result.total_deadlocks else result.partial_deadlocks[0]
    out = Path(args.out) if args.out else Path(args.input + ".trace")
    if args.format == "json":
        out.write_text(
            json.dumps(report.report_json(loaded.model, result), indent=2) + "\n",
            encoding="utf-8",
        )
    elif args.format == "dot":
        out.write_text(report.render_dot(finding.witness), encoding="utf-8")
    else:
        out.write_text(report.render_trace(finding.witness, loaded.model), encoding="utf-8")
    print(f"counterexample written to {out}")
    return EXIT_DEADLOCK


def cmd_graph(args: argparse.Namespace) -> int:
    loaded = load_model(args.input, args.lang)
    if args.server or args.agent:
        if args.server:
            text = report.render_server_projection(loaded.model, args.server)
        else:
            text = report.render_agent_projection(loaded.model, args.agent)
    else:
        lts = build_lts(loaded.model, _limits(args))
        if args.format == "json":
            if len(lts.nodes) > args.cap:
                print(
                    f"graph has {len(lts.nodes)} nodes (cap {args.cap});"
                    " raise --cap or use --server/--agent projections",
                    file=sys.stderr,
                )
                return EXIT_DIAGNOSTICS
            text = json.dumps(report.graph_json(loaded.model, lts), indent=2) + "\n"
        else:
            try:
                text = report.render_dot(lts, node_cap=args.cap)
            except report.GraphTooLarge as e:
                print(str(e), file=sys.stderr)
                return EXIT_DIAGNOSTICS
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _print_state(model: SystemModel, config, out: TextIO) -> None:
    out.write(f"state: {config}\n")
    enabled = enabled_actions(model, config)
    if not enabled:
        if config.pending:
            blocked = ", ".join(f"{m.agent} (on {m.server}.{m.service})" for m in config.pending)
            out.write(f"DEADLOCK: no enabled actions; blocked: {blocked}\n")
        else:
            out.write("all agents terminated\n")
        return
    out.write("enabled:\n")
    for i, action in enumerate(enabled, start=1):
        tail = "TERMINATES" if action.out_message is None else \
            f"-> {action.out_message.server}.{action.out_message.service}"
        out.write(
            f"  [{i}] {action.agent}: {action.server}.{action.in_message.service}"
            f" ({action.in_state.value} => {action.out_state.value}) {tail}"
            f" (id {model.action_index[action]})\n"
        )


def run_simulation(
    model: SystemModel,
    in_stream: TextIO,
    out_stream: TextIO,
    seed: Optional[int] = None,
    replay: Optional[Witness] = None,
    walk_cap: int = 100_000,
) -> int:
    """Interactive stepper; reads one command per line.

    Commands: a number picks an enabled action, ``u`` undoes, ``r``
    resets, ``a`` auto-walks (seeded) until nothing is enabled, ``q``
    quits.  In replay mode: ``n`` forward, ``b`` back, ``q`` quit.
    """
    out = out_stream
    if replay is not None:
        position = 0
        out.write(f"replaying a witness with {len(replay)} steps\n")
        out.write(f"position 0\nstate: {replay.initial}\n")
        for line in in_stream:
            command = line.strip()
            if command in ("q", "quit", ""):
                break
            if command in ("n", "next") and position < len(replay.steps):
                position += 1
            elif command in ("b", "back") and position > 0:
                position -= 1
            elif command not in ("n", "next", "b", "back"):
                out.write("commands: n(ext), b(ack), q(uit)\n")
            config = replay.initial if position == 0 else replay.steps[position - 1][1]
            out.write(f"position {position}\n")
            if position > 0:
                action = replay.steps[position - 1][0]
                out.write(f"via: {action}\n")
            out.write(f"state: {config}\n")
        return EXIT_OK

    rng = random.Random(seed)
    history: list = []
    config = model.initial
    _print_state(model, config, out)
    out.write("> ")
    for line in in_stream:
        command = line.strip()
        if command in ("q", "quit"):
            break
        if command in ("u", "undo"):
            if history:
                config = history.pop()
        elif command in ("r", "reset"):
            history.clear()
            config = model.initial
        elif command in ("a", "auto"):
            steps = 0
            while steps < walk_cap:
                enabled = enabled_actions(model, config)
                if not enabled:
                    break
                history.append(config)
                config = apply_action(config, rng.choice(enabled))
                steps += 1
            out.write(f"walked {steps} steps\n")
        elif command.isdigit():
            enabled = enabled_actions(model, config)
            choice = int(command)
            if not 1 <= choice <= len(enabled):
                out.write(f"pick a number between 1 and {len(enabled)}\n")
                out.write("> ")
                continue
            history.append(config)
            config = apply_action(config, enabled[choice - 1])
        else:
            out.write("commands: <number>, u(ndo), r(eset), a(uto-walk), q(uit)\n")
        _print_state(model, config, out)
        out.write("> ")
    return EXIT_OK


def _witness_from_json(model: SystemModel, data: dict) -> Witness:
    config = model.initial
    steps = []
    for step in data.get("steps", []):
        action = model.actions[step["action"]["id"]]
        config = apply_action(config, action)
        steps.append((action, config))
    return Witness(initial=model.initial, steps=tuple(steps))


def cmd_simulate(args: argparse.Namespace) -> int:
    loaded = load_model(args.input, args.lang)
    replay = None
    if args.replay:
        data = json.loads(Path(args.replay).read_text(encoding="utf-8"))
        if "witness" in data:
            data = data["witness"]
        replay = _witness_from_json(loaded.model, data)
    return run_simulation(loaded.model, sys.stdin, sys.stdout, seed=args.seed, replay=replay)


def cmd_serve(args: argparse.Namespace) -> int:
    from .api import serve_api  # deferred so the other commands stay light

    loaded = load_model(args.input, args.lang)
    port = args.port
    if port is None:
        port = int(os.environ.get(PORT_ENV_VAR, DEFAULT_PORT))
    static_dir = args.static
    if static_dir is None:
        bundled = Path(__file__).resolve().parent.parent.parent / "frontend" / "dist"
        static_dir = str(bundled) if bundled.is_dir() else None
    server = serve_api(
        loaded.model,
        loaded.meta,
        port=port,
        host=args.host,
        limits=_limits(args),
        static_dir=static_dir,
    )
    host, actual_port = server.server_address[:2]
    print(f"serving on http://{host}:{actual_port} (Ctrl-C stops)", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rybu",
        description="Compile imperative client-server models and verify them"
        " against total and partial deadlocks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, depth: bool = True) -> None:
        p.add_argument("input", help="input file (.rybu or .dedan)")
        p.add_argument("--lang", choices=["rybu", "dedan"], help="override language detection")
        p.add_argument("--max-nodes", type=int, default=1_000_000)
        if depth:
            p.add_argument("--max-depth", type=int, default=None)

    p = sub.add_parser("compile", help="translate a .rybu source to .dedan text")
    p.add_argument("input")
    p.add_argument("--lang", choices=["rybu", "dedan"])
    p.add_argument("--out")
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("verify", help="explore the state space and report deadlocks")
    common(p)
    p.add_argument("--out", help="counterexample path (default: <input>.trace)")
    p.add_argument("--format", choices=["text", "json", "dot"], default="text")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("graph", help="emit the reachable graph or a projection")
    common(p)
    p.add_argument("--out")
    p.add_argument("--format", choices=["dot", "json"], default="dot")
    p.add_argument("--cap", type=int, default=500, help="refuse graphs above this size")
    p.add_argument("--server", help="render one server's automaton instead")
    p.add_argument("--agent", help="render one agent's automaton instead")
    p.set_defaults(func=cmd_graph)

    p = sub.add_parser("simulate", help="step through the model interactively")
    common(p, depth=False)
    p.add_argument("--seed", type=int, default=0, help="seed for the auto-walk")
    p.add_argument("--replay", help="witness JSON to replay step by step")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("serve", help="run the local JSON API (and UI, if built)")
    common(p)
    p.add_argument("--port", type=int, default=None,
                   help=f"default: ${PORT_ENV_VAR} or {DEFAULT_PORT}")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--static", help="directory with the browser client build")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as e:
        for message in e.messages:
            print(message, file=sys.stderr)
        return EXIT_DIAGNOSTICS


if __name__ == "__main__":
    sys.exit(main())
