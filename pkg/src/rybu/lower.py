"""Conversion of checked programs into flat message-passing models.

Servers: the state space is the Cartesian product of the state
variables' value sets; every guarded action becomes one concrete action
per satisfying state assignment and per calling thread.

Threads: each thread becomes a server of its own (program-counter
states) plus an agent.  The thread server starts in a bootstrap state
``ini`` with a pending ``start`` message; consuming it emits the first
service call.  Each call site gets one program-counter state, one
action per possible response atom, and control-flow successors that
follow the statement structure (``loop`` creates back edges; running
off the end of the body terminates the agent in state ``stop``).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

from . import dedan
from .imds import Action, Configuration, Message, State, SystemModel
from .rybu_ast import (
    AtomLit,
    BinOp,
    CallStmt,
    EnumType,
    Expr,
    IndexRef,
    IntLit,
    IntRangeType,
    LoopStmt,
    MatchStmt,
    NameRef,
    RybuProgram,
    ServerDecl,
    Stmt,
    ThreadDecl,
    UnaryMinus,
    VarType,
    VectorLit,
    VectorType,
)

Value = Union[int, str, tuple]  # int, atom name, or vector of values


class EvalError(Exception):
    pass


class LoweringError(Exception):
    pass


def agent_name(thread: str) -> str:
    return f"A_{thread}"


def thread_server_name(thread: str) -> str:
    return f"S_{thread}"


BOOT_STATE = "ini"
BOOT_SERVICE = "start"
STOP_STATE = "stop"


# ---------------------------------------------------------------------------
# expression evaluation

def eval_expr(expr: Expr, assignment: dict[str, Value], consts: dict[str, int]) -> Union[Value, bool]:
    """Evaluate over a concrete state assignment; total on well-typed input."""
    if isinstance(expr, IntLit):
        return expr.value
    if isinstance(expr, AtomLit):
        return expr.name
    if isinstance(expr, NameRef):
        if expr.name in assignment:
            return assignment[expr.name]
        if expr.name in consts:
            return consts[expr.name]
        raise EvalError(f"unbound name {expr.name!r}")
    if isinstance(expr, IndexRef):
        vec = assignment.get(expr.base)
        if not isinstance(vec, tuple):
            raise EvalError(f"{expr.base!r} is not a vector")
        idx = eval_expr(expr.index, {}, consts)
        if not isinstance(idx, int) or not 0 <= idx < len(vec):
            raise EvalError(f"index {idx!r} out of bounds for {expr.base!r}")
        return vec[idx]
    if isinstance(expr, UnaryMinus):
        val = eval_expr(expr.operand, assignment, consts)
        if not isinstance(val, int):
            raise EvalError("unary '-' needs an integer")
        return -val
    if isinstance(expr, VectorLit):
        return tuple(eval_expr(item, assignment, consts) for item in expr.items)
    if isinstance(expr, BinOp):
        left = eval_expr(expr.left, assignment, consts)
        right = eval_expr(expr.right, assignment, consts)
        op = expr.op
        if op == "+":
            return left + right
        if op == "-":
            return left - right
        if op == "==":
            return left == right
        if op == "!=":
            return left != right
        if op == "<":
            return left < right
        if op == ">":
            return left > right
        if op == "<=":
            return left <= right
        if op == ">=":
            return left >= right
        raise EvalError(f"unknown operator {op!r}")
    raise EvalError(f"not an expression: {expr!r}")


def eval_const(expr: Expr, consts: dict[str, int]) -> Union[Value, bool]:
    """Evaluate a compile-time expression (no state variables in scope)."""
    return eval_expr(expr, {}, consts)


# ---------------------------------------------------------------------------
# state enumeration

def domain_values(var_type: VarType, consts: dict[str, int]) -> list[Value]:
    """All values of a type, in canonical order."""
    if isinstance(var_type, IntRangeType):
        low = eval_const(var_type.low, consts)
        high = eval_const(var_type.high, consts)
        if not (isinstance(low, int) and isinstance(high, int)):
            raise EvalError("range bounds must be integers")
        return list(range(low, high + 1))
    if isinstance(var_type, EnumType):
        return list(var_type.atoms)
    if isinstance(var_type, VectorType):
        length = eval_const(var_type.length, consts)
        if not isinstance(length, int) or length < 1:
            raise EvalError(f"vector length must be a positive integer, got {length!r}")
        elems = domain_values(var_type.elem, consts)
        return [tuple(combo) for combo in itertools.product(elems, repeat=length)]
    raise EvalError(f"not a type: {var_type!r}")


def render_value(value: Value) -> str:
    """Identifier-safe rendering used in state labels (m3 stands for -3)."""
    if isinstance(value, bool):
        raise EvalError("boolean is not a state value")
    if isinstance(value, int):
        return str(value) if value >= 0 else f"m{-value}"
    if isinstance(value, str):
        return value
    if isinstance(value, tuple):
        return "_".join(render_value(v) for v in value)
    raise EvalError(f"not a value: {value!r}")


def state_label(var_names: Sequence[str], assignment: dict[str, Value]) -> str:
    if not var_names:  # a stateless server still needs one named state
        return "idle"
    return "_".join(f"{name}_{render_value(assignment[name])}" for name in var_names)


def enumerate_states(
    server: ServerDecl, consts: Optional[dict[str, int]] = None
) -> list[tuple[dict[str, Value], str]]:
    """All state assignments of a server with their labels.

    Order is the Cartesian product in declaration order: the first
    variable varies slowest.  Labels join variable names and rendered
    values with underscores; a collision between two distinct
    assignments is an error asking for a rename.
    """
    consts = consts or {}
    names = [v.name for v in server.vars]
    domains = [domain_values(v.var_type, consts) for v in server.vars]
    out: list[tuple[dict[str, Value], str]] = []
    seen: dict[str, dict[str, Value]] = {}
    for combo in itertools.product(*domains):
        assignment = dict(zip(names, combo))
        label = state_label(names, assignment)
        if label in seen:
            raise LoweringError(
                f"server {server.name!r}: states {seen[label]} and {assignment} both"
                f" render as {label!r}; rename variables or values to disambiguate"
            )
        seen[label] = assignment
        out.append((assignment, label))
    return out


# ---------------------------------------------------------------------------
# server lowering

def _type_contains(var_type: VarType, value: Value, consts: dict[str, int]) -> bool:
    if isinstance(var_type, IntRangeType):
        low = eval_const(var_type.low, consts)
        high = eval_const(var_type.high, consts)
        return isinstance(value, int) and not isinstance(value, bool) and low <= value <= high
    if isinstance(var_type, EnumType):
        return isinstance(value, str) and value in var_type.atoms
    if isinstance(var_type, VectorType):
        length = eval_const(var_type.length, consts)
        return (
            isinstance(value, tuple)
            and len(value) == length
            and all(_type_contains(var_type.elem, v, consts) for v in value)
        )
    return False


def lower_server(
    server: ServerDecl,
    instance: str,
    callers: Sequence[tuple[str, set[str]]],
    consts: Optional[dict[str, int]] = None,
    warnings: Optional[list[str]] = None,
) -> list[Action]:
    """All concrete actions of one server instance.

    ``callers`` lists, per thread, which of this instance's services
    that thread invokes; actions are generated only for those threads.
    """
    consts = consts or {}
    states = enumerate_states(server, consts)
    actions: list[Action] = []
    used_services = set()
    for _, services in callers:
        used_services |= set(services)
    for service in server.service_names():
        if service not in used_services and warnings is not None:
            warnings.append(
                f"{instance}.{service}: service is never called; no actions generated"
            )

    for rybu_action in server.actions:
        if rybu_action.service not in used_services:
            continue
        satisfying: list[tuple[dict[str, Value], str]] = []
        for assignment, label in states:
            if rybu_action.predicate is None or eval_expr(
                rybu_action.predicate, assignment, consts
            ):
                satisfying.append((assignment, label))
        if not satisfying and warnings is not None:
            warnings.append(
                f"{instance}.{rybu_action.service}: predicate is never satisfiable;"
                " no actions generated"
            )
        for thread, services in callers:
            if rybu_action.service not in services:
                continue
            for assignment, label in satisfying:
                updated = dict(assignment)
                for var, value_expr in rybu_action.updates:
                    value = eval_expr(value_expr, assignment, consts)
                    decl = server.var_named(var)
                    assert decl is not None
                    if not _type_contains(decl.var_type, value, consts):
                        raise LoweringError(
                            f"{instance}.{rybu_action.service}: update {var} ="
                            f" {value!r} leaves the declared range in state {label!r};"
                            " guard the action with a predicate"
                        )
                    updated[var] = value
                out_label = state_label([v.name for v in server.vars], updated)
                actions.append(
                    Action(
                        in_message=Message(agent_name(thread), instance, rybu_action.service),
                        in_state=State(instance, label),
                        out_state=State(instance, out_label),
                        out_message=Message(
                            agent_name(thread),
                            thread_server_name(thread),
                            rybu_action.returns,
                        ),
                    )
                )
    return actions


# ---------------------------------------------------------------------------
# thread lowering

@dataclass
class CallPoint:
    """One call site: a program-counter state awaiting a response."""

    order: int  # pre-order statement index, used in the state label
    instance: str
    service: str
    arms: Optional[dict[str, Optional[int]]] = None  # match: atom -> successor cp (None = stop)
    cont: Optional[int] = None  # plain call: successor cp (None = stop)
    is_match: bool = False

    @property
    def label(self) -> str:
        return f"s{self.order}_{self.instance}_{self.service}"


@dataclass
class ThreadLowering:
    thread: str
    actions: list[Action]
    initial_state: str
    initial_message: Message
    states: list[str]
    services: list[str]
    call_points: list[CallPoint]


def _preorder_index(body: tuple[Stmt, ...]) -> dict[int, int]:
    """Map id(stmt) -> pre-order position over the whole statement tree."""
    order: dict[int, int] = {}
    counter = itertools.count()

    def walk(stmts: Sequence[Stmt]) -> None:
        for s in stmts:
            order[id(s)] = next(counter)
            if isinstance(s, LoopStmt):
                walk(s.body)
            elif isinstance(s, MatchStmt):
                for arm in s.arms:
                    walk(arm.body)

    walk(body)
    return order


def lower_thread(thread: ThreadDecl, instances: dict[str, ServerDecl]) -> ThreadLowering:
    """Compile a thread into its own server (program counter) and agent."""
    if not thread.body:
        raise LoweringError(f"thread {thread.name!r}: empty thread body")
    order = _preorder_index(thread.body)
    cps: list[CallPoint] = []
    cp_of: dict[int, int] = {}  # id(stmt) -> index into cps

    def declare(s: Stmt) -> int:
        if isinstance(s, (CallStmt, MatchStmt)):
            if id(s) not in cp_of:
                cp = CallPoint(order[id(s)], s.instance, s.service, is_match=isinstance(s, MatchStmt))
                cp_of[id(s)] = len(cps)
                cps.append(cp)
            return cp_of[id(s)]
        raise AssertionError("declare() called on a non-call statement")

    def entry_of_seq(stmts: Sequence[Stmt], cont: Optional[int]) -> Optional[int]:
        """First call point reached when control enters the sequence."""
        for s in stmts:
            if isinstance(s, (CallStmt, MatchStmt)):
                return declare(s)
            if isinstance(s, LoopStmt):
                return entry_of_loop(s)
        return cont

    def entry_of_loop(s: LoopStmt) -> int:
        # The loop's entry is the first call point of its body; the body's
        # continuation is that same entry (back edge).
        first = None
        for inner in s.body:
            if isinstance(inner, (CallStmt, MatchStmt)):
                first = declare(inner)
                break
            if isinstance(inner, LoopStmt):
                first = entry_of_loop(inner)
                break
        if first is None:
            raise LoweringError(f"thread {thread.name!r}: loop contains no service call")
        return first

    def wire_seq(stmts: Sequence[Stmt], cont: Optional[int]) -> None:
        """Set every call point's successor(s) within the sequence."""
        for i, s in enumerate(stmts):
            after = entry_of_seq(stmts[i + 1 :], cont)
            if isinstance(s, CallStmt):
                cps[declare(s)].cont = after
            elif isinstance(s, MatchStmt):
                cp = cps[declare(s)]
                cp.arms = {}
                for arm in s.arms:
                    cp.arms[arm.atom] = entry_of_seq(arm.body, after)
                    wire_seq(arm.body, after)
            elif isinstance(s, LoopStmt):
                head = entry_of_loop(s)
                wire_seq(s.body, head)

    first_cp = entry_of_seq(thread.body, None)
    assert first_cp is not None  # non-empty bodies bottom out at a call
    wire_seq(thread.body, None)

    a_name = agent_name(thread.name)
    s_name = thread_server_name(thread.name)

    def returns_of(cp: CallPoint) -> set[str]:
        server = instances.get(cp.instance)
        if server is None:
            raise LoweringError(
                f"thread {thread.name!r}: unknown instance {cp.instance!r}"
            )
        atoms = server.returns_of(cp.service)
        if not atoms:
            raise LoweringError(
                f"thread {thread.name!r}: {cp.instance}.{cp.service} is not a service"
            )
        return atoms

    def successor(cp_idx: Optional[int]) -> tuple[Optional[Message], State]:
        if cp_idx is None:
            return None, State(s_name, STOP_STATE)
        target = cps[cp_idx]
        return (
            Message(a_name, target.instance, target.service),
            State(s_name, target.label),
        )

    actions: list[Action] = []
    boot_out, boot_state = successor(first_cp)
    actions.append(
        Action(
            in_message=Message(a_name, s_name, BOOT_SERVICE),
            in_state=State(s_name, BOOT_STATE),
            out_state=boot_state,
            out_message=boot_out,
        )
    )

    terminates = False
    received: list[str] = []
    for cp in sorted(cps, key=lambda c: c.order):
        possible = returns_of(cp)
        if cp.is_match:
            assert cp.arms is not None
            arm_atoms = list(cp.arms)
            if set(arm_atoms) != possible:
                missing = sorted(possible - set(arm_atoms))
                extra = sorted(set(arm_atoms) - possible)
                parts = []
                if missing:
                    parts.append(f"unhandled return value(s) {', '.join(':' + m for m in missing)}")
                if extra:
                    parts.append(f"impossible arm(s) {', '.join(':' + e for e in extra)}")
                raise LoweringError(
                    f"thread {thread.name!r}: match on {cp.instance}.{cp.service}: "
                    + "; ".join(parts)
                )
            branches = list(cp.arms.items())
        else:
            if possible != {"ok"}:
                others = sorted(possible - {"ok"})
                raise LoweringError(
                    f"thread {thread.name!r}: {cp.instance}.{cp.service}(); may return"
                    f" {', '.join(':' + o for o in others)}; use 'match' to handle it"
                )
            branches = [("ok", cp.cont)]
        for atom, nxt in branches:
            if atom not in received:
                received.append(atom)
            out_msg, out_state = successor(nxt)
            if out_msg is None:
                terminates = True
            actions.append(
                Action(
                    in_message=Message(a_name, s_name, atom),
                    in_state=State(s_name, cp.label),
                    out_state=out_state,
                    out_message=out_msg,
                )
            )

    states = [BOOT_STATE] + [cp.label for cp in sorted(cps, key=lambda c: c.order)]
    if terminates:
        states.append(STOP_STATE)
    services = [BOOT_SERVICE] + received
    return ThreadLowering(
        thread=thread.name,
        actions=actions,
        initial_state=BOOT_STATE,
        initial_message=Message(a_name, s_name, BOOT_SERVICE),
        states=states,
        services=services,
        call_points=sorted(cps, key=lambda c: c.order),
    )


# ---------------------------------------------------------------------------
# whole-program lowering

@dataclass
class ServerMeta:
    """Per-server presentation info: how labels decompose into variables."""

    kind: str  # "resource" or "thread"
    var_names: list[str] = field(default_factory=list)
    decode: dict[str, dict[str, Value]] = field(default_factory=dict)


@dataclass
class LowerResult:
    model: SystemModel
    unit: dedan.DedanUnit
    warnings: list[str]
    meta: dict[str, ServerMeta]


def collect_callers(program: RybuProgram) -> dict[str, list[tuple[str, set[str]]]]:
    """instance -> [(thread, services that thread calls on it)], in order."""
    out: dict[str, list[tuple[str, set[str]]]] = {i.name: [] for i in program.instances}

    def walk(stmts: Sequence[Stmt], acc: dict[str, set[str]]) -> None:
        for s in stmts:
            if isinstance(s, CallStmt):
                acc.setdefault(s.instance, set()).add(s.service)
            elif isinstance(s, MatchStmt):
                acc.setdefault(s.instance, set()).add(s.service)
                for arm in s.arms:
                    walk(arm.body, acc)
            elif isinstance(s, LoopStmt):
                walk(s.body, acc)

    for thread in program.threads:
        acc: dict[str, set[str]] = {}
        walk(thread.body, acc)
        for instance, services in acc.items():
            if instance in out:
                out[instance].append((thread.name, services))
    return out


def called_instances(thread: ThreadDecl) -> list[str]:
    """Instances a thread calls, in first-call order."""
    seen: list[str] = []

    def walk(stmts: Sequence[Stmt]) -> None:
        for s in stmts:
            if isinstance(s, (CallStmt, MatchStmt)):
                if s.instance not in seen:
                    seen.append(s.instance)
                if isinstance(s, MatchStmt):
                    for arm in s.arms:
                        walk(arm.body)
            elif isinstance(s, LoopStmt):
                walk(s.body)

    walk(thread.body)
    return seen


def eval_consts(program: RybuProgram) -> dict[str, int]:
    consts: dict[str, int] = {}
    for c in program.consts:
        value = eval_const(c.value, consts)
        if not isinstance(value, int) or isinstance(value, bool):
            raise LoweringError(f"const {c.name!r} is not an integer")
        consts[c.name] = value
    return consts


def lower_program(program: RybuProgram) -> LowerResult:
    """Compile a checked program into a model plus its printable unit."""
    consts = eval_consts(program)
    warnings: list[str] = []
    callers = collect_callers(program)

    server_names: list[str] = [i.name for i in program.instances]
    thread_servers = [thread_server_name(t.name) for t in program.threads]
    agents = [agent_name(t.name) for t in program.threads]
    taken = set(server_names)
    for name in thread_servers + agents:
        if name in taken:
            raise LoweringError(
                f"generated name {name!r} collides with a declared instance;"
                " rename the instance or the thread"
            )
        taken.add(name)

    server_decls: dict[str, ServerDecl] = {}
    for inst in program.instances:
        decl = program.server_named(inst.server_type)
        if decl is None:
            raise LoweringError(f"instance {inst.name!r}: unknown server type {inst.server_type!r}")
        server_decls[inst.name] = decl

    meta: dict[str, ServerMeta] = {}
    actions: list[Action] = []
    states_decl: set[State] = set()
    init_states: dict[str, str] = {}
    services_of: dict[str, list[str]] = {}

    for inst in program.instances:
        decl = server_decls[inst.name]
        actions.extend(lower_server(decl, inst.name, callers[inst.name], consts, warnings))
        enumerated = enumerate_states(decl, consts)
        for _, label in enumerated:
            states_decl.add(State(inst.name, label))
        m = ServerMeta(kind="resource", var_names=[v.name for v in decl.vars])
        for assignment, label in enumerated:
            m.decode[label] = assignment
        meta[inst.name] = m
        init_assignment = {name: eval_const(value, consts) for name, value in inst.inits}
        init_states[inst.name] = state_label([v.name for v in decl.vars], init_assignment)
        services_of[inst.name] = decl.service_names()

    lowered_threads: list[ThreadLowering] = []
    pending: list[Message] = []
    for thread in program.threads:
        lt = lower_thread(thread, server_decls)
        lowered_threads.append(lt)
        actions.extend(lt.actions)
        s_name = thread_server_name(thread.name)
        for label in lt.states:
            states_decl.add(State(s_name, label))
        init_states[s_name] = lt.initial_state
        pending.append(lt.initial_message)
        services_of[s_name] = lt.services
        meta[s_name] = ServerMeta(kind="thread")

    all_servers = server_names + thread_servers
    messages_decl = frozenset(
        Message(agent, server, service)
        for agent in agents
        for server in all_servers
        for service in services_of[server]
    )
    model = SystemModel(
        servers=tuple(all_servers),
        agents=tuple(agents),
        states_decl=frozenset(states_decl),
        messages_decl=messages_decl,
        actions=tuple(actions),
        initial=Configuration.make(states=init_states, pending=pending),
    )
    unit = _to_dedan_unit(program, model, lowered_threads, callers, consts)
    return LowerResult(model=model, unit=unit, warnings=warnings, meta=meta)


def _to_dedan_unit(
    program: RybuProgram,
    model: SystemModel,
    lowered_threads: list[ThreadLowering],
    callers: dict[str, list[tuple[str, set[str]]]],
    consts: dict[str, int],
) -> dedan.DedanUnit:
    """Mirror the flat model as a printable unit (one type per instance)."""

    def ref(name: str) -> dedan.Ref:
        return dedan.Ref(name)

    def template(action: Action) -> dedan.ActionTemplate:
        out_msg = None
        if action.out_message is not None:
            m = action.out_message
            out_msg = dedan.MsgRef(ref(m.agent), ref(m.server), ref(m.service))
        return dedan.ActionTemplate(
            repeaters=(),
            in_msg=dedan.MsgRef(
                ref(action.in_message.agent),
                ref(action.in_message.server),
                ref(action.in_message.service),
            ),
            in_state=dedan.StateRef(ref(action.in_state.server), ref(action.in_state.value)),
            out_msg=out_msg,
            out_state=dedan.StateRef(ref(action.out_state.server), ref(action.out_state.value)),
        )

    by_server: dict[str, list[Action]] = {s: [] for s in model.servers}
    for action in model.actions:
        by_server[action.server].append(action)

    types: list[dedan.ServerTypeDecl] = []
    bindings: list[dedan.InitEntry] = []
    messages: list[dedan.InitEntry] = []
    init_map = dict(model.initial.states)

    for inst in program.instances:
        decl = program.server_named(inst.server_type)
        assert decl is not None
        caller_threads = [t for t, _ in callers[inst.name]]
        formal_agents = tuple(dedan.VectorDecl(agent_name(t)) for t in caller_threads)
        formal_servers = tuple(dedan.VectorDecl(thread_server_name(t)) for t in caller_threads)
        states = tuple(label for _, label in enumerate_states(decl, consts))
        types.append(
            dedan.ServerTypeDecl(
                name=inst.name,
                formal_agents=formal_agents,
                formal_servers=formal_servers,
                services=tuple(decl.service_names()),
                states=states,
                actions=tuple(template(a) for a in by_server[inst.name]),
            )
        )
        actuals = tuple(ref(agent_name(t)) for t in caller_threads) + tuple(
            ref(thread_server_name(t)) for t in caller_threads
        )
        bindings.append(
            dedan.InitBinding((), ref(inst.name), actuals, init_map[inst.name])
        )

    for thread, lt in zip(program.threads, lowered_threads):
        s_name = thread_server_name(thread.name)
        a_name = agent_name(thread.name)
        targets = called_instances(thread)
        types.append(
            dedan.ServerTypeDecl(
                name=s_name,
                formal_agents=(dedan.VectorDecl(a_name),),
                formal_servers=tuple(dedan.VectorDecl(t) for t in targets),
                services=tuple(lt.services),
                states=tuple(lt.states),
                actions=tuple(template(a) for a in by_server[s_name]),
            )
        )
        actuals = (ref(a_name),) + tuple(ref(t) for t in targets)
        bindings.append(dedan.InitBinding((), ref(s_name), actuals, lt.initial_state))
        messages.append(
            dedan.InitMessage(
                (), dedan.MsgRef(ref(a_name), ref(s_name), ref(BOOT_SERVICE))
            )
        )

    return dedan.DedanUnit(
        system_name="generated",
        server_types=tuple(types),
        agent_decls=tuple(dedan.VectorDecl(a) for a in model.agents),
        server_decls=tuple(dedan.InstanceDecl(s) for s in model.servers),
        init_entries=tuple(messages) + tuple(bindings),
    )
