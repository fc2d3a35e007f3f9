"""Textual interchange format for flat message-passing models.

The format (``.dedan`` files) declares server *types* with formal agent
and server parameters, instantiates them into vectors of instances, and
binds actual parameters in an ``init`` block.  Action templates may be
replicated over bounded integer *repeaters*; expansion takes the
Cartesian product of repeater ranges and substitutes actuals for
formals, yielding a flat :class:`~rybu.imds.SystemModel`.

Grammar (reverse-engineered; no comments, whitespace-insensitive)::

    unit         = "system" IDENT ";" server_type* [agents] [servers] init
    server_type  = "server" ":" IDENT "(" groups ")" ","
                   "services" "{" names "}" ","
                   "states"   "{" names "}" ","
                   "actions"  "{" {template ","} "}" ";"
    groups       = [group {";" group}]        group = ("agents"|"servers") vdecl {"," vdecl}
    vdecl        = IDENT ["[" INT "]"]
    template     = {repeater} "{" msg "," state "}" "->" "{" [msg ","] state "}"
    repeater     = "<" IDENT "=" INT ".." INT ">"
    msg          = ref "." ref "." ref         state = ref "." ref
    ref          = IDENT ["[" (INT|IDENT) "]"]
    agents       = "agents"  ":" vdecl  {"," vdecl}  ";"
    servers      = "servers" ":" sdecl  {"," sdecl}  ";"
    sdecl        = IDENT ["[" INT "]"] [":" IDENT]   (type defaults to the name)
    init         = "init" "->" "{" entry {(","|";") entry} [","|";"] "}" "."
    entry        = {repeater} ( msg | ref "(" [ref {"," ref}] ")" "." IDENT )
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator, Optional, Union

from .imds import (
    Action,
    Configuration,
    Message,
    State,
    SystemModel,
)


class DedanError(Exception):
    """Base class for this module's errors."""


class DedanSyntaxError(DedanError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col


class PrintError(DedanError):
    """A unit cannot be rendered (e.g. a template uses an unbound name)."""


class ExpandError(DedanError):
    """A unit cannot be flattened into a concrete model."""


# ---------------------------------------------------------------------------
# surface syntax tree


@dataclass(frozen=True)
class VectorDecl:
    """A scalar (``size is None``) or vector formal/instance declaration."""

    name: str
    size: Optional[int] = None


@dataclass(frozen=True)
class InstanceDecl:
    """A server instance vector with its type (``sem[2]`` or ``t: test``)."""

    name: str
    size: Optional[int] = None
    type_name: Optional[str] = None  # None means: same as name

    @property
    def type_of(self) -> str:
        return self.type_name if self.type_name is not None else self.name


@dataclass(frozen=True)
class Ref:
    """A possibly indexed name: ``sem``, ``sem[2]`` or ``proc[j]``."""

    name: str
    index: Union[int, str, None] = None

    def __str__(self) -> str:
        return self.name if self.index is None else f"{self.name}[{self.index}]"


@dataclass(frozen=True)
class MsgRef:
    agent: Ref
    server: Ref
    service: Ref

    def __str__(self) -> str:
        return f"{self.agent}.{self.server}.{self.service}"


@dataclass(frozen=True)
class StateRef:
    server: Ref
    value: Ref

    def __str__(self) -> str:
        return f"{self.server}.{self.value}"


@dataclass(frozen=True)
class Repeater:
    """Bounded index variable replicating a template over ``low..high``."""

    var: str
    low: int
    high: int

    def __str__(self) -> str:
        return f"<{self.var}={self.low}..{self.high}>"


@dataclass(frozen=True)
class ActionTemplate:
    repeaters: tuple[Repeater, ...]
    in_msg: MsgRef
    in_state: StateRef
    out_msg: Optional[MsgRef]
    out_state: StateRef

    def __str__(self) -> str:
        head = "".join(f"{r} " for r in self.repeaters)
        rhs = f"{{{self.out_msg}, {self.out_state}}}" if self.out_msg else f"{{{self.out_state}}}"
        return f"{head}{{{self.in_msg}, {self.in_state}}} -> {rhs}"


@dataclass(frozen=True)
class ServerTypeDecl:
    name: str
    formal_agents: tuple[VectorDecl, ...] = ()
    formal_servers: tuple[VectorDecl, ...] = ()
    services: tuple[str, ...] = ()
    states: tuple[str, ...] = ()
    actions: tuple[ActionTemplate, ...] = ()


@dataclass(frozen=True)
class InitMessage:
    repeaters: tuple[Repeater, ...]
    message: MsgRef


@dataclass(frozen=True)
class InitBinding:
    repeaters: tuple[Repeater, ...]
    target: Ref
    actuals: tuple[Ref, ...]
    state: str


InitEntry = Union[InitMessage, InitBinding]


@dataclass(frozen=True)
class DedanUnit:
    system_name: str
    server_types: tuple[ServerTypeDecl, ...]
    agent_decls: tuple[VectorDecl, ...]
    server_decls: tuple[InstanceDecl, ...]
    init_entries: tuple[InitEntry, ...]

    def type_named(self, name: str) -> ServerTypeDecl:
        for t in self.server_types:
            if t.name == name:
                return t
        raise ExpandError(f"unknown server type {name!r}")


# ---------------------------------------------------------------------------
# printing

def _fmt_vdecl(d: VectorDecl) -> str:
    return d.name if d.size is None else f"{d.name}[{d.size}]"


def _fmt_sdecl(d: InstanceDecl) -> str:
    base = d.name if d.size is None else f"{d.name}[{d.size}]"
    return base if d.type_name is None else f"{base}: {d.type_name}"


def _template_scope(t: ServerTypeDecl, template: ActionTemplate) -> None:
    """Raise PrintError if the template refers to no declared name."""
    formals = {d.name for d in t.formal_agents} | {d.name for d in t.formal_servers}
    repeater_vars = {r.var for r in template.repeaters}

    def check_ref(ref: Ref, allow_self: bool) -> None:
        if ref.name not in formals and not (allow_self and ref.name == t.name):
            raise PrintError(
                f"server type {t.name!r}: unbound identifier {ref.name!r} in template {template}"
            )
        if isinstance(ref.index, str) and ref.index not in repeater_vars:
            raise PrintError(
                f"server type {t.name!r}: unbound repeater variable {ref.index!r} in template {template}"
            )

    def check_idx(ref: Ref) -> None:
        if isinstance(ref.index, str) and ref.index not in repeater_vars:
            raise PrintError(
                f"server type {t.name!r}: unbound repeater variable {ref.index!r} in template {template}"
            )

    for msg in filter(None, (template.in_msg, template.out_msg)):
        check_ref(msg.agent, allow_self=False)
        check_ref(msg.server, allow_self=True)
        check_idx(msg.service)
    for st in (template.in_state, template.out_state):
        check_ref(st.server, allow_self=True)
        check_idx(st.value)


def print_dedan(unit: DedanUnit) -> str:
    """Render a unit in canonical layout; inverse of :func:`parse_dedan`."""
    lines: list[str] = [f"system {unit.system_name};", ""]
    for t in unit.server_types:
        groups = []
        if t.formal_agents:
            groups.append("agents " + ", ".join(_fmt_vdecl(d) for d in t.formal_agents))
        if t.formal_servers:
            groups.append("servers " + ", ".join(_fmt_vdecl(d) for d in t.formal_servers))
        lines.append(f"server: {t.name} ({'; '.join(groups)}),")
        lines.append("services {" + ", ".join(t.services) + "},")
        lines.append("states {" + ", ".join(t.states) + "},")
        if t.actions:
            lines.append("actions {")
            for template in t.actions:
                _template_scope(t, template)
                lines.append(f"{template},")
            lines.append("};")
        else:
            lines.append("actions { };")
        lines.append("")
    if unit.agent_decls:
        lines.append("agents: " + ", ".join(_fmt_vdecl(d) for d in unit.agent_decls) + ";")
    if unit.server_decls:
        lines.append("servers: " + ", ".join(_fmt_sdecl(d) for d in unit.server_decls) + ";")
    lines.append("")
    lines.append("init -> {")
    for entry in unit.init_entries:
        head = "".join(f"{r} " for r in entry.repeaters)
        if isinstance(entry, InitMessage):
            lines.append(f"{head}{entry.message},")
        else:
            actuals = ", ".join(str(a) for a in entry.actuals)
            lines.append(f"{head}{entry.target}({actuals}).{entry.state},")
    lines.append("}.")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# lexing

_PUNCT = {
    "->": "ARROW",
    "..": "DOTDOT",
    ";": "SEMI",
    ",": "COMMA",
    ".": "DOT",
    "{": "LBRACE",
    "}": "RBRACE",
    "(": "LPAREN",
    ")": "RPAREN",
    "[": "LBRACK",
    "]": "RBRACK",
    "<": "LT",
    ">": "GT",
    "=": "EQ",
    ":": "COLON",
}


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _lex(text: str) -> list[_Tok]:
    toks: list[_Tok] = []
    line, col, i = 1, 1, 0
    n = len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if c.isspace():
            col += 1
            i += 1
            continue
        if c.isalpha():  # identifiers start with a letter
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            toks.append(_Tok("IDENT", text[i:j], line, col))
            col += j - i
            i = j
            continue
        if c.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            toks.append(_Tok("INT", text[i:j], line, col))
            col += j - i
            i = j
            continue
        two = text[i : i + 2]
        if two in _PUNCT:
            toks.append(_Tok(_PUNCT[two], two, line, col))
            col += 2
            i += 2
            continue
        if c in _PUNCT:
            toks.append(_Tok(_PUNCT[c], c, line, col))
            col += 1
            i += 1
            continue
        raise DedanSyntaxError(f"illegal character {c!r}", line, col)
    toks.append(_Tok("EOF", "", line, col))
    return toks


# ---------------------------------------------------------------------------
# parsing

class _Parser:
    def __init__(self, text: str):
        self.toks = _lex(text)
        self.pos = 0

    def peek(self) -> _Tok:
        return self.toks[self.pos]

    def next(self) -> _Tok:
        tok = self.toks[self.pos]
        self.pos += 1
        return tok

    def error(self, message: str) -> DedanSyntaxError:
        tok = self.peek()
        return DedanSyntaxError(f"{message} (found {tok.text or 'end of input'!r})", tok.line, tok.col)

    def expect(self, kind: str) -> _Tok:
        if self.peek().kind != kind:
            raise self.error(f"expected {kind}")
        return self.next()

    def expect_kw(self, word: str) -> None:
        tok = self.peek()
        if tok.kind != "IDENT" or tok.text != word:
            raise self.error(f"expected keyword {word!r}")
        self.next()

    def at_kw(self, word: str) -> bool:
        tok = self.peek()
        return tok.kind == "IDENT" and tok.text == word

    def ident(self) -> str:
        return self.expect("IDENT").text

    def int_(self) -> int:
        return int(self.expect("INT").text)

    # -- grammar productions -------------------------------------------

    def unit(self) -> DedanUnit:
        self.expect_kw("system")
        name = self.ident()
        self.expect("SEMI")
        types: list[ServerTypeDecl] = []
        while self.at_kw("server"):
            types.append(self.server_type())
        agent_decls: tuple[VectorDecl, ...] = ()
        server_decls: tuple[InstanceDecl, ...] = ()
        if self.at_kw("agents"):
            self.next()
            self.expect("COLON")
            agent_decls = tuple(self.vdecl_list())
            self.expect("SEMI")
        if self.at_kw("servers"):
            self.next()
            self.expect("COLON")
            server_decls = tuple(self.sdecl_list())
            self.expect("SEMI")
        entries = self.init_block()
        self.expect("EOF")
        return DedanUnit(name, tuple(types), agent_decls, server_decls, entries)

    def server_type(self) -> ServerTypeDecl:
        self.expect_kw("server")
        self.expect("COLON")
        name = self.ident()
        self.expect("LPAREN")
        formal_agents: list[VectorDecl] = []
        formal_servers: list[VectorDecl] = []
        while self.peek().kind != "RPAREN":
            if self.at_kw("agents"):
                self.next()
                formal_agents.extend(self.vdecl_list())
            elif self.at_kw("servers"):
                self.next()
                formal_servers.extend(self.vdecl_list())
            else:
                raise self.error("expected 'agents' or 'servers' group")
            if self.peek().kind == "SEMI":
                self.next()
        self.expect("RPAREN")
        self.expect("COMMA")
        self.expect_kw("services")
        services = self.name_set()
        self.expect("COMMA")
        self.expect_kw("states")
        states = self.name_set()
        self.expect("COMMA")
        self.expect_kw("actions")
        self.expect("LBRACE")
        templates: list[ActionTemplate] = []
        while self.peek().kind != "RBRACE":
            templates.append(self.template())
            if self.peek().kind == "COMMA":
                self.next()
        self.expect("RBRACE")
        self.expect("SEMI")
        return ServerTypeDecl(
            name,
            tuple(formal_agents),
            tuple(formal_servers),
            services,
            states,
            tuple(templates),
        )

    def name_set(self) -> tuple[str, ...]:
        self.expect("LBRACE")
        names: list[str] = []
        while self.peek().kind != "RBRACE":
            names.append(self.ident())
            if self.peek().kind == "COMMA":
                self.next()
        self.expect("RBRACE")
        return tuple(names)

    def vdecl_list(self) -> list[VectorDecl]:
        out = [self.vdecl()]
        while self.peek().kind == "COMMA":
            self.next()
            out.append(self.vdecl())
        return out

    def vdecl(self) -> VectorDecl:
        name = self.ident()
        size = None
        if self.peek().kind == "LBRACK":
            self.next()
            size = self.int_()
            self.expect("RBRACK")
        return VectorDecl(name, size)

    def sdecl_list(self) -> list[InstanceDecl]:
        out = [self.sdecl()]
        while self.peek().kind == "COMMA":
            self.next()
            out.append(self.sdecl())
        return out

    def sdecl(self) -> InstanceDecl:
        name = self.ident()
        size = None
        type_name = None
        if self.peek().kind == "LBRACK":
            self.next()
            size = self.int_()
            self.expect("RBRACK")
        if self.peek().kind == "COLON":
            self.next()
            type_name = self.ident()
        return InstanceDecl(name, size, type_name)

    def repeaters(self) -> tuple[Repeater, ...]:
        reps: list[Repeater] = []
        while self.peek().kind == "LT":
            tok = self.peek()
            self.next()
            var = self.ident()
            self.expect("EQ")
            low = self.int_()
            self.expect("DOTDOT")
            high = self.int_()
            self.expect("GT")
            if low > high:
                raise DedanSyntaxError(f"repeater {var}: empty range {low}..{high}", tok.line, tok.col)
            reps.append(Repeater(var, low, high))
        return tuple(reps)

    def ref(self) -> Ref:
        name = self.ident()
        index: Union[int, str, None] = None
        if self.peek().kind == "LBRACK":
            self.next()
            if self.peek().kind == "INT":
                index = self.int_()
            else:
                index = self.ident()
            self.expect("RBRACK")
        return Ref(name, index)

    def template(self) -> ActionTemplate:
        reps = self.repeaters()
        self.expect("LBRACE")
        a = self.dotted()
        if len(a) != 3:
            raise self.error("expected agent.server.service message")
        self.expect("COMMA")
        s = self.dotted()
        if len(s) != 2:
            raise self.error("expected server.value state")
        self.expect("RBRACE")
        self.expect("ARROW")
        self.expect("LBRACE")
        first = self.dotted()
        out_msg: Optional[MsgRef] = None
        if self.peek().kind == "COMMA":
            if len(first) != 3:
                raise self.error("expected agent.server.service message")
            out_msg = MsgRef(*first)
            self.next()
            second = self.dotted()
            if len(second) != 2:
                raise self.error("expected server.value state")
            out_state = StateRef(*second)
        else:
            if len(first) != 2:
                raise self.error("expected server.value state")
            out_state = StateRef(*first)
        self.expect("RBRACE")
        return ActionTemplate(reps, MsgRef(*a), StateRef(*s), out_msg, out_state)

    def dotted(self) -> tuple[Ref, ...]:
        parts = [self.ref()]
        while self.peek().kind == "DOT":
            self.next()
            parts.append(self.ref())
        if len(parts) not in (2, 3):
            raise self.error("expected a 2- or 3-part dotted reference")
        return tuple(parts)

    def init_block(self) -> tuple[InitEntry, ...]:
        self.expect_kw("init")
        self.expect("ARROW")
        self.expect("LBRACE")
        entries: list[InitEntry] = []
        while self.peek().kind != "RBRACE":
            entries.append(self.init_entry())
            if self.peek().kind in ("COMMA", "SEMI"):
                self.next()
        self.expect("RBRACE")
        self.expect("DOT")
        return tuple(entries)

    def init_entry(self) -> InitEntry:
        reps = self.repeaters()
        target = self.ref()
        if self.peek().kind == "LPAREN":
            self.next()
            actuals: list[Ref] = []
            while self.peek().kind != "RPAREN":
                actuals.append(self.ref())
                if self.peek().kind == "COMMA":
                    self.next()
            self.expect("RPAREN")
            self.expect("DOT")
            state = self.ident()
            return InitBinding(reps, target, tuple(actuals), state)
        self.expect("DOT")
        server = self.ref()
        self.expect("DOT")
        service = self.ref()
        return InitMessage(reps, MsgRef(target, server, service))


def parse_dedan(text: str) -> DedanUnit:
    """Parse unit text; raises :class:`DedanSyntaxError` with position info.

    Beyond syntax, checks that every init binding's actual-parameter list
    matches the arity of its type's formals and that every declared
    server instance is initialized exactly once.
    """
    unit = _Parser(text).unit()
    _check_bindings(unit)
    return unit


def _flat_formals(t: ServerTypeDecl) -> list[tuple[str, Optional[int]]]:
    slots: list[tuple[str, Optional[int]]] = []
    for decl in (*t.formal_agents, *t.formal_servers):
        if decl.size is None:
            slots.append((decl.name, None))
        else:
            slots.extend((decl.name, i) for i in range(1, decl.size + 1))
    return slots


def _instances(decl_name: str, size: Optional[int]) -> list[str]:
    if size is None:
        return [decl_name]
    return [f"{decl_name}[{i}]" for i in range(1, size + 1)]


def _repeater_envs(reps: tuple[Repeater, ...]) -> Iterator[dict[str, int]]:
    if not reps:
        yield {}
        return
    ranges = [range(r.low, r.high + 1) for r in reps]
    for combo in itertools.product(*ranges):
        yield dict(zip((r.var for r in reps), combo))


def _check_bindings(unit: DedanUnit) -> None:
    declared: list[str] = []
    for d in unit.server_decls:
        declared.extend(_instances(d.name, d.size))
    bound: list[str] = []
    for entry in unit.init_entries:
        if not isinstance(entry, InitBinding):
            continue
        target_decl = next((d for d in unit.server_decls if d.name == entry.target.name), None)
        if target_decl is None:
            raise ExpandError(f"init binds undeclared server {entry.target.name!r}")
        t = unit.type_named(target_decl.type_of)
        arity = len(_flat_formals(t))
        if len(entry.actuals) != arity:
            raise ExpandError(
                f"init binding for {entry.target}: {len(entry.actuals)} actuals,"
                f" but type {t.name!r} declares {arity} formal parameters"
            )
        for env in _repeater_envs(entry.repeaters):
            idx = entry.target.index
            if isinstance(idx, str):
                if idx not in env:
                    raise ExpandError(f"init binding for {entry.target}: unbound index {idx!r}")
                idx = env[idx]
            bound.append(entry.target.name if idx is None else f"{entry.target.name}[{idx}]")
    for name in declared:
        if name not in bound:
            raise ExpandError(f"uninitialized server {name!r}")
    dupes = {n for n in bound if bound.count(n) > 1}
    if dupes:
        raise ExpandError(f"server initialized more than once: {', '.join(sorted(dupes))}")
    unknown = [n for n in bound if n not in declared]
    if unknown:
        raise ExpandError(f"init binds undeclared server {unknown[0]!r}")


# ---------------------------------------------------------------------------
# expansion

def expand(unit: DedanUnit) -> SystemModel:
    """Flatten a unit into a concrete model.

    Repeaters multiply out over the Cartesian product of their ranges;
    each instance's formal parameters are substituted by the actuals
    bound in the init block.
    """
    _check_bindings(unit)

    agent_names: list[str] = []
    for d in unit.agent_decls:
        agent_names.extend(_instances(d.name, d.size))
    server_names: list[str] = []
    server_type_of: dict[str, ServerTypeDecl] = {}
    for d in unit.server_decls:
        t = unit.type_named(d.type_of)
        for inst in _instances(d.name, d.size):
            server_names.append(inst)
            server_type_of[inst] = t
    known = set(agent_names) | set(server_names)

    def resolve_instance(ref: Ref, env: dict[str, int]) -> str:
        idx = ref.index
        if isinstance(idx, str):
            if idx not in env:
                raise ExpandError(f"unbound index variable {idx!r} in {ref}")
            idx = env[idx]
        name = ref.name if idx is None else f"{ref.name}[{idx}]"
        if name not in known:
            if any(n == ref.name or n.startswith(ref.name + "[") for n in known):
                raise ExpandError(f"index out of declared vector range: {name}")
            raise ExpandError(f"unknown instance {name!r}")
        return name

    bindings: dict[str, dict[tuple[str, Optional[int]], str]] = {}
    init_states: dict[str, str] = {}
    for entry in unit.init_entries:
        if not isinstance(entry, InitBinding):
            continue
        for env in _repeater_envs(entry.repeaters):
            inst = resolve_instance(entry.target, env)
            t = server_type_of[inst]
            slots = _flat_formals(t)
            actual_names = [resolve_instance(a, env) for a in entry.actuals]
            bindings[inst] = dict(zip(slots, actual_names))
            if entry.state not in t.states:
                raise ExpandError(
                    f"initial state {entry.state!r} of {inst} is not a state of type {t.name!r}"
                )
            init_states[inst] = entry.state

    def resolve_part(ref: Ref, inst: str, t: ServerTypeDecl, env: dict[str, int]) -> str:
        """A template name: the type itself, a formal parameter, or plain."""
        idx = ref.index
        if isinstance(idx, str):
            if idx not in env:
                raise ExpandError(
                    f"server type {t.name!r}: unbound repeater variable {idx!r} in template"
                )
            idx = env[idx]
        if ref.name == t.name:
            if idx is not None:
                raise ExpandError(f"server type {t.name!r}: self reference must not be indexed")
            return inst
        binding = bindings[inst]
        if (ref.name, idx) in binding:
            return binding[(ref.name, idx)]
        if any(slot[0] == ref.name for slot in binding):
            shown = ref.name if idx is None else f"{ref.name}[{idx}]"
            raise ExpandError(
                f"server type {t.name!r}: index out of declared vector range: {shown}"
            )
        raise ExpandError(f"server type {t.name!r}: unbound identifier {ref.name!r} in template")

    def plain(ref: Ref, env: dict[str, int], what: str) -> str:
        if ref.index is None:
            return ref.name
        idx = ref.index
        if isinstance(idx, str):
            if idx not in env:
                raise ExpandError(f"unbound index variable {idx!r} in {what}")
            idx = env[idx]
        return f"{ref.name}[{idx}]"

    actions: list[Action] = []
    for inst in server_names:
        t = server_type_of[inst]
        for template in t.actions:
            for env in _repeater_envs(template.repeaters):
                agent = resolve_part(template.in_msg.agent, inst, t, env)
                in_server = resolve_part(template.in_msg.server, inst, t, env)
                if in_server != inst:
                    raise ExpandError(
                        f"server type {t.name!r}: input message of {template} targets"
                        f" {in_server!r}, not the server itself"
                    )
                service = plain(template.in_msg.service, env, "service")
                if service not in t.services:
                    raise ExpandError(
                        f"server type {t.name!r}: undeclared service {service!r}"
                    )
                in_state_server = resolve_part(template.in_state.server, inst, t, env)
                out_state_server = resolve_part(template.out_state.server, inst, t, env)
                if in_state_server != inst or out_state_server != inst:
                    raise ExpandError(
                        f"server type {t.name!r}: state refs in {template} must name the server itself"
                    )
                in_value = plain(template.in_state.value, env, "state value")
                out_value = plain(template.out_state.value, env, "state value")
                for value in (in_value, out_value):
                    if value not in t.states:
                        raise ExpandError(
                            f"server type {t.name!r}: undeclared state {value!r}"
                        )
                out_msg = None
                if template.out_msg is not None:
                    out_agent = resolve_part(template.out_msg.agent, inst, t, env)
                    if out_agent != agent:
                        raise ExpandError(
                            f"server type {t.name!r}: output message of {template} switches agents"
                        )
                    out_server = resolve_part(template.out_msg.server, inst, t, env)
                    out_service = plain(template.out_msg.service, env, "service")
                    target_type = server_type_of[out_server]
                    if out_service not in target_type.services:
                        raise ExpandError(
                            f"message {out_agent}.{out_server}.{out_service}: service not"
                            f" declared by type {target_type.name!r}"
                        )
                    out_msg = Message(out_agent, out_server, out_service)
                actions.append(
                    Action(
                        in_message=Message(agent, inst, service),
                        in_state=State(inst, in_value),
                        out_state=State(inst, out_value),
                        out_message=out_msg,
                    )
                )

    pending: list[Message] = []
    for entry in unit.init_entries:
        if not isinstance(entry, InitMessage):
            continue
        for env in _repeater_envs(entry.repeaters):
            agent = resolve_instance(entry.message.agent, env)
            if agent not in agent_names:
                raise ExpandError(f"initial message from non-agent {agent!r}")
            server = resolve_instance(entry.message.server, env)
            service = plain(entry.message.service, env, "service")
            if service not in server_type_of[server].services:
                raise ExpandError(
                    f"initial message {agent}.{server}.{service}: service not declared"
                )
            pending.append(Message(agent, server, service))

    states_decl = frozenset(
        State(inst, value) for inst in server_names for value in server_type_of[inst].states
    )
    messages_decl = frozenset(
        Message(agent, inst, service)
        for agent in agent_names
        for inst in server_names
        for service in server_type_of[inst].services
    )
    initial = Configuration.make(states=init_states, pending=pending)
    return SystemModel(
        servers=tuple(server_names),
        agents=tuple(agent_names),
        states_decl=states_decl,
        messages_decl=messages_decl,
        actions=tuple(actions),
        initial=initial,
    )
