"""Syntax tree for the imperative modeling language (``.rybu`` sources).

A program is constant declarations, reactive server declarations (typed
state variables plus guarded service actions), server instances, and
threads (imperative sequences of service calls).  Location fields exist
for diagnostics only and never take part in equality, so a parse /
pretty-print round trip compares structurally equal.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

Loc = tuple[int, int]


# -- expressions ------------------------------------------------------------


@dataclass(frozen=True)
class IntLit:
    value: int
    loc: Optional[Loc] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class AtomLit:
    name: str
    loc: Optional[Loc] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class NameRef:
    """A state variable or constant; resolved during checking."""

    name: str
    loc: Optional[Loc] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class IndexRef:
    """Vector element access with a compile-time-constant index."""

    base: str
    index: "Expr"
    loc: Optional[Loc] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class UnaryMinus:
    operand: "Expr"
    loc: Optional[Loc] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class BinOp:
    op: str  # + - == != < > <= >=
    left: "Expr"
    right: "Expr"
    loc: Optional[Loc] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class VectorLit:
    items: tuple["Expr", ...]
    loc: Optional[Loc] = field(default=None, compare=False, repr=False)


Expr = Union[IntLit, AtomLit, NameRef, IndexRef, UnaryMinus, BinOp, VectorLit]


# -- variable types ----------------------------------------------------------


@dataclass(frozen=True)
class IntRangeType:
    low: Expr
    high: Expr


@dataclass(frozen=True)
class EnumType:
    atoms: tuple[str, ...]


@dataclass(frozen=True)
class VectorType:
    elem: "VarType"
    length: Expr


VarType = Union[IntRangeType, EnumType, VectorType]


# -- declarations and statements ----------------------------------------------


@dataclass(frozen=True)
class ConstDecl:
    name: str
    value: Expr
    loc: Optional[Loc] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class VarDecl:
    name: str
    var_type: VarType
    loc: Optional[Loc] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class RybuAction:
    """(service, optional predicate, state updates, returned atom)."""

    service: str
    predicate: Optional[Expr]
    updates: tuple[tuple[str, Expr], ...]
    returns: str
    loc: Optional[Loc] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class ServerDecl:
    name: str
    vars: tuple[VarDecl, ...]
    actions: tuple[RybuAction, ...]
    loc: Optional[Loc] = field(default=None, compare=False, repr=False)

    def var_named(self, name: str) -> Optional[VarDecl]:
        for v in self.vars:
            if v.name == name:
                return v
        return None

    def service_names(self) -> list[str]:
        seen: list[str] = []
        for a in self.actions:
            if a.service not in seen:
                seen.append(a.service)
        return seen

    def returns_of(self, service: str) -> set[str]:
        return {a.returns for a in self.actions if a.service == service}


@dataclass(frozen=True)
class InstanceDecl:
    name: str
    server_type: str
    inits: tuple[tuple[str, Expr], ...]
    loc: Optional[Loc] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class CallStmt:
    instance: str
    service: str
    loc: Optional[Loc] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class MatchArm:
    atom: str
    body: tuple["Stmt", ...]


@dataclass(frozen=True)
class MatchStmt:
    instance: str
    service: str
    arms: tuple[MatchArm, ...]
    loc: Optional[Loc] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class LoopStmt:
    body: tuple["Stmt", ...]
    loc: Optional[Loc] = field(default=None, compare=False, repr=False)


Stmt = Union[CallStmt, MatchStmt, LoopStmt]


@dataclass(frozen=True)
class ThreadDecl:
    name: str
    body: tuple[Stmt, ...]
    loc: Optional[Loc] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class RybuProgram:
    consts: tuple[ConstDecl, ...]
    servers: tuple[ServerDecl, ...]
    instances: tuple[InstanceDecl, ...]
    threads: tuple[ThreadDecl, ...]

    def server_named(self, name: str) -> Optional[ServerDecl]:
        for s in self.servers:
            if s.name == name:
                return s
        return None

    def instance_named(self, name: str) -> Optional[InstanceDecl]:
        for i in self.instances:
            if i.name == name:
                return i
        return None


# -- pretty printing -----------------------------------------------------------

_CMP = {"==", "!=", "<", ">", "<=", ">="}


def print_expr(e: Expr) -> str:
    if isinstance(e, IntLit):
        return str(e.value)
    if isinstance(e, AtomLit):
        return f":{e.name}"
    if isinstance(e, NameRef):
        return e.name
    if isinstance(e, IndexRef):
        return f"{e.base}[{print_expr(e.index)}]"
    if isinstance(e, UnaryMinus):
        inner = print_expr(e.operand)
        if isinstance(e.operand, (BinOp, UnaryMinus)):
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(e, VectorLit):
        return "[" + ", ".join(print_expr(x) for x in e.items) + "]"
    if isinstance(e, BinOp):
        left, right = print_expr(e.left), print_expr(e.right)
        if isinstance(e.left, BinOp) and e.left.op in _CMP:
            left = f"({left})"
        if isinstance(e.right, BinOp):
            right = f"({right})"
        return f"{left} {e.op} {right}"
    raise TypeError(f"not an expression: {e!r}")


def print_type(t: VarType) -> str:
    if isinstance(t, IntRangeType):
        return f"{print_expr(t.low)}..{print_expr(t.high)}"
    if isinstance(t, EnumType):
        return "{" + ", ".join(t.atoms) + "}"
    if isinstance(t, VectorType):
        elem = print_type(t.elem)
        if isinstance(t.elem, IntRangeType):
            elem = f"({elem})"
        return f"{elem}[{print_expr(t.length)}]"
    raise TypeError(f"not a type: {t!r}")


def _print_stmt(s: Stmt, indent: int, out: list[str]) -> None:
    pad = "  " * indent
    if isinstance(s, CallStmt):
        out.append(f"{pad}{s.instance}.{s.service}();")
    elif isinstance(s, LoopStmt):
        out.append(f"{pad}loop {{")
        for inner in s.body:
            _print_stmt(inner, indent + 1, out)
        out.append(f"{pad}}}")
    elif isinstance(s, MatchStmt):
        out.append(f"{pad}match {s.instance}.{s.service}() {{")
        for arm in s.arms:
            out.append(f"{pad}  :{arm.atom} => {{")
            for inner in arm.body:
                _print_stmt(inner, indent + 2, out)
            out.append(f"{pad}  }}")
        out.append(f"{pad}}}")
    else:
        raise TypeError(f"not a statement: {s!r}")


def print_program(p: RybuProgram) -> str:
    """Canonical source text; parsing it back yields an equal program."""
    out: list[str] = []
    for c in p.consts:
        out.append(f"const {c.name} = {print_expr(c.value)};")
    if p.consts:
        out.append("")
    for srv in p.servers:
        out.append(f"server {srv.name} {{")
        for v in srv.vars:
            out.append(f"  var {v.name}: {print_type(v.var_type)};")
        if srv.vars and srv.actions:
            out.append("")
        for a in srv.actions:
            head = a.service if a.predicate is None else f"{a.service} | {print_expr(a.predicate)}"
            parts = [f"{name} = {print_expr(value)};" for name, value in a.updates]
            parts.append(f"return :{a.returns};")
            out.append(f"  {{ {head} }} -> {{ {' '.join(parts)} }}")
        out.append("}")
        out.append("")
    for inst in p.instances:
        inits = ", ".join(f"{name} = {print_expr(value)}" for name, value in inst.inits)
        out.append(f"var {inst.name} = {inst.server_type}() {{ {inits} }};")
    if p.instances:
        out.append("")
    for t in p.threads:
        out.append(f"thread {t.name}() {{")
        for s in t.body:
            _print_stmt(s, 1, out)
        out.append("}")
        out.append("")
    while out and out[-1] == "":
        out.pop()
    return "\n".join(out) + "\n"
