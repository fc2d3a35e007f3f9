"""Static checks for parsed programs.

Checking is structural: it resolves names, types every expression and
validates initializers, but deliberately does not prove that integer
updates stay in range (that depends on which states are reachable and
is enforced during lowering).  Diagnostics are data; callers decide
whether warnings are fatal.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

from .lower import EvalError, _type_contains, eval_const
from .rybu_ast import (
    AtomLit,
    BinOp,
    CallStmt,
    EnumType,
    Expr,
    IndexRef,
    IntLit,
    IntRangeType,
    Loc,
    LoopStmt,
    MatchStmt,
    NameRef,
    RybuProgram,
    ServerDecl,
    Stmt,
    UnaryMinus,
    VarType,
    VectorLit,
    VectorType,
)


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning"
    message: str
    loc: Optional[Loc] = None

    def __str__(self) -> str:
        where = f"{self.loc[0]}:{self.loc[1]}: " if self.loc else ""
        return f"{where}{self.severity}: {self.message}"


def errors_of(diags: Sequence[Diagnostic]) -> list[Diagnostic]:
    return [d for d in diags if d.severity == "error"]


# Type tags used during checking:
#   "int" | "bool" | ("atom", name) | ("enum", atoms) | ("vec", elem, length) | None
Tag = Union[str, tuple, None]


def _tag_of_type(t: VarType, consts: dict[str, int]) -> Tag:
    if isinstance(t, IntRangeType):
        return "int"
    if isinstance(t, EnumType):
        return ("enum", frozenset(t.atoms))
    if isinstance(t, VectorType):
        try:
            length = eval_const(t.length, consts)
        except EvalError:
            length = None
        return ("vec", _tag_of_type(t.elem, consts), length)
    return None


def _atoms_of(tag: Tag) -> Optional[frozenset]:
    if isinstance(tag, tuple) and tag[0] == "atom":
        return frozenset([tag[1]])
    if isinstance(tag, tuple) and tag[0] == "enum":
        return tag[1]
    return None


class _Checker:
    def __init__(self, program: RybuProgram):
        self.program = program
        self.diags: list[Diagnostic] = []
        self.consts: dict[str, int] = {}

    def error(self, message: str, loc: Optional[Loc] = None) -> None:
        self.diags.append(Diagnostic("error", message, loc))

    def warn(self, message: str, loc: Optional[Loc] = None) -> None:
        self.diags.append(Diagnostic("warning", message, loc))

    # -- constants -----------------------------------------------------

    def check_consts(self) -> None:
        for c in self.program.consts:
            if c.name in self.consts:
                self.error(f"duplicate const {c.name!r}", c.loc)
                continue
            try:
                value = eval_const(c.value, self.consts)
            except EvalError as e:
                self.error(f"const {c.name!r}: {e}", c.loc)
                continue
            if isinstance(value, bool) or not isinstance(value, int):
                self.error(f"const {c.name!r} must be an integer", c.loc)
                continue
            self.consts[c.name] = value

    # -- expressions ----------------------------------------------------

    def type_of(self, e: Expr, server: Optional[ServerDecl], loc_hint: Optional[Loc]) -> Tag:
        loc = getattr(e, "loc", None) or loc_hint
        if isinstance(e, IntLit):
            return "int"
        if isinstance(e, AtomLit):
            return ("atom", e.name)
        if isinstance(e, NameRef):
            if server is not None:
                decl = server.var_named(e.name)
                if decl is not None:
                    return _tag_of_type(decl.var_type, self.consts)
            if e.name in self.consts:
                return "int"
            self.error(f"unbound name {e.name!r}", loc)
            return None
        if isinstance(e, IndexRef):
            base_tag: Tag = None
            if server is not None and server.var_named(e.base) is not None:
                base_tag = _tag_of_type(server.var_named(e.base).var_type, self.consts)
            if not (isinstance(base_tag, tuple) and base_tag[0] == "vec"):
                self.error(f"{e.base!r} is not a vector variable", loc)
                return None
            try:
                idx = eval_const(e.index, self.consts)
            except EvalError:
                self.error("vector index must be a compile-time constant", loc)
                return base_tag[1]
            length = base_tag[2]
            if not isinstance(idx, int) or (length is not None and not 0 <= idx < length):
                self.error(f"vector index {idx!r} out of bounds (0..{length - 1 if length else '?'})", loc)
            return base_tag[1]
        if isinstance(e, UnaryMinus):
            tag = self.type_of(e.operand, server, loc)
            if tag not in (None, "int"):
                self.error("unary '-' needs an integer operand", loc)
            return "int"
        if isinstance(e, VectorLit):
            return ("vec-lit", tuple(self.type_of(item, server, loc) for item in e.items))
        if isinstance(e, BinOp):
            lt = self.type_of(e.left, server, loc)
            rt = self.type_of(e.right, server, loc)
            if e.op in ("+", "-"):
                for side, tag in (("left", lt), ("right", rt)):
                    if tag not in (None, "int"):
                        self.error(f"{e.op!r} needs integer operands ({side} side is not)", loc)
                return "int"
            if e.op in ("<", ">", "<=", ">="):
                for side, tag in (("left", lt), ("right", rt)):
                    if tag not in (None, "int"):
                        self.error(f"{e.op!r} compares integers ({side} side is not)", loc)
                return "bool"
            # == and != work on two integers or two atom-valued operands
            l_atoms, r_atoms = _atoms_of(lt), _atoms_of(rt)
            if lt == "int" and rt == "int":
                return "bool"
            if l_atoms is not None and r_atoms is not None:
                if not l_atoms & r_atoms:
                    self.error(
                        f"{e.op!r} comparison can never hold: no common values"
                        f" between {sorted(l_atoms)} and {sorted(r_atoms)}",
                        loc,
                    )
                return "bool"
            if None not in (lt, rt):
                self.error(f"{e.op!r} needs two integers or two atom-typed operands", loc)
            return "bool"
        self.error(f"unsupported expression {e!r}", loc)
        return None

    # -- servers ---------------------------------------------------------

    def check_type_decl(self, t: VarType, where: str, loc: Optional[Loc]) -> None:
        if isinstance(t, IntRangeType):
            try:
                low = eval_const(t.low, self.consts)
                high = eval_const(t.high, self.consts)
            except EvalError as e:
                self.error(f"{where}: range bound: {e}", loc)
                return
            if not (isinstance(low, int) and isinstance(high, int)):
                self.error(f"{where}: range bounds must be integers", loc)
            elif low > high:
                self.error(f"{where}: empty range {low}..{high}", loc)
        elif isinstance(t, EnumType):
            if len(set(t.atoms)) != len(t.atoms):
                self.error(f"{where}: duplicate enum values", loc)
        elif isinstance(t, VectorType):
            try:
                length = eval_const(t.length, self.consts)
            except EvalError as e:
                self.error(f"{where}: vector length: {e}", loc)
                return
            if not isinstance(length, int) or length < 1:
                self.error(f"{where}: vector length must be at least 1", loc)
            self.check_type_decl(t.elem, where, loc)

    def check_update_target(self, server: ServerDecl, var: str, rhs: Expr, loc: Optional[Loc]) -> None:
        decl = server.var_named(var)
        if decl is None:
            self.error(f"server {server.name!r}: update target {var!r} is not a state variable", loc)
            return
        tag = self.type_of(rhs, server, loc)
        if tag is None:
            return
        expected = _tag_of_type(decl.var_type, self.consts)
        if expected == "int":
            if tag != "int":
                self.error(f"update of {var!r} must be an integer expression", loc)
        elif isinstance(expected, tuple) and expected[0] == "enum":
            rhs_atoms = _atoms_of(tag)
            if rhs_atoms is None:
                self.error(f"update of {var!r} must be an atom of {sorted(expected[1])}", loc)
            elif not rhs_atoms <= expected[1]:
                bad = ", ".join(":" + a for a in sorted(rhs_atoms - expected[1]))
                self.error(f"update of {var!r}: {bad} is not a possible value", loc)
        elif isinstance(expected, tuple) and expected[0] == "vec":
            ok = (
                isinstance(tag, tuple)
                and tag[0] in ("vec", "vec-lit")
                and (expected[2] is None or len(tag) < 2 or self._vec_len(tag) in (None, expected[2]))
            )
            if not ok:
                self.error(f"update of {var!r} must be a vector of length {expected[2]}", loc)

    @staticmethod
    def _vec_len(tag: tuple) -> Optional[int]:
        if tag[0] == "vec":
            return tag[2]
        if tag[0] == "vec-lit":
            return len(tag[1])
        return None

    def check_servers(self) -> None:
        seen = set()
        for server in self.program.servers:
            if server.name in seen:
                self.error(f"duplicate server {server.name!r}", server.loc)
            seen.add(server.name)
            var_names = set()
            for v in server.vars:
                if v.name in var_names:
                    self.error(f"server {server.name!r}: duplicate variable {v.name!r}", v.loc)
                var_names.add(v.name)
                self.check_type_decl(v.var_type, f"server {server.name!r}, var {v.name!r}", v.loc)
            for action in server.actions:
                if action.predicate is not None:
                    tag = self.type_of(action.predicate, server, action.loc)
                    if tag not in (None, "bool"):
                        self.error(
                            f"server {server.name!r}, service {action.service!r}:"
                            " predicate must be a comparison",
                            action.loc,
                        )
                targets = set()
                for var, rhs in action.updates:
                    if var in targets:
                        self.error(
                            f"server {server.name!r}, service {action.service!r}:"
                            f" {var!r} updated twice in one action",
                            action.loc,
                        )
                    targets.add(var)
                    self.check_update_target(server, var, rhs, action.loc)

    # -- instances ---------------------------------------------------------

    def check_instances(self) -> None:
        seen = set()
        for inst in self.program.instances:
            if inst.name in seen:
                self.error(f"duplicate instance {inst.name!r}", inst.loc)
            seen.add(inst.name)
            server = self.program.server_named(inst.server_type)
            if server is None:
                self.error(f"instance {inst.name!r}: unknown server type {inst.server_type!r}", inst.loc)
                continue
            given = set()
            for name, value_expr in inst.inits:
                if name in given:
                    self.error(f"instance {inst.name!r}: {name!r} initialized twice", inst.loc)
                given.add(name)
                decl = server.var_named(name)
                if decl is None:
                    self.error(
                        f"instance {inst.name!r}: {name!r} is not a variable of {server.name!r}",
                        inst.loc,
                    )
                    continue
                try:
                    value = eval_const(value_expr, self.consts)
                except EvalError:
                    self.error(
                        f"instance {inst.name!r}: initializer of {name!r} must be a"
                        " compile-time constant",
                        inst.loc,
                    )
                    continue
                if isinstance(value, bool) or not _type_contains(decl.var_type, value, self.consts):
                    self.error(
                        f"instance {inst.name!r}: initial value of {name!r} is outside"
                        " its declared type",
                        inst.loc,
                    )
            for v in server.vars:
                if v.name not in given:
                    self.error(f"instance {inst.name!r}: missing initializer for {v.name!r}", inst.loc)

    # -- threads ------------------------------------------------------------

    def check_threads(self) -> None:
        seen = set()
        for thread in self.program.threads:
            if thread.name in seen:
                self.error(f"duplicate thread {thread.name!r}", thread.loc)
            seen.add(thread.name)
            self.check_stmts(thread.name, thread.body)

    def check_stmts(self, thread: str, stmts: Sequence[Stmt]) -> None:
        for s in stmts:
            if isinstance(s, LoopStmt):
                self.check_stmts(thread, s.body)
                continue
            assert isinstance(s, (CallStmt, MatchStmt))
            inst = self.program.instance_named(s.instance)
            if inst is None:
                self.error(f"thread {thread!r}: unknown instance {s.instance!r}", s.loc)
                continue
            server = self.program.server_named(inst.server_type)
            if server is None:
                continue  # reported by check_instances
            returns = server.returns_of(s.service)
            if not returns:
                self.error(
                    f"thread {thread!r}: {s.instance}.{s.service} is not a service of"
                    f" {server.name!r}",
                    s.loc,
                )
                continue
            if isinstance(s, CallStmt):
                extra = returns - {"ok"}
                if extra:
                    names = ", ".join(":" + a for a in sorted(extra))
                    self.error(
                        f"thread {thread!r}: unhandled return value {names} of"
                        f" {s.instance}.{s.service}(); use 'match'",
                        s.loc,
                    )
            else:
                arm_atoms = [arm.atom for arm in s.arms]
                dupes = {a for a in arm_atoms if arm_atoms.count(a) > 1}
                if dupes:
                    self.error(
                        f"thread {thread!r}: duplicate match arm(s)"
                        f" {', '.join(':' + d for d in sorted(dupes))}",
                        s.loc,
                    )
                impossible = set(arm_atoms) - returns
                if impossible:
                    names = ", ".join(":" + a for a in sorted(impossible))
                    self.error(
                        f"thread {thread!r}: {s.instance}.{s.service} can never return {names}",
                        s.loc,
                    )
                for arm in s.arms:
                    self.check_stmts(thread, arm.body)


def typecheck(program: RybuProgram) -> list[Diagnostic]:
    """All diagnostics for a program; empty means well-typed."""
    if not (program.consts or program.servers or program.instances or program.threads):
        return [Diagnostic("error", "empty program")]
    checker = _Checker(program)
    checker.check_consts()
    checker.check_servers()
    checker.check_instances()
    checker.check_threads()
    return checker.diags
