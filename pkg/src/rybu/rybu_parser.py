"""Lexer and recursive-descent parser for ``.rybu`` sources."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

from .rybu_ast import (
    AtomLit,
    BinOp,
    CallStmt,
    ConstDecl,
    EnumType,
    Expr,
    IndexRef,
    InstanceDecl,
    IntLit,
    IntRangeType,
    LoopStmt,
    MatchArm,
    MatchStmt,
    NameRef,
    RybuAction,
    RybuProgram,
    ServerDecl,
    Stmt,
    ThreadDecl,
    UnaryMinus,
    VarDecl,
    VarType,
    VectorLit,
    VectorType,
)

KEYWORDS = {"server", "var", "thread", "loop", "match", "return", "const"}

_PUNCT = {
    "==": "EQEQ",
    "!=": "NEQ",
    "<=": "LE",
    ">=": "GE",
    "=>": "FATARROW",
    "->": "ARROW",
    "..": "DOTDOT",
    "{": "LBRACE",
    "}": "RBRACE",
    "(": "LPAREN",
    ")": "RPAREN",
    "[": "LBRACK",
    "]": "RBRACK",
    ",": "COMMA",
    ";": "SEMI",
    ".": "DOT",
    ":": "COLON",
    "=": "EQ",
    "<": "LT",
    ">": "GT",
    "+": "PLUS",
    "-": "MINUS",
    "|": "PIPE",
    "*": "STAR",
    "/": "SLASH",
}


class RybuSyntaxError(Exception):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col


@dataclass(frozen=True)
class Token:
    kind: str  # IDENT, INT, ATOM, KW, punctuation kinds, EOF
    text: str
    line: int = 0
    col: int = 0

    @property
    def key(self) -> tuple[str, str]:
        """Position-free identity, used for stream round-trip checks."""
        return (self.kind, self.text)


def tokenize(text: str) -> list[Token]:
    """Scan source text into tokens; atoms are ``:`` glued to a name."""
    toks: list[Token] = []
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
        if c == "#":  # line comment
            while i < n and text[i] != "\n":
                i += 1
            continue
        if c.isalpha():  # identifiers start with a letter
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            toks.append(Token("KW" if word in KEYWORDS else "IDENT", word, line, col))
            col += j - i
            i = j
            continue
        if c.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            toks.append(Token("INT", text[i:j], line, col))
            col += j - i
            i = j
            continue
        if c == ":" and i + 1 < n and text[i + 1].isalpha():
            j = i + 1
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            toks.append(Token("ATOM", text[i + 1 : j], line, col))
            col += j - i
            i = j
            continue
        two = text[i : i + 2]
        if two in _PUNCT:
            toks.append(Token(_PUNCT[two], two, line, col))
            col += 2
            i += 2
            continue
        if c in _PUNCT:
            toks.append(Token(_PUNCT[c], c, line, col))
            col += 1
            i += 1
            continue
        raise RybuSyntaxError(f"illegal character {c!r}", line, col)
    toks.append(Token("EOF", "", line, col))
    return toks


def detokenize(tokens: list[Token]) -> str:
    """Render a token stream back to text that re-lexes to the same stream."""
    parts = []
    for tok in tokens:
        if tok.kind == "EOF":
            break
        parts.append(f":{tok.text}" if tok.kind == "ATOM" else tok.text)
    return " ".join(parts)


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.toks = list(tokens)
        self.pos = 0

    def peek(self, ahead: int = 0) -> Token:
        i = min(self.pos + ahead, len(self.toks) - 1)
        return self.toks[i]

    def next(self) -> Token:
        tok = self.toks[self.pos]
        if tok.kind != "EOF":
            self.pos += 1
        return tok

    def error(self, expected: str) -> RybuSyntaxError:
        tok = self.peek()
        found = tok.text if tok.kind != "EOF" else "end of input"
        return RybuSyntaxError(f"expected {expected}, found {found!r}", tok.line, tok.col)

    def expect(self, kind: str, what: str) -> Token:
        if self.peek().kind != kind:
            raise self.error(what)
        return self.next()

    def at_kw(self, word: str) -> bool:
        tok = self.peek()
        return tok.kind == "KW" and tok.text == word

    def expect_kw(self, word: str) -> Token:
        if not self.at_kw(word):
            raise self.error(f"keyword '{word}'")
        return self.next()

    def expect_colon(self) -> None:
        """Accept ``:`` even when the lexer glued it to a following name.

        ``var x: up..down`` style type annotations place an identifier
        right after the colon; the lexer then produced one ATOM token,
        which is split back here into COLON + IDENT.
        """
        tok = self.peek()
        if tok.kind == "COLON":
            self.next()
            return
        if tok.kind == "ATOM":
            self.toks[self.pos] = Token("IDENT", tok.text, tok.line, tok.col + 1)
            return
        raise self.error("':'")

    # -- program structure -------------------------------------------------

    def program(self) -> RybuProgram:
        consts: list[ConstDecl] = []
        servers: list[ServerDecl] = []
        instances: list[InstanceDecl] = []
        threads: list[ThreadDecl] = []
        while self.peek().kind != "EOF":
            if self.at_kw("const"):
                consts.append(self.const_decl())
            elif self.at_kw("server"):
                servers.append(self.server_decl())
            elif self.at_kw("var"):
                instances.append(self.instance_decl())
            elif self.at_kw("thread"):
                threads.append(self.thread_decl())
            else:
                raise self.error("'const', 'server', 'var' or 'thread'")
        return RybuProgram(tuple(consts), tuple(servers), tuple(instances), tuple(threads))

    def const_decl(self) -> ConstDecl:
        tok = self.expect_kw("const")
        name = self.expect("IDENT", "constant name").text
        self.expect("EQ", "'='")
        value = self.expr()
        self.expect("SEMI", "';'")
        return ConstDecl(name, value, loc=(tok.line, tok.col))

    def server_decl(self) -> ServerDecl:
        tok = self.expect_kw("server")
        name = self.expect("IDENT", "server name").text
        self.expect("LBRACE", "'{'")
        vars_: list[VarDecl] = []
        actions: list[RybuAction] = []
        while self.peek().kind != "RBRACE":
            if self.at_kw("var"):
                vars_.append(self.var_decl())
            elif self.peek().kind == "LBRACE":
                actions.append(self.action_decl())
            else:
                raise self.error("'var' or an action '{ service | predicate } -> { ... }'")
        self.expect("RBRACE", "'}'")
        return ServerDecl(name, tuple(vars_), tuple(actions), loc=(tok.line, tok.col))

    def var_decl(self) -> VarDecl:
        tok = self.expect_kw("var")
        name = self.expect("IDENT", "variable name").text
        self.expect_colon()
        var_type = self.type_()
        self.expect("SEMI", "';'")
        return VarDecl(name, var_type, loc=(tok.line, tok.col))

    def type_(self) -> VarType:
        t = self.type_atom()
        while self.peek().kind == "LBRACK":
            self.next()
            length = self.expr()
            self.expect("RBRACK", "']'")
            t = VectorType(t, length)
        return t

    def type_atom(self) -> VarType:
        tok = self.peek()
        if tok.kind == "LBRACE":
            self.next()
            atoms = [self.expect("IDENT", "enum value name").text]
            while self.peek().kind == "COMMA":
                self.next()
                atoms.append(self.expect("IDENT", "enum value name").text)
            self.expect("RBRACE", "'}'")
            return EnumType(tuple(atoms))
        if tok.kind == "LPAREN":
            self.next()
            inner = self.type_()
            self.expect("RPAREN", "')'")
            return inner
        low = self.additive()
        self.expect("DOTDOT", "'..'")
        high = self.additive()
        return IntRangeType(low, high)

    def action_decl(self) -> RybuAction:
        tok = self.expect("LBRACE", "'{'")
        service = self.expect("IDENT", "service name").text
        predicate: Optional[Expr] = None
        if self.peek().kind == "PIPE":
            self.next()
            predicate = self.expr()
        self.expect("RBRACE", "'}'")
        self.expect("ARROW", "'->'")
        self.expect("LBRACE", "'{'")
        updates: list[tuple[str, Expr]] = []
        returns: Optional[str] = None
        while self.peek().kind != "RBRACE":
            if self.at_kw("return"):
                self.next()
                atom = self.expect("ATOM", "return atom like ':ok'").text
                if returns is not None:
                    raise self.error("a single 'return' per action")
                returns = atom
                if self.peek().kind in ("SEMI", "COMMA"):
                    self.next()
            else:
                if returns is not None:
                    raise self.error("'}' ('return' must come last)")
                name = self.expect("IDENT", "variable name").text
                self.expect("EQ", "'='")
                value = self.expr()
                if self.peek().kind in ("SEMI", "COMMA"):
                    self.next()
                updates.append((name, value))
        self.expect("RBRACE", "'}'")
        if returns is None:
            raise self.error("'return :atom;' in the action body")
        return RybuAction(service, predicate, tuple(updates), returns, loc=(tok.line, tok.col))

    def instance_decl(self) -> InstanceDecl:
        tok = self.expect_kw("var")
        name = self.expect("IDENT", "instance name").text
        self.expect("EQ", "'='")
        server_type = self.expect("IDENT", "server type name").text
        self.expect("LPAREN", "'('")
        self.expect("RPAREN", "')' (instances take no arguments)")
        self.expect("LBRACE", "'{'")
        inits: list[tuple[str, Expr]] = []
        while self.peek().kind != "RBRACE":
            field_name = self.expect("IDENT", "state variable name").text
            self.expect("EQ", "'='")
            value = self.expr()
            inits.append((field_name, value))
            if self.peek().kind in ("SEMI", "COMMA"):
                self.next()
        self.expect("RBRACE", "'}'")
        self.expect("SEMI", "';'")
        return InstanceDecl(name, server_type, tuple(inits), loc=(tok.line, tok.col))

    def thread_decl(self) -> ThreadDecl:
        tok = self.expect_kw("thread")
        name = self.expect("IDENT", "thread name").text
        self.expect("LPAREN", "'('")
        if self.peek().kind != "RPAREN":
            raise self.error("')' (thread parameters are not supported)")
        self.next()
        self.expect("LBRACE", "'{'")
        body = self.stmt_list()
        self.expect("RBRACE", "'}'")
        return ThreadDecl(name, tuple(body), loc=(tok.line, tok.col))

    def stmt_list(self) -> list[Stmt]:
        out: list[Stmt] = []
        while self.peek().kind not in ("RBRACE", "EOF"):
            out.append(self.stmt())
        return out

    def stmt(self) -> Stmt:
        if self.at_kw("loop"):
            tok = self.next()
            self.expect("LBRACE", "'{'")
            body = self.stmt_list()
            self.expect("RBRACE", "'}'")
            if not body:
                raise RybuSyntaxError("empty loop body", tok.line, tok.col)
            return LoopStmt(tuple(body), loc=(tok.line, tok.col))
        if self.at_kw("match"):
            tok = self.next()
            instance = self.expect("IDENT", "instance name").text
            self.expect("DOT", "'.'")
            service = self.expect("IDENT", "service name").text
            self.expect("LPAREN", "'('")
            self.expect("RPAREN", "')'")
            self.expect("LBRACE", "'{'")
            arms: list[MatchArm] = []
            while self.peek().kind != "RBRACE":
                arms.append(self.match_arm())
            self.expect("RBRACE", "'}'")
            if not arms:
                raise RybuSyntaxError("match needs at least one arm", tok.line, tok.col)
            return MatchStmt(instance, service, tuple(arms), loc=(tok.line, tok.col))
        tok = self.expect("IDENT", "a statement (call, 'loop' or 'match')")
        self.expect("DOT", "'.'")
        service = self.expect("IDENT", "service name").text
        self.expect("LPAREN", "'('")
        self.expect("RPAREN", "')'")
        self.expect("SEMI", "';'")
        return CallStmt(tok.text, service, loc=(tok.line, tok.col))

    def match_arm(self) -> MatchArm:
        atom = self.expect("ATOM", "an arm label like ':ok'").text
        self.expect("FATARROW", "'=>'")
        if self.peek().kind == "LBRACE":
            self.next()
            body = self.stmt_list()
            self.expect("RBRACE", "'}'")
            return MatchArm(atom, tuple(body))
        return MatchArm(atom, (self.stmt(),))

    # -- expressions --------------------------------------------------------

    def expr(self) -> Expr:
        left = self.additive()
        tok = self.peek()
        if tok.kind in ("EQEQ", "NEQ", "LT", "GT", "LE", "GE"):
            self.next()
            right = self.additive()
            return BinOp(tok.text, left, right, loc=(tok.line, tok.col))
        return left

    def additive(self) -> Expr:
        left = self.primary()
        while self.peek().kind in ("PLUS", "MINUS", "STAR", "SLASH"):
            tok = self.next()
            if tok.kind in ("STAR", "SLASH"):
                raise RybuSyntaxError(
                    f"operator {tok.text!r} is not supported; only '+' and '-' are available",
                    tok.line,
                    tok.col,
                )
            right = self.primary()
            left = BinOp(tok.text, left, right, loc=(tok.line, tok.col))
        return left

    def primary(self) -> Expr:
        tok = self.peek()
        if tok.kind == "INT":
            self.next()
            return IntLit(int(tok.text), loc=(tok.line, tok.col))
        if tok.kind == "ATOM":
            self.next()
            return AtomLit(tok.text, loc=(tok.line, tok.col))
        if tok.kind == "MINUS":
            self.next()
            return UnaryMinus(self.primary(), loc=(tok.line, tok.col))
        if tok.kind == "IDENT":
            self.next()
            if self.peek().kind == "LBRACK":
                self.next()
                index = self.expr()
                self.expect("RBRACK", "']'")
                return IndexRef(tok.text, index, loc=(tok.line, tok.col))
            return NameRef(tok.text, loc=(tok.line, tok.col))
        if tok.kind == "LBRACK":
            self.next()
            items: list[Expr] = []
            while self.peek().kind != "RBRACK":
                items.append(self.expr())
                if self.peek().kind == "COMMA":
                    self.next()
            self.expect("RBRACK", "']'")
            return VectorLit(tuple(items), loc=(tok.line, tok.col))
        if tok.kind == "LPAREN":
            self.next()
            inner = self.expr()
            self.expect("RPAREN", "')'")
            return inner
        raise self.error("an expression")


def parse_program(tokens: Union[str, list[Token]]) -> RybuProgram:
    """Parse tokens (or raw text, for convenience) into a program."""
    if isinstance(tokens, str):
        tokens = tokenize(tokens)
    return _Parser(tokens).program()
