"""Boolean keyword-verification expressions: parser, evaluator, printer.

The language replaces judge-generated code as the MTDP response checker, so
verification stays sandboxed and deterministic. Grammar (EBNF):

    expr    = contains | count | negate | conj | disj ;
    contains = "contains" "(" STRING ")" ;
    count    = "count_at_least" "(" STRING "," INT ")" ;
    negate   = "not" "(" expr ")" ;
    conj     = "all" "(" expr "," expr { "," expr } ")" ;
    disj     = "any" "(" expr "," expr { "," expr } ")" ;
    STRING   = '"' { char | '\\"' | "\\\\" } '"' ;   (* non-empty *)
    INT      = digit { digit } ;                      (* >= 1 *)

Whitespace between tokens is ignored. Expressions are capped at depth
MAX_DEPTH and MAX_NODES nodes total so adversarial judge output stays cheap
to evaluate.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass

MAX_DEPTH = 32
MAX_NODES = 1024

_KEYWORDS = ("contains", "count_at_least", "not", "all", "any")


class Expr:
    """Base class for verification-expression AST nodes."""

    __slots__ = ()


@dataclass(frozen=True)
class Contains(Expr):
    literal: str


@dataclass(frozen=True)
class CountAtLeast(Expr):
    literal: str
    n: int


@dataclass(frozen=True)
class Not(Expr):
    child: Expr


@dataclass(frozen=True)
class And(Expr):
    children: tuple[Expr, ...]


@dataclass(frozen=True)
class Or(Expr):
    children: tuple[Expr, ...]


@dataclass(frozen=True)
class ParseDiagnostic:
    """Positioned parse failure: what was expected and what was found.

    ``offset`` is a UTF-8 byte offset into the input (end-of-input errors
    point one past the last byte).
    """

    offset: int
    expected: str
    found: str

    def __str__(self) -> str:
        return f"at byte {self.offset}: expected {self.expected}, found {self.found}"


class ParseError(ValueError):
    def __init__(self, diagnostic: ParseDiagnostic):
        super().__init__(str(diagnostic))
        self.diagnostic = diagnostic


class InvalidExpressionError(ValueError):
    """An AST violates the structural invariants (caps, arity, literals)."""


def _nfc(text: str) -> str:
    return unicodedata.normalize("NFC", text)


class _Parser:
    def __init__(self, text: str, max_depth: int, max_nodes: int):
        self.text = text
        self.pos = 0  # codepoint index
        self.nodes = 0
        self.max_depth = max_depth
        self.max_nodes = max_nodes

    def _fail(self, expected: str, found: str | None = None) -> ParseError:
        byte_offset = len(self.text[: self.pos].encode("utf-8"))
        if found is None:
            if self.pos >= len(self.text):
                found = "end of input"
            else:
                found = repr(self.text[self.pos])
        return ParseError(ParseDiagnostic(byte_offset, expected, found))

    def _skip_ws(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def _eat(self, token: str) -> None:
        self._skip_ws()
        if not self.text.startswith(token, self.pos):
            raise self._fail(repr(token))
        self.pos += len(token)

    def _count_node(self) -> None:
        self.nodes += 1
        if self.nodes > self.max_nodes:
            raise self._fail(f"an expression with at most {self.max_nodes} nodes", "a larger expression")

    def parse(self) -> Expr:
        expr = self._expr(depth=1)
        self._skip_ws()
        if self.pos < len(self.text):
            raise self._fail("end of input")
        return expr

    def _expr(self, depth: int) -> Expr:
        if depth > self.max_depth:
            raise self._fail(f"nesting no deeper than {self.max_depth}", "a deeper expression")
        self._skip_ws()
        name = self._ident()
        self._count_node()
        if name == "contains":
            self._eat("(")
            literal = self._string()
            self._eat(")")
            return Contains(literal)
        if name == "count_at_least":
            self._eat("(")
            literal = self._string()
            self._eat(",")
            n = self._int()
            self._eat(")")
            return CountAtLeast(literal, n)
        if name == "not":
            self._eat("(")
            child = self._expr(depth + 1)
            self._eat(")")
            return Not(child)
        # all / any
        self._eat("(")
        children = [self._expr(depth + 1)]
        while True:
            self._skip_ws()
            if self.text.startswith(",", self.pos):
                self.pos += 1
                children.append(self._expr(depth + 1))
            elif self.text.startswith(")", self.pos):
                self.pos += 1
                break
            else:
                raise self._fail("',' or ')'")
        if len(children) < 2:
            raise self._fail("at least two arguments", f"{len(children)} argument")
        return And(tuple(children)) if name == "all" else Or(tuple(children))

    def _ident(self) -> str:
        start = self.pos
        while self.pos < len(self.text) and (self.text[self.pos].isascii() and (self.text[self.pos].isalpha() or self.text[self.pos] == "_")):
            self.pos += 1
        word = self.text[start : self.pos]
        if word not in _KEYWORDS:
            self.pos = start
            raise self._fail("one of " + ", ".join(_KEYWORDS))
        return word

    def _string(self) -> str:
        self._skip_ws()
        start = self.pos
        if not self.text.startswith('"', self.pos):
            raise self._fail("a double-quoted string")
        self.pos += 1
        out: list[str] = []
        while True:
            if self.pos >= len(self.text):
                raise self._fail("closing '\"'")
            ch = self.text[self.pos]
            if ch == '"':
                self.pos += 1
                break
            if ch == "\\":
                if self.pos + 1 >= len(self.text):
                    raise self._fail("an escaped character")
                nxt = self.text[self.pos + 1]
                if nxt not in ('"', "\\"):
                    self.pos += 1
                    raise self._fail("'\\\"' or '\\\\'")
                out.append(nxt)
                self.pos += 2
                continue
            out.append(ch)
            self.pos += 1
        if not out:
            self.pos = start
            raise self._fail("a non-empty string literal", '""')
        return "".join(out)

    def _int(self) -> int:
        self._skip_ws()
        start = self.pos
        while self.pos < len(self.text) and self.text[self.pos].isdigit() and self.text[self.pos].isascii():
            self.pos += 1
        digits = self.text[start : self.pos]
        if not digits:
            raise self._fail("a positive integer")
        value = int(digits)
        if value < 1:
            self.pos = start
            raise self._fail("an integer >= 1", digits)
        return value


def parse(text: str, *, max_depth: int = MAX_DEPTH, max_nodes: int = MAX_NODES) -> Expr:
    """Parse a verification expression; raises ParseError with a positioned
    diagnostic on malformed input or cap violations."""
    return _Parser(text, max_depth, max_nodes).parse()


def validate(expr: Expr, *, max_depth: int = MAX_DEPTH, max_nodes: int = MAX_NODES) -> None:
    """Check the structural invariants of a (possibly hand-built) AST."""
    nodes = 0

    def walk(node: Expr, depth: int) -> None:
        nonlocal nodes
        nodes += 1
        if nodes > max_nodes:
            raise InvalidExpressionError(f"expression exceeds {max_nodes} nodes")
        if depth > max_depth:
            raise InvalidExpressionError(f"expression exceeds depth {max_depth}")
        if isinstance(node, Contains):
            if not node.literal:
                raise InvalidExpressionError("contains() literal must be non-empty")
        elif isinstance(node, CountAtLeast):
            if not node.literal:
                raise InvalidExpressionError("count_at_least() literal must be non-empty")
            if node.n < 1:
                raise InvalidExpressionError("count_at_least() requires n >= 1")
        elif isinstance(node, Not):
            walk(node.child, depth + 1)
        elif isinstance(node, (And, Or)):
            if len(node.children) < 2:
                raise InvalidExpressionError("all()/any() need at least two children")
            for child in node.children:
                walk(child, depth + 1)
        else:
            raise InvalidExpressionError(f"unknown node type {type(node).__name__}")

    walk(expr, 1)


def evaluate(expr: Expr, response_text: str) -> bool:
    """Evaluate an expression against a response. Total: any valid expression
    and any text terminates; containment and counting are NFC-normalized,
    counting is non-overlapping."""
    validate(expr)
    text = _nfc(response_text)

    def run(node: Expr) -> bool:
        if isinstance(node, Contains):
            return _nfc(node.literal) in text
        if isinstance(node, CountAtLeast):
            return text.count(_nfc(node.literal)) >= node.n
        if isinstance(node, Not):
            return not run(node.child)
        if isinstance(node, And):
            return all(run(child) for child in node.children)
        return any(run(child) for child in node.children)

    return run(expr)


def _quote(literal: str) -> str:
    return '"' + literal.replace("\\", "\\\\").replace('"', '\\"') + '"'


def render(expr: Expr) -> str:
    """Canonical text form; parse(render(e)) is structurally equal to e."""
    if isinstance(expr, Contains):
        return f"contains({_quote(expr.literal)})"
    if isinstance(expr, CountAtLeast):
        return f"count_at_least({_quote(expr.literal)}, {expr.n})"
    if isinstance(expr, Not):
        return f"not({render(expr.child)})"
    if isinstance(expr, And):
        return "all(" + ", ".join(render(child) for child in expr.children) + ")"
    if isinstance(expr, Or):
        return "any(" + ", ".join(render(child) for child in expr.children) + ")"
    raise InvalidExpressionError(f"unknown node type {type(expr).__name__}")


def literals(expr: Expr) -> list[str]:
    """All string literals in the expression, left to right."""
    out: list[str] = []

    def walk(node: Expr) -> None:
        if isinstance(node, (Contains, CountAtLeast)):
            out.append(node.literal)
        elif isinstance(node, Not):
            walk(node.child)
        elif isinstance(node, (And, Or)):
            for child in node.children:
                walk(child)

    walk(expr)
    return out
