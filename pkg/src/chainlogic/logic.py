"""Propositional expressions over rule-element variables.

Grammar (keywords case-insensitive, whitespace ignored):

    expr     = or_expr
    or_expr  = and_expr ("or" and_expr)*
    and_expr = not_expr ("and" not_expr)*
    not_expr = "not" not_expr | atom
    atom     = IDENT | "true" | "false" | "(" expr ")"

Operator chains at one syntactic level flatten into a single n-ary node
("A and B and C" is one conjunction with three children); parentheses
preserve explicit nesting. Rendering fully parenthesizes every non-leaf
node, so parse(render(e)) is structurally equal to e.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from typing import Mapping

Assignment = Mapping[str, bool]

KEYWORDS = frozenset({"and", "or", "not", "true", "false"})

MAX_TRUTH_TABLE_VARIABLES = 16


class ExpressionError(ValueError):
    """Base class for expression construction and evaluation errors."""


class ExprSyntaxError(ExpressionError):
    def __init__(self, message: str, position: int | None = None, token_index: int | None = None):
        detail = message
        if token_index is not None:
            detail += f" at token {token_index}"
        if position is not None:
            detail += f" (position {position})"
        super().__init__(detail)
        self.position = position
        self.token_index = token_index


class MissingVariableError(ExpressionError):
    def __init__(self, name: str):
        super().__init__(f"assignment is missing variable {name!r}")
        self.name = name


class TooManyVariablesError(ExpressionError):
    def __init__(self, count: int):
        super().__init__(
            f"expression has {count} variables; truth tables are limited to "
            f"{MAX_TRUTH_TABLE_VARIABLES}"
        )
        self.count = count


@dataclass(frozen=True)
class Expr:
    """Base node; concrete kinds are Var, Lit, Not, And, Or."""


@dataclass(frozen=True)
class Var(Expr):
    name: str

    def __post_init__(self):
        if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", self.name) or self.name.lower() in KEYWORDS:
            raise ExpressionError(f"invalid variable name {self.name!r}")


@dataclass(frozen=True)
class Lit(Expr):
    value: bool


@dataclass(frozen=True)
class Not(Expr):
    child: Expr


@dataclass(frozen=True)
class And(Expr):
    children: tuple[Expr, ...]

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(self.children))
        if len(self.children) < 2:
            raise ExpressionError("conjunction requires at least two children")


@dataclass(frozen=True)
class Or(Expr):
    children: tuple[Expr, ...]

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(self.children))
        if len(self.children) < 2:
            raise ExpressionError("disjunction requires at least two children")


@dataclass(frozen=True)
class _Token:
    text: str
    pos: int
    index: int  # 1-based


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch in "()":
            tokens.append(_Token(ch, i, len(tokens) + 1))
            i += 1
            continue
        m = re.match(r"[A-Za-z_][A-Za-z0-9_]*", text[i:])
        if m is None:
            raise ExprSyntaxError(f"unknown character {ch!r}", position=i, token_index=len(tokens) + 1)
        tokens.append(_Token(m.group(0), i, len(tokens) + 1))
        i += len(m.group(0))
    return tokens


class _Parser:
    def __init__(self, tokens: list[_Token], source_len: int):
        self.tokens = tokens
        self.pos = 0
        self.source_len = source_len

    def peek(self) -> _Token | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def next(self) -> _Token:
        tok = self.peek()
        if tok is None:
            raise ExprSyntaxError("unexpected end of expression", position=self.source_len)
        self.pos += 1
        return tok

    def _keyword(self, tok: _Token | None) -> str | None:
        if tok is None or tok.text in "()":
            return None
        lowered = tok.text.lower()
        return lowered if lowered in KEYWORDS else None

    def parse_or(self) -> Expr:
        children = [self.parse_and()]
        while self._keyword(self.peek()) == "or":
            self.next()
            children.append(self.parse_and())
        return children[0] if len(children) == 1 else Or(tuple(children))

    def parse_and(self) -> Expr:
        children = [self.parse_not()]
        while self._keyword(self.peek()) == "and":
            self.next()
            children.append(self.parse_not())
        return children[0] if len(children) == 1 else And(tuple(children))

    def parse_not(self) -> Expr:
        if self._keyword(self.peek()) == "not":
            self.next()
            return Not(self.parse_not())
        return self.parse_atom()

    def parse_atom(self) -> Expr:
        tok = self.peek()
        if tok is None:
            raise ExprSyntaxError("dangling operator: expected an expression", position=self.source_len)
        if tok.text == "(":
            self.next()
            inner = self.parse_or()
            closer = self.peek()
            if closer is None or closer.text != ")":
                raise ExprSyntaxError(
                    "unbalanced parentheses: expected ')'",
                    position=closer.pos if closer else self.source_len,
                    token_index=closer.index if closer else None,
                )
            self.next()
            return inner
        if tok.text == ")":
            raise ExprSyntaxError("unexpected ')'", position=tok.pos, token_index=tok.index)
        keyword = self._keyword(tok)
        if keyword == "true":
            self.next()
            return Lit(True)
        if keyword == "false":
            self.next()
            return Lit(False)
        if keyword is not None:
            raise ExprSyntaxError(
                f"expected a variable, literal, 'not' or '(' but found {tok.text!r}",
                position=tok.pos,
                token_index=tok.index,
            )
        self.next()
        return Var(tok.text)


def parse(text: str) -> Expr:
    """Parse an expression string into an AST; raises ExprSyntaxError with position."""
    tokens = _tokenize(text)
    if not tokens:
        raise ExprSyntaxError("empty expression", position=0)
    parser = _Parser(tokens, len(text))
    expr = parser.parse_or()
    leftover = parser.peek()
    if leftover is not None:
        raise ExprSyntaxError(
            f"unexpected trailing token {leftover.text!r}",
            position=leftover.pos,
            token_index=leftover.index,
        )
    return expr


def render(expr: Expr) -> str:
    """Canonical rendering; every non-leaf node is parenthesized."""
    if isinstance(expr, Var):
        return expr.name
    if isinstance(expr, Lit):
        return "true" if expr.value else "false"
    if isinstance(expr, Not):
        return f"(not {render(expr.child)})"
    if isinstance(expr, And):
        return "(" + " and ".join(render(c) for c in expr.children) + ")"
    if isinstance(expr, Or):
        return "(" + " or ".join(render(c) for c in expr.children) + ")"
    raise TypeError(f"not an expression node: {expr!r}")


def variables(expr: Expr) -> tuple[str, ...]:
    """Sorted tuple of the distinct variable names in the expression."""
    names: set[str] = set()

    def walk(node: Expr) -> None:
        if isinstance(node, Var):
            names.add(node.name)
        elif isinstance(node, Not):
            walk(node.child)
        elif isinstance(node, (And, Or)):
            for child in node.children:
                walk(child)

    walk(expr)
    return tuple(sorted(names))


def evaluate(expr: Expr, assignment: Assignment) -> bool:
    """Evaluate under a total assignment; partial assignments raise MissingVariableError."""
    for name in variables(expr):
        if name not in assignment:
            raise MissingVariableError(name)
    return _evaluate(expr, assignment)


def _evaluate(expr: Expr, assignment: Assignment) -> bool:
    if isinstance(expr, Var):
        return bool(assignment[expr.name])
    if isinstance(expr, Lit):
        return expr.value
    if isinstance(expr, Not):
        return not _evaluate(expr.child, assignment)
    if isinstance(expr, And):
        return all(_evaluate(c, assignment) for c in expr.children)
    if isinstance(expr, Or):
        return any(_evaluate(c, assignment) for c in expr.children)
    raise TypeError(f"not an expression node: {expr!r}")


def substitute(expr: Expr, assignment: Assignment) -> str:
    """Render the expression with every variable replaced by a true/false literal."""
    for name in variables(expr):
        if name not in assignment:
            raise MissingVariableError(name)

    def fold(node: Expr) -> Expr:
        if isinstance(node, Var):
            return Lit(bool(assignment[node.name]))
        if isinstance(node, Not):
            return Not(fold(node.child))
        if isinstance(node, And):
            return And(tuple(fold(c) for c in node.children))
        if isinstance(node, Or):
            return Or(tuple(fold(c) for c in node.children))
        return node

    return render(fold(expr))


def truth_table(expr: Expr) -> list[tuple[dict[str, bool], bool]]:
    """All 2^n assignments in lexicographic variable order, with results."""
    names = variables(expr)
    if len(names) > MAX_TRUTH_TABLE_VARIABLES:
        raise TooManyVariablesError(len(names))
    rows: list[tuple[dict[str, bool], bool]] = []
    for values in itertools.product((False, True), repeat=len(names)):
        assignment = dict(zip(names, values))
        rows.append((assignment, evaluate(expr, assignment)))
    return rows
