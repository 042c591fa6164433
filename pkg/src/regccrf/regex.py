"""Regular-expression syntax trees, a recursive-descent parser and
Thompson's construction.

Grammar::

    expr   := alt
    alt    := concat ("|" concat)*
    concat := repeat+
    repeat := atom ("*" | "+" | "?" | "{" INT "}")?
    atom   := SYMBOL | "(" expr ")" | "(" ")"
    SYMBOL := a single non-reserved character, or "[" identifier "]"

Whitespace is ignored outside brackets. ``()`` denotes the empty string.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence, Union

from .errors import RegexSyntaxError, UndeclaredSymbolError

RESERVED = set("|*+?{}()[]")


@dataclass(frozen=True)
class Symbol:
    label: str


@dataclass(frozen=True)
class Concat:
    children: tuple


@dataclass(frozen=True)
class Alternation:
    children: tuple


@dataclass(frozen=True)
class Star:
    child: "RegexAst"


@dataclass(frozen=True)
class Plus:
    child: "RegexAst"


@dataclass(frozen=True)
class Optional:
    child: "RegexAst"


@dataclass(frozen=True)
class Repeat:
    child: "RegexAst"
    count: int

    def __post_init__(self):
        if self.count < 0:
            raise ValueError("repeat count must be non-negative")


@dataclass(frozen=True)
class Empty:
    pass


RegexAst = Union[Symbol, Concat, Alternation, Star, Plus, Optional, Repeat, Empty]


class _Parser:
    def __init__(self, source: str, alphabet: Sequence[str]):
        self.src = source
        self.pos = 0
        self.alphabet = set(alphabet)

    def _skip(self):
        while self.pos < len(self.src) and self.src[self.pos].isspace():
            self.pos += 1

    def _peek(self) -> str | None:
        self._skip()
        return self.src[self.pos] if self.pos < len(self.src) else None

    def parse(self) -> RegexAst:
        if self._peek() is None:
            raise RegexSyntaxError("empty expression", self.pos)
        node = self._alt()
        if self._peek() is not None:
            raise RegexSyntaxError(f"unexpected {self.src[self.pos]!r}", self.pos)
        return node

    def _alt(self) -> RegexAst:
        branches = [self._concat()]
        while self._peek() == "|":
            self.pos += 1
            branches.append(self._concat())
        return branches[0] if len(branches) == 1 else Alternation(tuple(branches))

    def _concat(self) -> RegexAst:
        items = []
        while True:
            c = self._peek()
            if c is None or c in "|)":
                break
            items.append(self._repeat())
        if not items:
            raise RegexSyntaxError("expected a symbol or '('", self.pos)
        return items[0] if len(items) == 1 else Concat(tuple(items))

    def _repeat(self) -> RegexAst:
        node = self._atom()
        c = self._peek()
        if c == "*":
            self.pos += 1
            return Star(node)
        if c == "+":
            self.pos += 1
            return Plus(node)
        if c == "?":
            self.pos += 1
            return Optional(node)
        if c == "{":
            start = self.pos
            self.pos += 1
            self._skip()
            digits_start = self.pos
            while self.pos < len(self.src) and self.src[self.pos].isdigit():
                self.pos += 1
            if self.pos == digits_start:
                raise RegexSyntaxError("expected a repetition count", self.pos)
            count = int(self.src[digits_start:self.pos])
            if self._peek() != "}":
                raise RegexSyntaxError("unterminated repetition", start)
            self.pos += 1
            return Repeat(node, count)
        return node

    def _atom(self) -> RegexAst:
        c = self._peek()
        start = self.pos
        if c == "(":
            self.pos += 1
            if self._peek() == ")":
                self.pos += 1
                return Empty()
            node = self._alt()
            if self._peek() != ")":
                raise RegexSyntaxError("unbalanced '('", start)
            self.pos += 1
            return node
        if c == "[":
            end = self.src.find("]", start + 1)
            if end < 0:
                raise RegexSyntaxError("unterminated '['", start)
            name = self.src[start + 1:end].strip()
            if not name or any(ch.isspace() or ch == "[" for ch in name):
                raise RegexSyntaxError("invalid bracketed label", start)
            self.pos = end + 1
            return self._symbol(name, start)
        if c is None or c in RESERVED:
            raise RegexSyntaxError(f"unexpected {c!r}" if c else "unexpected end", start)
        self.pos += 1
        return self._symbol(c, start)

    def _symbol(self, name: str, position: int) -> Symbol:
        if name not in self.alphabet:
            raise UndeclaredSymbolError(name, position)
        return Symbol(name)


def parse_regex(source: str, alphabet: Iterable[str]) -> RegexAst:
    """Parse ``source`` into a :data:`RegexAst` over ``alphabet``.

    Raises
    ------
    RegexSyntaxError
        Malformed input; ``.position`` points at the offending character.
    UndeclaredSymbolError
        A symbol outside ``alphabet`` was used.
    """
    return _Parser(source, list(alphabet)).parse()


def _format_symbol(label: str) -> str:
    if len(label) == 1 and label not in RESERVED and not label.isspace():
        return label
    return f"[{label}]"


def to_regex(node: RegexAst) -> str:
    """Pretty-print an AST; ``parse_regex(to_regex(ast))`` returns ``ast``."""

    def fmt(n, prec):
        # prec: 0 alternation, 1 concatenation, 2 postfix operand
        if isinstance(n, Symbol):
            return _format_symbol(n.label)
        if isinstance(n, Empty):
            return "()"
        if isinstance(n, Alternation):
            s = "|".join(fmt(c, 1) for c in n.children)
            return f"({s})" if prec > 0 else s
        if isinstance(n, Concat):
            s = "".join(fmt(c, 2) for c in n.children)
            return f"({s})" if prec > 1 else s
        inner = fmt(n.child, 2)
        if isinstance(n.child, (Star, Plus, Optional, Repeat)):
            inner = f"({inner})"
        if isinstance(n, Star):
            return inner + "*"
        if isinstance(n, Plus):
            return inner + "+"
        if isinstance(n, Optional):
            return inner + "?"
        return f"{inner}{{{n.count}}}"

    return fmt(node, 0)


@dataclass
class EpsilonNfa:
    """Thompson machine: one start state, one final state, ``None`` marks epsilon."""

    num_states: int
    start: int
    final: int
    edges: list


def thompson_construct(node: RegexAst) -> EpsilonNfa:
    edges: list = []
    counter = [0]

    def new():
        counter[0] += 1
        return counter[0] - 1

    def build(n) -> tuple[int, int]:
        if isinstance(n, Symbol):
            s, f = new(), new()
            edges.append((s, n.label, f))
            return s, f
        if isinstance(n, Empty):
            s, f = new(), new()
            edges.append((s, None, f))
            return s, f
        if isinstance(n, Concat):
            s, f = build(n.children[0])
            for child in n.children[1:]:
                cs, cf = build(child)
                edges.append((f, None, cs))
                f = cf
            return s, f
        if isinstance(n, Alternation):
            s, f = new(), new()
            for child in n.children:
                cs, cf = build(child)
                edges.append((s, None, cs))
                edges.append((cf, None, f))
            return s, f
        if isinstance(n, (Star, Plus, Optional)):
            s, f = new(), new()
            cs, cf = build(n.child)
            edges.append((s, None, cs))
            edges.append((cf, None, f))
            if not isinstance(n, Plus):
                edges.append((s, None, f))
            if not isinstance(n, Optional):
                edges.append((cf, None, cs))
            return s, f
        if isinstance(n, Repeat):
            if n.count == 0:
                return build(Empty())
            return build(Concat((n.child,) * n.count) if n.count > 1 else n.child)
        raise TypeError(f"not a regex node: {n!r}")

    start, final = build(node)
    return EpsilonNfa(counter[0], start, final, edges)
