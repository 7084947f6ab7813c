"""Closed-form real sequences in the generation index ``n``.

Environment parameters such as ``lambda_n = n/(n-1)`` or
``exp(-sqrt(n))/exp(-sqrt(n-1))`` are written as small expressions and
evaluated in binary64.  The grammar is fixed::

    expr    = term , { ("+" | "-") , term } ;
    term    = unary , { ("*" | "/") , unary } ;
    unary   = "-" , unary | power ;
    power   = atom , [ "^" , unary ] ;            (* right associative *)
    atom    = number | "n" | func , "(" , args , ")" | "(" , expr , ")" ;
    func    = "sqrt" | "exp" | "log" | "pow" ;
    number  = digits , [ "." , digits ] , [ ("e" | "E") , [ "+" | "-" ] , digits ] ;

``^`` binds tighter than unary minus, so ``-2^2 == -4``.  ``pow`` takes two
arguments, the other functions one.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

__all__ = [
    "SeqExprError",
    "SeqExprSyntaxError",
    "UnknownIdentifierError",
    "SeqExprDomainError",
    "Num",
    "Var",
    "Neg",
    "BinOp",
    "Call",
    "SeqExpr",
    "parse_seq_expr",
    "eval_seq_expr",
    "to_source",
]

FUNCTIONS = {"sqrt": 1, "exp": 1, "log": 1, "pow": 2}


class SeqExprError(ValueError):
    pass


class SeqExprSyntaxError(SeqExprError):
    def __init__(self, message: str, offset: int, expected: frozenset[str]):
        self.offset = offset
        self.expected = expected
        exp = ", ".join(sorted(expected)) if expected else "nothing"
        super().__init__(f"{message} at offset {offset} (expected one of: {exp})")


class UnknownIdentifierError(SeqExprError):
    def __init__(self, name: str, offset: int):
        self.name = name
        self.offset = offset
        super().__init__(f"unknown identifier {name!r} at offset {offset}")


class SeqExprDomainError(SeqExprError, ArithmeticError):
    pass


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str = "n"


@dataclass(frozen=True)
class Neg:
    operand: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple["Node", ...]


Node = Union[Num, Var, Neg, BinOp, Call]


@dataclass(frozen=True)
class SeqExpr:
    """A parsed expression; ``text`` keeps the source for reporting."""

    ast: Node
    text: str = ""

    def __call__(self, n: int) -> float:
        return eval_seq_expr(self, n)

    def __str__(self) -> str:
        return to_source(self.ast)


_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Tok:
    kind: str  # "num" | "ident" | "op" | "end"
    text: str
    offset: int  # byte offset into the UTF-8 encoding


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    pos = 0
    # char index -> byte offset, so error offsets are byte offsets as documented
    byte_at = [0]
    for ch in text:
        byte_at.append(byte_at[-1] + len(ch.encode("utf-8")))
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise SeqExprSyntaxError(
                f"unexpected character {text[pos]!r}",
                byte_at[pos],
                frozenset({"number", "n", "function", "(", "-"}),
            )
        kind = m.lastgroup
        if kind != "ws":
            toks.append(_Tok(kind, m.group(), byte_at[pos]))
        pos = m.end()
    toks.append(_Tok("end", "", byte_at[len(text)]))
    return toks


_ATOM_START = frozenset({"number", "n", "sqrt", "exp", "log", "pow", "(", "-"})


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def advance(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, text: str) -> None:
        if self.tok.text != text or self.tok.kind == "end":
            raise SeqExprSyntaxError(
                f"unexpected {self._describe()}", self.tok.offset, frozenset({text})
            )
        self.advance()

    def _describe(self) -> str:
        return "end of input" if self.tok.kind == "end" else f"token {self.tok.text!r}"

    def parse(self) -> Node:
        node = self.expr()
        if self.tok.kind != "end":
            raise SeqExprSyntaxError(
                f"unexpected {self._describe()}",
                self.tok.offset,
                frozenset({"+", "-", "*", "/", "^", "end of input"}),
            )
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.advance().text
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.advance().text
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Node:
        if self.tok.kind == "op" and self.tok.text == "-":
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.tok.kind == "op" and self.tok.text == "^":
            self.advance()
            return BinOp("^", base, self.unary())
        return base

    def atom(self) -> Node:
        t = self.tok
        if t.kind == "num":
            self.advance()
            return Num(float(t.text))
        if t.kind == "ident":
            self.advance()
            if t.text == "n":
                return Var()
            if t.text not in FUNCTIONS:
                raise UnknownIdentifierError(t.text, t.offset)
            self.expect("(")
            args = [self.expr()]
            while self.tok.kind == "op" and self.tok.text == ",":
                self.advance()
                args.append(self.expr())
            if len(args) != FUNCTIONS[t.text]:
                raise SeqExprSyntaxError(
                    f"{t.text} takes {FUNCTIONS[t.text]} argument(s), got {len(args)}",
                    t.offset,
                    frozenset({")"} if len(args) > FUNCTIONS[t.text] else {","}),
                )
            self.expect(")")
            return Call(t.text, tuple(args))
        if t.kind == "op" and t.text == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        raise SeqExprSyntaxError(f"unexpected {self._describe()}", t.offset, _ATOM_START)


def parse_seq_expr(text: str | bytes) -> SeqExpr:
    """Parse ``text`` into a :class:`SeqExpr`.

    Raises :class:`SeqExprSyntaxError` (with ``offset`` and ``expected``) or
    :class:`UnknownIdentifierError`.
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    return SeqExpr(_Parser(text).parse(), text)


def _finite(x: float, what: str) -> float:
    if math.isnan(x):
        raise SeqExprDomainError(f"{what} is not a number")
    if math.isinf(x):
        raise SeqExprDomainError(f"overflow in {what}")
    return x


def _power(x: float, y: float) -> float:
    if y == int(y) and abs(y) < 2**53:
        k = int(y)
        if x == 0.0 and k < 0:
            raise SeqExprDomainError("division by zero in 0^negative")
        try:
            return _finite(x**k, "power")
        except OverflowError:
            raise SeqExprDomainError("overflow in power") from None
    if x > 0:
        try:
            return _finite(math.pow(x, y), "power")
        except OverflowError:
            raise SeqExprDomainError("overflow in power") from None
    if x == 0.0:
        if y > 0:
            return 0.0
        raise SeqExprDomainError("division by zero in 0^negative")
    raise SeqExprDomainError("negative base with fractional exponent")


def _eval(node: Node, n: float) -> float:
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return n
    if isinstance(node, Neg):
        return -_eval(node.operand, n)
    if isinstance(node, BinOp):
        a = _eval(node.left, n)
        b = _eval(node.right, n)
        if node.op == "+":
            return _finite(a + b, "addition")
        if node.op == "-":
            return _finite(a - b, "subtraction")
        if node.op == "*":
            return _finite(a * b, "multiplication")
        if node.op == "/":
            if b == 0.0:
                raise SeqExprDomainError("division by zero")
            return _finite(a / b, "division")
        return _power(a, b)
    args = [_eval(a, n) for a in node.args]
    f = node.func
    if f == "sqrt":
        if args[0] < 0:
            raise SeqExprDomainError("sqrt of negative number")
        return math.sqrt(args[0])
    if f == "log":
        if args[0] <= 0:
            raise SeqExprDomainError("log of nonpositive number")
        return math.log(args[0])
    if f == "exp":
        try:
            return _finite(math.exp(args[0]), "exp")
        except OverflowError:
            raise SeqExprDomainError("overflow in exp") from None
    return _power(args[0], args[1])


def eval_seq_expr(expr: SeqExpr | str, n: int) -> float:
    """Evaluate ``expr`` with the variable bound to ``n`` (``n >= 1``)."""
    if isinstance(expr, str):
        expr = parse_seq_expr(expr)
    if n < 1:
        raise SeqExprDomainError(f"generation index must be >= 1, got {n}")
    return float(_eval(expr.ast, float(n)))


def to_source(node: Node | SeqExpr) -> str:
    """Fully parenthesised source text; re-parses to the same tree."""
    if isinstance(node, SeqExpr):
        node = node.ast
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return "n"
    if isinstance(node, Neg):
        return f"(-{to_source(node.operand)})"
    if isinstance(node, BinOp):
        return f"({to_source(node.left)} {node.op} {to_source(node.right)})"
    return f"{node.func}({', '.join(to_source(a) for a in node.args)})"
