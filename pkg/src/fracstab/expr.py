"""Arithmetic expression language for delay kernels and nonlinearities.

Grammar, lowest to highest binding::

    + -   (left associative)
    * /   (left associative)
    unary -
    ^     (right associative)
    f(...) function call

Functions: sin, cos, exp, ln, abs, sgn, gamma (one argument) and
spow(x, p) = sgn(x) * |x|**p (two arguments).

>>> evaluate(parse("2+3*4^2"), {})
50.0
>>> serialize(parse("spow(x2,2/5)"))
'spow(x2, 2 / 5)'
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence, Union


class ExprError(ValueError):
    pass


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, offset: int, expected: frozenset[str] = frozenset()):
        detail = f" (expected one of: {', '.join(sorted(expected))})" if expected else ""
        super().__init__(f"{message} at byte {offset}{detail}")
        self.offset = offset
        self.expected = expected


class UnknownFunctionError(ExprSyntaxError):
    pass


class ArityError(ExprSyntaxError):
    pass


class UnboundVariableError(ExprError):
    pass


class ExprDomainError(ExprError, ArithmeticError):
    pass


# --- AST -------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float

    def __post_init__(self):
        if not (math.isfinite(self.value) and self.value >= 0):
            raise ValueError(f"number literals are finite and nonnegative, got {self.value!r}")


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple["Expr", ...]


Expr = Union[Num, Var, Neg, BinOp, Call]

FUNCTIONS = {"sin": 1, "cos": 1, "exp": 1, "ln": 1, "abs": 1, "sgn": 1, "gamma": 1, "spow": 2}

_PREC = {"+": 10, "-": 10, "*": 20, "/": 20, "^": 40}
_NEG_PREC = 30
_ATOM_PREC = 100


# --- tokenizer -------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Token:
    kind: str  # num, ident, op, end
    text: str
    offset: int  # byte offset


def _tokenize(src: str) -> list[_Token]:
    tokens = []
    pos = 0
    byte_pos = 0
    while pos < len(src):
        m = _TOKEN_RE.match(src, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {src[pos]!r}", byte_pos)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append(_Token(kind, m.group(), byte_pos))
        byte_pos += len(m.group().encode("utf-8"))
        pos = m.end()
    tokens.append(_Token("end", "", byte_pos))
    return tokens


# --- Pratt parser ----------------------------------------------------------

_PRIMARY_START = frozenset({"number", "identifier", "(", "-"})


class _Parser:
    def __init__(self, src: str):
        self.tokens = _tokenize(src)
        self.i = 0

    def peek(self) -> _Token:
        return self.tokens[self.i]

    def advance(self) -> _Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text: str, expected: frozenset[str] | None = None) -> _Token:
        tok = self.peek()
        if tok.text != text or tok.kind not in ("op",):
            raise ExprSyntaxError(f"unexpected {_describe(tok)}", tok.offset, expected or frozenset({text}))
        return self.advance()

    @staticmethod
    def lbp(tok: _Token) -> int:
        if tok.kind == "op" and tok.text in _PREC:
            return _PREC[tok.text]
        return 0

    def expression(self, rbp: int = 0) -> Expr:
        left = self.nud(self.advance())
        while rbp < self.lbp(self.peek()):
            tok = self.advance()
            left = self.led(tok, left)
        return left

    def nud(self, tok: _Token) -> Expr:
        if tok.kind == "num":
            return Num(float(tok.text))
        if tok.kind == "ident":
            if self.peek().kind == "op" and self.peek().text == "(":
                return self.call(tok)
            return Var(tok.text)
        if tok.kind == "op" and tok.text == "-":
            return Neg(self.expression(_NEG_PREC))
        if tok.kind == "op" and tok.text == "(":
            inner = self.expression(0)
            self.expect(")", frozenset({")", "+", "-", "*", "/", "^"}))
            return inner
        raise ExprSyntaxError(f"unexpected {_describe(tok)}", tok.offset, _PRIMARY_START)

    def led(self, tok: _Token, left: Expr) -> Expr:
        op = tok.text
        if op == "^":
            return BinOp(op, left, self.expression(_PREC[op] - 1))
        return BinOp(op, left, self.expression(_PREC[op]))

    def call(self, name_tok: _Token) -> Expr:
        name = name_tok.text
        if name not in FUNCTIONS:
            raise UnknownFunctionError(f"unknown function {name!r}", name_tok.offset, frozenset(FUNCTIONS))
        self.advance()  # '('
        args = []
        if not (self.peek().kind == "op" and self.peek().text == ")"):
            args.append(self.expression(0))
            while self.peek().kind == "op" and self.peek().text == ",":
                self.advance()
                args.append(self.expression(0))
        self.expect(")", frozenset({")", ","}))
        if len(args) != FUNCTIONS[name]:
            raise ArityError(
                f"{name} takes {FUNCTIONS[name]} argument(s), got {len(args)}", name_tok.offset
            )
        return Call(name, tuple(args))


def _describe(tok: _Token) -> str:
    return "end of input" if tok.kind == "end" else f"{tok.text!r}"


def parse(src: str) -> Expr:
    """Parse an expression string into an immutable AST."""
    if not src or not src.strip():
        raise ExprSyntaxError("empty expression", 0, _PRIMARY_START)
    p = _Parser(src)
    e = p.expression(0)
    tok = p.peek()
    if tok.kind != "end":
        raise ExprSyntaxError(f"unexpected {_describe(tok)}", tok.offset, frozenset({"+", "-", "*", "/", "^", "end of input"}))
    return e


# --- serialization ---------------------------------------------------------

def _prec(e: Expr) -> int:
    if isinstance(e, BinOp):
        return _PREC[e.op]
    if isinstance(e, Neg):
        return _NEG_PREC
    return _ATOM_PREC


def _format_number(v: float) -> str:
    if v == int(v) and v < 1e15:
        return str(int(v))
    return repr(v)


def serialize(e: Expr) -> str:
    """Text form with the fewest parentheses that re-parses to the same tree."""
    if isinstance(e, Num):
        return _format_number(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Call):
        return f"{e.name}({', '.join(serialize(a) for a in e.args)})"
    if isinstance(e, Neg):
        inner = serialize(e.operand)
        if _prec(e.operand) < _NEG_PREC:
            return f"-({inner})"
        return f"- {inner}" if inner.startswith("-") else f"-{inner}"
    p = _PREC[e.op]
    left, right = serialize(e.left), serialize(e.right)
    if e.op == "^":
        if _prec(e.left) <= p:
            left = f"({left})"
        if _prec(e.right) < _NEG_PREC:
            right = f"({right})"
    else:
        if _prec(e.left) < p:
            left = f"({left})"
        if _prec(e.right) <= p:
            right = f"({right})"
    return f"{left} {e.op} {right}"


def free_vars(e: Expr) -> frozenset[str]:
    if isinstance(e, Var):
        return frozenset({e.name})
    if isinstance(e, Num):
        return frozenset()
    if isinstance(e, Neg):
        return free_vars(e.operand)
    if isinstance(e, BinOp):
        return free_vars(e.left) | free_vars(e.right)
    out: frozenset[str] = frozenset()
    for a in e.args:
        out |= free_vars(a)
    return out


# --- evaluation ------------------------------------------------------------

def _div(a: float, b: float) -> float:
    if b == 0.0:
        raise ExprDomainError("division by zero")
    return a / b


def _pow(a: float, b: float) -> float:
    if a < 0.0 and b != math.floor(b):
        raise ExprDomainError(f"negative base {a!r} with non-integer exponent {b!r}; use spow")
    if a == 0.0 and b < 0.0:
        raise ExprDomainError("division by zero (zero base, negative exponent)")
    try:
        return math.pow(a, b)
    except OverflowError:
        raise ExprDomainError("nonfinite result in ^") from None


def _spow(a: float, p: float) -> float:
    if a == 0.0:
        if p < 0.0:
            raise ExprDomainError("division by zero (spow of 0 with negative exponent)")
        return 0.0 if p > 0.0 else 1.0
    try:
        return math.copysign(math.pow(abs(a), p), a)
    except OverflowError:
        raise ExprDomainError("nonfinite result in spow") from None


def _exp(a: float) -> float:
    try:
        return math.exp(a)
    except OverflowError:
        raise ExprDomainError("nonfinite result in exp") from None


def _ln(a: float) -> float:
    if a <= 0.0:
        raise ExprDomainError(f"ln of nonpositive argument {a!r}")
    return math.log(a)


def _gamma(a: float) -> float:
    if a <= 0.0:
        raise ExprDomainError(f"gamma of nonpositive argument {a!r}")
    try:
        return math.gamma(a)
    except OverflowError:
        raise ExprDomainError("nonfinite result in gamma") from None


def _sgn(a: float) -> float:
    return float((a > 0) - (a < 0))


def _trig(f):
    def g(a: float) -> float:
        if not math.isfinite(a):
            raise ExprDomainError("nonfinite argument to trigonometric function")
        return f(a)
    return g


def _fin(v: float) -> float:
    if not math.isfinite(v):
        raise ExprDomainError("nonfinite result")
    return v


_FUNC_IMPL: dict[str, Callable[..., float]] = {
    "sin": _trig(math.sin),
    "cos": _trig(math.cos),
    "exp": _exp,
    "ln": _ln,
    "abs": abs,
    "sgn": _sgn,
    "gamma": _gamma,
    "spow": _spow,
}

_BIN_IMPL: dict[str, Callable[[float, float], float]] = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
    "/": _div,
    "^": _pow,
}


def _eval(e: Expr, env: Mapping[str, float]) -> float:
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        try:
            return float(env[e.name])
        except KeyError:
            raise UnboundVariableError(f"unbound variable {e.name!r}") from None
    if isinstance(e, Neg):
        return -_eval(e.operand, env)
    if isinstance(e, BinOp):
        return _BIN_IMPL[e.op](_eval(e.left, env), _eval(e.right, env))
    return _FUNC_IMPL[e.name](*(_eval(a, env) for a in e.args))


def evaluate(e: Expr, env: Mapping[str, float]) -> float:
    """Evaluate ``e`` in IEEE double arithmetic under the bindings in ``env``."""
    return _fin(_eval(e, env))


def _to_source(e: Expr, varmap: Callable[[str], str]) -> str:
    if isinstance(e, Num):
        return repr(e.value)
    if isinstance(e, Var):
        return varmap(e.name)
    if isinstance(e, Neg):
        return f"(-{_to_source(e.operand, varmap)})"
    if isinstance(e, BinOp):
        l, r = _to_source(e.left, varmap), _to_source(e.right, varmap)
        if e.op == "/":
            return f"_div({l}, {r})"
        if e.op == "^":
            return f"_pow({l}, {r})"
        return f"({l} {e.op} {r})"
    return f"_f_{e.name}({', '.join(_to_source(a, varmap) for a in e.args)})"


def compile_vector(exprs: Sequence[Expr], params: str, varmap: Callable[[str], str]) -> Callable[..., tuple]:
    """Compile expressions into one Python function returning a tuple.

    ``params`` is the function's parameter list and ``varmap`` turns a
    variable name into a source fragment over those parameters, e.g.
    ``"x1" -> "x[0]"``. Unknown names must raise :class:`UnboundVariableError`
    from ``varmap``. Semantics match :func:`evaluate`.
    """
    body = ", ".join(f"_fin({_to_source(e, varmap)})" for e in exprs)
    src = f"lambda {params}: ({body}{',' if len(exprs) == 1 else ''})"
    scope = {"_div": _div, "_pow": _pow, "_fin": _fin, "math": math}
    scope.update({f"_f_{k}": v for k, v in _FUNC_IMPL.items()})
    return eval(compile(src, "<expr>", "eval"), scope)
