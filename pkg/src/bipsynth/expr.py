"""Expression language shared by the BIP dialect, OLP programs and invariants.

Integers are fixed-width two's complement (``int<w>``) or unsigned (``uint<w>``,
used internally for location and selector encodings).  Arithmetic wraps at the
width of the operation.  Integer literals are width-polymorphic: combined with a
typed operand they widen the operation just enough to be represented exactly;
combined only with other literals they default to 32 bits.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Iterator, Mapping, Optional, Union

DEFAULT_INT_WIDTH = 32


class ExprError(Exception):
    """Base class for expression errors."""

    def __init__(self, message: str, line: int = 0, col: int = 0):
        super().__init__(message)
        self.message = message
        self.line = line
        self.col = col

    def __str__(self) -> str:
        if self.line:
            return f"{self.line}:{self.col}: {self.message}"
        return self.message


class ParseError(ExprError):
    pass


class ExprTypeError(ExprError):
    pass


class ArrayIndexOutOfBounds(ExprError):
    pass


# ---------------------------------------------------------------------------
# types


@dataclass(frozen=True)
class Type:
    kind: str  # "bool" | "int" | "uint" | "lit"
    width: int = 1
    value: int = 0  # only meaningful for "lit"

    @property
    def is_bool(self) -> bool:
        return self.kind == "bool"

    @property
    def is_int(self) -> bool:
        return self.kind != "bool"

    @property
    def signed(self) -> bool:
        return self.kind in ("int", "lit")

    def __str__(self) -> str:
        if self.kind == "bool":
            return "bool"
        if self.kind == "lit":
            return f"literal({self.value})"
        if self.kind == "int" and self.width == DEFAULT_INT_WIDTH:
            return "int"
        return f"{self.kind}<{self.width}>"


BOOL = Type("bool")


def int_type(width: int = DEFAULT_INT_WIDTH) -> Type:
    if width < 1:
        raise ValueError("integer width must be positive")
    return Type("int", width)


def uint_type(width: int) -> Type:
    if width < 1:
        raise ValueError("integer width must be positive")
    return Type("uint", width)


def lit_type(value: int) -> Type:
    return Type("lit", signed_width(value), value)


def signed_width(v: int) -> int:
    """Smallest two's complement width holding ``v``."""
    w = 1
    while not (-(1 << (w - 1)) <= v < (1 << (w - 1))):
        w += 1
    return w


def unsigned_width(v: int) -> int:
    return max(1, v.bit_length())


def wrap(v: int, ty: Type) -> int:
    """Reduce ``v`` into the value range of integer type ``ty``."""
    if ty.kind == "lit":
        return v
    mask = (1 << ty.width) - 1
    v &= mask
    if ty.kind == "int" and v >> (ty.width - 1):
        v -= 1 << ty.width
    return v


def convert(value, ty: Type):
    """Coerce a Python value to the canonical representation of ``ty``."""
    if ty.is_bool:
        return bool(value)
    return wrap(int(value), ty)


def to_bits(v: int, width: int) -> int:
    return v & ((1 << width) - 1)


def from_bits(bits: int, ty: Type):
    if ty.is_bool:
        return bool(bits & 1)
    return wrap(bits, ty)


def common_int_type(a: Type, b: Type) -> Type:
    """Type at which an arithmetic or relational operation on ``a`` and ``b`` runs."""
    if a.kind == "lit" and b.kind == "lit":
        return int_type(max(DEFAULT_INT_WIDTH, a.width, b.width))
    if a.kind == "lit":
        a, b = b, a
    if b.kind == "lit":
        if a.kind == "int":
            return int_type(max(a.width, signed_width(b.value)))
        if b.value < 0:
            raise ExprTypeError(f"negative literal {b.value} used with unsigned {a}")
        return uint_type(max(a.width, unsigned_width(b.value)))
    if a.kind != b.kind:
        raise ExprTypeError(f"cannot mix {a} and {b}")
    return Type(a.kind, max(a.width, b.width))


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class IntLit:
    value: int


@dataclass(frozen=True)
class BoolLit:
    value: bool


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Index:
    name: str
    index: "Expr"


@dataclass(frozen=True)
class Unary:
    op: str  # "!" | "-"
    operand: "Expr"


@dataclass(frozen=True)
class Binary:
    op: str
    lhs: "Expr"
    rhs: "Expr"


@dataclass(frozen=True)
class Ternary:
    cond: "Expr"
    then: "Expr"
    orelse: "Expr"


@dataclass(frozen=True)
class At:
    """Location predicate ``component @ location`` (invariants only)."""

    component: str
    location: str


Expr = Union[IntLit, BoolLit, Var, Index, Unary, Binary, Ternary, At]

TRUE = BoolLit(True)
FALSE = BoolLit(False)

ARITH_OPS = {"+", "-", "*"}
REL_OPS = {"<", "<=", ">", ">="}
EQ_OPS = {"==", "!="}
LOGIC_OPS = {"&&", "||"}


def _flatten(op: str, e: Expr) -> list[Expr]:
    if isinstance(e, Binary) and e.op == op:
        return _flatten(op, e.lhs) + _flatten(op, e.rhs)
    return [e]


def _fold(op: str, unit: Expr, terms) -> Expr:
    out: Optional[Expr] = None
    for t in terms:
        if t == unit:
            continue
        for u in _flatten(op, t):
            out = u if out is None else Binary(op, out, u)
    return unit if out is None else out


def conj(*terms: Expr) -> Expr:
    """Left-folded conjunction; nested conjunctions are spliced, ``true`` dropped."""
    return _fold("&&", TRUE, terms)


def disj(*terms: Expr) -> Expr:
    return _fold("||", FALSE, terms)


def neg(e: Expr) -> Expr:
    return Unary("!", e)


def children(e: Expr) -> tuple:
    if isinstance(e, Index):
        return (e.index,)
    if isinstance(e, Unary):
        return (e.operand,)
    if isinstance(e, Binary):
        return (e.lhs, e.rhs)
    if isinstance(e, Ternary):
        return (e.cond, e.then, e.orelse)
    return ()


def walk(e: Expr) -> Iterator[Expr]:
    stack = [e]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(children(node)))


def names_read(e: Expr) -> set[str]:
    """Variable and array names referenced by ``e``."""
    out = set()
    for node in walk(e):
        if isinstance(node, (Var, Index)):
            out.add(node.name)
    return out


def rename(e: Expr, fn: Callable[[str], str]) -> Expr:
    """Rewrite every variable/array name through ``fn``."""
    if isinstance(e, Var):
        return Var(fn(e.name))
    if isinstance(e, Index):
        return Index(fn(e.name), rename(e.index, fn))
    if isinstance(e, Unary):
        return Unary(e.op, rename(e.operand, fn))
    if isinstance(e, Binary):
        return Binary(e.op, rename(e.lhs, fn), rename(e.rhs, fn))
    if isinstance(e, Ternary):
        return Ternary(rename(e.cond, fn), rename(e.then, fn), rename(e.orelse, fn))
    return e


def substitute(e: Expr, fn: Callable[[Expr], Optional[Expr]]) -> Expr:
    """Bottom-up rewrite: ``fn`` returns a replacement or None to keep the node."""
    if isinstance(e, Index):
        e = Index(e.name, substitute(e.index, fn))
    elif isinstance(e, Unary):
        e = Unary(e.op, substitute(e.operand, fn))
    elif isinstance(e, Binary):
        e = Binary(e.op, substitute(e.lhs, fn), substitute(e.rhs, fn))
    elif isinstance(e, Ternary):
        e = Ternary(substitute(e.cond, fn), substitute(e.then, fn), substitute(e.orelse, fn))
    r = fn(e)
    return e if r is None else r


# ---------------------------------------------------------------------------
# lexing

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>\#[^\n]*|//[^\n]*|/\*.*?\*/)
  | (?P<num>\d+)
  | (?P<ident>[^\W\d]\w*)
  | (?P<op>->|:=|&&|\|\||==|!=|<=|>=|[<>+\-*!?:()\[\]{};,.@=])
    """,
    re.VERBOSE | re.DOTALL,
)


@dataclass(frozen=True)
class Token:
    kind: str  # "num" | "ident" | "op" | "eof"
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        chunk = m.group()
        if kind not in ("ws", "comment"):
            tokens.append(Token(kind, chunk, line, pos - line_start + 1))
        nl = chunk.count("\n")
        if nl:
            line += nl
            line_start = pos + chunk.rindex("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


class TokenStream:
    """Cursor over a token list with the small helpers every parser here needs."""

    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.tokens[min(self.i + k, len(self.tokens) - 1)]

    def at(self, text: str) -> bool:
        t = self.tok
        return t.kind in ("op", "ident") and t.text == text

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        t = self.tok
        if not self.at(text):
            raise self.error(f"expected {text!r}, found {t.text or 'end of input'!r}")
        self.i += 1
        return t

    def ident(self) -> str:
        t = self.tok
        if t.kind != "ident":
            raise self.error(f"expected identifier, found {t.text or 'end of input'!r}")
        self.i += 1
        return t.text

    def number(self) -> int:
        t = self.tok
        if t.kind != "num":
            raise self.error(f"expected number, found {t.text or 'end of input'!r}")
        self.i += 1
        return int(t.text)

    def dotted(self) -> str:
        parts = [self.ident()]
        while self.at(".") and self.peek().kind == "ident":
            self.i += 1
            parts.append(self.ident())
        return ".".join(parts)

    def error(self, message: str, tok: Optional[Token] = None) -> ParseError:
        t = tok or self.tok
        return ParseError(message, t.line, t.col)


# ---------------------------------------------------------------------------
# parsing

_BINARY_PREC = {
    "->": 1,
    "||": 2,
    "&&": 3,
    "==": 4,
    "!=": 4,
    "<": 5,
    "<=": 5,
    ">": 5,
    ">=": 5,
    "+": 6,
    "-": 6,
    "*": 7,
}
_UNARY_PREC = 8
_KEYWORDS = {"true", "false"}


def parse_expr(ts: TokenStream, allow_at: bool = False) -> Expr:
    """Parse one expression from the stream (ternary is the loosest binder)."""
    cond = _parse_binary(ts, 1, allow_at)
    if ts.accept("?"):
        then = _parse_then(ts, allow_at)
        ts.expect(":")
        orelse = parse_expr(ts, allow_at)
        return Ternary(cond, then, orelse)
    return cond


def _parse_then(ts: TokenStream, allow_at: bool) -> Expr:
    return parse_expr(ts, allow_at)


def _parse_binary(ts: TokenStream, min_prec: int, allow_at: bool) -> Expr:
    lhs = _parse_unary(ts, allow_at)
    while True:
        t = ts.tok
        prec = _BINARY_PREC.get(t.text) if t.kind == "op" else None
        if prec is None or prec < min_prec:
            return lhs
        ts.i += 1
        if t.text == "->":
            # right associative; desugared to !a || b
            rhs = _parse_binary(ts, prec, allow_at)
            lhs = Binary("||", Unary("!", lhs), rhs)
        else:
            rhs = _parse_binary(ts, prec + 1, allow_at)
            lhs = Binary(t.text, lhs, rhs)


def _parse_unary(ts: TokenStream, allow_at: bool) -> Expr:
    if ts.at("!") or ts.at("-"):
        op = ts.tok.text
        ts.i += 1
        return Unary(op, _parse_unary(ts, allow_at))
    return _parse_primary(ts, allow_at)


def _parse_primary(ts: TokenStream, allow_at: bool) -> Expr:
    t = ts.tok
    if t.kind == "num":
        ts.i += 1
        return IntLit(int(t.text))
    if t.kind == "ident" and t.text in _KEYWORDS:
        ts.i += 1
        return BoolLit(t.text == "true")
    if ts.accept("("):
        e = parse_expr(ts, allow_at)
        ts.expect(")")
        return e
    if t.kind == "ident":
        name = ts.dotted()
        if ts.accept("["):
            idx = parse_expr(ts, allow_at)
            ts.expect("]")
            return Index(name, idx)
        if ts.at("@"):
            if not allow_at:
                raise ts.error("location predicate '@' is only allowed in invariants")
            ts.i += 1
            return At(name, ts.ident())
        return Var(name)
    raise ts.error(f"expected expression, found {t.text or 'end of input'!r}")


def parse_expression(text: str, allow_at: bool = False) -> Expr:
    ts = TokenStream(tokenize(text))
    e = parse_expr(ts, allow_at)
    if ts.tok.kind != "eof":
        raise ts.error(f"unexpected {ts.tok.text!r} after expression")
    return e


# ---------------------------------------------------------------------------
# printing


def _prec(e: Expr) -> int:
    if isinstance(e, Ternary):
        return 0
    if isinstance(e, Binary):
        return _BINARY_PREC[e.op]
    if isinstance(e, Unary):
        return _UNARY_PREC
    if isinstance(e, At):
        return _UNARY_PREC + 1
    return 10


def format_expr(e: Expr, min_prec: int = 0) -> str:
    """Render with the fewest parentheses that still reparse to ``e``.

    A ternary in condition or then-position is always parenthesized.
    """
    text = _format(e)
    return f"({text})" if _prec(e) < min_prec else text


def _format(e: Expr) -> str:
    if isinstance(e, IntLit):
        return str(e.value)
    if isinstance(e, BoolLit):
        return "true" if e.value else "false"
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Index):
        return f"{e.name}[{format_expr(e.index)}]"
    if isinstance(e, At):
        return f"{e.component} @ {e.location}"
    if isinstance(e, Unary):
        inner = format_expr(e.operand, _UNARY_PREC)
        if e.op == "-" and inner.startswith("-"):
            inner = f"({inner})"
        return f"{e.op}{inner}"
    if isinstance(e, Binary):
        p = _BINARY_PREC[e.op]
        return f"{format_expr(e.lhs, p)} {e.op} {format_expr(e.rhs, p + 1)}"
    if isinstance(e, Ternary):
        return f"{format_expr(e.cond, 1)} ? {format_expr(e.then, 1)} : {format_expr(e.orelse, 0)}"
    raise TypeError(f"not an expression: {e!r}")


# ---------------------------------------------------------------------------
# typing


@dataclass(frozen=True)
class VarInfo:
    type: Type
    length: Optional[int] = None  # arrays only


TypeEnv = Callable[[str], Optional[VarInfo]]


def env_from(mapping: Mapping[str, VarInfo]) -> TypeEnv:
    return mapping.get


class TypeTable(dict):
    """id(node) -> Type for every node of the checked expressions."""

    def of(self, e: Expr) -> Type:
        return self[id(e)]


def check(
    e: Expr,
    env: TypeEnv,
    table: Optional[TypeTable] = None,
    at_resolver: Optional[Callable[[str, str], None]] = None,
) -> Type:
    """Infer the type of ``e``; records every sub-node in ``table``.

    Raises ExprTypeError on ill-typed input.  ``at_resolver`` validates ``C @ l``
    predicates (raising ExprTypeError for unknown names); without it they are rejected.
    """
    if table is None:
        table = TypeTable()
    ty = _check(e, env, table, at_resolver)
    return ty


def _check(e, env, table, at_resolver) -> Type:
    if isinstance(e, IntLit):
        ty = lit_type(e.value)
    elif isinstance(e, BoolLit):
        ty = BOOL
    elif isinstance(e, Var):
        info = env(e.name)
        if info is None:
            raise ExprTypeError(f"undeclared variable {e.name!r}")
        if info.length is not None:
            raise ExprTypeError(f"array {e.name!r} used without an index")
        ty = info.type
    elif isinstance(e, Index):
        info = env(e.name)
        if info is None:
            raise ExprTypeError(f"undeclared array {e.name!r}")
        if info.length is None:
            raise ExprTypeError(f"{e.name!r} is not an array")
        it = _check(e.index, env, table, at_resolver)
        if not it.is_int:
            raise ExprTypeError(f"array index of {e.name!r} must be an integer")
        ty = info.type
    elif isinstance(e, At):
        if at_resolver is None:
            raise ExprTypeError("location predicate outside an invariant")
        at_resolver(e.component, e.location)
        ty = BOOL
    elif isinstance(e, Unary):
        ot = _check(e.operand, env, table, at_resolver)
        if e.op == "!":
            if not ot.is_bool:
                raise ExprTypeError(f"'!' applied to {ot}")
            ty = BOOL
        else:
            if not ot.is_int:
                raise ExprTypeError(f"unary '-' applied to {ot}")
            ty = lit_type(-ot.value) if ot.kind == "lit" else ot
    elif isinstance(e, Binary):
        lt = _check(e.lhs, env, table, at_resolver)
        rt = _check(e.rhs, env, table, at_resolver)
        ty = _binary_type(e.op, lt, rt)
    elif isinstance(e, Ternary):
        ct = _check(e.cond, env, table, at_resolver)
        if not ct.is_bool:
            raise ExprTypeError("ternary condition must be boolean")
        tt = _check(e.then, env, table, at_resolver)
        ft = _check(e.orelse, env, table, at_resolver)
        if tt.is_bool and ft.is_bool:
            ty = BOOL
        elif tt.is_int and ft.is_int:
            ty = common_int_type(tt, ft)
        else:
            raise ExprTypeError(f"ternary branches have types {tt} and {ft}")
    else:
        raise TypeError(f"not an expression: {e!r}")
    table[id(e)] = ty
    return ty


def _bool_like(a: Type, b: Type) -> bool:
    """bool compared against a 0/1 literal (``cycle == 0``)."""
    return (a.is_bool and b.kind == "lit" and b.value in (0, 1)) or (
        b.is_bool and a.kind == "lit" and a.value in (0, 1)
    )


def _binary_type(op: str, lt: Type, rt: Type) -> Type:
    if op in LOGIC_OPS:
        if not (lt.is_bool and rt.is_bool):
            raise ExprTypeError(f"'{op}' needs boolean operands, got {lt} and {rt}")
        return BOOL
    if op in EQ_OPS:
        if lt.is_bool and rt.is_bool or _bool_like(lt, rt):
            return BOOL
        if lt.is_int and rt.is_int:
            common_int_type(lt, rt)
            return BOOL
        raise ExprTypeError(f"'{op}' between {lt} and {rt}")
    if not (lt.is_int and rt.is_int):
        raise ExprTypeError(f"'{op}' needs integer operands, got {lt} and {rt}")
    ct = common_int_type(lt, rt)
    return BOOL if op in REL_OPS else ct


def assignable(target: Type, value: Type) -> bool:
    return (target.is_bool and value.is_bool) or (target.is_int and value.is_int)


def operand_type(op_node: Binary, table: TypeTable) -> Type:
    """Type both operands of a relational/arithmetic node are extended to."""
    lt, rt = table.of(op_node.lhs), table.of(op_node.rhs)
    if lt.is_bool or rt.is_bool:
        return BOOL
    return common_int_type(lt, rt)


# ---------------------------------------------------------------------------
# evaluation

Reader = Callable[[str, Optional[int]], object]


def evaluate(e: Expr, table: TypeTable, read: Reader, at_eval=None):
    """Evaluate a checked expression.

    ``read(name, None)`` returns a scalar, ``read(name, i)`` an array element;
    ``&&``, ``||`` and the ternary are lazy, so guarded out-of-range reads do
    not raise.  ``at_eval(component, location)`` evaluates location predicates.
    """
    if isinstance(e, IntLit):
        return e.value
    if isinstance(e, BoolLit):
        return e.value
    if isinstance(e, Var):
        return read(e.name, None)
    if isinstance(e, Index):
        i = evaluate(e.index, table, read, at_eval)
        return read(e.name, i)
    if isinstance(e, At):
        return at_eval(e.component, e.location)
    if isinstance(e, Unary):
        v = evaluate(e.operand, table, read, at_eval)
        if e.op == "!":
            return not v
        return wrap(-v, table.of(e))
    if isinstance(e, Ternary):
        if evaluate(e.cond, table, read, at_eval):
            v = evaluate(e.then, table, read, at_eval)
        else:
            v = evaluate(e.orelse, table, read, at_eval)
        ty = table.of(e)
        return v if ty.is_bool else wrap(v, ty)
    op = e.op
    if op == "&&":
        return bool(evaluate(e.lhs, table, read, at_eval)) and bool(
            evaluate(e.rhs, table, read, at_eval)
        )
    if op == "||":
        return bool(evaluate(e.lhs, table, read, at_eval)) or bool(
            evaluate(e.rhs, table, read, at_eval)
        )
    a = evaluate(e.lhs, table, read, at_eval)
    b = evaluate(e.rhs, table, read, at_eval)
    if op == "==":
        return int(a) == int(b)
    if op == "!=":
        return int(a) != int(b)
    if op == "<":
        return a < b
    if op == "<=":
        return a <= b
    if op == ">":
        return a > b
    if op == ">=":
        return a >= b
    ty = table.of(e)
    if op == "+":
        return wrap(a + b, ty)
    if op == "-":
        return wrap(a - b, ty)
    if op == "*":
        return wrap(a * b, ty)
    raise ValueError(f"unknown operator {op!r}")


def make_reader(values: Mapping[str, object]) -> Reader:
    """Reader over a flat mapping where array elements are keyed ``name[i]``."""

    def read(name, idx):
        if idx is None:
            return values[name]
        key = f"{name}[{idx}]"
        if key not in values:
            raise ArrayIndexOutOfBounds(f"index {idx} out of bounds for {name!r}")
        return values[key]

    return read


def slot(name: str, idx: Optional[int] = None) -> str:
    return name if idx is None else f"{name}[{idx}]"
