"""Bit-blast a One Loop Program into an AIG.

Registers become latches (reset values from the init-list), unassigned wires
become primary inputs, and every property wire yields one bad-state literal
(its negation).  Integers are two's complement (``int<w>``) or unsigned
(``uint<w>``), least significant bit first.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from . import expr as E
from .aig import FALSE, TRUE, Aig, lit_not
from .expr import Binary, BoolLit, Expr, Index, IntLit, Ternary, Type, Unary, Var
from .olp import NonConstantInit, OlpError, OlpProgram, olp_init

Bits = list[int]


_ASCII = {"ℓ": "$loc", "τ": "$fire"}


def symbol(slot: str) -> str:
    """ASCII spelling of a slot for AIGER symbol tables (``$`` cannot clash with BIP names)."""
    for k, v in _ASCII.items():
        slot = slot.replace(k, v)
    return slot


def bit_names(slot: str, ty: Type) -> list[str]:
    """Symbol of each bit of a slot: the slot itself for bools, ``slot:i`` otherwise."""
    slot = symbol(slot)
    if ty.is_bool:
        return [slot]
    return [f"{slot}:{i}" for i in range(ty.width)]


@dataclass
class BitMap:
    """Slot name -> literals (LSB first), plus the slot types."""

    bits: dict[str, Bits]
    types: dict[str, Type]

    def __getitem__(self, slot: str) -> Bits:
        return self.bits[slot]

    def value(self, slot: str, bit_values) -> object:
        """Decode a slot from a ``lit -> 0/1`` function."""
        word = 0
        for i, x in enumerate(self.bits[slot]):
            word |= (bit_values(x) & 1) << i
        return E.from_bits(word, self.types[slot])


def lower_variables(aig: Aig, program: OlpProgram) -> BitMap:
    """Inputs then latches, in program declaration order."""
    try:
        init = olp_init(program)
    except (E.ExprError, OlpError) as exc:
        raise NonConstantInit(f"init-list is not constant: {exc}") from exc
    bm = BitMap({}, dict(program.slot_type))
    for s in program.inputs:
        bm.bits[s] = [aig.add_input(n) for n in bit_names(s, program.slot_type[s])]
    for r in program.registers:
        ty = program.slot_type[r]
        word = E.to_bits(int(init[r]), ty.width)
        bm.bits[r] = [
            aig.add_latch(n, (word >> i) & 1) for i, n in enumerate(bit_names(r, ty))
        ]
    return bm


# ---------------------------------------------------------------------------
# word-level operators


def const_bits(v: int, width: int) -> Bits:
    return [TRUE if (v >> i) & 1 else FALSE for i in range(width)]


def extend(bits: Bits, signed: bool, width: int) -> Bits:
    if len(bits) >= width:
        return bits[:width]
    pad = bits[-1] if signed and bits else FALSE
    return bits + [pad] * (width - len(bits))


def add(aig: Aig, a: Bits, b: Bits, carry: int = FALSE) -> Bits:
    out = []
    for x, y in zip(a, b):
        t = aig.XOR(x, y)
        out.append(aig.XOR(t, carry))
        carry = aig.OR(aig.AND(x, y), aig.AND(t, carry))
    return out


def sub(aig: Aig, a: Bits, b: Bits) -> Bits:
    return add(aig, a, [lit_not(y) for y in b], TRUE)


def mul(aig: Aig, a: Bits, b: Bits) -> Bits:
    w = len(a)
    acc = [FALSE] * w
    for i, y in enumerate(b):
        partial = [FALSE] * i + [aig.AND(x, y) for x in a[: w - i]]
        acc = add(aig, acc, partial)
    return acc


def equal(aig: Aig, a: Bits, b: Bits) -> int:
    return aig.AND_all(aig.XNOR(x, y) for x, y in zip(a, b))


def less_than(aig: Aig, a: Bits, b: Bits, signed: bool) -> int:
    """a < b, via the sign of a (w+1)-bit difference."""
    w = len(a) + 1
    d = sub(aig, extend(a, signed, w), extend(b, signed, w))
    return d[-1]


def mux(aig: Aig, s: int, t: Bits, e: Bits) -> Bits:
    return [aig.MUX(s, x, y) for x, y in zip(t, e)]


# ---------------------------------------------------------------------------
# expressions


class Lowering:
    def __init__(self, aig: Aig, program: OlpProgram, bitmap: BitMap, table: Optional[E.TypeTable] = None):
        self.aig = aig
        self.program = program
        self.bm = bitmap
        self.table = table if table is not None else program.table

    def slot_bits(self, slot: str) -> Bits:
        return self.bm.bits[slot]

    def bool(self, e: Expr) -> int:
        return self.word(e)[0]

    def word(self, e: Expr) -> Bits:
        """Bits of ``e`` at the width of its own type (one bit for bools)."""
        aig = self.aig
        ty = self.table.of(e)
        if isinstance(e, IntLit):
            return const_bits(e.value, ty.width)
        if isinstance(e, BoolLit):
            return [TRUE if e.value else FALSE]
        if isinstance(e, Var):
            return self.slot_bits(e.name)
        if isinstance(e, Index):
            return self.index(e)
        if isinstance(e, Unary):
            if e.op == "!":
                return [lit_not(self.bool(e.operand))]
            a = self.at(e.operand, ty.width)
            return sub(aig, [FALSE] * ty.width, a)
        if isinstance(e, Ternary):
            c = self.bool(e.cond)
            if ty.is_bool:
                return [aig.MUX(c, self.bool(e.then), self.bool(e.orelse))]
            return mux(aig, c, self.at(e.then, ty.width), self.at(e.orelse, ty.width))
        op = e.op
        if op == "&&":
            return [aig.AND(self.bool(e.lhs), self.bool(e.rhs))]
        if op == "||":
            return [aig.OR(self.bool(e.lhs), self.bool(e.rhs))]
        ot = E.operand_type(e, self.table)
        if ot.is_bool:
            a, b = self._bool_operand(e.lhs), self._bool_operand(e.rhs)
            r = aig.XNOR(a, b)
            return [r if op == "==" else lit_not(r)]
        a, b = self.at(e.lhs, ot.width), self.at(e.rhs, ot.width)
        if op == "==":
            return [equal(aig, a, b)]
        if op == "!=":
            return [lit_not(equal(aig, a, b))]
        if op == "<":
            return [less_than(aig, a, b, ot.signed)]
        if op == ">":
            return [less_than(aig, b, a, ot.signed)]
        if op == "<=":
            return [lit_not(less_than(aig, b, a, ot.signed))]
        if op == ">=":
            return [lit_not(less_than(aig, a, b, ot.signed))]
        if op == "+":
            return add(aig, a, b)
        if op == "-":
            return sub(aig, a, b)
        if op == "*":
            return mul(aig, a, b)
        raise ValueError(f"unknown operator {op!r}")

    def _bool_operand(self, e: Expr) -> int:
        if isinstance(e, IntLit):
            return TRUE if e.value else FALSE
        return self.bool(e)

    def at(self, e: Expr, width: int) -> Bits:
        """``e`` extended (by its own signedness) or truncated to ``width`` bits."""
        ty = self.table.of(e)
        return extend(self.word(e), ty.signed, width)

    def index(self, e: Index) -> Bits:
        decl = self.program.by_name[e.name]
        if isinstance(e.index, IntLit):
            return self.slot_bits(f"{e.name}[{e.index.value}]")
        it = self.table.of(e.index)
        idx = self.word(e.index)
        width = 1 if decl.type.is_bool else decl.type.width
        out = [FALSE] * width
        for i in range(decl.length):
            # Elements whose index the selector type cannot express are unreachable.
            if it.signed and i >= 1 << (len(idx) - 1) or not it.signed and i >= 1 << len(idx):
                break
            hit = equal(self.aig, idx, const_bits(i, len(idx)))
            elem = self.slot_bits(f"{e.name}[{i}]")
            out = [self.aig.OR(o, self.aig.AND(hit, x)) for o, x in zip(out, elem)]
        return out

    def assigned(self, expr: Expr, target: Type) -> Bits:
        if target.is_bool:
            return [self.bool(expr)]
        return self.at(expr, target.width)


def lower_expr(aig: Aig, program: OlpProgram, bitmap: BitMap, e: Expr, table: Optional[E.TypeTable] = None) -> Bits:
    """Bits of ``e``; an expression not taken from ``program`` is type-checked against it first."""
    if table is None and id(e) not in program.table:
        table = E.TypeTable(program.table)
        E.check(e, program.env, table)
    return Lowering(aig, program, bitmap, table).word(e)


@dataclass
class Bitblast:
    aig: Aig
    bitmap: BitMap
    program: OlpProgram
    properties: list[str]


def bitblast(program: OlpProgram, properties: Sequence[str] = ()) -> Bitblast:
    """AIG of ``program`` with one bad literal per property wire (in order)."""
    aig = Aig()
    bm = lower_variables(aig, program)
    low = Lowering(aig, program, bm)
    for s in program.wire_order:
        bm.bits[s] = low.assigned(program.wire_def[s].expr, program.slot_type[s])
    for r in program.registers:
        nxt = low.assigned(program.next_of[r].expr, program.slot_type[r])
        for latch, x in zip(bm.bits[r], nxt):
            aig.set_next(latch, x)
    for p in properties:
        if p not in program.by_name or not program.slot_type.get(p, E.int_type()).is_bool:
            raise OlpError(f"property {p!r} is not a boolean slot of the program")
        aig.add_bad(lit_not(bm.bits[p][0]), p)
    return Bitblast(aig, bm, program, list(properties))
