"""One Loop Programs: declarations, wire definitions, and simultaneous
init/next assignment lists, with an interpreter, a compiled simulator and a
text format.

Concrete syntax::

    /*** decl-list ***/
    int timer.t;                 // int = int<32>; also int<w>, uint<w>, bool
    wire bool ie[2];

    /*** wiredef-list ***/
    ie[0] = timer.timer.e;

    do-together {
      timer.t = 0;
    }

    while(true) {
      do-together {
        timer.t = cycle == 0 ? timer.t : timer.t + 1;
      }
    }

A wire without a definition is a primary input that takes a fresh value in
every iteration.  All right-hand sides of a do-together block read the
pre-state; their targets commit at once.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Optional, Sequence, Union

from . import expr as E
from .expr import Expr, Type, VarInfo, slot


class OlpError(Exception):
    pass


class NonConstantInit(OlpError):
    """An init-list right-hand side depends on a register or a primary input."""


class UninitializedRegister(OlpError):
    pass


@dataclass(frozen=True)
class Decl:
    name: str
    type: Type
    length: Optional[int] = None
    wire: bool = False

    def slots(self) -> list[str]:
        if self.length is None:
            return [self.name]
        return [slot(self.name, i) for i in range(self.length)]


@dataclass(frozen=True)
class Assign:
    target: str
    index: Optional[int]
    expr: Expr

    @property
    def slot(self) -> str:
        return slot(self.target, self.index)


def assign(target: str, e: Expr, index: Optional[int] = None) -> Assign:
    return Assign(target, index, e)


class OlpProgram:
    """A validated, immutable OLP."""

    def __init__(
        self,
        decls: Iterable[Decl],
        wiredefs: Iterable[Assign] = (),
        inits: Iterable[Assign] = (),
        nexts: Iterable[Assign] = (),
    ):
        self.decls = tuple(decls)
        self.wiredefs = tuple(wiredefs)
        self.inits = tuple(inits)
        self.nexts = tuple(nexts)
        self.table = E.TypeTable()
        self._validate()

    # -- structure ---------------------------------------------------------

    def _validate(self) -> None:
        self.by_name: dict[str, Decl] = {}
        for d in self.decls:
            if d.name in self.by_name:
                raise OlpError(f"duplicate declaration {d.name!r}")
            if d.length is not None and d.length < 1:
                raise OlpError(f"array {d.name!r} must have positive length")
            self.by_name[d.name] = d
        env = self.env

        def check_target(a: Assign, want_wire: bool, where: str) -> Decl:
            d = self.by_name.get(a.target)
            if d is None:
                raise OlpError(f"{where}: undeclared target {a.target!r}")
            if d.wire != want_wire:
                kind = "wire" if d.wire else "register"
                raise OlpError(f"{where}: {kind} {a.target!r} cannot be assigned here")
            if (d.length is None) != (a.index is None):
                raise OlpError(f"{where}: bad indexing of {a.target!r}")
            if a.index is not None and not 0 <= a.index < d.length:
                raise OlpError(f"{where}: index {a.index} out of bounds for {a.target!r}")
            try:
                ty = E.check(a.expr, env, self.table)
            except E.ExprTypeError as exc:
                raise OlpError(f"{where}: {a.slot}: {exc.message}") from None
            if not E.assignable(d.type, ty):
                raise OlpError(f"{where}: cannot assign {ty} to {a.slot}: {d.type}")
            return d

        self.wire_def: dict[str, Assign] = {}
        for a in self.wiredefs:
            check_target(a, True, "wiredef-list")
            if a.slot in self.wire_def:
                raise OlpError(f"wire {a.slot} is the target of more than one assignment")
            self.wire_def[a.slot] = a

        self.registers: list[str] = []
        self.inputs: list[str] = []
        self.slot_type: dict[str, Type] = {}
        for d in self.decls:
            for s in d.slots():
                self.slot_type[s] = d.type
                if not d.wire:
                    self.registers.append(s)
                elif s not in self.wire_def:
                    self.inputs.append(s)

        for lst, where, attr in ((self.inits, "init-list", "init_of"), (self.nexts, "next-list", "next_of")):
            seen = {}
            for a in lst:
                check_target(a, False, where)
                if a.slot in seen:
                    raise OlpError(f"{where}: register {a.slot} assigned more than once")
                seen[a.slot] = a
            setattr(self, attr, seen)
        for r in self.registers:
            if r not in self.init_of:
                raise UninitializedRegister(f"register {r} has no init assignment")
            if r not in self.next_of:
                raise OlpError(f"register {r} has no next assignment")

        self.wire_order = self._topo_order()
        for a in self.inits:
            leaves = self.leaves(a.expr)
            if leaves:
                raise NonConstantInit(f"init of {a.slot} depends on {sorted(leaves)[0]}; init values must be closed")

    @property
    def env(self):
        def lookup(name):
            d = self.by_name.get(name)
            return None if d is None else VarInfo(d.type, d.length)

        return lookup

    def reads(self, e: Expr) -> set[str]:
        """Slots ``e`` reads directly (dynamic indexing reads every element)."""
        out = set()
        for node in E.walk(e):
            if isinstance(node, E.Var):
                out.add(node.name)
            elif isinstance(node, E.Index):
                if isinstance(node.index, E.IntLit):
                    out.add(slot(node.name, node.index.value))
                else:
                    out.update(self.by_name[node.name].slots())
        return out

    def leaves(self, e: Expr) -> set[str]:
        """Registers and primary inputs ``e`` depends on, looking through wires."""
        out, seen, stack = set(), set(), list(self.reads(e))
        while stack:
            s = stack.pop()
            if s in seen:
                continue
            seen.add(s)
            if s in self.wire_def:
                stack.extend(self.reads(self.wire_def[s].expr))
            else:
                out.add(s)
        return out

    def _topo_order(self) -> list[str]:
        deps = {s: [d for d in self.reads(a.expr) if d in self.wire_def] for s, a in self.wire_def.items()}
        order, state = [], {}
        for root in self.wire_def:
            if root in state:
                continue
            stack = [(root, iter(deps[root]))]
            state[root] = 1
            while stack:
                node, it = stack[-1]
                nxt = next(it, None)
                if nxt is None:
                    stack.pop()
                    state[node] = 2
                    order.append(node)
                elif state.get(nxt) == 1:
                    cyc = [n for n, _ in stack]
                    cyc = cyc[cyc.index(nxt):] + [nxt]
                    raise OlpError("combinational cycle among wires: " + " -> ".join(cyc))
                elif nxt not in state:
                    state[nxt] = 1
                    stack.append((nxt, iter(deps[nxt])))
        return order

    def __eq__(self, other) -> bool:
        return isinstance(other, OlpProgram) and (
            self.decls,
            self.wiredefs,
            self.inits,
            self.nexts,
        ) == (other.decls, other.wiredefs, other.inits, other.nexts)

    def __hash__(self):
        return hash((self.decls, self.wiredefs, self.inits, self.nexts))

    def __str__(self) -> str:
        return format_program(self)


# ---------------------------------------------------------------------------
# interpretation


class _Context:
    """Register + input values with wires computed on demand."""

    def __init__(self, program: OlpProgram, values: Mapping[str, object]):
        self.program = program
        self.values = dict(values)

    def read(self, name: str, idx: Optional[int]):
        p = self.program
        key = name if idx is None else slot(name, idx)
        if key in self.values:
            return self.values[key]
        if idx is not None:
            d = p.by_name.get(name)
            if d is None or not isinstance(idx, int) or not 0 <= idx < (d.length or 0):
                raise E.ArrayIndexOutOfBounds(f"index {idx} out of bounds for {name!r}")
        a = p.wire_def.get(key)
        if a is None:
            raise OlpError(f"no value for {key}")
        v = E.convert(E.evaluate(a.expr, p.table, self.read), p.slot_type[key])
        self.values[key] = v
        return v

    def eval(self, e: Expr):
        if id(e) not in self.program.table:
            E.check(e, self.program.env, self.program.table)
        return E.evaluate(e, self.program.table, self.read)

    def wires(self) -> dict[str, object]:
        return {s: self.read(s.split("[")[0], _slot_index(s)) for s in self.program.wire_order}


def _slot_index(s: str) -> Optional[int]:
    if s.endswith("]"):
        return int(s[s.index("[") + 1 : -1])
    return None


def eval_expr(program: OlpProgram, e: Expr, valuation: Mapping[str, object]):
    """Evaluate ``e`` given every register and primary input in ``valuation``."""
    return _Context(program, valuation).eval(e)


def olp_init(program: OlpProgram) -> dict[str, object]:
    ctx = _Context(program, {})
    return {
        r: E.convert(ctx.eval(program.init_of[r].expr), program.slot_type[r]) for r in program.registers
    }


def olp_step(program: OlpProgram, state: Mapping[str, object], inputs: Mapping[str, object]) -> dict[str, object]:
    """One loop iteration: all next-list right-hand sides read ``state``."""
    ctx = _Context(program, {**state, **inputs})
    new = {r: E.convert(ctx.eval(program.next_of[r].expr), program.slot_type[r]) for r in program.registers}
    return new


def wire_values(program: OlpProgram, state: Mapping[str, object], inputs: Mapping[str, object]) -> dict[str, object]:
    return _Context(program, {**state, **inputs}).wires()


# ---------------------------------------------------------------------------
# compiled simulation


def _pyname(s: str) -> str:
    out = []
    for ch in s:
        out.append(ch if ch.isalnum() and ch.isascii() else f"_{ord(ch):x}_")
    return "v_" + "".join(out)


def _wrap_src(src: str, ty: Type) -> str:
    if ty.is_bool:
        return f"bool({src})"
    mask = (1 << ty.width) - 1
    if ty.kind == "uint":
        return f"(({src}) & {mask})"
    half = 1 << (ty.width - 1)
    return f"(((({src}) + {half}) & {mask}) - {half})"


class _Codegen:
    def __init__(self, program: OlpProgram):
        self.p = program

    def expr(self, e: Expr) -> str:
        p = self.p
        if isinstance(e, E.IntLit):
            return repr(e.value)
        if isinstance(e, E.BoolLit):
            return repr(e.value)
        if isinstance(e, E.Var):
            return _pyname(e.name)
        if isinstance(e, E.Index):
            if isinstance(e.index, E.IntLit):
                s = slot(e.name, e.index.value)
                if s not in p.slot_type:
                    return f"_oob({e.index.value!r}, {e.name!r})"
                return _pyname(s)
            elems = ", ".join(_pyname(s) for s in p.by_name[e.name].slots())
            return f"_rd(({elems},), {self.expr(e.index)}, {e.name!r})"
        if isinstance(e, E.Unary):
            if e.op == "!":
                return f"(not {self.expr(e.operand)})"
            return _wrap_src(f"-{self.expr(e.operand)}", p.table.of(e))
        if isinstance(e, E.Ternary):
            return f"({self.expr(e.then)} if {self.expr(e.cond)} else {self.expr(e.orelse)})"
        a, b = self.expr(e.lhs), self.expr(e.rhs)
        if e.op == "&&":
            return f"({a} and {b})"
        if e.op == "||":
            return f"({a} or {b})"
        if e.op in E.REL_OPS or e.op in E.EQ_OPS:
            return f"({a} {e.op} {b})"
        return _wrap_src(f"{a} {e.op} {b}", p.table.of(e))


def _rd(elems, i, name):
    if isinstance(i, bool) or not 0 <= i < len(elems):
        raise E.ArrayIndexOutOfBounds(f"index {i} out of bounds for {name!r}")
    return elems[i]


def _oob(i, name):
    raise E.ArrayIndexOutOfBounds(f"index {i} out of bounds for {name!r}")


@dataclass
class Trace:
    registers: list[str]
    inputs: list[str]
    wires: list[str]
    states: list[tuple] = field(default_factory=list)  # len steps + 1
    input_values: list[tuple] = field(default_factory=list)  # len steps
    wire_values: list[tuple] = field(default_factory=list)  # len steps

    def state(self, k: int) -> dict[str, object]:
        return dict(zip(self.registers, self.states[k]))

    def step_inputs(self, k: int) -> dict[str, object]:
        return dict(zip(self.inputs, self.input_values[k]))

    def step_wires(self, k: int) -> dict[str, object]:
        return dict(zip(self.wires, self.wire_values[k]))

    def __len__(self) -> int:
        return len(self.input_values)


class Simulator:
    """OLP compiled to a Python step function; behaves exactly like ``olp_step``."""

    def __init__(self, program: OlpProgram):
        self.program = program
        p = program
        gen = _Codegen(p)
        lines = ["def _step(R, P):"]
        for k, r in enumerate(p.registers):
            lines.append(f"    {_pyname(r)} = R[{k}]")
        for k, s in enumerate(p.inputs):
            lines.append(f"    {_pyname(s)} = P[{k}]")
        for s in p.wire_order:
            a = p.wire_def[s]
            lines.append(f"    {_pyname(s)} = {_wrap_src(gen.expr(a.expr), p.slot_type[s])}")
        nexts = ", ".join(_wrap_src(gen.expr(p.next_of[r].expr), p.slot_type[r]) for r in p.registers)
        wires = ", ".join(_pyname(s) for s in p.wire_order)
        lines.append(f"    return ({nexts}{',' if p.registers else ''}), ({wires}{',' if p.wire_order else ''})")
        self.source = "\n".join(lines)
        ns = {"_rd": _rd, "_oob": _oob}
        exec(compile(self.source, "<olp>", "exec"), ns)
        self._step = ns["_step"]

    def initial(self) -> tuple:
        init = olp_init(self.program)
        return tuple(init[r] for r in self.program.registers)

    def step(self, state: tuple, inputs: tuple) -> tuple[tuple, tuple]:
        """Returns (next registers, wire values under state+inputs)."""
        return self._step(state, inputs)

    def run(self, steps: int, inputs: "InputSource") -> Trace:
        p = self.program
        trace = Trace(list(p.registers), list(p.inputs), list(p.wire_order))
        state = self.initial()
        trace.states.append(state)
        for k in range(steps):
            pi = inputs.vector(k)
            state, wires = self._step(state, pi)
            trace.input_values.append(pi)
            trace.wire_values.append(wires)
            trace.states.append(state)
        return trace


class InputSource:
    """Deterministic stream of primary-input vectors."""

    def vector(self, k: int) -> tuple:
        raise NotImplementedError


class RandomInputs(InputSource):
    """Uniform over each input's bit patterns, reproducible from ``seed``."""

    def __init__(self, program: OlpProgram, seed: int):
        self.types = [program.slot_type[s] for s in program.inputs]
        self.rng = random.Random(seed)
        self.cache: list[tuple] = []

    def vector(self, k: int) -> tuple:
        while len(self.cache) <= k:
            self.cache.append(
                tuple(E.from_bits(self.rng.getrandbits(t.width), t) for t in self.types)
            )
        return self.cache[k]


class VectorInputs(InputSource):
    def __init__(self, program: OlpProgram, vectors: Sequence[Union[Mapping[str, object], Sequence]]):
        self.vectors = []
        for v in vectors:
            if isinstance(v, Mapping):
                v = tuple(E.convert(v.get(s, 0), program.slot_type[s]) for s in program.inputs)
            self.vectors.append(tuple(v))

    def vector(self, k: int) -> tuple:
        return self.vectors[k]


def simulate(program: OlpProgram, steps: int, inputs: Union[InputSource, int]) -> Trace:
    """Run ``steps`` iterations; an int ``inputs`` seeds a RandomInputs source."""
    if isinstance(inputs, int):
        inputs = RandomInputs(program, inputs)
    return Simulator(program).run(steps, inputs)


# ---------------------------------------------------------------------------
# text format


def format_type(ty: Type) -> str:
    if ty.is_bool:
        return "bool"
    if ty.kind == "int" and ty.width == E.DEFAULT_INT_WIDTH:
        return "int"
    return f"{ty.kind}<{ty.width}>"


def format_program(p: OlpProgram) -> str:
    out = ["/*** decl-list ***/"]
    for d in p.decls:
        arr = f"[{d.length}]" if d.length is not None else ""
        out.append(f"{'wire ' if d.wire else ''}{format_type(d.type)} {d.name}{arr};")
    out += ["", "/*** wiredef-list ***/"]
    out += [f"{a.slot} = {E.format_expr(a.expr)};" for a in p.wiredefs]
    out += ["", "do-together {", "  /*** init-list ***/"]
    out += [f"  {a.slot} = {E.format_expr(a.expr)};" for a in p.inits]
    out += ["}", "", "while(true) {", "  do-together {", "    /*** next-list ***/"]
    out += [f"    {a.slot} = {E.format_expr(a.expr)};" for a in p.nexts]
    out += ["  }", "}"]
    return "\n".join(out) + "\n"


def _parse_olp_type(ts: E.TokenStream) -> Type:
    name = ts.ident()
    if name == "bool":
        return E.BOOL
    if name in ("int", "uint"):
        if ts.accept("<"):
            w = ts.number()
            ts.expect(">")
            return Type(name, w)
        if name == "uint":
            raise ts.error("uint needs an explicit width")
        return E.int_type()
    raise ts.error(f"unknown type {name!r}")


def _at_do_together(ts: E.TokenStream) -> bool:
    return ts.at("do") and ts.peek().text == "-" and ts.peek(2).text == "together"


def _expect_do_together(ts: E.TokenStream) -> None:
    ts.expect("do")
    ts.expect("-")
    ts.expect("together")
    ts.expect("{")


def _parse_assigns(ts: E.TokenStream, stop) -> list[Assign]:
    out = []
    while not stop():
        name = ts.dotted()
        idx = None
        if ts.accept("["):
            idx = ts.number()
            ts.expect("]")
        ts.expect("=")
        out.append(Assign(name, idx, E.parse_expr(ts)))
        ts.expect(";")
    return out


def parse_program(text: str) -> OlpProgram:
    ts = E.TokenStream(E.tokenize(text))
    decls = []
    while ts.at("wire") or ts.at("bool") or ts.at("int") or ts.at("uint"):
        wire = ts.accept("wire")
        ty = _parse_olp_type(ts)
        name = ts.dotted()
        length = None
        if ts.accept("["):
            length = ts.number()
            ts.expect("]")
        ts.expect(";")
        decls.append(Decl(name, ty, length, wire))
    wiredefs = _parse_assigns(ts, lambda: _at_do_together(ts) or ts.tok.kind == "eof")
    _expect_do_together(ts)
    inits = _parse_assigns(ts, lambda: ts.at("}"))
    ts.expect("}")
    ts.expect("while")
    ts.expect("(")
    ts.expect("true")
    ts.expect(")")
    ts.expect("{")
    _expect_do_together(ts)
    nexts = _parse_assigns(ts, lambda: ts.at("}"))
    ts.expect("}")
    ts.expect("}")
    if ts.tok.kind != "eof":
        raise ts.error("trailing input after program")
    return OlpProgram(decls, wiredefs, inits, nexts)
