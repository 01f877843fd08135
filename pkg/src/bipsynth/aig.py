"""And-Inverter Graphs: construction, AIGER 1.9 I/O, simulation and reduction.

Literals follow the AIGER convention: ``2 * var + negated``; variable 0 is the
constant, so literal 0 is false and 1 is true.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Union

FALSE = 0
TRUE = 1

CONST, INPUT, LATCH, AND = range(4)


class AigerError(Exception):
    pass


def lit_not(a: int) -> int:
    return a ^ 1


def lit_var(a: int) -> int:
    return a >> 1


class Aig:
    def __init__(self):
        self.kind: list[int] = [CONST]
        self.fanin: list[Optional[tuple[int, int]]] = [None]
        self.inputs: list[int] = []  # variables
        self.latches: list[int] = []  # variables
        self.next: dict[int, int] = {}
        self.init: dict[int, int] = {}  # 0 or 1
        self.bad: list[int] = []  # literals
        self.outputs: list[int] = []
        self.names: dict[int, str] = {}  # input/latch variable -> symbol
        self.bad_names: list[Optional[str]] = []
        self.output_names: list[Optional[str]] = []
        self._strash: dict[tuple[int, int], int] = {}

    # -- construction ------------------------------------------------------

    def _new(self, kind: int, fanin=None) -> int:
        self.kind.append(kind)
        self.fanin.append(fanin)
        return len(self.kind) - 1

    @property
    def max_var(self) -> int:
        return len(self.kind) - 1

    def add_input(self, name: Optional[str] = None) -> int:
        v = self._new(INPUT)
        self.inputs.append(v)
        if name is not None:
            self.names[v] = name
        return 2 * v

    def add_latch(self, name: Optional[str] = None, init: int = 0) -> int:
        v = self._new(LATCH)
        self.latches.append(v)
        self.init[v] = int(init)
        if name is not None:
            self.names[v] = name
        return 2 * v

    def set_next(self, latch: int, nxt: int) -> None:
        self.next[lit_var(latch)] = nxt

    def add_bad(self, lit: int, name: Optional[str] = None) -> None:
        self.bad.append(lit)
        self.bad_names.append(name)

    def add_output(self, lit: int, name: Optional[str] = None) -> None:
        self.outputs.append(lit)
        self.output_names.append(name)

    def and_raw(self, a: int, b: int) -> int:
        """AND node exactly as given (no folding); used when reading files."""
        return 2 * self._new(AND, (a, b))

    def AND(self, a: int, b: int) -> int:
        if a == FALSE or b == FALSE or a == lit_not(b):
            return FALSE
        if a == TRUE or a == b:
            return b
        if b == TRUE:
            return a
        if a < b:
            a, b = b, a
        key = (a, b)
        hit = self._strash.get(key)
        if hit is None:
            hit = self._strash[key] = self.and_raw(a, b)
        return hit

    def OR(self, a: int, b: int) -> int:
        return lit_not(self.AND(lit_not(a), lit_not(b)))

    def XOR(self, a: int, b: int) -> int:
        return self.AND(lit_not(self.AND(a, b)), lit_not(self.AND(lit_not(a), lit_not(b))))

    def XNOR(self, a: int, b: int) -> int:
        return lit_not(self.XOR(a, b))

    def MUX(self, s: int, t: int, e: int) -> int:
        if t == e:
            return t
        return self.OR(self.AND(s, t), self.AND(lit_not(s), e))

    def AND_all(self, lits: Iterable[int]) -> int:
        out = TRUE
        for x in lits:
            out = self.AND(out, x)
        return out

    def OR_all(self, lits: Iterable[int]) -> int:
        out = FALSE
        for x in lits:
            out = self.OR(out, x)
        return out

    # -- queries -----------------------------------------------------------

    @property
    def ands(self) -> list[int]:
        return [v for v, k in enumerate(self.kind) if k == AND]

    def stats(self) -> "AigStats":
        return AigStats(len(self.inputs), len(self.latches), len(self.ands), len(self.bad), self.levels())

    def levels(self) -> int:
        level = [0] * len(self.kind)
        for v, k in enumerate(self.kind):
            if k == AND:
                a, b = self.fanin[v]
                level[v] = 1 + max(level[a >> 1], level[b >> 1])
        return max(level, default=0)

    def cone(self, roots: Iterable[int]) -> set[int]:
        """Variables in the sequential cone of influence of the root literals."""
        seen = set()
        stack = [lit_var(r) for r in roots]
        while stack:
            v = stack.pop()
            if v in seen:
                continue
            seen.add(v)
            k = self.kind[v]
            if k == AND:
                stack.extend(x >> 1 for x in self.fanin[v])
            elif k == LATCH and v in self.next:
                stack.append(self.next[v] >> 1)
        return seen


@dataclass(frozen=True)
class AigStats:
    inputs: int
    latches: int
    ands: int
    bad: int
    levels: int

    def __str__(self) -> str:
        return f"inputs={self.inputs} latches={self.latches} ands={self.ands} bad={self.bad} levels={self.levels}"


# ---------------------------------------------------------------------------
# well-formedness


def check_aig(aig: Aig) -> list[str]:
    """Structural problems (empty when the graph is well formed)."""
    problems = []
    n = len(aig.kind)

    def ok_lit(x, ctx):
        if not (0 <= x < 2 * n):
            problems.append(f"{ctx}: literal {x} out of range")
            return False
        return True

    for v, k in enumerate(aig.kind):
        if k == AND:
            for x in aig.fanin[v]:
                if ok_lit(x, f"and {2 * v}") and (x >> 1) >= v:
                    problems.append(f"and {2 * v}: operand {x} is not defined before it")
    for v in aig.latches:
        if v not in aig.next:
            problems.append(f"latch {2 * v} has no next-state function")
        else:
            ok_lit(aig.next[v], f"latch {2 * v}")
        if aig.init.get(v) not in (0, 1):
            problems.append(f"latch {2 * v} has a non-constant reset")
    for x in aig.bad:
        ok_lit(x, "bad")
    for x in aig.outputs:
        ok_lit(x, "output")
    if len(set(aig.inputs) | set(aig.latches)) != len(aig.inputs) + len(aig.latches):
        problems.append("variable used twice as input/latch")
    return problems


# ---------------------------------------------------------------------------
# AIGER writing


def _numbering(aig: Aig) -> dict[int, int]:
    """Internal variable -> AIGER variable (inputs, latches, then ANDs)."""
    m = {0: 0}
    for v in aig.inputs:
        m[v] = len(m)
    for v in aig.latches:
        m[v] = len(m)
    for v in aig.ands:
        m[v] = len(m)
    return m


def _header_tail(counts: Sequence[int]) -> str:
    counts = list(counts)
    while len(counts) > 5 and counts[-1] == 0:
        counts.pop()
    return " ".join(str(c) for c in counts)


def _symbols(aig: Aig, compat: bool) -> list[str]:
    lines = []
    for k, v in enumerate(aig.inputs):
        if v in aig.names:
            lines.append(f"i{k} {aig.names[v]}")
    for k, v in enumerate(aig.latches):
        if v in aig.names:
            lines.append(f"l{k} {aig.names[v]}")
    outs = aig.output_names + (aig.bad_names if compat else [])
    for k, name in enumerate(outs):
        if name is not None:
            lines.append(f"o{k} {name}")
    if not compat:
        for k, name in enumerate(aig.bad_names):
            if name is not None:
                lines.append(f"b{k} {name}")
    return lines


def _out_lists(aig: Aig, compat: bool) -> tuple[list[int], list[int]]:
    if compat:
        return aig.outputs + aig.bad, []
    return list(aig.outputs), list(aig.bad)


def aiger_ascii(aig: Aig, compat: bool = False, comment: Optional[str] = None) -> str:
    """``aag`` text.  ``compat`` writes bad-state properties as plain outputs."""
    m = _numbering(aig)

    def L(x):
        return 2 * m[x >> 1] + (x & 1)

    outs, bads = _out_lists(aig, compat)
    ands = aig.ands
    lines = ["aag " + _header_tail([len(m) - 1, len(aig.inputs), len(aig.latches), len(outs), len(ands), len(bads)])]
    lines += [str(2 * m[v]) for v in aig.inputs]
    for v in aig.latches:
        init = aig.init.get(v, 0)
        lines.append(f"{2 * m[v]} {L(aig.next[v])}" + (" 1" if init else ""))
    lines += [str(L(x)) for x in outs]
    lines += [str(L(x)) for x in bads]
    for v in ands:
        a, b = aig.fanin[v]
        a, b = L(a), L(b)
        if a < b:
            a, b = b, a
        lines.append(f"{2 * m[v]} {a} {b}")
    lines += _symbols(aig, compat)
    if comment:
        lines.append("c")
        lines.append(comment)
    return "\n".join(lines) + "\n"


def _varint(x: int, out: bytearray) -> None:
    while x & ~0x7F:
        out.append((x & 0x7F) | 0x80)
        x >>= 7
    out.append(x)


def aiger_binary(aig: Aig, compat: bool = False, comment: Optional[str] = None) -> bytes:
    m = _numbering(aig)

    def L(x):
        return 2 * m[x >> 1] + (x & 1)

    outs, bads = _out_lists(aig, compat)
    ands = aig.ands
    head = "aig " + _header_tail([len(m) - 1, len(aig.inputs), len(aig.latches), len(outs), len(ands), len(bads)])
    text = [head]
    for v in aig.latches:
        init = aig.init.get(v, 0)
        text.append(f"{L(aig.next[v])}" + (" 1" if init else ""))
    text += [str(L(x)) for x in outs]
    text += [str(L(x)) for x in bads]
    buf = bytearray(("\n".join(text) + "\n").encode())
    for v in ands:
        a, b = aig.fanin[v]
        a, b = L(a), L(b)
        if a < b:
            a, b = b, a
        lhs = 2 * m[v]
        _varint(lhs - a, buf)
        _varint(a - b, buf)
    tail = _symbols(aig, compat)
    if comment:
        tail += ["c", comment]
    if tail:
        buf += ("\n".join(tail) + "\n").encode()
    return bytes(buf)


def write_aiger(aig: Aig, path, binary: Optional[bool] = None, compat: bool = False, comment: Optional[str] = None) -> None:
    """Write to ``path``; the format follows the extension unless ``binary`` is given."""
    path = str(path)
    if binary is None:
        binary = path.endswith(".aig")
    data = aiger_binary(aig, compat, comment) if binary else aiger_ascii(aig, compat, comment).encode()
    with open(path, "wb") as f:
        f.write(data)


# ---------------------------------------------------------------------------
# AIGER reading


def read_aiger(data: Union[bytes, str]) -> Aig:
    """Parse ``aag`` or ``aig`` content.  Justice/fairness/constraints are rejected."""
    if isinstance(data, str):
        data = data.encode()
    stream = io.BytesIO(data)

    def line() -> str:
        raw = stream.readline()
        if not raw:
            raise AigerError("unexpected end of file")
        return raw.decode().rstrip("\n")

    head = line().split()
    if not head or head[0] not in ("aag", "aig"):
        raise AigerError("missing aag/aig header")
    binary = head[0] == "aig"
    try:
        nums = [int(x) for x in head[1:]]
    except ValueError:
        raise AigerError("malformed header") from None
    if len(nums) < 5:
        raise AigerError("header needs at least M I L O A")
    nums += [0] * (9 - len(nums))
    M, I, L, O, A, B, C, J, F = nums[:9]
    if C or J or F:
        raise AigerError("constraints, justice and fairness sections are not supported")
    if M < I + L + A:
        raise AigerError("M smaller than I + L + A")

    aig = Aig()
    # Reserve variables 1..M; ANDs are filled in afterwards.
    kinds = [None] * (M + 1)

    def parse_lit(s: str) -> int:
        try:
            x = int(s)
        except ValueError:
            raise AigerError(f"bad literal {s!r}") from None
        if not 0 <= x <= 2 * M + 1:
            raise AigerError(f"literal {x} out of range")
        return x

    input_vars = []
    if binary:
        input_vars = list(range(1, I + 1))
    else:
        for _ in range(I):
            x = parse_lit(line().strip())
            if x & 1 or x == 0:
                raise AigerError(f"invalid input literal {x}")
            input_vars.append(x >> 1)
    latch_specs = []
    for k in range(L):
        parts = line().split()
        if binary:
            parts = [str(2 * (I + k + 1))] + parts
        if len(parts) not in (2, 3):
            raise AigerError("malformed latch line")
        lv, nx = parse_lit(parts[0]), parse_lit(parts[1])
        init = parse_lit(parts[2]) if len(parts) == 3 else 0
        if lv & 1 or lv == 0:
            raise AigerError(f"invalid latch literal {lv}")
        if init not in (0, 1):
            raise AigerError(f"latch {lv}: only constant reset values are supported")
        latch_specs.append((lv >> 1, nx, init))
    outs = [parse_lit(line().strip()) for _ in range(O)]
    bads = [parse_lit(line().strip()) for _ in range(B)]
    and_specs = []
    if binary:
        for k in range(A):
            lhs = 2 * (I + L + k + 1)
            d0, d1 = _read_varint(stream), _read_varint(stream)
            a = lhs - d0
            b = a - d1
            if a < 0 or b < 0:
                raise AigerError("invalid binary AND delta")
            and_specs.append((lhs >> 1, a, b))
    else:
        for _ in range(A):
            parts = line().split()
            if len(parts) != 3:
                raise AigerError("malformed AND line")
            lhs, a, b = (parse_lit(p) for p in parts)
            if lhs & 1 or lhs == 0:
                raise AigerError(f"invalid AND literal {lhs}")
            and_specs.append((lhs >> 1, a, b))

    for v in input_vars:
        kinds[v] = ("i",)
    for v, nx, init in latch_specs:
        if kinds[v] is not None:
            raise AigerError(f"variable {v} defined twice")
        kinds[v] = ("l",)
    for v, a, b in and_specs:
        if kinds[v] is not None:
            raise AigerError(f"variable {v} defined twice")
        kinds[v] = ("a", a, b)

    # Build in a topological order, renumbering to internal variables.
    vmap = {0: 0}
    for v in input_vars:
        vmap[v] = aig.add_input() >> 1
    for v, _nx, init in latch_specs:
        vmap[v] = aig.add_latch(init=init) >> 1

    state = {}

    def build(v: int) -> int:
        stack = [v]
        while stack:
            u = stack[-1]
            if u in vmap:
                stack.pop()
                continue
            spec = kinds[u] if u < len(kinds) else None
            if spec is None:
                raise AigerError(f"variable {u} used but not defined")
            pending = [x >> 1 for x in spec[1:] if (x >> 1) not in vmap]
            if pending:
                if state.get(u) == "open":
                    raise AigerError("combinational cycle among AND gates")
                state[u] = "open"
                stack.extend(pending)
                continue
            a, b = spec[1], spec[2]
            vmap[u] = aig.and_raw(2 * vmap[a >> 1] + (a & 1), 2 * vmap[b >> 1] + (b & 1)) >> 1
            stack.pop()
        return vmap[v]

    def tr(x: int) -> int:
        return 2 * build(x >> 1) + (x & 1)

    for v, _a, _b in and_specs:
        build(v)
    for v, nx, _init in latch_specs:
        aig.next[vmap[v]] = tr(nx)
    for x in outs:
        aig.add_output(tr(x))
    for x in bads:
        aig.add_bad(tr(x))
    for a, b in ((v, aig.fanin[v]) for v in aig.ands):
        aig._strash.setdefault((max(b), min(b)), 2 * a)

    for raw in stream.read().decode().split("\n"):
        if raw == "c":
            break
        if not raw:
            continue
        kind, _, rest = raw.partition(" ")
        if len(kind) < 2 or kind[0] not in "ilob" or not kind[1:].isdigit():
            raise AigerError(f"malformed symbol line {raw!r}")
        k = int(kind[1:])
        table = {"i": aig.inputs, "l": aig.latches, "o": aig.outputs, "b": aig.bad}[kind[0]]
        if k >= len(table):
            raise AigerError(f"symbol for missing {kind[0]}{k}")
        if kind[0] in "il":
            aig.names[table[k]] = rest
        elif kind[0] == "o":
            aig.output_names[k] = rest
        else:
            aig.bad_names[k] = rest
    return aig


def _read_varint(stream) -> int:
    x, shift = 0, 0
    while True:
        ch = stream.read(1)
        if not ch:
            raise AigerError("unexpected end of binary AND section")
        c = ch[0]
        x |= (c & 0x7F) << shift
        if not c & 0x80:
            return x
        shift += 7


def load_aiger(path) -> Aig:
    with open(path, "rb") as f:
        return read_aiger(f.read())


# ---------------------------------------------------------------------------
# simulation


class AigSimulator:
    """Bit-parallel simulation: every signal is a Python int, one bit per lane."""

    def __init__(self, aig: Aig):
        self.aig = aig
        lines = ["def _eval(I, L, M):", "    v0 = 0"]
        for k, v in enumerate(aig.inputs):
            lines.append(f"    v{v} = I[{k}]")
        for k, v in enumerate(aig.latches):
            lines.append(f"    v{v} = L[{k}]")

        def ref(x: int) -> str:
            return f"(v{x >> 1} ^ M)" if x & 1 else f"v{x >> 1}"

        for v in aig.ands:
            a, b = aig.fanin[v]
            lines.append(f"    v{v} = {ref(a)} & {ref(b)}")
        nexts = "".join(f"{ref(aig.next[v])}, " for v in aig.latches)
        bads = "".join(f"{ref(x)}, " for x in aig.bad)
        outs = "".join(f"{ref(x)}, " for x in aig.outputs)
        values = ", ".join(f"v{v}" for v in range(len(aig.kind)))
        lines.append(f"    return ({nexts}), ({bads}), ({outs}), ({values},)")
        ns: dict = {}
        exec(compile("\n".join(lines), "<aig>", "exec"), ns)
        self._eval = ns["_eval"]

    def initial(self, lanes: int = 1) -> tuple:
        full = (1 << lanes) - 1
        return tuple(full if self.aig.init.get(v, 0) else 0 for v in self.aig.latches)

    def step(self, latches: Sequence[int], inputs: Sequence[int], lanes: int = 1):
        """(next latches, bad values, output values, all variable values)."""
        return self._eval(inputs, latches, (1 << lanes) - 1)

    def run(self, input_frames: Sequence[Sequence[int]], lanes: int = 1) -> list[tuple]:
        """Bad-output values per frame for the given input vectors."""
        state = self.initial(lanes)
        out = []
        for inp in input_frames:
            state, bad, _o, _v = self.step(state, inp, lanes)
            out.append(bad)
        return out


def lit_value(values: Sequence[int], x: int, mask: int = 1) -> int:
    v = values[x >> 1]
    return v ^ mask if x & 1 else v


# ---------------------------------------------------------------------------
# reduction


@dataclass
class ReduceReport:
    before: AigStats
    after: AigStats
    constant_latches: list[str] = field(default_factory=list)
    removed_latches: int = 0


def _ternary_constant_latches(aig: Aig) -> dict[int, int]:
    """Latches that provably keep their reset value (ternary simulation fixpoint)."""
    X = 2
    cand = dict(aig.init)
    while True:
        val = [X] * len(aig.kind)
        val[0] = 0
        for v in aig.latches:
            val[v] = cand.get(v, X)

        def lv(x):
            b = val[x >> 1]
            return b if b == X or not x & 1 else 1 - b

        for v in aig.ands:
            a, b = (lv(x) for x in aig.fanin[v])
            val[v] = 0 if 0 in (a, b) else (1 if a == b == 1 else X)
        drop = [v for v in cand if lv(aig.next[v]) != cand[v]]
        if not drop:
            return cand
        for v in drop:
            del cand[v]


def reduce_aig(aig: Aig, ternary: bool = True) -> tuple[Aig, ReduceReport]:
    """Constant propagation, structural hashing, cone-of-influence sweep.

    Primary inputs are all kept (in order) so traces stay aligned with the
    original circuit; unobservable latches and dangling gates are removed.
    """
    consts = _ternary_constant_latches(aig) if ternary else {}
    out = Aig()
    vmap = {0: 0}
    for v in aig.inputs:
        vmap[v] = out.add_input(aig.names.get(v)) >> 1

    roots = list(aig.bad) + list(aig.outputs)
    # Latches fixed to their reset value are substituted first, so the cone is
    # computed over the simplified graph.
    memo: dict[int, int] = {0: FALSE}
    for v in aig.inputs:
        memo[v] = 2 * vmap[v]
    for v, c in consts.items():
        memo[v] = TRUE if c else FALSE

    live = _live_latches(aig, roots, consts)
    for v in aig.latches:
        if v in live:
            memo[v] = out.add_latch(aig.names.get(v), aig.init.get(v, 0))

    def tr(x: int) -> int:
        root = x >> 1
        stack = [root]
        while stack:
            u = stack[-1]
            if u in memo:
                stack.pop()
                continue
            if aig.kind[u] != AND:
                memo[u] = FALSE  # unobservable latch; never reached from roots
                stack.pop()
                continue
            a, b = aig.fanin[u]
            pend = [y >> 1 for y in (a, b) if (y >> 1) not in memo]
            if pend:
                stack.extend(pend)
                continue
            memo[u] = out.AND(memo[a >> 1] ^ (a & 1), memo[b >> 1] ^ (b & 1))
            stack.pop()
        return memo[root] ^ (x & 1)

    for v in aig.latches:
        if v in live:
            out.set_next(memo[v], tr(aig.next[v]))
    for x, name in zip(aig.outputs, aig.output_names):
        out.add_output(tr(x), name)
    for x, name in zip(aig.bad, aig.bad_names):
        out.add_bad(tr(x), name)
    # The strash pass can leave dead gates when operands fold; rebuild once more.
    out = _sweep(out)
    report = ReduceReport(
        aig.stats(),
        out.stats(),
        [aig.names.get(v, f"l{aig.latches.index(v)}") for v in consts],
        len(aig.latches) - len(out.latches),
    )
    return out, report


def _live_latches(aig: Aig, roots: list[int], consts: dict[int, int]) -> set[int]:
    seen, stack = set(), [r >> 1 for r in roots]
    while stack:
        v = stack.pop()
        if v in seen or v in consts:
            continue
        seen.add(v)
        k = aig.kind[v]
        if k == AND:
            stack.extend(x >> 1 for x in aig.fanin[v])
        elif k == LATCH:
            stack.append(aig.next[v] >> 1)
    return {v for v in aig.latches if v in seen}


def _sweep(aig: Aig) -> Aig:
    keep = aig.cone(list(aig.bad) + list(aig.outputs))
    if all(v in keep for v in aig.ands) and all(v in keep for v in aig.latches):
        return aig
    out = Aig()
    memo = {0: 0}
    for v in aig.inputs:
        memo[v] = out.add_input(aig.names.get(v)) >> 1
    for v in aig.latches:
        if v in keep:
            memo[v] = out.add_latch(aig.names.get(v), aig.init[v]) >> 1
    for v in aig.ands:
        if v in keep:
            a, b = aig.fanin[v]
            memo[v] = out.AND(2 * memo[a >> 1] + (a & 1), 2 * memo[b >> 1] + (b & 1)) >> 1

    def tr(x):
        return 2 * memo[x >> 1] + (x & 1)

    for v in aig.latches:
        if v in keep:
            out.set_next(2 * memo[v], tr(aig.next[v]))
    for x, n in zip(aig.outputs, aig.output_names):
        out.add_output(tr(x), n)
    for x, n in zip(aig.bad, aig.bad_names):
        out.add_bad(tr(x), n)
    return out
