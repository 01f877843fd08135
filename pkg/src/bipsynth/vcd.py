"""Value Change Dump output for OLP traces and lifted BIP counterexamples.

Layout: one top scope named after the system holding the scheduler signals
(``cycle``, ``selector``, ``ie``/``ip``/``is`` as vectors with bit j for
interaction j, and the property wires), and one nested scope per component
with its variables, an integer ``loc`` signal and a 1-bit ``at_<place>`` alias
per place.  One simulation step is one time unit.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence, TextIO, Union

from . import expr as E
from .bip import BipSystem
from .bip2olp import CYCLE, SELECTOR, TranslationOutput, loc_name
from .olp import Trace

VERSION = "bipsynth vcd/1"


@dataclass
class Signal:
    scope: str  # "" for the top scope, else the component name
    name: str
    width: int
    kind: str  # "wire" | "integer"
    ident: str = ""


def _ident(k: int) -> str:
    chars = []
    k += 1
    while k:
        k, r = divmod(k - 1, 94)
        chars.append(chr(33 + r))
    return "".join(chars)


def _bits(value, width: int) -> str:
    if value is None:
        return "x"
    return format(E.to_bits(int(value), width), "b")


class VcdWriter:
    def __init__(self, top: str, signals: Sequence[Signal]):
        self.top = top
        self.signals = list(signals)
        for k, s in enumerate(self.signals):
            s.ident = _ident(k)

    def header(self) -> str:
        lines = [f"$version {VERSION} $end", "$timescale 1ns $end", f"$scope module {self.top} $end"]
        for s in self.signals:
            if not s.scope:
                lines.append(self._var(s))
        scopes = []
        for s in self.signals:
            if s.scope and s.scope not in scopes:
                scopes.append(s.scope)
        for sc in scopes:
            lines.append(f"$scope module {sc} $end")
            lines += [self._var(s) for s in self.signals if s.scope == sc]
            lines.append("$upscope $end")
        lines += ["$upscope $end", "$enddefinitions $end"]
        return "\n".join(lines) + "\n"

    @staticmethod
    def _var(s: Signal) -> str:
        rng = f" [{s.width - 1}:0]" if s.width > 1 else ""
        return f"$var {s.kind} {s.width} {s.ident} {s.name}{rng} $end"

    def _change(self, s: Signal, value) -> str:
        if s.width == 1 and s.kind == "wire":
            return f"{'x' if value is None else int(bool(value))}{s.ident}"
        return f"b{_bits(value, s.width)} {s.ident}"

    def dump(self, frames: Sequence[Sequence[object]], out: TextIO) -> None:
        """``frames[t][k]`` is the value of signal k at time t (None = unknown)."""
        out.write(self.header())
        prev: list = [object()] * len(self.signals)
        for t, frame in enumerate(frames):
            out.write(f"#{t}\n")
            if t == 0:
                out.write("$dumpvars\n")
            for k, s in enumerate(self.signals):
                if t == 0 or frame[k] != prev[k]:
                    out.write(self._change(s, frame[k]) + "\n")
            if t == 0:
                out.write("$end\n")
            prev = list(frame)
        if not frames:
            out.write("#0\n$dumpvars\n$end\n")


def _signals_for(system: BipSystem, output: Optional[TranslationOutput]) -> list[tuple[Signal, object]]:
    """(signal, extractor) pairs; extractors read a flat slot valuation."""
    J = len(system.interactions)
    sigs: list[tuple[Signal, object]] = []
    if output is not None:
        prog = output.program
        if CYCLE in prog.by_name:
            sigs.append((Signal("", CYCLE, 1, "wire"), lambda v: v.get(CYCLE)))
        if SELECTOR in prog.by_name:
            w = prog.slot_type[SELECTOR].width
            sigs.append((Signal("", SELECTOR, w, "wire"), lambda v: v.get(SELECTOR)))
        if J:
            for arr in ("ie", "ip", "is"):
                sigs.append((Signal("", arr, J, "wire"), _vector(arr, J)))
        for p in output.property_wires:
            sigs.append((Signal("", p, 1, "wire"), lambda v, p=p: v.get(p)))
    for c in system.components:
        for var in c.variables:
            key = f"{c.name}.{var.name}"
            if var.type.is_bool:
                sig = Signal(c.name, var.name, 1, "wire")
            else:
                sig = Signal(c.name, var.name, var.type.width, "integer")
            sigs.append((sig, lambda v, key=key: v.get(key)))
        lw = max(1, (len(c.locations) - 1).bit_length())
        lkey = loc_name(c.name)
        sigs.append((Signal(c.name, "loc", lw, "wire"), lambda v, k=lkey: v.get(k)))
        for i, place in enumerate(c.locations):
            sigs.append(
                (
                    Signal(c.name, f"at_{place}", 1, "wire"),
                    lambda v, k=lkey, i=i: None if v.get(k) is None else v.get(k) == i,
                )
            )
    return sigs


def _vector(arr: str, n: int):
    def get(v):
        bits = [v.get(f"{arr}[{j}]") for j in range(n)]
        if any(b is None for b in bits):
            return None
        return sum(int(bool(b)) << j for j, b in enumerate(bits))

    return get


def trace_frames(trace: Trace, upto: Optional[int] = None) -> list[dict[str, object]]:
    """Flat valuations per frame: registers, plus inputs and wires where computed."""
    n = len(trace.states) if upto is None else upto + 1
    out = []
    for k in range(n):
        v = dict(trace.state(k))
        if k < len(trace):
            v.update(trace.step_inputs(k))
            v.update(trace.step_wires(k))
        out.append(v)
    return out


def write_vcd(
    target: Union[str, TextIO],
    system: BipSystem,
    frames: Sequence[Mapping[str, object]],
    output: Optional[TranslationOutput] = None,
) -> None:
    """Dump flat valuations (``component.var``, ``component.ℓ``, wires) to ``target``."""
    pairs = _signals_for(system, output)
    writer = VcdWriter(system.name, [s for s, _ in pairs])
    rows = [[get(f) for _, get in pairs] for f in frames]
    if isinstance(target, str):
        with open(target, "w") as f:
            writer.dump(rows, f)
    else:
        writer.dump(rows, target)


def bip_frames(system: BipSystem, states) -> list[dict[str, object]]:
    """Flat valuations of oracle states (one frame per BIP step)."""
    out = []
    for s in states:
        v: dict[str, object] = {}
        for ci, c in enumerate(system.components):
            v[loc_name(c.name)] = s.locations[ci]
            for k, var in enumerate(c.variables):
                v[f"{c.name}.{var.name}"] = s.values[ci][k]
        out.append(v)
    return out


# ---------------------------------------------------------------------------
# reading (used to check what we write)


class VcdError(Exception):
    pass


@dataclass
class VcdData:
    timescale: str
    signals: dict[str, tuple[int, str]]  # hierarchical name -> (width, ident)
    changes: dict[str, list[tuple[int, str]]]  # ident -> [(time, value)]

    def value_at(self, name: str, t: int) -> Optional[str]:
        _w, ident = self.signals[name]
        out = None
        for time_, val in self.changes.get(ident, []):
            if time_ > t:
                break
            out = val
        return out

    def int_at(self, name: str, t: int, signed: bool = False) -> Optional[int]:
        v = self.value_at(name, t)
        if v is None or "x" in v:
            return None
        width = self.signals[name][0]
        x = int(v, 2)
        if signed and x >> (width - 1):
            x -= 1 << width
        return x


def parse_vcd(text: str) -> VcdData:
    """Strict reader for the subset of VCD that viewers rely on."""
    toks = text.split()
    i = 0
    scopes: list[str] = []
    signals: dict[str, tuple[int, str]] = {}
    widths: dict[str, int] = {}
    timescale = ""
    while True:
        if i >= len(toks):
            raise VcdError("missing $enddefinitions")
        tok = toks[i]
        if tok == "$enddefinitions":
            if toks[i + 1] != "$end":
                raise VcdError("malformed $enddefinitions")
            i += 2
            break
        if tok in ("$version", "$date", "$comment", "$timescale"):
            j = toks.index("$end", i)
            if tok == "$timescale":
                timescale = "".join(toks[i + 1 : j])
            i = j + 1
        elif tok == "$scope":
            scopes.append(toks[i + 2])
            if toks[i + 3] != "$end":
                raise VcdError("malformed $scope")
            i += 4
        elif tok == "$upscope":
            if not scopes:
                raise VcdError("unbalanced $upscope")
            scopes.pop()
            i += 2
        elif tok == "$var":
            j = toks.index("$end", i)
            _kind, width, ident, name = toks[i + 1 : i + 5]
            full = ".".join(scopes + [name])
            if full in signals:
                raise VcdError(f"duplicate signal {full}")
            signals[full] = (int(width), ident)
            widths[ident] = int(width)
            i = j + 1
        else:
            raise VcdError(f"unexpected token {tok!r} in header")
    if scopes:
        raise VcdError("unclosed $scope")
    changes: dict[str, list[tuple[int, str]]] = {}
    t = -1
    while i < len(toks):
        tok = toks[i]
        if tok.startswith("#"):
            nt = int(tok[1:])
            if nt < t:
                raise VcdError("time goes backwards")
            t = nt
            i += 1
        elif tok in ("$dumpvars", "$end", "$dumpall", "$dumpon", "$dumpoff"):
            i += 1
        elif tok[0] in "bB":
            ident = toks[i + 1]
            if ident not in widths:
                raise VcdError(f"unknown identifier {ident!r}")
            val = tok[1:].lower()
            if len(val) > widths[ident] or set(val) - set("01xz"):
                raise VcdError(f"bad vector value {tok!r}")
            changes.setdefault(ident, []).append((t, val.rjust(widths[ident], "0" if val[0] in "01" else val[0])))
            i += 2
        elif tok[0] in "01xzXZ":
            ident = tok[1:]
            if ident not in widths:
                raise VcdError(f"unknown identifier {ident!r}")
            changes.setdefault(ident, []).append((t, tok[0].lower()))
            i += 1
        else:
            raise VcdError(f"unexpected token {tok!r}")
        if t < 0:
            raise VcdError("value change before the first timestamp")
    return VcdData(timescale, signals, changes)


def render_vcd(system: BipSystem, frames, output: Optional[TranslationOutput] = None) -> str:
    buf = io.StringIO()
    write_vcd(buf, system, frames, output)
    return buf.getvalue()
