"""Lockstep harness: reference interpreter, OLP simulator and AIG simulation side by side.

One OLP run per seed drives everything.  The AIG is simulated bit-parallel
(one lane per seed) on the same primary-input bits, and at every
interaction-mode boundary the BIP state read from the registers must be the
interpreter's successor under the interaction the scheduler wires selected.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

from . import expr as E
from .aig import Aig, AigSimulator, lit_value
from .bip import BipSystem
from .bip2olp import CYCLE, TranslationOutput, project_state
from .olp import RandomInputs, Simulator, Trace
from .olp2aig import Bitblast
from .semantics import Interpreter


class LockstepMismatch(AssertionError):
    pass


@dataclass
class LockstepStats:
    seeds: int = 0
    circuit_steps: int = 0
    boundaries: int = 0
    interactions_fired: int = 0
    max_selected: int = 0  # largest popcount(is) seen at a boundary
    fired: dict[str, int] = field(default_factory=dict)


def olp_runs(output: TranslationOutput, seeds: Sequence[int], steps: int) -> list[Trace]:
    sim = Simulator(output.program)
    return [sim.run(steps, RandomInputs(output.program, s)) for s in seeds]


def _input_frames(bb: Bitblast, aig: Aig, traces: Sequence[Trace]) -> list[tuple[int, ...]]:
    """Per frame, one lane-packed word per AIG input (lane = trace index)."""
    names = {v: aig.names.get(v) for v in aig.inputs}
    bit_of = {}  # AIG input position -> (program input position, bit)
    slot_pos = {s: k for k, s in enumerate(bb.program.inputs)}
    by_name = {}
    for s in bb.program.inputs:
        for i, x in enumerate(bb.bitmap[s]):
            by_name[bb.aig.names[x >> 1]] = (slot_pos[s], i, bb.program.slot_type[s].width)
    for k, v in enumerate(aig.inputs):
        bit_of[k] = by_name[names[v]]
    frames = []
    for f in range(len(traces[0])):
        words = []
        for k in range(len(aig.inputs)):
            p, i, w = bit_of[k]
            word = 0
            for lane, tr in enumerate(traces):
                word |= ((E.to_bits(int(tr.input_values[f][p]), w) >> i) & 1) << lane
            words.append(word)
        frames.append(tuple(words))
    return frames


def check_aig_lockstep(bb: Bitblast, traces: Sequence[Trace], aig: Optional[Aig] = None) -> int:
    """Compare AIG latches (by symbol) and bad outputs against OLP runs.

    ``aig`` defaults to the bit-blasted network; a reduced network may be
    passed, in which case only its surviving latches are compared.  Returns
    the number of frames checked.
    """
    aig = aig if aig is not None else bb.aig
    lanes = len(traces)
    mask = (1 << lanes) - 1
    sim = AigSimulator(aig)
    frames = _input_frames(bb, aig, traces)
    # latch position -> (register position, bit index, width)
    reg_pos = {r: k for k, r in enumerate(bb.program.registers)}
    latch_src = {}
    for r in bb.program.registers:
        for i, x in enumerate(bb.bitmap[r]):
            latch_src[bb.aig.names[x >> 1]] = (reg_pos[r], i, bb.program.slot_type[r].width)
    where = [latch_src[aig.names[v]] for v in aig.latches]
    wire_pos = {w: k for k, w in enumerate(traces[0].wires)}
    props = [wire_pos[p] for p in bb.properties]

    def expected_state(f: int) -> tuple[int, ...]:
        out = []
        for p, i, w in where:
            word = 0
            for lane, tr in enumerate(traces):
                word |= ((E.to_bits(int(tr.states[f][p]), w) >> i) & 1) << lane
            out.append(word)
        return tuple(out)

    state = sim.initial(lanes)
    for f, inputs in enumerate(frames):
        if tuple(state) != expected_state(f):
            _explain(aig, where, bb, state, expected_state(f), f)
        state, bad, _o, _v = sim.step(state, inputs, lanes)
        want = tuple(
            sum((0 if tr.wire_values[f][q] else 1) << lane for lane, tr in enumerate(traces)) for q in props
        )
        if tuple(b & mask for b in bad) != want:
            raise LockstepMismatch(f"frame {f}: bad outputs {bad} differ from property wires {want}")
    if tuple(state) != expected_state(len(frames)):
        _explain(aig, where, bb, state, expected_state(len(frames)), len(frames))
    return len(frames)


def _explain(aig, where, bb, got, want, f):
    for k, v in enumerate(aig.latches):
        if got[k] != want[k]:
            raise LockstepMismatch(
                f"frame {f}: latch {aig.names.get(v)} lanes {got[k]:b} but the OLP registers give {want[k]:b}"
            )
    raise LockstepMismatch(f"frame {f}: latch state differs")


def check_oracle_lockstep(system: BipSystem, output: TranslationOutput, trace: Trace,
                          stats: Optional[LockstepStats] = None) -> LockstepStats:
    """Every macro-step of ``trace`` must be a step of the interpreter.

    Also checks at each boundary: popcount(is) <= 1, is => ip => ie, and ip
    equals the priority-maximal subset of the enabled interactions.
    """
    stats = stats or LockstepStats()
    it = Interpreter(system)
    J = len(system.interactions)
    period = 1 if output.fused else 2
    names = [a.name for a in system.interactions]
    if project_state(system, trace.state(0)) != it.initial_state():
        raise LockstepMismatch("initial registers differ from the initial BIP state")
    for f in range(0, len(trace) - period + 1, period):
        regs, wires = trace.state(f), trace.step_wires(f)
        if not output.fused and regs[CYCLE]:
            raise LockstepMismatch(f"frame {f}: expected interaction mode")
        s = project_state(system, regs)
        ie = frozenset(j for j in range(J) if wires[f"ie[{j}]"])
        ip = frozenset(j for j in range(J) if wires[f"ip[{j}]"])
        sel = [j for j in range(J) if wires[f"is[{j}]"]]
        stats.boundaries += 1
        stats.max_selected = max(stats.max_selected, len(sel))
        if ie != it.enabled_interactions(s):
            raise LockstepMismatch(f"frame {f}: ie {sorted(ie)} but enabled {sorted(it.enabled_interactions(s))}")
        if ip != it.apply_priority(ie):
            raise LockstepMismatch(f"frame {f}: ip {sorted(ip)} but maximal {sorted(it.apply_priority(ie))}")
        if len(sel) > 1:
            raise LockstepMismatch(f"frame {f}: several interactions selected {sel}")
        if sel and sel[0] not in ip:
            raise LockstepMismatch(f"frame {f}: selected {sel[0]} is not priority-enabled")
        if ip and not sel:
            raise LockstepMismatch(f"frame {f}: nothing selected although {sorted(ip)} are enabled")
        nxt = project_state(system, trace.state(f + period))
        if sel:
            want = it.step(s, sel[0])
            stats.interactions_fired += 1
            stats.fired[names[sel[0]]] = stats.fired.get(names[sel[0]], 0) + 1
        else:
            want = s
        if nxt != want:
            raise LockstepMismatch(
                f"frame {f}: after {names[sel[0]] if sel else 'no interaction'} the registers hold "
                f"{it.format_state(nxt)}, the interpreter {it.format_state(want)}"
            )
    return stats


def triple_lockstep(system: BipSystem, output: TranslationOutput, bb: Bitblast, seeds: Sequence[int],
                    bip_steps: int, reduced: Optional[Aig] = None) -> LockstepStats:
    """Oracle, OLP and AIG (and optionally the reduced AIG) agree on ``bip_steps`` macro-steps per seed."""
    period = 1 if output.fused else 2
    traces = olp_runs(output, seeds, bip_steps * period)
    stats = LockstepStats(seeds=len(seeds))
    for tr in traces:
        check_oracle_lockstep(system, output, tr, stats)
    stats.circuit_steps = check_aig_lockstep(bb, traces) * len(traces)
    if reduced is not None:
        check_aig_lockstep(bb, traces, reduced)
    return stats
