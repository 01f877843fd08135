"""Map circuit counterexamples back to BIP executions and validate them on the oracle."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

from . import expr as E
from .bip import BipSystem, Invariant
from .bip2olp import (
    CYCLE,
    DEADLOCK_FREE,
    TranslationOutput,
    project_state,
    selected_interaction,
)
from .bmc import CexTrace
from .olp import Simulator, Trace, VectorInputs
from .olp2aig import Bitblast
from .semantics import GlobalState, Interpreter, SemanticsError


class LiftMismatch(Exception):
    """The circuit trace does not correspond to a run of the BIP system."""


def decode_inputs(bb: Bitblast, trace: CexTrace) -> list[dict[str, object]]:
    """Per frame, OLP primary-input values from the AIG input bits."""
    pos = {v: k for k, v in enumerate(bb.aig.inputs)}
    out = []
    for frame in trace.inputs:
        vals = {}
        for s in bb.program.inputs:
            word = 0
            for i, x in enumerate(bb.bitmap[s]):
                word |= frame[pos[x >> 1]] << i
            vals[s] = E.from_bits(word, bb.program.slot_type[s])
        out.append(vals)
    return out


def olp_trace(bb: Bitblast, trace: CexTrace) -> Trace:
    """Register and wire values of the OLP along the counterexample (wires at every frame)."""
    frames = decode_inputs(bb, trace)
    return Simulator(bb.program).run(len(frames), VectorInputs(bb.program, frames))


@dataclass
class BipCex:
    system: BipSystem
    property: str
    states: list[GlobalState]
    interactions: list[str] = field(default_factory=list)
    circuit_depth: int = 0

    @property
    def depth(self) -> int:
        return len(self.interactions)

    def format(self) -> str:
        it = Interpreter(self.system)
        lines = [f"property {self.property} violated after {self.depth} interaction(s)"]
        lines.append(f"init: {it.format_state(self.states[0])}")
        for k, name in enumerate(self.interactions):
            lines.append(f"step {k}: {name}")
            lines.append(f"  {it.format_state(self.states[k + 1])}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        return json.dumps(
            {
                "property": self.property,
                "interactions": self.interactions,
                "states": [_state_json(self.system, s) for s in self.states],
                "circuit_depth": self.circuit_depth,
            },
            indent=1,
        )


def _state_json(system: BipSystem, s: GlobalState) -> dict:
    out = {}
    for ci, c in enumerate(system.components):
        out[c.name] = {
            "location": c.locations[s.locations[ci]],
            "vars": {v.name: s.values[ci][k] for k, v in enumerate(c.variables)},
        }
    return out


def validate_bip_cex(cex: BipCex, invariants: tuple[Invariant, ...] = ()) -> None:
    """Replay on the oracle; raise LiftMismatch on any divergence."""
    it = Interpreter(cex.system)
    if cex.states[0] != it.initial_state():
        raise LiftMismatch("counterexample does not start in the initial state")
    for k, name in enumerate(cex.interactions):
        j = cex.system.interaction_index(name)
        s = cex.states[k]
        if j not in it.maximal(s):
            raise LiftMismatch(f"step {k}: {name} is not enabled and maximal")
        try:
            nxt = it.step(s, j)
        except SemanticsError as exc:
            raise LiftMismatch(f"step {k}: {exc}") from exc
        if nxt != cex.states[k + 1]:
            raise LiftMismatch(
                f"step {k}: circuit reached {it.format_state(cex.states[k + 1])}, oracle {it.format_state(nxt)}"
            )
    final = cex.states[-1]
    if cex.property == DEADLOCK_FREE:
        if it.maximal(final):
            raise LiftMismatch("final state is not a deadlock")
    else:
        inv = next((i for i in invariants if i.name == cex.property), None)
        if inv is not None:
            table = it.check_invariants([inv])
            if it.eval(inv.expr, final, table):
                raise LiftMismatch(f"final state satisfies {inv.name}")


def lift_cex(
    trace: CexTrace,
    bb: Bitblast,
    output: TranslationOutput,
    system: BipSystem,
    invariants: tuple[Invariant, ...] = (),
) -> tuple[BipCex, Trace]:
    """BIP execution behind a circuit counterexample, plus the OLP trace it came from."""
    sim = olp_trace(bb, trace)
    K = trace.length
    prop = bb.properties[trace.bad_index]
    if sim.step_wires(K)[prop]:
        raise LiftMismatch(f"OLP replay does not violate {prop} at frame {K}")

    fused = output.fused
    states = [project_state(system, sim.state(0))]
    names = []
    f = 0
    while f < K:
        regs, wires = sim.state(f), sim.step_wires(f)
        if not fused and regs[CYCLE]:
            raise LiftMismatch(f"frame {f} is not an interaction-mode boundary")
        j = selected_interaction(wires)
        f_next = f + (1 if fused else 2)
        if f_next > K:
            raise LiftMismatch(f"counterexample ends inside a macro-step (frame {K})")
        nxt = project_state(system, sim.state(f_next))
        if j is None:
            if nxt != states[-1]:
                raise LiftMismatch(f"frame {f}: state changed without an interaction")
        else:
            names.append(system.interactions[j].name)
            states.append(nxt)
        f = f_next
    cex = BipCex(system, prop, states, names, K)
    validate_bip_cex(cex, tuple(invariants))
    return cex, sim
