"""Bounded model checking and k-induction over the bad outputs of an AIG.

Time frames are unrolled into one combinational AIG with structural hashing and
constant propagation, so the parts of the circuit fixed by the reset state fold
away before anything reaches the solver.  Only the cone of each queried bad
literal is Tseitin-encoded, incrementally, into a single solver.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

from .aig import AND, FALSE, INPUT, LATCH, TRUE, Aig, AigSimulator, lit_not
from .sat import LazyTseitin, ResourceLimit, make_solver


class VerificationError(Exception):
    pass


@dataclass
class CexTrace:
    """Primary-input bits per frame; bad output ``bad_index`` is asserted at frame ``length``."""

    bad_index: int
    inputs: list[tuple[int, ...]]  # length + 1 frames
    latches: list[tuple[int, ...]] = field(default_factory=list)  # derived, length + 1 frames

    @property
    def length(self) -> int:
        return len(self.inputs) - 1


@dataclass(frozen=True)
class SafeUpTo:
    k: int


@dataclass(frozen=True)
class Proved:
    k: int


@dataclass(frozen=True)
class Unknown:
    k: int


@dataclass(frozen=True)
class Cex:
    trace: CexTrace

    @property
    def depth(self) -> int:
        return self.trace.length


Verdict = Union[SafeUpTo, Proved, Unknown, Cex]


def replay(aig: Aig, trace: CexTrace) -> CexTrace:
    """Simulate ``trace`` on ``aig``; fill in latch values and check the bad output.

    Raises VerificationError when the bad output is not asserted at the last frame.
    """
    sim = AigSimulator(aig)
    state = sim.initial()
    latches = []
    bad = (0,) * len(aig.bad)
    for inp in trace.inputs:
        latches.append(tuple(state))
        state, bad, _o, _v = sim.step(state, inp)
    if not bad[trace.bad_index]:
        raise VerificationError(
            f"counterexample does not assert bad output {trace.bad_index} at frame {trace.length}"
        )
    return CexTrace(trace.bad_index, list(trace.inputs), latches)


class Unroller:
    """Time frames of ``aig`` as one combinational AIG.

    Frame 0 latches carry the reset values, or fresh variables with
    ``free_init`` (for the induction step).
    """

    def __init__(self, aig: Aig, free_init: bool = False):
        self.aig = aig
        self.free_init = free_init
        self.u = Aig()
        self.frames: list[list[int]] = []  # per frame: original variable -> unrolled literal
        self.input_lits: list[list[int]] = []
        self.latch_lits: list[list[int]] = []

    def frame(self, k: int) -> list[int]:
        while len(self.frames) <= k:
            self._extend()
        return self.frames[k]

    def _extend(self) -> None:
        aig, u = self.aig, self.u
        f = len(self.frames)
        m = [0] * len(aig.kind)
        ins = []
        for v in aig.inputs:
            m[v] = u.add_input()
            ins.append(m[v])
        lat = []
        for v in aig.latches:
            if f > 0:
                prev = self.frames[f - 1]
                x = aig.next[v]
                m[v] = prev[x >> 1] ^ (x & 1)
            elif self.free_init:
                m[v] = u.add_input()
            else:
                m[v] = TRUE if aig.init.get(v, 0) else FALSE
            lat.append(m[v])
        kind, fanin = aig.kind, aig.fanin
        for v in range(1, len(kind)):
            if kind[v] == AND:
                a, b = fanin[v]
                m[v] = u.AND(m[a >> 1] ^ (a & 1), m[b >> 1] ^ (b & 1))
        self.frames.append(m)
        self.input_lits.append(ins)
        self.latch_lits.append(lat)

    def lit(self, aig_lit: int, k: int) -> int:
        return self.frame(k)[aig_lit >> 1] ^ (aig_lit & 1)


class _Engine:
    def __init__(self, aig: Aig, free_init: bool, solver: str, seed: int, time_limit: Optional[float]):
        self.unroll = Unroller(aig, free_init)
        self.solver = make_solver(solver, seed=seed, time_limit=time_limit)
        self.enc = LazyTseitin(self.unroll.u, self.solver)

    def assume_true(self, ulit: int) -> bool:
        """Permanently assert an unrolled literal; False when that makes the formula UNSAT."""
        if ulit == TRUE:
            return True
        if ulit == FALSE:
            self.solver.add_clause([])
            return False
        return self.solver.add_clause([self.enc.lit(ulit)])

    def satisfiable(self, ulit: int) -> bool:
        if ulit == FALSE:
            return False
        assumptions = [] if ulit == TRUE else [self.enc.lit(ulit)]
        return self.solver.solve(assumptions)

    def input_values(self, k: int) -> list[tuple[int, ...]]:
        out = []
        for f in range(k + 1):
            out.append(tuple(int(self.enc.value(x)) for x in self.unroll.input_lits[f]))
        return out


def bmc(
    aig: Aig,
    bad_index: int = 0,
    max_k: int = 20,
    solver: str = "internal",
    seed: int = 0,
    time_limit: Optional[float] = 300.0,
) -> Verdict:
    """Least K <= max_k at which the bad output can be asserted, else SafeUpTo(max_k)."""
    if not 0 <= bad_index < len(aig.bad):
        raise ValueError(f"no bad output {bad_index}")
    eng = _Engine(aig, False, solver, seed, time_limit)
    bad = aig.bad[bad_index]
    for k in range(max_k + 1):
        b = eng.unroll.lit(bad, k)
        if eng.satisfiable(b):
            trace = CexTrace(bad_index, eng.input_values(k))
            return Cex(replay(aig, trace))
        eng.assume_true(lit_not(b))
    return SafeUpTo(max_k)


def _distinct(u: Aig, xs: list[int], ys: list[int]) -> int:
    return u.OR_all(u.XOR(x, y) for x, y in zip(xs, ys))


def kinduction(
    aig: Aig,
    bad_index: int = 0,
    max_k: int = 16,
    solver: str = "internal",
    seed: int = 0,
    time_limit: Optional[float] = 300.0,
) -> Verdict:
    """Proved(k) for the least k whose step case is UNSAT, Cex from the base case, else Unknown."""
    if not 0 <= bad_index < len(aig.bad):
        raise ValueError(f"no bad output {bad_index}")
    base = _Engine(aig, False, solver, seed, time_limit)
    step = _Engine(aig, True, solver, seed, time_limit)
    bad = aig.bad[bad_index]
    for k in range(1, max_k + 1):
        # Base: no bad state within frames 0..k-1.
        b = base.unroll.lit(bad, k - 1)
        if base.satisfiable(b):
            return Cex(replay(aig, CexTrace(bad_index, base.input_values(k - 1))))
        base.assume_true(lit_not(b))

        # Step: k good frames followed by a bad one, along a simple path.
        if not step.assume_true(lit_not(step.unroll.lit(bad, k - 1))):
            return Proved(k)
        last = step.unroll.lit(bad, k)
        while True:
            if not step.satisfiable(last):
                return Proved(k)
            states = [
                tuple(int(step.enc.value(x)) for x in step.unroll.latch_lits[f]) for f in range(k + 1)
            ]
            clash = _first_repeat(states)
            if clash is None:
                break
            i, j = clash
            u = step.unroll.u
            d = _distinct(u, step.unroll.latch_lits[i], step.unroll.latch_lits[j])
            step.assume_true(d)
    return Unknown(max_k)


def _first_repeat(states: list[tuple]) -> Optional[tuple[int, int]]:
    first: dict[tuple, int] = {}
    for j, s in enumerate(states):
        if s in first:
            return first[s], j
        first[s] = j
    return None


__all__ = [
    "Cex",
    "CexTrace",
    "Proved",
    "ResourceLimit",
    "SafeUpTo",
    "Unknown",
    "Unroller",
    "VerificationError",
    "bmc",
    "kinduction",
    "replay",
]
