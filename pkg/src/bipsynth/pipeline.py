"""BIP model to checked circuit, in one place for the CLI and the tests."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .aig import Aig, AigStats, ReduceReport, reduce_aig
from .bip import BipSystem, Invariant
from .bip2olp import TranslationOutput, translate
from .bmc import Cex, Proved, SafeUpTo, Unknown, Verdict, bmc, kinduction
from .lift import BipCex, lift_cex
from .olp import Trace
from .olp2aig import Bitblast, bitblast
from .sat import ResourceLimit


@dataclass
class Compiled:
    system: BipSystem
    invariants: list[Invariant]
    output: TranslationOutput
    bitblast: Bitblast
    reduced: Optional[Aig] = None
    reduce_report: Optional[ReduceReport] = None

    @property
    def aig(self) -> Aig:
        return self.bitblast.aig

    @property
    def checked(self) -> Aig:
        """The network handed to the engines (reduced when available)."""
        return self.reduced if self.reduced is not None else self.bitblast.aig

    @property
    def properties(self) -> list[str]:
        return self.output.property_wires


def compile_system(
    system: BipSystem,
    invariants: Sequence[Invariant] = (),
    fallback: str = "highest",
    fuse: bool = False,
    reduce: bool = True,
) -> Compiled:
    out = translate(system, invariants, fallback, fuse)
    bb = bitblast(out.program, out.property_wires)
    c = Compiled(system, list(invariants), out, bb)
    if reduce:
        c.reduced, c.reduce_report = reduce_aig(bb.aig)
    return c


@dataclass
class PropertyResult:
    name: str
    verdict: str  # proved | safe_up_to | cex | resource_limit
    k: Optional[int] = None  # proof depth, bound, or circuit depth of the counterexample
    bip_depth: Optional[int] = None
    cex: Optional[BipCex] = None
    trace: Optional[Trace] = None
    seconds: float = 0.0
    message: str = ""
    extra: dict = field(default_factory=dict)

    def summary(self) -> str:
        if self.verdict == "proved":
            return f"{self.name}: Proved({self.k})"
        if self.verdict == "safe_up_to":
            return f"{self.name}: SafeUpTo({self.k})"
        if self.verdict == "cex":
            return f"{self.name}: Cex(depth {self.k}, {self.bip_depth} interaction(s))"
        return f"{self.name}: ResourceLimit ({self.message})"


def check_property(
    c: Compiled,
    index: int,
    max_k: int = 100,
    induction_k: int = 16,
    engine: str = "auto",
    solver: str = "internal",
    seed: int = 0,
    time_limit: Optional[float] = 300.0,
) -> PropertyResult:
    """Run the engines on one bad output.

    ``auto``: k-induction up to ``induction_k``; if inconclusive, BMC up to ``max_k``.
    """
    name = c.properties[index]
    t0 = time.monotonic()
    aig = c.checked
    try:
        verdict: Verdict
        if engine == "bmc":
            verdict = bmc(aig, index, max_k, solver, seed, time_limit)
        elif engine in ("kind", "auto"):
            verdict = kinduction(aig, index, induction_k, solver, seed, time_limit)
            if isinstance(verdict, Unknown) and engine == "auto":
                spent = time.monotonic() - t0
                left = None if time_limit is None else max(1.0, time_limit - spent)
                verdict = bmc(aig, index, max_k, solver, seed, left)
        else:
            raise ValueError(f"unknown engine {engine!r}")
    except ResourceLimit as exc:
        return PropertyResult(name, "resource_limit", seconds=time.monotonic() - t0, message=str(exc))
    res = PropertyResult(name, "", seconds=0.0)
    if isinstance(verdict, Proved):
        res.verdict, res.k = "proved", verdict.k
    elif isinstance(verdict, SafeUpTo):
        res.verdict, res.k = "safe_up_to", verdict.k
    elif isinstance(verdict, Unknown):
        res.verdict, res.k = "safe_up_to", verdict.k - 1
    else:
        assert isinstance(verdict, Cex)
        cex, trace = lift_cex(verdict.trace, c.bitblast, c.output, c.system, tuple(c.invariants))
        res.verdict, res.k, res.bip_depth, res.cex, res.trace = "cex", verdict.depth, cex.depth, cex, trace
    res.seconds = time.monotonic() - t0
    return res


def stats_pair(c: Compiled) -> tuple[AigStats, Optional[AigStats]]:
    return c.aig.stats(), (c.reduced.stats() if c.reduced is not None else None)
