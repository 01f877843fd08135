"""BIP component systems compiled to sequential circuits and model-checked.

Pipeline: ``.bip`` source -> reference semantics (oracle) -> OLP register
program -> and-inverter graph (AIGER) -> SAT-based BMC / k-induction, with
counterexamples lifted back to BIP interaction sequences.
"""

__version__ = "0.1.0"

from .bip import BipError, BipSystem, Invariant, load_invariants, load_system, parse_invariants, parse_system
from .bip2olp import TranslationError, one_cycle_check, one_cycle_opt, translate
from .bmc import Cex, Proved, SafeUpTo, Unknown, bmc, kinduction
from .olp import format_program, parse_program, simulate
from .olp2aig import bitblast
from .pipeline import Compiled, check_property, compile_system
from .semantics import Interpreter, explore

__all__ = [
    "BipError", "BipSystem", "Cex", "Compiled", "Interpreter", "Invariant", "Proved", "SafeUpTo",
    "TranslationError", "Unknown", "bitblast", "bmc", "check_property", "compile_system", "explore",
    "format_program", "kinduction", "load_invariants", "load_system", "one_cycle_check", "one_cycle_opt",
    "parse_invariants", "parse_program", "parse_system", "simulate", "translate",
]
