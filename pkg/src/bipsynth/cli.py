"""Command line driver: ``bipsynth {compile,simulate,check,explore}``.

Exit codes are shared by every subcommand:

    0  every property holds at the strength that was checked
    1  a counterexample, violation or deadlock was found
    2  usage error or input diagnostic
    3  a resource limit was hit (state bound, solver time)
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .aig import AigerError, aiger_ascii, aiger_binary
from .bip import BipError, BipSystem, load_invariants, load_system, with_widths
from .bip2olp import TranslationError, one_cycle_check
from .olp import OlpError, RandomInputs, Simulator, format_program
from .olp2aig import NonConstantInit
from .pipeline import Compiled, check_property, compile_system
from .report import Record
from .sat import SolverError
from .semantics import BoundExceeded, Interpreter
from .vcd import trace_frames, write_vcd

EXIT_OK, EXIT_CEX, EXIT_USAGE, EXIT_RESOURCE = 0, 1, 2, 3
DEFAULT_SEED = 1
SOLVER_ENV = "BIPSYNTH_SOLVER"


class UsageError(Exception):
    pass


def _width(text: str) -> tuple[str, int]:
    name, sep, w = text.partition("=")
    if not sep or "." not in name:
        raise argparse.ArgumentTypeError(f"expected component.var=WIDTH, got {text!r}")
    try:
        width = int(w)
    except ValueError:
        raise argparse.ArgumentTypeError(f"width must be an integer in {text!r}") from None
    if not 1 <= width <= 64:
        raise argparse.ArgumentTypeError(f"width out of range 1..64 in {text!r}")
    return name, width


def _positive(text: str) -> int:
    n = int(text)
    if n < 0:
        raise argparse.ArgumentTypeError("must be non-negative")
    return n


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bipsynth", description="Compile BIP models to circuits and model-check them.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def model_args(p, translation=True):
        p.add_argument("model", help="input .bip file")
        p.add_argument("--invariants", "-i", metavar="FILE", help="invariant file ([name:] expr per line)")
        p.add_argument("--width", action="append", type=_width, default=[], metavar="C.V=W",
                       help="override the bit width of an int variable (repeatable)")
        if translation:
            p.add_argument("--fallback", choices=("highest", "lowest"), default="highest",
                           help="interaction picked when the selector points at a disabled one")
            p.add_argument("--fuse", action="store_true", help="one-cycle translation (rejected when unsound)")

    p = sub.add_parser("compile", help="emit OLP and/or AIGER and report circuit sizes")
    model_args(p)
    p.add_argument("-o", "--output", action="append", default=[], metavar="PATH",
                   help="output file; .olp, .aag or .aig by suffix, '-' for OLP on stdout (repeatable)")
    p.add_argument("--reduce", action="store_true", help="write the reduced AIG instead of the raw one")
    p.add_argument("--aiger-compat", action="store_true", help="write bad states as plain outputs")

    p = sub.add_parser("simulate", help="random simulation of the generated program")
    model_args(p)
    p.add_argument("--steps", "-n", type=_positive, default=1000)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--vcd", metavar="PATH", help="waveform output")

    p = sub.add_parser("check", help="prove or refute the properties")
    model_args(p)
    p.add_argument("--maxk", type=_positive, default=100, help="BMC bound in circuit steps")
    p.add_argument("--kind-k", type=_positive, default=16, help="k-induction bound")
    p.add_argument("--engine", choices=("auto", "bmc", "kind"), default="auto")
    p.add_argument("--property", "-p", action="append", default=[], metavar="NAME",
                   help="check only these properties (repeatable)")
    p.add_argument("--solver", default=os.environ.get(SOLVER_ENV, "internal"),
                   help=f"'internal' or 'external:<cmd>' (default from ${SOLVER_ENV})")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--time-limit", type=float, default=300.0, help="seconds per property")
    p.add_argument("--no-reduce", action="store_true", help="check the unreduced AIG")
    p.add_argument("--out-dir", metavar="DIR", help="write <property>.vcd and <property>.trace for counterexamples")
    p.add_argument("--report", metavar="PATH", help="JSON-lines verdicts ('-' for stdout)")

    p = sub.add_parser("explore", help="explicit-state reachability with the reference interpreter")
    model_args(p, translation=False)
    p.add_argument("--max-states", type=_positive, default=100_000)
    return ap


# ---------------------------------------------------------------------------


def _load(args) -> tuple[BipSystem, list]:
    system = load_system(args.model)
    if args.width:
        system = with_widths(system, dict(args.width))
    invariants = []
    if args.invariants:
        try:
            invariants = load_invariants(args.invariants, system)
        except BipError as exc:
            exc.path = args.invariants
            raise
    return system, invariants


def _compile(args, system, invariants, reduce: bool) -> Compiled:
    if args.fuse:
        chk = one_cycle_check(system)
        if not chk.applicable:
            raise UsageError(chk.explain())
    return compile_system(system, invariants, args.fallback, args.fuse, reduce)


def _stats_line(label: str, s) -> str:
    return f"{label:<8} inputs={s.inputs} latches={s.latches} ands={s.ands} levels={s.levels} bad={s.bad}"


def cmd_compile(args, out, err) -> int:
    system, invariants = _load(args)
    c = _compile(args, system, invariants, reduce=True)
    targets = args.output or ["-"]
    report = out
    for t in targets:
        if t == "-":
            out.write(format_program(c.output.program))
            report = err
            continue
        path = Path(t)
        suffix = path.suffix.lower()
        aig = c.checked if args.reduce else c.aig
        if suffix == ".olp":
            path.write_text(format_program(c.output.program), encoding="utf-8")
        elif suffix == ".aag":
            path.write_text(aiger_ascii(aig, compat=args.aiger_compat, comment=f"{system.name}"), encoding="utf-8")
        elif suffix == ".aig":
            path.write_bytes(aiger_binary(aig, compat=args.aiger_compat, comment=f"{system.name}"))
        else:
            raise UsageError(f"cannot infer the output format of {t!r} (use .olp, .aag or .aig)")
    before, after = c.aig.stats(), c.reduced.stats()
    print(f"system {system.name}: {len(system.components)} components, {len(system.interactions)} interactions, "
          f"{'one-cycle' if c.output.fused else 'two-cycle'} translation", file=report)
    print(_stats_line("raw", before), file=report)
    print(_stats_line("reduced", after), file=report)
    print(f"properties: {', '.join(c.properties)}", file=report)
    return EXIT_OK


def cmd_simulate(args, out, err) -> int:
    system, invariants = _load(args)
    c = _compile(args, system, invariants, reduce=False)
    print(f"seed: {args.seed}", file=out)
    prog = c.output.program
    # one extra step so the wires of the last state are evaluated too
    trace = Simulator(prog).run(args.steps + 1, RandomInputs(prog, args.seed))
    first: dict[str, int] = {}
    for k in range(args.steps + 1):
        wires = trace.step_wires(k)
        for p in c.properties:
            if p not in first and not wires[p]:
                first[p] = k
    if args.vcd:
        write_vcd(args.vcd, system, trace_frames(trace, upto=args.steps), c.output)
        print(f"vcd: {args.vcd}", file=out)
    print(f"simulated {args.steps} steps", file=out)
    for p in c.properties:
        if p in first:
            print(f"{p}: violated at step {first[p]}", file=out)
        else:
            print(f"{p}: ok", file=out)
    return EXIT_CEX if first else EXIT_OK


def cmd_check(args, out, err) -> int:
    system, invariants = _load(args)
    c = _compile(args, system, invariants, reduce=not args.no_reduce)
    names = c.properties
    selected = args.property or names
    unknown = [p for p in selected if p not in names]
    if unknown:
        raise UsageError(f"unknown property {unknown[0]!r}; available: {', '.join(names)}")
    print(f"seed: {args.seed}", file=out)
    out_dir = Path(args.out_dir) if args.out_dir else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
    records = []
    code = EXIT_OK
    for name in selected:
        res = check_property(c, names.index(name), args.maxk, args.kind_k, args.engine, args.solver,
                             args.seed, args.time_limit)
        vcd_path = trace_path = None
        if res.verdict == "cex":
            code = EXIT_CEX
            if out_dir is not None:
                vcd_path = str(out_dir / f"{name}.vcd")
                trace_path = str(out_dir / f"{name}.trace")
                write_vcd(vcd_path, system, trace_frames(res.trace, upto=res.k), c.output)
                Path(trace_path).write_text(res.cex.format(), encoding="utf-8")
        elif res.verdict == "resource_limit" and code == EXIT_OK:
            code = EXIT_RESOURCE
        print(f"{res.summary()}  [{res.seconds:.2f}s]", file=out)
        if res.cex is not None:
            for k, a in enumerate(res.cex.interactions):
                print(f"  step {k}: {a}", file=out)
            if vcd_path:
                print(f"  vcd: {vcd_path}\n  trace: {trace_path}", file=out)
        records.append(Record(
            model=system.name, property=name, verdict=res.verdict, k=res.k, bip_depth=res.bip_depth,
            seconds=round(res.seconds, 3), vcd=vcd_path, trace=trace_path,
            interactions=tuple(res.cex.interactions) if res.cex else None, message=res.message,
        ))
    if args.report:
        text = "".join(r.to_json() + "\n" for r in records)
        if args.report == "-":
            out.write(text)
        else:
            Path(args.report).write_text(text, encoding="utf-8")
    return code


def cmd_explore(args, out, err) -> int:
    system, invariants = _load(args)
    it = Interpreter(system)
    try:
        res = it.explore(args.max_states, invariants)
    except BoundExceeded as exc:
        print(f"bipsynth: {exc}", file=err)
        return EXIT_RESOURCE
    print(f"reachable states: {res.reachable}", file=out)
    print(f"transitions: {res.transitions}", file=out)
    print(f"diameter: {res.diameter}", file=out)
    code = EXIT_OK
    if res.deadlock_trace is not None:
        code = EXIT_CEX
        print(f"deadlock after {len(res.deadlock_trace)} interaction(s):", file=out)
        out.write(it.format_trace(res.deadlock_trace))
    else:
        print("deadlock_free: holds", file=out)
    for inv in invariants:
        tr = res.violations.get(inv.name)
        if tr is None:
            print(f"{inv.name}: holds", file=out)
        else:
            code = EXIT_CEX
            print(f"{inv.name}: violated after {len(tr)} interaction(s):", file=out)
            out.write(it.format_trace(tr))
    return code


COMMANDS = {"compile": cmd_compile, "simulate": cmd_simulate, "check": cmd_check, "explore": cmd_explore}


def main(argv: Optional[Sequence[str]] = None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage errors, 0 on --help
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args, out, err)
    except BipError as exc:
        for d in exc.diagnostics:
            print(f"{getattr(exc, 'path', args.model)}:{d}", file=err)
        return EXIT_USAGE
    except (UsageError, TranslationError, NonConstantInit, OlpError, AigerError, SolverError) as exc:
        print(f"bipsynth: error: {exc}", file=err)
        return EXIT_USAGE
    except OSError as exc:
        print(f"bipsynth: error: {exc.strerror or exc}: {exc.filename or ''}".rstrip(": "), file=err)
        return EXIT_USAGE


def main_exit() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
