"""CDCL SAT solver, DIMACS I/O and Tseitin encoding of AIGs.

Variables are positive integers and literals are signed integers (DIMACS
convention) at the API boundary.  Internally literal ``2*v`` is ``v`` and
``2*v + 1`` is its negation.
"""

from __future__ import annotations

import heapq
import os
import random
import shlex
import subprocess
import tempfile
import time
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .aig import AND, Aig


class ResourceLimit(Exception):
    pass


class SolverError(Exception):
    pass


def _luby(i: int) -> int:
    """i-th element (from 0) of the Luby sequence 1 1 2 1 1 2 4 ..."""
    size, seq = 1, 0
    while size < i + 1:
        seq += 1
        size = 2 * size + 1
    while size - 1 != i:
        size = (size - 1) >> 1
        seq -= 1
        i %= size
    return 1 << seq


class Solver:
    """Incremental CDCL solver with assumptions."""

    def __init__(self, seed: int = 0, time_limit: Optional[float] = None, conflict_limit: Optional[int] = None):
        self.rng = random.Random(seed)
        self.time_limit = time_limit
        self.conflict_limit = conflict_limit
        self.nvars = 0
        self.vals: list[int] = [0, 0]  # per internal literal: 1 true, -1 false, 0 unassigned
        self.level: list[int] = [0]
        self.reason: list = [None]
        self.activity: list[float] = [0.0]
        self.phase: list[int] = [1]  # saved literal polarity bit (1 = negative)
        self.seen: list[int] = [0]
        self.watches: list[list] = [[], []]
        self.binary: list[list[int]] = [[], []]  # literal -> literals implied when it becomes false
        self.trail: list[int] = []
        self.trail_lim: list[int] = []
        self.qhead = 0
        self.heap: list[tuple[float, int]] = []
        self.var_inc = 1.0
        self.learnts: list[list[int]] = []
        self.lbd: dict[int, int] = {}  # id(learnt clause) -> literal block distance
        self.max_learnts = 4000
        self.ok = True
        self.model: list[bool] = []
        self.conflicts = 0
        self.decisions = 0
        self.propagations = 0

    # -- problem construction ----------------------------------------------

    def new_var(self) -> int:
        self.nvars += 1
        v = self.nvars
        self.vals += [0, 0]
        self.level.append(0)
        self.reason.append(None)
        self.activity.append(self.rng.random() * 1e-5)
        self.phase.append(1)
        self.seen.append(0)
        self.watches += [[], []]
        self.binary += [[], []]
        heapq.heappush(self.heap, (-self.activity[v], v))
        return v

    def ensure_vars(self, n: int) -> None:
        while self.nvars < n:
            self.new_var()

    @staticmethod
    def _int(lit: int) -> int:
        return 2 * lit if lit > 0 else -2 * lit + 1

    def add_clause(self, lits: Iterable[int]) -> bool:
        """Add a clause at decision level 0; returns False once the formula is UNSAT."""
        if not self.ok:
            return False
        self._cancel_until(0)
        clause = []
        seen = set()
        for x in lits:
            if x == 0:
                raise SolverError("literal 0 is not allowed")
            if abs(x) > self.nvars:
                self.ensure_vars(abs(x))
            lit = self._int(x)
            if lit ^ 1 in seen:
                return True  # tautology
            if lit in seen:
                continue
            v = self.vals[lit]
            if v == 1:
                return True
            if v == -1:
                continue  # false at level 0
            seen.add(lit)
            clause.append(lit)
        if not clause:
            self.ok = False
            return False
        if len(clause) == 1:
            self._enqueue(clause[0], None)
            if self._propagate() is not None:
                self.ok = False
            return self.ok
        self._attach(clause)
        return True

    def _attach(self, clause: list[int]) -> None:
        if len(clause) == 2:
            a, b = clause
            self.binary[a].append(b)
            self.binary[b].append(a)
        else:
            self.watches[clause[0]].append(clause)
            self.watches[clause[1]].append(clause)

    def add_clauses(self, clauses: Iterable[Iterable[int]]) -> bool:
        for c in clauses:
            self.add_clause(c)
        return self.ok

    # -- core ----------------------------------------------------------------

    def _enqueue(self, lit: int, reason) -> None:
        self.vals[lit] = 1
        self.vals[lit ^ 1] = -1
        v = lit >> 1
        self.level[v] = len(self.trail_lim)
        self.reason[v] = reason
        self.trail.append(lit)

    def _propagate(self):
        vals, watches, binary, trail = self.vals, self.watches, self.binary, self.trail
        level, reason = self.level, self.reason
        while self.qhead < len(trail):
            p = trail[self.qhead]
            self.qhead += 1
            false_lit = p ^ 1
            self.propagations += 1
            dl = len(self.trail_lim)
            for q in binary[false_lit]:
                vq = vals[q]
                if vq == 1:
                    continue
                if vq == -1:
                    self.qhead = len(trail)
                    return (q, false_lit)
                vals[q] = 1
                vals[q ^ 1] = -1
                level[q >> 1] = dl
                reason[q >> 1] = (q, false_lit)
                trail.append(q)
            ws = watches[false_lit]
            i = j = 0
            n = len(ws)
            while i < n:
                c = ws[i]
                i += 1
                if c[0] == false_lit:
                    c[0] = c[1]
                    c[1] = false_lit
                first = c[0]
                if vals[first] == 1:
                    ws[j] = c
                    j += 1
                    continue
                for k in range(2, len(c)):
                    lk = c[k]
                    if vals[lk] != -1:
                        c[1] = lk
                        c[k] = false_lit
                        watches[lk].append(c)
                        break
                else:
                    ws[j] = c
                    j += 1
                    if vals[first] == -1:
                        while i < n:
                            ws[j] = ws[i]
                            j += 1
                            i += 1
                        del ws[j:]
                        self.qhead = len(trail)
                        return c
                    vals[first] = 1
                    vals[first ^ 1] = -1
                    level[first >> 1] = dl
                    reason[first >> 1] = c
                    trail.append(first)
            del ws[j:]
        return None

    def _bump_var(self, v: int) -> None:
        a = self.activity[v] + self.var_inc
        self.activity[v] = a
        if a > 1e100:
            self.activity = [x * 1e-100 for x in self.activity]
            self.var_inc *= 1e-100
            self.heap = [(-self.activity[u], u) for u in range(1, self.nvars + 1) if not self.vals[2 * u]]
            heapq.heapify(self.heap)
        elif not self.vals[2 * v]:
            heapq.heappush(self.heap, (-a, v))

    def _analyze(self, confl: list[int]) -> tuple[list[int], int]:
        seen, level, reason, trail = self.seen, self.level, self.reason, self.trail
        dl = len(self.trail_lim)
        learnt = [0]
        path = 0
        p = -1
        idx = len(trail) - 1
        to_clear = []
        while True:
            start = 0 if p == -1 else 1
            for k in range(start, len(confl)):
                q = confl[k]
                v = q >> 1
                if not seen[v] and level[v] > 0:
                    seen[v] = 1
                    to_clear.append(v)
                    self._bump_var(v)
                    if level[v] >= dl:
                        path += 1
                    else:
                        learnt.append(q)
            while not seen[trail[idx] >> 1]:
                idx -= 1
            p = trail[idx]
            idx -= 1
            confl = reason[p >> 1]
            path -= 1
            if path == 0:
                break
        learnt[0] = p ^ 1

        # Drop literals implied by the rest of the clause (recursive minimization).
        if len(learnt) > 2:
            levels = 0
            for q in learnt[1:]:
                levels |= 1 << (level[q >> 1] & 31)
            keep = [learnt[0]]
            for q in learnt[1:]:
                if reason[q >> 1] is None or not self._redundant(q, levels, to_clear):
                    keep.append(q)
            learnt = keep
        for v in to_clear:
            seen[v] = 0

        if len(learnt) == 1:
            return learnt, 0
        mi = max(range(1, len(learnt)), key=lambda k: level[learnt[k] >> 1])
        learnt[1], learnt[mi] = learnt[mi], learnt[1]
        return learnt, level[learnt[1] >> 1]

    def _redundant(self, p: int, levels: int, to_clear: list[int]) -> bool:
        """Whether ``p`` follows from other clause literals through reason clauses."""
        seen, level, reason = self.seen, self.level, self.reason
        top = len(to_clear)
        stack = [p]
        while stack:
            r = reason[stack.pop() >> 1]
            for k in range(1, len(r)):
                x = r[k]
                v = x >> 1
                if seen[v] or not level[v]:
                    continue
                if reason[v] is not None and (1 << (level[v] & 31)) & levels:
                    seen[v] = 1
                    stack.append(x)
                    to_clear.append(v)
                else:
                    for u in to_clear[top:]:
                        seen[u] = 0
                    del to_clear[top:]
                    return False
        return True

    def _cancel_until(self, lvl: int) -> None:
        if len(self.trail_lim) <= lvl:
            return
        vals, phase, act, heap = self.vals, self.phase, self.activity, self.heap
        lim = self.trail_lim[lvl]
        for k in range(len(self.trail) - 1, lim - 1, -1):
            lit = self.trail[k]
            v = lit >> 1
            vals[lit] = 0
            vals[lit ^ 1] = 0
            phase[v] = lit & 1
            self.reason[v] = None
            heapq.heappush(heap, (-act[v], v))
        del self.trail[lim:]
        del self.trail_lim[lvl:]
        self.qhead = lim

    def _pick(self) -> int:
        heap, vals = self.heap, self.vals
        while heap:
            _a, v = heapq.heappop(heap)
            if not vals[2 * v]:
                return 2 * v + self.phase[v]
        return -1

    def _reduce_db(self) -> None:
        locked = set()
        for lit in self.trail:
            r = self.reason[lit >> 1]
            if r is not None:
                locked.add(id(r))
        lbd = self.lbd
        self.learnts.sort(key=lambda c: (lbd[id(c)], len(c)))
        half = len(self.learnts) // 2
        drop = {id(c) for c in self.learnts[half:] if lbd[id(c)] > 2 and id(c) not in locked}
        if not drop:
            return
        for k in drop:
            del lbd[k]
        self.learnts = [c for c in self.learnts if id(c) not in drop]
        for w in range(len(self.watches)):
            ws = self.watches[w]
            if ws:
                self.watches[w] = [c for c in ws if id(c) not in drop]

    def _check_limits(self, deadline) -> None:
        if deadline is not None and time.monotonic() > deadline:
            raise ResourceLimit("SAT time limit exceeded")
        if self.conflict_limit is not None and self.conflicts > self.conflict_limit:
            raise ResourceLimit("SAT conflict limit exceeded")

    def solve(self, assumptions: Sequence[int] = ()) -> bool:
        """True iff the clauses plus the assumption literals are satisfiable."""
        self.model = []
        if not self.ok:
            return False
        for a in assumptions:
            self.ensure_vars(abs(a))
        assumps = [self._int(a) for a in assumptions]
        deadline = None if self.time_limit is None else time.monotonic() + self.time_limit
        self._cancel_until(0)
        if self._propagate() is not None:
            self.ok = False
            return False
        restart = 0
        try:
            while True:
                budget = 100 * _luby(restart)
                restart += 1
                status = self._search(budget, assumps, deadline)
                if status is not None:
                    return status
                self._cancel_until(0)
        finally:
            self._cancel_until(0)

    def _search(self, budget: int, assumps: list[int], deadline) -> Optional[bool]:
        conflicts = 0
        while True:
            confl = self._propagate()
            if confl is not None:
                self.conflicts += 1
                conflicts += 1
                if not self.trail_lim:
                    self.ok = False
                    return False
                learnt, back = self._analyze(confl)
                self._cancel_until(back)
                if len(learnt) == 1:
                    self._enqueue(learnt[0], None)
                else:
                    self._attach(learnt)
                    if len(learnt) > 2:
                        self.learnts.append(learnt)
                        self.lbd[id(learnt)] = len({self.level[x >> 1] for x in learnt})
                    self._enqueue(learnt[0], learnt if len(learnt) > 2 else (learnt[0], learnt[1]))
                self.var_inc /= 0.95
                if self.conflicts % 256 == 0:
                    self._check_limits(deadline)
                continue
            if conflicts >= budget:
                return None
            if len(self.learnts) - len(self.trail) >= self.max_learnts:
                self._reduce_db()
                self.max_learnts = int(self.max_learnts * 1.1)
            dl = len(self.trail_lim)
            if dl < len(assumps):
                p = assumps[dl]
                if self.vals[p] == 1:
                    self.trail_lim.append(len(self.trail))
                    continue
                if self.vals[p] == -1:
                    return False
                nxt = p
            else:
                nxt = self._pick()
                if nxt == -1:
                    self.model = [False] + [self.vals[2 * v] == 1 for v in range(1, self.nvars + 1)]
                    return True
                self.decisions += 1
                if self.decisions % 4096 == 0:
                    self._check_limits(deadline)
            self.trail_lim.append(len(self.trail))
            self._enqueue(nxt, None)

    def value(self, lit: int) -> bool:
        v = self.model[abs(lit)] if abs(lit) < len(self.model) else False
        return v if lit > 0 else not v


# ---------------------------------------------------------------------------
# DIMACS and external solvers


def to_dimacs(nvars: int, clauses: Sequence[Sequence[int]], comments: Sequence[str] = ()) -> str:
    lines = [f"c {c}" for c in comments]
    lines.append(f"p cnf {nvars} {len(clauses)}")
    lines += [" ".join(map(str, c)) + " 0" for c in clauses]
    return "\n".join(lines) + "\n"


def parse_dimacs(text: str) -> tuple[int, list[list[int]]]:
    nvars, nclauses = None, None
    clauses, cur = [], []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("c") or line.startswith("%"):
            continue
        if line.startswith("p"):
            parts = line.split()
            if len(parts) != 4 or parts[1] != "cnf":
                raise SolverError(f"bad problem line {line!r}")
            nvars, nclauses = int(parts[2]), int(parts[3])
            continue
        for tok in line.split():
            x = int(tok)
            if x == 0:
                clauses.append(cur)
                cur = []
            else:
                cur.append(x)
    if cur:
        clauses.append(cur)
    if nvars is None:
        raise SolverError("missing 'p cnf' header")
    if nclauses != len(clauses):
        raise SolverError(f"header announces {nclauses} clauses, found {len(clauses)}")
    return nvars, clauses


def parse_solver_output(text: str, returncode: int) -> Optional[dict[int, bool]]:
    """Model from SAT-competition style output, or None when UNSAT."""
    status = None
    model: dict[int, bool] = {}
    for line in text.splitlines():
        if line.startswith("s "):
            status = line[2:].strip()
        elif line.startswith("v "):
            for tok in line[2:].split():
                x = int(tok)
                if x:
                    model[abs(x)] = x > 0
    if status is None:
        status = {10: "SATISFIABLE", 20: "UNSATISFIABLE"}.get(returncode)
    if status == "SATISFIABLE":
        return model
    if status == "UNSATISFIABLE":
        return None
    raise SolverError(f"external solver gave no verdict (exit status {returncode})")


class ExternalSolver:
    """Same interface as Solver, but every query runs ``cmd <file.cnf>``.

    Assumptions are passed as unit clauses, so the solver is not incremental.
    """

    def __init__(self, cmd: str, time_limit: Optional[float] = None, **_ignored):
        self.cmd = shlex.split(cmd)
        if not self.cmd:
            raise SolverError("empty external solver command")
        self.time_limit = time_limit
        self.nvars = 0
        self.clauses: list[list[int]] = []
        self.model: list[bool] = []

    def new_var(self) -> int:
        self.nvars += 1
        return self.nvars

    def ensure_vars(self, n: int) -> None:
        self.nvars = max(self.nvars, n)

    def add_clause(self, lits: Iterable[int]) -> bool:
        c = list(lits)
        for x in c:
            self.ensure_vars(abs(x))
        self.clauses.append(c)
        return True

    def add_clauses(self, clauses) -> bool:
        for c in clauses:
            self.add_clause(c)
        return True

    def solve(self, assumptions: Sequence[int] = ()) -> bool:
        clauses = self.clauses + [[a] for a in assumptions]
        fd, path = tempfile.mkstemp(suffix=".cnf")
        try:
            with os.fdopen(fd, "w") as f:
                f.write(to_dimacs(self.nvars, clauses))
            try:
                proc = subprocess.run(
                    self.cmd + [path], capture_output=True, text=True, timeout=self.time_limit
                )
            except subprocess.TimeoutExpired:
                raise ResourceLimit("external solver time limit exceeded") from None
            except OSError as exc:
                raise SolverError(f"cannot run external solver: {exc}") from None
        finally:
            os.unlink(path)
        model = parse_solver_output(proc.stdout, proc.returncode)
        if model is None:
            self.model = []
            return False
        self.model = [False] + [model.get(v, False) for v in range(1, self.nvars + 1)]
        return True

    def value(self, lit: int) -> bool:
        v = self.model[abs(lit)] if abs(lit) < len(self.model) else False
        return v if lit > 0 else not v


def make_solver(spec: str = "internal", seed: int = 0, time_limit: Optional[float] = None):
    """``internal`` or ``external:<command>``."""
    if spec == "internal":
        return Solver(seed=seed, time_limit=time_limit)
    if spec.startswith("external:"):
        return ExternalSolver(spec[len("external:"):], time_limit=time_limit)
    raise SolverError(f"unknown solver {spec!r}")


# ---------------------------------------------------------------------------
# Tseitin encoding


def and_clauses(z: int, a: int, b: int) -> list[list[int]]:
    """z <-> a & b"""
    return [[-z, a], [-z, b], [z, -a, -b]]


@dataclass
class CnfInstance:
    """Plain unrolling of an AIG: one CNF variable per (node, frame).

    Variable 1 is the constant (forced false).  Every AND gate gives three
    clauses per frame, every latch one reset unit at frame 0 and two linking
    clauses per later frame.
    """

    num_vars: int = 0
    clauses: list[list[int]] = field(default_factory=list)
    var_of: dict[tuple[int, int], int] = field(default_factory=dict)  # (aig var, frame) -> cnf var

    def lit(self, aig_lit: int, frame: int) -> int:
        v = self.var_of[(aig_lit >> 1, 0 if aig_lit >> 1 == 0 else frame)]
        return -v if aig_lit & 1 else v

    def dimacs(self) -> str:
        return to_dimacs(self.num_vars, self.clauses)


def tseitin(aig: Aig, frames: int = 1, assert_bad: Optional[int] = None) -> CnfInstance:
    """CNF of ``frames`` time frames from the reset state.

    With ``assert_bad`` the bad literal of that index is asserted in the last frame.
    """
    if frames < 1:
        raise ValueError("frames must be positive")
    cnf = CnfInstance()

    def fresh(key):
        cnf.num_vars += 1
        cnf.var_of[key] = cnf.num_vars
        return cnf.num_vars

    fresh((0, 0))
    cnf.clauses.append([-1])
    ands = aig.ands
    for f in range(frames):
        for v in aig.inputs:
            fresh((v, f))
        for v in aig.latches:
            fresh((v, f))
        for v in ands:
            fresh((v, f))
        if f == 0:
            for v in aig.latches:
                x = cnf.var_of[(v, 0)]
                cnf.clauses.append([x] if aig.init.get(v, 0) else [-x])
        else:
            for v in aig.latches:
                x = cnf.var_of[(v, f)]
                n = cnf.lit(aig.next[v], f - 1)
                cnf.clauses += [[-x, n], [x, -n]]
        for v in ands:
            a, b = aig.fanin[v]
            cnf.clauses += and_clauses(cnf.var_of[(v, f)], cnf.lit(a, f), cnf.lit(b, f))
    if assert_bad is not None:
        cnf.clauses.append([cnf.lit(aig.bad[assert_bad], frames - 1)])
    return cnf


class LazyTseitin:
    """Encodes the cone of requested literals of a combinational AIG into a solver."""

    def __init__(self, aig: Aig, solver):
        self.aig = aig
        self.solver = solver
        self.var: dict[int, int] = {}
        self.clauses_added = 0

    def lit(self, aig_lit: int) -> int:
        """Solver literal for ``aig_lit`` (constants must be handled by the caller)."""
        root = aig_lit >> 1
        if root == 0:
            raise ValueError("constant literal has no solver variable")
        aig, var, solver = self.aig, self.var, self.solver
        stack = [root]
        while stack:
            u = stack[-1]
            if u in var:
                stack.pop()
                continue
            if aig.kind[u] != AND:
                var[u] = solver.new_var()
                stack.pop()
                continue
            a, b = aig.fanin[u]
            pend = [x >> 1 for x in (a, b) if (x >> 1) not in var]
            if pend:
                stack.extend(pend)
                continue
            z = var[u] = solver.new_var()
            for c in and_clauses(z, self._l(a), self._l(b)):
                solver.add_clause(c)
            self.clauses_added += 3
            stack.pop()
        x = var[root]
        return -x if aig_lit & 1 else x

    def _l(self, x: int) -> int:
        v = x >> 1
        if v == 0:
            # Constants only survive folding as operands of nothing; guard anyway.
            if 0 not in self.var:
                self.var[0] = self.solver.new_var()
                self.solver.add_clause([-self.var[0]])
            c = self.var[0]
        else:
            c = self.var[v]
        return -c if x & 1 else c

    def value(self, aig_lit: int) -> bool:
        v = aig_lit >> 1
        if v == 0:
            return bool(aig_lit & 1)
        if v not in self.var:
            return bool(aig_lit & 1)
        b = self.solver.value(self.var[v])
        return b != bool(aig_lit & 1)
