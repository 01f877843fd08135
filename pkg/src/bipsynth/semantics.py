"""Reference interpreter for BIP systems and a brute-force state explorer.

This is the ground truth the circuit pipeline is checked against, so it follows
the operational rules directly: a port is enabled when some transition on it
leaves the current place with a true guard; an interaction is enabled when all
its ports are and its guard holds; priority keeps only maximal interactions;
firing commits the data transfer first and then each involved component's
transition.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Optional, Sequence

from . import expr as E
from .bip import BipSystem, Invariant, qualify


class SemanticsError(Exception):
    pass


class PreconditionViolated(SemanticsError):
    pass


class Ambiguity(SemanticsError):
    pass


class BoundExceeded(SemanticsError):
    pass


class GlobalState(NamedTuple):
    """Per-component place indices and variable values (declaration order)."""

    locations: tuple[int, ...]
    values: tuple[tuple, ...]


@dataclass
class ExploreResult:
    reachable: int
    diameter: int
    deadlock_trace: Optional[list[int]] = None
    violations: dict[str, list[int]] = field(default_factory=dict)
    transitions: int = 0

    @property
    def violation_trace(self) -> Optional[list[int]]:
        """Shortest trace to the first violated invariant (declaration order)."""
        return next(iter(self.violations.values()), None)


class Interpreter:
    def __init__(self, system: BipSystem):
        self.system = system
        self.comp_index = {c.name: i for i, c in enumerate(system.components)}
        self.var_index = [
            {v.name: k for k, v in enumerate(c.variables)} for c in system.components
        ]
        self.var_types = [[v.type for v in c.variables] for c in system.components]
        self.priority = system.priority_closure()

        # Checked, qualified expressions.  All share one global type environment.
        env = E.env_from(system.global_env())
        self.table = E.TypeTable()
        self.transitions = []  # per component: list of (port, src, dest, guard, actions)
        for c in system.components:
            ts = []
            for t in c.transitions:
                g = qualify(t.guard, c.name)
                E.check(g, env, self.table)
                acts = []
                for x, rhs in t.actions:
                    q = qualify(rhs, c.name)
                    E.check(q, env, self.table)
                    acts.append((self.var_index[self.comp_index[c.name]][x], q))
                ts.append((t.port, c.location_index(t.src), c.location_index(t.dest), g, acts))
            self.transitions.append(ts)
        self.interactions = []
        for a in system.interactions:
            E.check(a.guard, env, self.table)
            transfers = []
            for cname, vname, rhs in a.transfers:
                E.check(rhs, env, self.table)
                ci = self.comp_index[cname]
                transfers.append((ci, self.var_index[ci][vname], rhs))
            ports = [(self.comp_index[c], p) for c, p in a.ports]
            self.interactions.append((ports, a.guard, transfers))

    # -- states ------------------------------------------------------------

    def initial_state(self) -> GlobalState:
        locs, vals = [], []
        for c in self.system.components:
            locs.append(c.location_index(c.initial))
            vals.append(
                tuple(E.convert(v.init if v.init is not None else 0, v.type) for v in c.variables)
            )
        return GlobalState(tuple(locs), tuple(vals))

    def _reader(self, state: GlobalState):
        def read(name, idx):
            cname, vname = name.split(".", 1)
            ci = self.comp_index[cname]
            return state.values[ci][self.var_index[ci][vname]]

        return read

    def _at(self, state: GlobalState):
        def at(cname, loc):
            ci = self.comp_index[cname]
            return state.locations[ci] == self.system.components[ci].location_index(loc)

        return at

    def eval(self, e: E.Expr, state: GlobalState, table: Optional[E.TypeTable] = None):
        return E.evaluate(e, table or self.table, self._reader(state), self._at(state))

    def valuation(self, state: GlobalState) -> dict[str, object]:
        """Flat ``component.var`` view of a state."""
        out = {}
        for ci, c in enumerate(self.system.components):
            for k, v in enumerate(c.variables):
                out[f"{c.name}.{v.name}"] = state.values[ci][k]
        return out

    # -- semantics ---------------------------------------------------------

    def enabled_transitions(self, state: GlobalState, ci: int, port: str) -> list[int]:
        read = self._reader(state)
        out = []
        for k, (p, src, _dest, guard, _acts) in enumerate(self.transitions[ci]):
            if p == port and src == state.locations[ci] and E.evaluate(guard, self.table, read):
                out.append(k)
        return out

    def port_enabled(self, state: GlobalState, ci: int, port: str) -> bool:
        return bool(self.enabled_transitions(state, ci, port))

    def enabled_interactions(self, state: GlobalState) -> frozenset[int]:
        read = self._reader(state)
        out = set()
        for j, (ports, guard, _tr) in enumerate(self.interactions):
            if all(self.port_enabled(state, ci, p) for ci, p in ports) and E.evaluate(
                guard, self.table, read
            ):
                out.add(j)
        return frozenset(out)

    def apply_priority(self, enabled: Iterable[int]) -> frozenset[int]:
        enabled = frozenset(enabled)
        return frozenset(
            j for j in enabled if not any((j, k) in self.priority for k in enabled)
        )

    def maximal(self, state: GlobalState) -> frozenset[int]:
        return self.apply_priority(self.enabled_interactions(state))

    def step(self, state: GlobalState, j: int) -> GlobalState:
        if j not in self.maximal(state):
            raise PreconditionViolated(
                f"interaction {self.system.interactions[j].name!r} is not enabled and maximal"
            )
        ports, _guard, transfers = self.interactions[j]
        # Transition choice uses the pre-state guards.
        chosen = {}
        for ci, p in ports:
            ks = self.enabled_transitions(state, ci, p)
            if len(ks) > 1:
                raise Ambiguity(
                    f"{self.system.components[ci].name}: transitions {ks} on port {p!r} are all enabled"
                )
            chosen[ci] = ks[0]

        read = self._reader(state)
        values = [list(v) for v in state.values]
        updates = [(ci, k, E.evaluate(rhs, self.table, read)) for ci, k, rhs in transfers]
        for ci, k, v in updates:
            values[ci][k] = E.convert(v, self.var_types[ci][k])
        mid = GlobalState(state.locations, tuple(tuple(v) for v in values))

        read = self._reader(mid)
        locs = list(state.locations)
        for ci, k in chosen.items():
            _p, _src, dest, _g, acts = self.transitions[ci][k]
            new = [(x, E.evaluate(rhs, self.table, read)) for x, rhs in acts]
            for x, v in new:
                values[ci][x] = E.convert(v, self.var_types[ci][x])
            locs[ci] = dest
        return GlobalState(tuple(locs), tuple(tuple(v) for v in values))

    # -- exploration -------------------------------------------------------

    def check_invariants(self, invariants: Sequence[Invariant]):
        env = E.env_from(self.system.global_env())
        table = E.TypeTable()
        for inv in invariants:
            E.check(inv.expr, env, table, at_resolver=lambda c, l: None)
        return table

    def explore(
        self, max_states: int = 100_000, invariants: Sequence[Invariant] = ()
    ) -> ExploreResult:
        """Breadth-first search over all priority-maximal interaction choices."""
        if max_states <= 0:
            raise ValueError("max_states must be positive")
        inv_table = self.check_invariants(invariants)
        init = self.initial_state()
        parent: dict[GlobalState, Optional[tuple[GlobalState, int]]] = {init: None}
        depth = {init: 0}
        queue = deque([init])
        result = ExploreResult(reachable=0, diameter=0)

        def trace_to(s):
            out = []
            while parent[s] is not None:
                s, j = parent[s]
                out.append(j)
            return out[::-1]

        while queue:
            s = queue.popleft()
            result.reachable += 1
            result.diameter = max(result.diameter, depth[s])
            for inv in invariants:
                if inv.name not in result.violations and not self.eval(inv.expr, s, inv_table):
                    result.violations[inv.name] = trace_to(s)
            succ = sorted(self.maximal(s))
            if not succ and result.deadlock_trace is None:
                result.deadlock_trace = trace_to(s)
            for j in succ:
                t = self.step(s, j)
                result.transitions += 1
                if t not in parent:
                    if len(parent) >= max_states:
                        raise BoundExceeded(f"more than {max_states} reachable states")
                    parent[t] = (s, j)
                    depth[t] = depth[s] + 1
                    queue.append(t)
        return result

    def replay(self, trace: Sequence[int]) -> list[GlobalState]:
        states = [self.initial_state()]
        for j in trace:
            states.append(self.step(states[-1], j))
        return states

    def format_trace(self, trace: Sequence[int]) -> str:
        """``step k: <interaction>`` lines followed by the state reached."""
        lines = []
        states = self.replay(trace)
        lines.append(f"init: {self.format_state(states[0])}")
        for k, j in enumerate(trace):
            lines.append(f"step {k}: {self.system.interactions[j].name}")
            lines.append(f"  {self.format_state(states[k + 1])}")
        return "\n".join(lines) + "\n"

    def format_state(self, state: GlobalState) -> str:
        parts = []
        for ci, c in enumerate(self.system.components):
            vals = ", ".join(
                f"{v.name}={_fmt(state.values[ci][k])}" for k, v in enumerate(c.variables)
            )
            loc = c.locations[state.locations[ci]]
            parts.append(f"{c.name}@{loc}" + (f"({vals})" if vals else ""))
        return " ".join(parts)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


# Functional API -------------------------------------------------------------


def port_enabled(system: BipSystem, state: GlobalState, ci: int, port: str) -> bool:
    return Interpreter(system).port_enabled(state, ci, port)


def enabled_interactions(system: BipSystem, state: GlobalState) -> frozenset[int]:
    return Interpreter(system).enabled_interactions(state)


def apply_priority(system: BipSystem, enabled: Iterable[int]) -> frozenset[int]:
    return Interpreter(system).apply_priority(enabled)


def step(system: BipSystem, state: GlobalState, j: int) -> GlobalState:
    return Interpreter(system).step(state, j)


def explore(system: BipSystem, max_states: int = 100_000, invariants: Sequence[Invariant] = ()) -> ExploreResult:
    return Interpreter(system).explore(max_states, invariants)
