"""Translate a BIP system into a One Loop Program with an embedded scheduler.

Two-cycle scheme (default).  ``cycle`` alternates between interaction mode
(``cycle == 0``: one enabled, priority-maximal interaction is selected and its
data transfer commits) and transition mode (each involved component fires the
transition chosen in interaction mode).  The choice is latched in the
per-component firing registers ``C.τ[k]``: their guards are evaluated on the
pre-transfer state, and the selector input is free to change between the two
cycles.

Fused scheme (``fuse=True``).  When no transfer touches a variable used by the
transitions of the components it synchronizes, transfer and transition
commit in the same iteration and ``cycle`` disappears.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

from . import expr as E
from .bip import BipSystem, Invariant, qualify
from .expr import BOOL, Binary, Expr, Index, IntLit, Ternary, Var, conj, disj, neg
from .olp import Assign, Decl, OlpProgram

LOC = "ℓ"
FIRE = "τ"
CYCLE = "cycle"
SELECTOR = "selector"
DEADLOCK_FREE = "deadlock_free"


class TranslationError(Exception):
    pass


def loc_name(component: str) -> str:
    return f"{component}.{LOC}"


def fire_name(component: str) -> str:
    return f"{component}.{FIRE}"


def port_enable(component: str, port: str) -> str:
    return f"{component}.{port}.e"


def port_select(component: str, port: str) -> str:
    return f"{component}.{port}.s"


def index_width(n: int) -> int:
    """Bits for indices 0..n-1 (at least one)."""
    return max(1, (n - 1).bit_length())


@dataclass(frozen=True)
class Origin:
    kind: str  # var | loc | fire | cycle | selector | port_enable | port_select | ie | ip | is | property
    component: Optional[str] = None
    name: Optional[str] = None


@dataclass
class SymbolMap:
    """OLP declaration names mapped back to the BIP model."""

    origins: dict[str, Origin] = field(default_factory=dict)
    locations: dict[str, tuple[str, ...]] = field(default_factory=dict)
    interactions: tuple[str, ...] = ()
    fused: bool = False

    def describe(self, olp_name: str) -> str:
        o = self.origins[olp_name]
        if o.kind == "var":
            return f"{o.component}.{o.name}"
        if o.kind == "loc":
            return f"location of {o.component}"
        return olp_name


@dataclass
class TranslationOutput:
    program: OlpProgram
    symbols: SymbolMap
    property_wires: list[str]
    fused: bool = False
    fallback: str = "highest"


# ---------------------------------------------------------------------------
# helpers


def _at_loc(component: str, idx: int) -> Expr:
    return Binary("==", IntLit(idx), Var(loc_name(component)))


def _chain(arms: Sequence[tuple[Expr, Expr]], default: Expr) -> Expr:
    out = default
    for cond, val in reversed(arms):
        out = Ternary(cond, val, out)
    return out


def _interaction_mode() -> Expr:
    return Binary("==", Var(CYCLE), IntLit(0))


def _arm(system: BipSystem, ci: int, k: int) -> Expr:
    """Condition under which transition k of component ci fires in this step.

    Transitions sharing port and source with an earlier one are blocked while
    that one is enabled (first declared wins).
    """
    comp = system.components[ci]
    t = comp.transitions[k]
    src = comp.location_index(t.src)
    blocked = [
        neg(qualify(u.guard, comp.name))
        for u in comp.transitions[:k]
        if u.port == t.port and u.src == t.src
    ]
    return conj(
        Var(port_select(comp.name, t.port)),
        _at_loc(comp.name, src),
        qualify(t.guard, comp.name),
        *blocked,
    )


# ---------------------------------------------------------------------------
# generator functions


def gen_decls(system: BipSystem, fused: bool = False) -> list[Decl]:
    J = len(system.interactions)
    decls = []
    for c in system.components:
        for v in c.variables:
            decls.append(Decl(f"{c.name}.{v.name}", v.type))
    for c in system.components:
        decls.append(Decl(loc_name(c.name), E.uint_type(index_width(len(c.locations)))))
    if not fused:
        for c in system.components:
            if c.transitions:
                decls.append(Decl(fire_name(c.name), BOOL, len(c.transitions)))
        decls.append(Decl(CYCLE, BOOL))
    if J:
        decls.append(Decl(SELECTOR, E.uint_type(index_width(J)), wire=True))
    for c in system.components:
        for p in c.ports:
            decls.append(Decl(port_enable(c.name, p.name), BOOL, wire=True))
            decls.append(Decl(port_select(c.name, p.name), BOOL, wire=True))
    if fused:
        for c in system.components:
            if c.transitions:
                decls.append(Decl(fire_name(c.name), BOOL, len(c.transitions), wire=True))
    if J:
        for arr in ("ie", "ip", "is"):
            decls.append(Decl(arr, BOOL, J, wire=True))
    return decls


def gen_wiredefs(system: BipSystem, fallback: str = "highest", fused: bool = False) -> list[Assign]:
    if fallback not in ("highest", "lowest"):
        raise ValueError("fallback must be 'highest' or 'lowest'")
    J = len(system.interactions)
    closure = system.priority_closure()
    out = []
    for c in system.components:
        for p in c.ports:
            terms = [
                conj(_at_loc(c.name, c.location_index(t.src)), qualify(t.guard, c.name))
                for _, t in c.transitions_of(p.name)
            ]
            out.append(Assign(port_enable(c.name, p.name), None, disj(*terms)))
    for j, a in enumerate(system.interactions):
        ports = [Var(port_enable(cn, pn)) for cn, pn in a.ports]
        out.append(Assign("ie", j, conj(*ports, a.guard)))
    for j in range(J):
        higher = [Index("ie", IntLit(k)) for k in range(J) if (j, k) in closure]
        ip = Index("ie", IntLit(j))
        if higher:
            ip = conj(ip, neg(disj(*higher)))
        out.append(Assign("ip", j, ip))
    for j in range(J):
        none_selected = neg(Index("ip", Var(SELECTOR)))
        if (1 << index_width(J)) > J:
            none_selected = disj(Binary(">=", Var(SELECTOR), IntLit(J)), none_selected)
        others = range(j + 1, J) if fallback == "highest" else range(j)
        fb = conj(none_selected, *[neg(Index("ip", IntLit(k))) for k in others])
        sel = disj(Binary("==", Var(SELECTOR), IntLit(j)), fb)
        out.append(Assign("is", j, conj(Index("ip", IntLit(j)), sel)))
    for c in system.components:
        for p in c.ports:
            ks = system.interactions_of(c.name, p.name)
            out.append(Assign(port_select(c.name, p.name), None, disj(*[Index("is", IntLit(k)) for k in ks])))
    if fused:
        for ci, c in enumerate(system.components):
            for k in range(len(c.transitions)):
                out.append(Assign(fire_name(c.name), k, _arm(system, ci, k)))
    return out


def gen_init(system: BipSystem, fused: bool = False) -> list[Assign]:
    out = []
    for c in system.components:
        for v in c.variables:
            init = v.init if v.init is not None else (False if v.type.is_bool else 0)
            lit = E.BoolLit(init) if isinstance(init, bool) else IntLit(init)
            out.append(Assign(f"{c.name}.{v.name}", None, lit))
        out.append(Assign(loc_name(c.name), None, IntLit(c.location_index(c.initial))))
        if not fused:
            for k in range(len(c.transitions)):
                out.append(Assign(fire_name(c.name), k, E.FALSE))
    if not fused:
        out.append(Assign(CYCLE, None, E.FALSE))
    return out


def gen_next(system: BipSystem, fused: bool = False) -> list[Assign]:
    out = []
    for ci, c in enumerate(system.components):
        fire = fire_name(c.name)
        for v in c.variables:
            x = f"{c.name}.{v.name}"
            inter = [
                (Index("is", IntLit(j)), rhs)
                for j, a in enumerate(system.interactions)
                for cn, vn, rhs in a.transfers
                if (cn, vn) == (c.name, v.name)
            ]
            trans = [
                (Index(fire, IntLit(k)), qualify(rhs, c.name))
                for k, t in enumerate(c.transitions)
                for target, rhs in t.actions
                if target == v.name
            ]
            if fused:
                nxt = _chain(trans + inter, Var(x))
            else:
                i_chain, t_chain = _chain(inter, Var(x)), _chain(trans, Var(x))
                nxt = Var(x) if i_chain == t_chain == Var(x) else Ternary(_interaction_mode(), i_chain, t_chain)
            out.append(Assign(x, None, nxt))
        loc = Var(loc_name(c.name))
        moves = [
            (Index(fire, IntLit(k)), IntLit(c.location_index(t.dest)))
            for k, t in enumerate(c.transitions)
        ]
        if fused:
            out.append(Assign(loc.name, None, _chain(moves, loc)))
        else:
            out.append(Assign(loc.name, None, Ternary(_interaction_mode(), loc, _chain(moves, loc)) if moves else loc))
            for k in range(len(c.transitions)):
                out.append(Assign(fire, k, conj(_interaction_mode(), _arm(system, ci, k))))
    if not fused:
        out.append(Assign(CYCLE, None, neg(Var(CYCLE))))
    return out


def lower_invariant(system: BipSystem, e: Expr) -> Expr:
    """Replace ``C @ loc`` by a comparison on C's location register."""

    def fn(node):
        if isinstance(node, E.At):
            idx = system.component(node.component).location_index(node.location)
            return Binary("==", Var(loc_name(node.component)), IntLit(idx))
        return None

    return E.substitute(e, fn)


def gen_properties(
    system: BipSystem, invariants: Sequence[Invariant] = (), fused: bool = False
) -> tuple[list[Decl], list[Assign]]:
    """Property wires: deadlock freedom plus one wire per invariant.

    In the two-cycle scheme they are only meaningful at interaction-mode
    boundaries and read true in transition mode.
    """
    J = len(system.interactions)
    names = {c.name for c in system.components}
    decls, defs = [], []

    def gated(e: Expr) -> Expr:
        return e if fused else disj(Binary("!=", Var(CYCLE), IntLit(0)), e)

    decls.append(Decl(DEADLOCK_FREE, BOOL, wire=True))
    defs.append(Assign(DEADLOCK_FREE, None, gated(disj(*[Index("ie", IntLit(j)) for j in range(J)]))))
    for inv in invariants:
        if inv.name in names:
            raise TranslationError(f"invariant name {inv.name!r} clashes with a component")
        decls.append(Decl(inv.name, BOOL, wire=True))
        defs.append(Assign(inv.name, None, gated(lower_invariant(system, inv.expr))))
    return decls, defs


# ---------------------------------------------------------------------------
# one-cycle optimization


@dataclass
class FuseCheck:
    applicable: bool
    conflicts: list[tuple[str, str]]  # (interaction, component.var)

    def explain(self) -> str:
        if self.applicable:
            return "one-cycle translation applicable"
        parts = [f"connector {a!r} transfers to {x!r}, which transitions of the synchronized components use" for a, x in self.conflicts]
        return "one-cycle translation not applicable: " + "; ".join(parts)


def one_cycle_check(system: BipSystem) -> FuseCheck:
    """Static data dependency between transfers and the transitions they synchronize.

    Conservative: every transition (guard and action, read or write) of every
    component taking part in the interaction counts.
    """
    conflicts = []
    for a in system.interactions:
        written = {f"{c}.{v}" for c, v, _ in a.transfers}
        used = set()
        for cname, _p in a.ports:
            comp = system.component(cname)
            for t in comp.transitions:
                used |= {f"{cname}.{n}" for n in E.names_read(t.guard)}
                for target, rhs in t.actions:
                    used.add(f"{cname}.{target}")
                    used |= {f"{cname}.{n}" for n in E.names_read(rhs)}
        for x in sorted(written & used):
            conflicts.append((a.name, x))
    return FuseCheck(not conflicts, conflicts)


# ---------------------------------------------------------------------------
# driver


def symbol_map(system: BipSystem, invariants: Sequence[Invariant] = (), fused: bool = False) -> SymbolMap:
    sm = SymbolMap(fused=fused)
    for c in system.components:
        for v in c.variables:
            sm.origins[f"{c.name}.{v.name}"] = Origin("var", c.name, v.name)
        sm.origins[loc_name(c.name)] = Origin("loc", c.name)
        if c.transitions:
            sm.origins[fire_name(c.name)] = Origin("fire", c.name)
        for p in c.ports:
            sm.origins[port_enable(c.name, p.name)] = Origin("port_enable", c.name, p.name)
            sm.origins[port_select(c.name, p.name)] = Origin("port_select", c.name, p.name)
        sm.locations[c.name] = c.locations
    if not fused:
        sm.origins[CYCLE] = Origin("cycle")
    if system.interactions:
        sm.origins[SELECTOR] = Origin("selector")
        for arr in ("ie", "ip", "is"):
            sm.origins[arr] = Origin(arr)
    sm.origins[DEADLOCK_FREE] = Origin("property", name=DEADLOCK_FREE)
    for inv in invariants:
        sm.origins[inv.name] = Origin("property", name=inv.name)
    sm.interactions = tuple(a.name for a in system.interactions)
    return sm


def translate(
    system: BipSystem,
    invariants: Sequence[Invariant] = (),
    fallback: str = "highest",
    fuse: bool = False,
) -> TranslationOutput:
    if fuse:
        chk = one_cycle_check(system)
        if not chk.applicable:
            raise TranslationError(chk.explain())
    pdecls, pdefs = gen_properties(system, invariants, fuse)
    program = OlpProgram(
        gen_decls(system, fuse) + pdecls,
        gen_wiredefs(system, fallback, fuse) + pdefs,
        gen_init(system, fuse),
        gen_next(system, fuse),
    )
    return TranslationOutput(
        program,
        symbol_map(system, invariants, fuse),
        [d.name for d in pdecls],
        fuse,
        fallback,
    )


def one_cycle_opt(system: BipSystem, invariants: Sequence[Invariant] = (), fallback: str = "highest"):
    """(applicable, fused translation or None)."""
    chk = one_cycle_check(system)
    if not chk.applicable:
        return False, None
    return True, translate(system, invariants, fallback, fuse=True)


def project_state(system: BipSystem, state) -> "GlobalState":
    """BIP state carried by an OLP register valuation (a mapping by name)."""
    from .semantics import GlobalState

    locs, vals = [], []
    for c in system.components:
        locs.append(state[loc_name(c.name)])
        vals.append(tuple(state[f"{c.name}.{v.name}"] for v in c.variables))
    return GlobalState(tuple(locs), tuple(vals))


def selected_interaction(wires) -> Optional[int]:
    """Index of the interaction whose ``is`` wire is set, if any."""
    hits = [int(k[3:-1]) for k, v in wires.items() if k.startswith("is[") and v]
    if len(hits) > 1:
        raise TranslationError(f"several interactions selected: {hits}")
    return hits[0] if hits else None
