"""BIP models: data types, the textual dialect, validation and pretty-printing.

Grammar (``#`` and ``//`` comments)::

    system NAME ;
    component NAME {
        var TYPE NAME [= CONST] ;          # TYPE: bool | int | int<w>
        port NAME ( [VAR {, VAR}] ) ;      # support set
        place LOC {, LOC} ;
        init LOC ;
        on PORT from LOC to LOC [provided EXPR] [do { VAR := EXPR ; ... }] ;
    }
    connector NAME {
        ports C.P {, C.P} ;
        [provided EXPR ;]                  # over C.V of the support sets
        [do { C.V := EXPR ; ... }]         # data transfer
    }
    priority LOW < HIGH {, LOW < HIGH} ;

Declaration order fixes component and interaction indices.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from typing import Optional

from . import expr as E
from .expr import BOOL, Expr, ExprError, ExprTypeError, TokenStream, Type, VarInfo

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


@dataclass(frozen=True, order=True)
class Pos:
    line: int = 0
    col: int = 0


NOPOS = Pos()


@dataclass(frozen=True)
class Diagnostic:
    line: int
    col: int
    message: str
    code: str = "error"
    severity: str = "error"

    def __str__(self) -> str:
        return f"{self.line}:{self.col}: {self.severity}: {self.message}"


class BipError(Exception):
    """Raised when a source text does not describe a well-formed system."""

    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = sorted(diagnostics, key=lambda d: (d.line, d.col))
        super().__init__("\n".join(str(d) for d in self.diagnostics))


# ---------------------------------------------------------------------------
# model


@dataclass(frozen=True)
class Variable:
    name: str
    type: Type
    init: Optional[object] = None  # member of X^Init when not None
    pos: Pos = field(default=NOPOS, compare=False)


@dataclass(frozen=True)
class Port:
    name: str
    support: tuple[str, ...] = ()
    pos: Pos = field(default=NOPOS, compare=False)


@dataclass(frozen=True)
class Transition:
    port: str
    src: str
    dest: str
    guard: Expr = E.TRUE
    actions: tuple[tuple[str, Expr], ...] = ()
    pos: Pos = field(default=NOPOS, compare=False)


@dataclass(frozen=True)
class AtomicComponent:
    name: str
    variables: tuple[Variable, ...]
    ports: tuple[Port, ...]
    locations: tuple[str, ...]
    initial: str
    transitions: tuple[Transition, ...]
    pos: Pos = field(default=NOPOS, compare=False)

    def variable(self, name: str) -> Optional[Variable]:
        for v in self.variables:
            if v.name == name:
                return v
        return None

    def port(self, name: str) -> Optional[Port]:
        for p in self.ports:
            if p.name == name:
                return p
        return None

    def location_index(self, name: str) -> int:
        return self.locations.index(name)

    def transitions_of(self, port: str) -> list[tuple[int, Transition]]:
        return [(k, t) for k, t in enumerate(self.transitions) if t.port == port]

    def local_env(self) -> dict[str, VarInfo]:
        return {v.name: VarInfo(v.type) for v in self.variables}


@dataclass(frozen=True)
class Interaction:
    name: str
    ports: tuple[tuple[str, str], ...]  # (component, port)
    guard: Expr = E.TRUE
    transfers: tuple[tuple[str, str, Expr], ...] = ()  # (component, var, expr)
    pos: Pos = field(default=NOPOS, compare=False)

    def port_of(self, component: str) -> Optional[str]:
        for c, p in self.ports:
            if c == component:
                return p
        return None


@dataclass(frozen=True)
class PriorityRule:
    low: str
    high: str
    pos: Pos = field(default=NOPOS, compare=False)


@dataclass(frozen=True)
class BipSystem:
    name: str
    components: tuple[AtomicComponent, ...]
    interactions: tuple[Interaction, ...]
    priority: tuple[PriorityRule, ...] = ()

    def component(self, name: str) -> AtomicComponent:
        for c in self.components:
            if c.name == name:
                return c
        raise KeyError(name)

    def component_index(self, name: str) -> int:
        for i, c in enumerate(self.components):
            if c.name == name:
                return i
        raise KeyError(name)

    def interaction_index(self, name: str) -> int:
        for j, a in enumerate(self.interactions):
            if a.name == name:
                return j
        raise KeyError(name)

    def priority_closure(self) -> frozenset[tuple[int, int]]:
        """Transitive closure of the priority relation as (low, high) index pairs."""
        idx = {a.name: j for j, a in enumerate(self.interactions)}
        rel = {(idx[r.low], idx[r.high]) for r in self.priority if r.low in idx and r.high in idx}
        return frozenset(_closure(rel))

    def interaction_env(self, a: Interaction) -> dict[str, VarInfo]:
        """Variables visible to an interaction: the union of its ports' support sets."""
        env = {}
        for cname, pname in a.ports:
            try:
                comp = self.component(cname)
            except KeyError:
                continue
            port = comp.port(pname)
            if port is None:
                continue
            for vname in port.support:
                v = comp.variable(vname)
                if v is not None:
                    env[f"{cname}.{vname}"] = VarInfo(v.type)
        return env

    def global_env(self) -> dict[str, VarInfo]:
        return {
            f"{c.name}.{v.name}": VarInfo(v.type) for c in self.components for v in c.variables
        }

    def interactions_of(self, component: str, port: str) -> list[int]:
        return [j for j, a in enumerate(self.interactions) if (component, port) in a.ports]


def _closure(rel: set[tuple[int, int]]) -> set[tuple[int, int]]:
    closure = set(rel)
    changed = True
    while changed:
        changed = False
        for a, b in list(closure):
            for c, d in list(closure):
                if b == c and (a, d) not in closure:
                    closure.add((a, d))
                    changed = True
    return closure


def qualify(e: Expr, component: str) -> Expr:
    """Rewrite a component-local expression to ``component.var`` names."""
    return E.rename(e, lambda n: f"{component}.{n}")


# ---------------------------------------------------------------------------
# parsing


def _pos(t) -> Pos:
    return Pos(t.line, t.col)


def _parse_type(ts: TokenStream) -> Type:
    name = ts.ident()
    if name == "bool":
        return BOOL
    if name == "int":
        if ts.accept("<"):
            w = ts.number()
            ts.expect(">")
            if w < 1:
                raise ts.error("integer width must be positive")
            return E.int_type(w)
        return E.int_type()
    raise ts.error(f"unknown type {name!r}")


def _parse_const(ts: TokenStream):
    if ts.accept("true"):
        return True
    if ts.accept("false"):
        return False
    sign = -1 if ts.accept("-") else 1
    return sign * ts.number()


def _parse_component(ts: TokenStream) -> AtomicComponent:
    start = ts.expect("component")
    name = ts.ident()
    ts.expect("{")
    variables, ports, locations, transitions = [], [], [], []
    initial = None
    while not ts.accept("}"):
        t = ts.tok
        if ts.accept("var"):
            ty = _parse_type(ts)
            vtok = ts.tok
            vname = ts.ident()
            init = _parse_const(ts) if ts.accept("=") else None
            ts.expect(";")
            variables.append(Variable(vname, ty, init, _pos(vtok)))
        elif ts.accept("port"):
            ptok = ts.tok
            pname = ts.ident()
            support = []
            ts.expect("(")
            if not ts.at(")"):
                support.append(ts.ident())
                while ts.accept(","):
                    support.append(ts.ident())
            ts.expect(")")
            ts.expect(";")
            ports.append(Port(pname, tuple(support), _pos(ptok)))
        elif ts.accept("place"):
            locations.append(ts.ident())
            while ts.accept(","):
                locations.append(ts.ident())
            ts.expect(";")
        elif ts.accept("init"):
            initial = ts.ident()
            ts.expect(";")
        elif ts.accept("on"):
            port = ts.ident()
            ts.expect("from")
            src = ts.ident()
            ts.expect("to")
            dest = ts.ident()
            guard = E.TRUE
            if ts.accept("provided"):
                guard = E.parse_expr(ts)
            actions = []
            if ts.accept("do"):
                ts.expect("{")
                while not ts.accept("}"):
                    target = ts.ident()
                    ts.expect(":=")
                    actions.append((target, E.parse_expr(ts)))
                    ts.expect(";")
            ts.accept(";")
            transitions.append(Transition(port, src, dest, guard, tuple(actions), _pos(t)))
        else:
            raise ts.error(f"unexpected {t.text!r} in component {name!r}")
    ts.accept(";")
    return AtomicComponent(
        name,
        tuple(variables),
        tuple(ports),
        tuple(locations),
        initial or "",
        tuple(transitions),
        _pos(start),
    )


def _parse_connector(ts: TokenStream) -> Interaction:
    start = ts.expect("connector")
    name = ts.ident()
    ts.expect("{")
    ports, transfers = [], []
    guard = E.TRUE
    while not ts.accept("}"):
        t = ts.tok
        if ts.accept("ports"):
            while True:
                c = ts.ident()
                ts.expect(".")
                ports.append((c, ts.ident()))
                if not ts.accept(","):
                    break
            ts.expect(";")
        elif ts.accept("provided"):
            guard = E.parse_expr(ts)
            ts.expect(";")
        elif ts.accept("do"):
            ts.expect("{")
            while not ts.accept("}"):
                c = ts.ident()
                ts.expect(".")
                v = ts.ident()
                ts.expect(":=")
                transfers.append((c, v, E.parse_expr(ts)))
                ts.expect(";")
            ts.accept(";")
        else:
            raise ts.error(f"unexpected {t.text!r} in connector {name!r}")
    ts.accept(";")
    return Interaction(name, tuple(ports), guard, tuple(transfers), _pos(start))


def parse_source(text: str) -> BipSystem:
    """Syntactic parse only; raises BipError on the first syntax error."""
    try:
        ts = TokenStream(E.tokenize(text))
        sys_name = "system"
        if ts.accept("system"):
            sys_name = ts.ident()
            ts.expect(";")
        components, interactions, priority = [], [], []
        while ts.tok.kind != "eof":
            if ts.at("component"):
                components.append(_parse_component(ts))
            elif ts.at("connector"):
                interactions.append(_parse_connector(ts))
            elif ts.accept("priority"):
                while True:
                    t = ts.tok
                    low = ts.ident()
                    ts.expect("<")
                    priority.append(PriorityRule(low, ts.ident(), _pos(t)))
                    if not ts.accept(","):
                        break
                ts.expect(";")
            else:
                raise ts.error(f"unexpected {ts.tok.text!r} at top level")
    except ExprError as exc:
        raise BipError([Diagnostic(exc.line, exc.col, exc.message, "syntax")]) from None
    return BipSystem(sys_name, tuple(components), tuple(interactions), tuple(priority))


def parse_system(text: str) -> BipSystem:
    """Parse and validate; raises BipError listing every diagnostic."""
    system = parse_source(text)
    diags = validate(system)
    if diags:
        raise BipError(diags)
    return system


def load_system(path) -> BipSystem:
    with open(path, encoding="utf-8") as fh:
        return parse_system(fh.read())


# ---------------------------------------------------------------------------
# validation


def validate(system: BipSystem) -> list[Diagnostic]:
    """All structural and typing errors of ``system``, ordered by source position."""
    diags: list[Diagnostic] = []

    def err(pos: Pos, msg: str, code: str):
        diags.append(Diagnostic(pos.line, pos.col, msg, code))

    if not system.components:
        err(Pos(1, 1), "system declares no components", "empty")

    seen = set()
    for comp in system.components:
        if comp.name in seen:
            err(comp.pos, f"duplicate component {comp.name!r}", "duplicate")
        seen.add(comp.name)
        if not _IDENT.match(comp.name):
            err(comp.pos, f"invalid component name {comp.name!r}", "syntax")
        _validate_component(comp, err)

    seen = set()
    for a in system.interactions:
        if a.name in seen:
            err(a.pos, f"duplicate connector {a.name!r}", "duplicate")
        seen.add(a.name)
        _validate_interaction(system, a, err)

    names = {a.name for a in system.interactions}
    for r in system.priority:
        for n in (r.low, r.high):
            if n not in names:
                err(r.pos, f"priority references undeclared connector {n!r}", "undeclared")
    closure = system.priority_closure()
    for j, k in sorted(closure):
        if j == k:
            rule = next((r for r in system.priority if system.interactions[j].name in (r.low, r.high)), None)
            err(
                rule.pos if rule else NOPOS,
                f"priority not a strict partial order: "
                f"{system.interactions[j].name!r} is below itself",
                "priority",
            )
    return sorted(diags, key=lambda d: (d.line, d.col))


def _validate_component(comp: AtomicComponent, err) -> None:
    vnames = set()
    for v in comp.variables:
        if v.name in vnames:
            err(v.pos, f"duplicate variable {comp.name}.{v.name}", "duplicate")
        vnames.add(v.name)
        if not _IDENT.match(v.name):
            err(v.pos, f"invalid variable name {v.name!r}", "syntax")
        if v.init is not None and isinstance(v.init, bool) != v.type.is_bool:
            err(v.pos, f"initial value of {comp.name}.{v.name} does not match type {v.type}", "type")
    pnames = set()
    for p in comp.ports:
        if p.name in pnames:
            err(p.pos, f"duplicate port {comp.name}.{p.name}", "duplicate")
        pnames.add(p.name)
        if not _IDENT.match(p.name):
            err(p.pos, f"invalid port name {p.name!r}", "syntax")
        for x in p.support:
            if x not in vnames:
                err(p.pos, f"port {comp.name}.{p.name} exports undeclared variable {x!r}", "support")
    if not comp.locations:
        err(comp.pos, f"component {comp.name!r} declares no places", "undeclared")
    if len(set(comp.locations)) != len(comp.locations):
        err(comp.pos, f"duplicate place in component {comp.name!r}", "duplicate")
    if comp.initial not in comp.locations:
        err(comp.pos, f"component {comp.name!r} has no valid initial place", "undeclared")

    env = E.env_from(comp.local_env())
    for t in comp.transitions:
        if t.port not in pnames:
            err(t.pos, f"transition uses undeclared port {comp.name}.{t.port}", "undeclared")
        for loc in (t.src, t.dest):
            if loc not in comp.locations:
                err(t.pos, f"transition uses undeclared place {comp.name}.{loc}", "undeclared")
        _check_local(comp, t.guard, env, t.pos, err, want_bool=True)
        targets = set()
        for target, rhs in t.actions:
            var = comp.variable(target)
            if var is None:
                err(t.pos, f"assignment to undeclared variable {comp.name}.{target}", "undeclared")
                continue
            if target in targets:
                err(t.pos, f"{comp.name}.{target} assigned twice in one transition", "duplicate")
            targets.add(target)
            ty = _check_local(comp, rhs, env, t.pos, err)
            if ty is not None and not E.assignable(var.type, ty):
                err(t.pos, f"cannot assign {ty} to {comp.name}.{target}: {var.type}", "type")


def _check_local(comp, e, env, pos, err, want_bool=False):
    for name in E.names_read(e):
        if env(name) is None:
            if "." in name:
                err(pos, f"transition of {comp.name!r} references {name!r} outside its component", "scope")
            else:
                err(pos, f"undeclared variable {comp.name}.{name}", "undeclared")
            return None
    try:
        ty = E.check(e, env)
    except ExprTypeError as exc:
        err(pos, f"type error: {exc.message}", "type")
        return None
    if want_bool and not ty.is_bool:
        err(pos, "guard must be boolean", "type")
    return ty


def _validate_interaction(system: BipSystem, a: Interaction, err) -> None:
    if not a.ports:
        err(a.pos, f"connector {a.name!r} has no ports", "syntax")
    comps_seen = set()
    for cname, pname in a.ports:
        try:
            comp = system.component(cname)
        except KeyError:
            err(a.pos, f"connector {a.name!r} references undeclared component {cname!r}", "undeclared")
            continue
        if comp.port(pname) is None:
            err(a.pos, f"connector {a.name!r} references undeclared port {cname}.{pname}", "undeclared")
        if cname in comps_seen:
            err(
                a.pos,
                f"connector {a.name!r} contains more than one port of component {cname!r} "
                "(an interaction holds at most one port per component)",
                "interaction-port",
            )
        comps_seen.add(cname)

    env_map = system.interaction_env(a)
    env = E.env_from(env_map)

    def check(e, want_bool=False):
        for name in E.names_read(e):
            if name not in env_map:
                err(a.pos, f"connector {a.name!r} reads {name!r}, which is not in its ports' support", "support")
                return None
        try:
            ty = E.check(e, env)
        except ExprTypeError as exc:
            err(a.pos, f"type error in connector {a.name!r}: {exc.message}", "type")
            return None
        if want_bool and not ty.is_bool:
            err(a.pos, f"guard of connector {a.name!r} must be boolean", "type")
        return ty

    check(a.guard, want_bool=True)
    targets = set()
    for cname, vname, rhs in a.transfers:
        key = f"{cname}.{vname}"
        if key not in env_map:
            err(a.pos, f"connector {a.name!r} writes {key!r}, which is not in its ports' support", "support")
            continue
        if key in targets:
            err(a.pos, f"connector {a.name!r} writes {key!r} twice", "duplicate")
        targets.add(key)
        ty = check(rhs)
        if ty is not None and not E.assignable(env_map[key].type, ty):
            err(a.pos, f"cannot assign {ty} to {key}", "type")


def overlap_warnings(system: BipSystem) -> list[Diagnostic]:
    """Pairs of transitions sharing port and source place.

    Both may be enabled at once; the oracle then reports Ambiguity while the
    circuit fires the one declared first.
    """
    out = []
    for comp in system.components:
        for k, t in enumerate(comp.transitions):
            for m in range(k):
                u = comp.transitions[m]
                if u.port == t.port and u.src == t.src:
                    out.append(
                        Diagnostic(
                            t.pos.line,
                            t.pos.col,
                            f"{comp.name}: transitions {m} and {k} on port {t.port!r} from "
                            f"{t.src!r} may both be enabled; the first declared wins in the circuit",
                            "overlap",
                            "warning",
                        )
                    )
    return out


# ---------------------------------------------------------------------------
# printing


def _format_type(ty: Type) -> str:
    if ty.is_bool:
        return "bool"
    return "int" if ty.width == E.DEFAULT_INT_WIDTH else f"int<{ty.width}>"


def _format_const(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def format_system(system: BipSystem) -> str:
    lines = [f"system {system.name};", ""]
    for comp in system.components:
        lines.append(f"component {comp.name} {{")
        for v in comp.variables:
            init = f" = {_format_const(v.init)}" if v.init is not None else ""
            lines.append(f"  var {_format_type(v.type)} {v.name}{init};")
        for p in comp.ports:
            lines.append(f"  port {p.name}({', '.join(p.support)});")
        lines.append(f"  place {', '.join(comp.locations)};")
        lines.append(f"  init {comp.initial};")
        for t in comp.transitions:
            s = f"  on {t.port} from {t.src} to {t.dest}"
            if t.guard != E.TRUE:
                s += f" provided {E.format_expr(t.guard)}"
            if t.actions:
                body = " ".join(f"{x} := {E.format_expr(rhs)};" for x, rhs in t.actions)
                lines.append(f"{s} do {{ {body} }}")
            else:
                lines.append(s + ";")
        lines.append("}")
        lines.append("")
    for a in system.interactions:
        lines.append(f"connector {a.name} {{")
        lines.append(f"  ports {', '.join(f'{c}.{p}' for c, p in a.ports)};")
        if a.guard != E.TRUE:
            lines.append(f"  provided {E.format_expr(a.guard)};")
        if a.transfers:
            body = " ".join(f"{c}.{v} := {E.format_expr(rhs)};" for c, v, rhs in a.transfers)
            lines.append(f"  do {{ {body} }}")
        lines.append("}")
    if system.priority:
        rules = ", ".join(f"{r.low} < {r.high}" for r in system.priority)
        lines.append(f"priority {rules};")
    return "\n".join(lines) + "\n"


def with_widths(system: BipSystem, widths: dict[str, int]) -> BipSystem:
    """Copy of ``system`` with ``component.var -> width`` overrides applied to int variables."""
    unknown = set(widths)
    comps = []
    for comp in system.components:
        vs = []
        for v in comp.variables:
            key = f"{comp.name}.{v.name}"
            if key in widths:
                unknown.discard(key)
                if v.type.is_bool:
                    raise BipError([Diagnostic(v.pos.line, v.pos.col, f"{key} is boolean; width override rejected", "type")])
                v = replace(v, type=E.int_type(widths[key]))
            vs.append(v)
        comps.append(replace(comp, variables=tuple(vs)))
    if unknown:
        raise BipError([Diagnostic(0, 0, f"width override for unknown variable {n!r}", "undeclared") for n in sorted(unknown)])
    return replace(system, components=tuple(comps))


# ---------------------------------------------------------------------------
# invariant sidecar files


@dataclass(frozen=True)
class Invariant:
    name: str
    expr: Expr
    line: int = 0


def check_invariant(system: BipSystem, e: Expr, line: int = 0) -> list[Diagnostic]:
    diags = []

    def at_resolver(cname, loc):
        try:
            comp = system.component(cname)
        except KeyError:
            raise ExprTypeError(f"unknown component {cname!r}") from None
        if loc not in comp.locations:
            raise ExprTypeError(f"unknown place {cname}.{loc}")

    env = system.global_env()
    for name in E.names_read(e):
        if name not in env:
            diags.append(Diagnostic(line, 1, f"invariant references unknown variable {name!r}", "undeclared"))
    if diags:
        return diags
    try:
        ty = E.check(e, E.env_from(env), at_resolver=at_resolver)
    except ExprTypeError as exc:
        return [Diagnostic(line, 1, exc.message, "undeclared" if "unknown" in exc.message else "type")]
    if not ty.is_bool:
        diags.append(Diagnostic(line, 1, "invariant must be boolean", "type"))
    return diags


def parse_invariants(text: str, system: BipSystem) -> list[Invariant]:
    """One invariant per line: ``[name:] expr``; ``#`` starts a comment."""
    invariants, diags = [], []
    names = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = re.match(r"([A-Za-z_][A-Za-z0-9_]*)\s*:(?!=)\s*(.*)\Z", line)
        if m:
            name, body = m.group(1), m.group(2)
        else:
            name, body = f"inv{len(invariants) + 1}", line
        if name in names or name in RESERVED_PROPERTY_NAMES:
            diags.append(Diagnostic(lineno, 1, f"invariant name {name!r} is reserved or duplicated", "duplicate"))
            continue
        try:
            e = E.parse_expression(body, allow_at=True)
        except ExprError as exc:
            diags.append(Diagnostic(lineno, exc.col, exc.message, "syntax"))
            continue
        found = check_invariant(system, e, lineno)
        if found:
            diags.extend(found)
            continue
        names.add(name)
        invariants.append(Invariant(name, e, lineno))
    if diags:
        raise BipError(diags)
    return invariants


RESERVED_PROPERTY_NAMES = {"deadlock_free", "cycle", "selector", "ie", "ip", "is"}


def load_invariants(path, system: BipSystem) -> list[Invariant]:
    with open(path, encoding="utf-8") as fh:
        return parse_invariants(fh.read(), system)
