import itertools
import random
import time

import pytest

from bipsynth import expr as E
from bipsynth.bip import parse_invariants, parse_system
from bipsynth.bip2olp import (
    DEADLOCK_FREE,
    TranslationError,
    gen_decls,
    gen_init,
    gen_next,
    gen_wiredefs,
    one_cycle_check,
    one_cycle_opt,
    project_state,
    translate,
)
from bipsynth.lockstep import check_oracle_lockstep, olp_runs
from bipsynth.olp import RandomInputs, Simulator, VectorInputs, format_program, olp_init, olp_step, wire_values
from bipsynth.semantics import Interpreter

from conftest import GOLDEN, MINIMAL, compiled, invariants, system


def rendered(assigns):
    return {a.slot: E.format_expr(a.expr) for a in assigns}


def test_golden_traffic_light(tl):
    t0 = time.perf_counter()
    text = format_program(translate(tl).program)
    assert time.perf_counter() - t0 < 1.0
    assert text == (GOLDEN / "traffic_light.olp").read_text(encoding="utf-8")


def test_decls_traffic_light(tl):
    decls = {d.name: d for d in gen_decls(tl)}
    assert {n: str(decls[n].type) for n in ("timer.t", "timer.n", "light.m", "timer.ℓ", "light.ℓ", "cycle", "selector")} == {
        "timer.t": "int", "timer.n": "int", "light.m": "int",
        "timer.ℓ": "uint<1>", "light.ℓ": "uint<2>", "cycle": "bool", "selector": "uint<1>",
    }
    ports = [n for n in decls if n.endswith((".e", ".s"))]
    assert len(ports) == 6
    assert all(decls[a].length == 2 and decls[a].wire for a in ("ie", "ip", "is"))


def test_selector_width_single_interaction(minimal):
    decls = {d.name: d for d in gen_decls(minimal)}
    assert decls["selector"].type == E.uint_type(1)
    assert decls["c.ℓ"].type == E.uint_type(1)


def test_wiredefs_traffic_light(tl):
    w = rendered(gen_wiredefs(tl))
    assert w["timer.timer.e"] == "0 == timer.ℓ && timer.t < timer.n"
    assert w["ie[0]"] == "timer.timer.e"
    assert w["is[1]"] == "ip[1] && (selector == 1 || !ip[selector])"
    assert w["ip[0]"] == "ie[0]" and w["ip[1]"] == "ie[1]"


def test_priority_wire_is_maximality():
    s = parse_system(MINIMAL + "connector b { ports c.p; }\nconnector d { ports c.p; }\npriority a < d;\n")
    w = rendered(gen_wiredefs(s))
    assert w["ip[0]"] == "ie[0] && !ie[2]"
    assert w["ip[1]"] == "ie[1]"  # incomparable to both others
    assert w["ip[2]"] == "ie[2]"


def test_selector_out_of_range_guard():
    s = parse_system(MINIMAL + "connector b { ports c.p; }\nconnector d { ports c.p; }\n")
    w = rendered(gen_wiredefs(s))
    assert w["is[2]"] == "ip[2] && (selector == 2 || selector >= 3 || !ip[selector])"
    w = rendered(gen_wiredefs(s, fallback="lowest"))
    assert w["is[2]"] == "ip[2] && (selector == 2 || (selector >= 3 || !ip[selector]) && !ip[0] && !ip[1])"


def test_init_defaults_to_zero():
    s = parse_system("component c { var int<4> x; var bool b; place s; init s; port p(); on p from s to s; }\nconnector k { ports c.p; }")
    i = rendered(gen_init(s))
    assert i["c.x"] == "0" and i["c.b"] == "false" and i["cycle"] == "false"


def test_next_examples(tl):
    n = rendered(gen_next(tl))
    assert n["timer.n"] == "cycle == 0 ? (is[1] ? light.m : timer.n) : timer.n"
    assert n["light.m"] == "cycle == 0 ? light.m : light.τ[0] ? 3 : light.τ[1] ? 10 : light.τ[2] ? 5 : light.m"
    assert n["cycle"] == "!cycle"


def test_unassigned_variable_is_retained():
    s = parse_system("component c { var int<4> x = 3; place s; init s; port p(); on p from s to s; }\nconnector k { ports c.p; }")
    assert rendered(gen_next(s))["c.x"] == "c.x"


def test_properties(tl):
    invs = parse_invariants("light @ l1 -> timer.n == 3\n", tl)
    out = translate(tl, invs)
    assert out.property_wires == [DEADLOCK_FREE, "inv1"]
    w = rendered(out.program.wiredefs)
    assert w[DEADLOCK_FREE] == "cycle != 0 || ie[0] || ie[1]"
    assert w["inv1"] == "cycle != 0 || !(light.ℓ == 1) || timer.n == 3"


def test_quorum_invariant_2_lowering():
    out = compiled("quorum").output
    w = rendered(out.program.wiredefs)
    text = w["Invariant_2"]
    assert text.startswith("cycle != 0 || ")
    assert "c1.ℓ ==" in text and "c2.ℓ ==" in text and "c1.dec" in text and "c2.dec" in text


def test_one_cycle_not_applicable_for_traffic_light(tl):
    chk = one_cycle_check(tl)
    assert not chk.applicable
    assert chk.conflicts == [("a1", "timer.n")]
    assert "timer.n" in chk.explain()
    assert one_cycle_opt(tl) == (False, None)
    with pytest.raises(TranslationError, match="timer.n"):
        translate(tl, fuse=True)


def test_one_cycle_applicable_cases():
    ok, out = one_cycle_opt(system("handshake"))  # transfer target 'got' is never touched by receiver transitions
    assert ok and out.fused and "cycle" not in out.program.by_name
    ok, out = one_cycle_opt(system("toggle"))  # no transfers at all
    assert ok


@pytest.mark.parametrize("name", ["toggle", "handshake"])
def test_fused_lockstep_halves_step_count(name):
    s = system(name)
    _ok, fused = one_cycle_opt(s)
    plain = translate(s)
    for seed in range(5):
        tf = Simulator(fused.program).run(20, RandomInputs(fused.program, seed))
        tp = Simulator(plain.program).run(40, RandomInputs(plain.program, seed))
        check_oracle_lockstep(s, fused, tf)
        check_oracle_lockstep(s, plain, tp)
        if name == "toggle":  # deterministic: state after k fused steps == after 2k plain steps
            for k in range(21):
                assert project_state(s, tf.state(k)) == project_state(s, tp.state(2 * k))


@pytest.mark.parametrize("name", ["traffic_light", "atm", "quorum", "priority", "handshake", "toggle"])
def test_symbol_map_is_total(name):
    out = compiled(name).output
    for d in out.program.decls:
        assert d.name in out.symbols.origins
    for p in out.property_wires:
        assert p in out.program.by_name


def test_generators_are_deterministic():
    s = system("atm")
    a, b = translate(s, invariants("atm")), translate(system("atm"), invariants("atm"))
    assert format_program(a.program) == format_program(b.program)


# -- lockstep with the reference interpreter ---------------------------------

def test_lockstep_exhaustive_selectors():
    """Small k: circuit runs over all selector streams == oracle runs of length k."""
    for name, k in (("traffic_light", 4), ("atm", 3), ("priority", 4)):
        s = system(name)
        out = translate(s)
        p = out.program
        it = Interpreter(s)
        width = p.slot_type["selector"].width
        sim = Simulator(p)
        circuit = set()
        for choice in itertools.product(range(1 << width), repeat=k):
            vecs = []
            for c in choice:
                vecs += [{"selector": c}, {"selector": 0}]
            tr = sim.run(2 * k, VectorInputs(p, vecs))
            check_oracle_lockstep(s, out, tr)
            circuit.add(tuple(project_state(s, tr.state(2 * f)) for f in range(k + 1)))
        oracle = set()

        def extend(path, depth):
            if depth == k:
                oracle.add(tuple(path))
                return
            succ = it.maximal(path[-1])
            if not succ:  # deadlock: the circuit stutters
                extend(path + [path[-1]], depth + 1)
            for j in succ:
                extend(path + [it.step(path[-1], j)], depth + 1)

        extend([it.initial_state()], 0)
        assert circuit == oracle, name


def test_popcount_is_at_most_one_over_10000_steps():
    stats = None
    for name in ("atm", "quorum", "priority"):
        out = compiled(name).output
        for tr in olp_runs(out, range(5), 4000):
            stats = check_oracle_lockstep(system(name), out, tr, stats)
    assert stats.boundaries >= 10_000
    assert stats.max_selected == 1


@pytest.mark.parametrize("name", ["atm", "quorum", "priority", "traffic_light"])
def test_selection_soundness_and_fairness(name):
    s = system(name)
    p = compiled(name).output.program
    J = len(s.interactions)
    tr = Simulator(p).run(600, RandomInputs(p, 11))
    for f in range(0, 600, 2):
        st = tr.state(f)
        base = wire_values(p, st, {"selector": 0})
        for j in range(J):
            if base[f"is[{j}]"]:
                assert base[f"ip[{j}]"] and base[f"ie[{j}]"]
            if base[f"ip[{j}]"]:
                assert base[f"ie[{j}]"]
                assert wire_values(p, st, {"selector": j})[f"is[{j}]"]


def test_fallback_lowest_lockstep():
    s = system("atm")
    out = translate(s, fallback="lowest")
    for tr in olp_runs(out, range(3), 400):
        check_oracle_lockstep(s, out, tr)


def test_transfer_before_action_in_circuit():
    s = parse_system("""
    component a { var int<8> x = 1; place s; init s; port p(x); on p from s to s do { x := x * 10; } }
    component b { var int<8> y = 7; place s; init s; port p(y); on p from s to s do { y := 0; } }
    connector k { ports a.p, b.p; do { a.x := b.y; b.y := a.x; } }
    """)
    p = translate(s).program
    st = olp_init(p)
    for _ in range(2):
        st = olp_step(p, st, {"selector": 0})
    assert (st["a.x"], st["b.y"]) == (70, 0)
