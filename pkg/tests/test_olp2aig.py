import random

import pytest

from bipsynth import expr as E
from bipsynth.aig import Aig, AigSimulator, lit_not
from bipsynth.bip2olp import translate
from bipsynth.lockstep import check_aig_lockstep, olp_runs
from bipsynth.olp import NonConstantInit, OlpProgram, eval_expr, olp_init, parse_program
from bipsynth.olp2aig import bit_names, bitblast, lower_expr, lower_variables

from conftest import compiled, system


def prog(head, init="", nxt=""):
    return parse_program(f"{head}\ndo-together {{ {init} }}\nwhile(true) {{ do-together {{ {nxt} }} }}\n")


def test_lower_variables():
    p = translate(system("traffic_light")).program
    a = Aig()
    bm = lower_variables(a, p)
    assert len(bm["cycle"]) == 1 and (bm["cycle"][0] >> 1) in a.latches
    assert len(bm["selector"]) == 1 and (bm["selector"][0] >> 1) in a.inputs
    assert "ie[0]" not in bm.bits  # assigned wires are aliases made during bit-blasting
    bb = bitblast(p)
    assert all(len(bb.bitmap[f"ie[{j}]"]) == 1 for j in range(2))
    assert len(bb.aig.inputs) == 1


def test_and_of_two_bools_is_one_gate():
    p = prog("wire bool a;\nwire bool b;\nwire bool o;\no = a && b;")
    bb = bitblast(p)
    assert len(bb.aig.ands) == 1


def test_mux_three_gates_per_bit():
    p = prog("wire bool c;\nwire int<4> x;\nwire int<4> y;\nwire int<4> o;\no = c ? x : y;")
    bb = bitblast(p)
    assert len(bb.aig.ands) == 3 * 4


def test_toggle_register_has_no_gates():
    p = prog("bool r;", "r = false;", "r = !r;")
    bb = bitblast(p)
    (v,) = bb.aig.latches
    assert bb.aig.ands == [] and bb.aig.next[v] == lit_not(2 * v)


def test_non_constant_init():
    with pytest.raises(NonConstantInit):
        prog("int<4> a;\nwire int<4> k;", "a = k;", "a = a;")


def test_constant_init_folds():
    p = prog("int<4> a;", "a = 2 * 3 - 1;", "a = a;")
    bb = bitblast(p)
    assert [bb.aig.init[x >> 1] for x in bb.bitmap["a"]] == [1, 0, 1, 0]


def test_bit_names():
    assert bit_names("timer.ℓ", E.uint_type(2)) == ["timer.$loc:0", "timer.$loc:1"]
    assert bit_names("c.τ[1]", E.BOOL) == ["c.$fire[1]"]
    for name in compiled("atm").aig.names.values():
        assert name.isascii()


@pytest.mark.parametrize(
    "text, width, signed",
    [
        ("x == y", 32, True),
        ("x < y", 6, True),
        ("x <= y", 6, False),
        ("x + y", 7, True),
        ("x - y", 5, False),
        ("x * y", 6, True),
        ("-x", 5, True),
        ("x > y ? x : y", 8, True),
        ("x != y && !(x >= y)", 4, False),
    ],
)
def test_expressions_match_interpreter(text, width, signed):
    ty = f"{'int' if signed else 'uint'}<{width}>"
    out_ty = "bool" if any(op in text for op in ("==", "<", "!=")) and "?" not in text else ty
    p = prog(f"wire {ty} x;\nwire {ty} y;\nwire {out_ty} o;\no = {text};")
    bb = bitblast(p)
    sim = AigSimulator(bb.aig)
    rng = random.Random(width)
    for _ in range(1000):
        vx, vy = (E.wrap(rng.getrandbits(width), p.slot_type["x"]) for _ in range(2))
        bits = []
        for s in p.inputs:
            word = E.to_bits({"x": vx, "y": vy}[s], width)
            bits += [(word >> i) & 1 for i in range(width)]
        _n, _b, _o, vals = sim.step((), tuple(bits))
        got = bb.bitmap.value("o", lambda x: vals[x >> 1] ^ (x & 1))
        assert got == eval_expr(p, E.parse_expression(text), {"x": vx, "y": vy}), (vx, vy)


def test_equality_at_the_t_equals_n_state():
    p = translate(system("traffic_light")).program
    a = Aig()
    bm = lower_variables(a, p)
    bits = lower_expr(a, p, bm, E.parse_expression("timer.t == timer.n"))
    assert len(bits) == 1
    for v in a.latches:
        a.set_next(2 * v, 2 * v)
    sim = AigSimulator(a)
    state = list(sim.initial())
    for i, x in enumerate(bm["timer.t"]):  # t := 10
        state[a.latches.index(x >> 1)] = (10 >> i) & 1
    _n, _b, _o, vals = sim.step(tuple(state), (0,))
    assert vals[bits[0] >> 1] ^ (bits[0] & 1) == 1


def test_dynamic_index_out_of_range_reads_false():
    p = prog("wire uint<2> k;\nwire bool a[3];\nwire bool o;\na[0] = true;\na[1] = true;\na[2] = true;\no = a[k];")
    bb = bitblast(p)
    sim = AigSimulator(bb.aig)
    outs = []
    for k in range(4):
        _n, _b, _o, vals = sim.step((), ((k >> 0) & 1, (k >> 1) & 1))
        outs.append(bb.bitmap.value("o", lambda x: vals[x >> 1] ^ (x & 1)))
    assert outs == [True, True, True, False]


def test_bad_is_negated_property():
    c = compiled("handshake")
    p = c.output.program
    assert c.aig.bad[0] == lit_not(c.bitblast.bitmap["deadlock_free"][0])


@pytest.mark.parametrize("name", ["traffic_light", "atm", "quorum", "quorum_bug", "handshake", "priority", "toggle"])
def test_netlist_matches_olp(name):
    c = compiled(name, "quorum" if name == "quorum_bug" else None)
    traces = olp_runs(c.output, range(10), 1000)
    assert check_aig_lockstep(c.bitblast, traces) == 1000
    assert check_aig_lockstep(c.bitblast, traces, c.reduced) == 1000


def test_traffic_light_bad_never_raised_in_simulation():
    c = compiled("traffic_light")
    rng = random.Random(3)
    frames = [(rng.getrandbits(1),) for _ in range(1000)]
    assert not any(any(b) for b in AigSimulator(c.aig).run(frames))
