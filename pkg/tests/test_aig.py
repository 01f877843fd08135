import itertools
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bipsynth.aig import (
    FALSE,
    TRUE,
    Aig,
    AigerError,
    AigSimulator,
    aiger_ascii,
    aiger_binary,
    check_aig,
    lit_not,
    lit_value,
    read_aiger,
    reduce_aig,
    write_aiger,
)

from conftest import compiled


def toggler():
    a = Aig()
    r = a.add_latch("r", 0)
    a.set_next(r, lit_not(r))
    return a, r


def test_empty_network():
    assert aiger_ascii(Aig()) == "aag 0 0 0 0 0\n"


def test_toggler_file():
    a, _ = toggler()
    lines = aiger_ascii(a).splitlines()
    assert lines[0] == "aag 1 0 1 0 0"
    assert lines[1] == "2 3"


def test_toggler_with_bad_header():
    a, r = toggler()
    a.add_bad(a.AND(r, lit_not(r)), "never")
    text = aiger_ascii(a)
    assert text.splitlines()[0] == "aag 1 0 1 0 0 1"
    assert "b0 never" in text.splitlines()
    compat = aiger_ascii(a, compat=True)
    assert compat.splitlines()[0] == "aag 1 0 1 1 0"
    assert "o0 never" in compat.splitlines()


def test_strash_and_folding():
    a = Aig()
    x, y = a.add_input("x"), a.add_input("y")
    assert a.AND(x, y) == a.AND(y, x)
    assert a.AND(x, FALSE) == FALSE
    assert a.AND(x, TRUE) == x
    assert a.AND(x, lit_not(x)) == FALSE
    assert a.AND(x, x) == x
    assert len(a.ands) == 1
    seen = set()
    for v in a.ands:
        assert a.fanin[v] not in seen
        seen.add(a.fanin[v])
        assert a.fanin[v][0] >= a.fanin[v][1]


# -- simulation follows the four cases of a trace -------------------------

def test_trace_constant():
    a = Aig()
    a.add_output(FALSE)
    a.add_output(TRUE)
    _n, _b, outs, _v = AigSimulator(a).step((), ())
    assert outs == (0, 1)


def test_trace_input():
    a = Aig()
    x = a.add_input()
    a.add_output(x)
    sim = AigSimulator(a)
    assert [sim.step((), (b,))[2][0] for b in (0, 1, 1, 0)] == [0, 1, 1, 0]


def test_trace_latch_init_then_next():
    a = Aig()
    x = a.add_input()
    r = a.add_latch("r", 1)
    a.set_next(r, x)
    a.add_output(r)
    sim = AigSimulator(a)
    state = sim.initial()
    assert state == (1,)
    seen = []
    for b in (0, 1, 0):
        state, _bad, outs, _v = sim.step(state, (b,))
        seen.append(outs[0])
    assert seen == [1, 0, 1]  # reset value first, then the previous input


def test_trace_and():
    a = Aig()
    x, y = a.add_input(), a.add_input()
    a.add_output(a.AND(x, lit_not(y)))
    sim = AigSimulator(a)
    for bx, by in itertools.product((0, 1), repeat=2):
        assert sim.step((), (bx, by))[2][0] == (bx and not by)


def test_bit_parallel_lanes():
    a = Aig()
    x, y = a.add_input(), a.add_input()
    a.add_output(a.OR(x, y))
    _n, _b, outs, vals = AigSimulator(a).step((), (0b0011, 0b0101), lanes=4)
    assert outs[0] == 0b0111
    assert lit_value(vals, a.outputs[0], 0b1111) == 0b0111


# -- well-formedness -------------------------------------------------------

def test_emitted_networks_are_well_formed():
    for name in ("traffic_light", "atm", "quorum", "handshake", "priority", "toggle"):
        c = compiled(name)
        assert check_aig(c.aig) == []
        assert check_aig(c.reduced) == []


@pytest.mark.parametrize("mutation", range(6))
def test_fuzzed_mutations_are_caught(mutation):
    rng = random.Random(mutation)
    c = compiled("traffic_light")
    a = read_aiger(aiger_ascii(c.aig))
    ands = a.ands
    kind = mutation % 3
    if kind == 0:  # operand defined after its user: combinational loop
        v = rng.choice(ands[: len(ands) // 2])
        later = rng.choice([u for u in ands if u > v])
        a.fanin[v] = (2 * later, a.fanin[v][1])
    elif kind == 1:  # latch without next state
        del a.next[rng.choice(a.latches)]
    else:  # non-constant reset
        a.init[rng.choice(a.latches)] = 2
    assert check_aig(a)


def test_reader_rejects_combinational_cycle():
    with pytest.raises(AigerError):
        read_aiger("aag 3 1 0 1 2\n2\n6\n4 6 2\n6 4 2\n")


def test_reader_rejects_bad_header():
    with pytest.raises(AigerError):
        read_aiger("aag 1 2\n")


# -- round trips -------------------------------------------------------------

@pytest.mark.parametrize("name", ["traffic_light", "atm", "quorum", "toggle"])
def test_aiger_roundtrip_identity(name, tmp_path):
    a = compiled(name).aig
    text = aiger_ascii(a, comment="roundtrip")
    assert aiger_ascii(read_aiger(text), comment="roundtrip") == text
    data = aiger_binary(a)
    assert aiger_binary(read_aiger(data)) == data
    # ascii -> binary -> ascii
    assert aiger_ascii(read_aiger(aiger_binary(read_aiger(text)))) == aiger_ascii(a)
    path = tmp_path / "x.aig"
    write_aiger(a, path)
    assert path.read_bytes().startswith(b"aig ")
    write_aiger(a, tmp_path / "x.aag")
    assert (tmp_path / "x.aag").read_text().startswith("aag ")


def random_aig(rng, n_in, n_latch, n_and):
    a = Aig()
    lits = [FALSE] + [a.add_input(f"i{k}") for k in range(n_in)]
    latches = [a.add_latch(f"l{k}", rng.randrange(2)) for k in range(n_latch)]
    lits += latches
    for _ in range(n_and):
        x, y = rng.choice(lits) ^ rng.randrange(2), rng.choice(lits) ^ rng.randrange(2)
        lits.append(a.and_raw(max(x, y), min(x, y)))
    for r in latches:
        a.set_next(r, rng.choice(lits) ^ rng.randrange(2))
    a.add_bad(rng.choice(lits) ^ rng.randrange(2), "b")
    a.add_output(rng.choice(lits), "o")
    return a


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 1 << 30), st.integers(0, 4), st.integers(0, 4), st.integers(0, 25))
def test_random_roundtrip_and_reduce(seed, n_in, n_latch, n_and):
    rng = random.Random(seed)
    a = random_aig(rng, n_in, n_latch, n_and)
    text = aiger_ascii(a)
    b = read_aiger(text)
    assert aiger_ascii(b) == text
    assert aiger_binary(read_aiger(aiger_binary(a))) == aiger_binary(a)
    r, report = reduce_aig(a)
    assert report.after.latches <= report.before.latches
    assert report.after.ands <= report.before.ands
    frames = [tuple(rng.randrange(2) for _ in range(n_in)) for _ in range(30)]
    assert _observable(a, frames) == _observable(r, frames)


def _observable(a, frames):
    sim = AigSimulator(a)
    state = sim.initial()
    out = []
    for f in frames:
        state, bad, outs, _v = sim.step(state, f)
        out.append((bad, outs))
    return out


def test_reduce_merges_duplicates_exhaustively():
    a = Aig()
    xs = [a.add_input() for _ in range(3)]
    g1 = a.and_raw(xs[1], xs[0])
    g2 = a.and_raw(xs[1], xs[0])  # duplicate pair
    a.add_output(a.and_raw(max(g1, xs[2]), min(g1, xs[2])))
    a.add_output(a.and_raw(max(g2, xs[2]), min(g2, xs[2])))
    r, _ = reduce_aig(a)
    assert len(r.ands) == 2
    for bits in itertools.product((0, 1), repeat=3):
        assert AigSimulator(a).step((), bits)[2] == AigSimulator(r).step((), bits)[2]


def test_reduce_constant_latch():
    a = Aig()
    x = a.add_input()
    r = a.add_latch("stuck", 0)
    a.set_next(r, a.AND(r, x))  # never leaves its reset value
    a.add_bad(a.AND(r, x), "b")
    red, report = reduce_aig(a)
    assert report.constant_latches == ["stuck"]
    assert red.stats().latches == 0 and red.stats().ands == 0 and red.bad == [FALSE]


def test_reduce_traffic_light_strictly_smaller():
    c = compiled("traffic_light")
    before, after = c.aig.stats(), c.reduced.stats()
    assert after.ands < before.ands and after.latches <= before.latches


def test_py_aiger_reads_and_simulates_our_output():
    aiger = pytest.importorskip("aiger")
    from bipsynth.bmc import bmc

    c = compiled("quorum_bug", "quorum")
    a = c.aig
    circ = aiger.parse(aiger_ascii(a, compat=True))
    assert len(circ.latches) == len(a.latches) and set(circ.outputs) == set(a.bad_names)
    cex = bmc(c.checked, c.properties.index("Invariant_2"), 14)
    frames = cex.trace.inputs
    ours = AigSimulator(a).run(frames)
    theirs = circ.simulate([{a.names[v]: bool(f[k]) for k, v in enumerate(a.inputs)} for f in frames])
    for mine, (outs, _latches) in zip(ours, theirs):
        assert tuple(int(outs[n]) for n in a.bad_names) == tuple(mine)
    assert ours[-1][a.bad_names.index("Invariant_2")] == 1
