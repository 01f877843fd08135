import io

import pytest

from bipsynth.bmc import bmc
from bipsynth.lift import lift_cex
from bipsynth.olp import RandomInputs, Simulator
from bipsynth.vcd import VcdError, bip_frames, parse_vcd, render_vcd, trace_frames, write_vcd

from conftest import compiled

TOP = "TrafficLight"


def tl_vcd(steps=20, seed=1):
    c = compiled("traffic_light")
    p = c.output.program
    tr = Simulator(p).run(steps, RandomInputs(p, seed))
    return c, tr, render_vcd(c.system, trace_frames(tr), c.output)


def test_cycle_toggles_every_step():
    _c, _tr, text = tl_vcd()
    d = parse_vcd(text)
    assert [d.int_at(f"{TOP}.cycle", t) for t in range(21)] == [t % 2 for t in range(21)]


def test_registers_match_trace():
    _c, tr, text = tl_vcd()
    d = parse_vcd(text)
    for t in range(21):
        s = tr.state(t)
        assert d.int_at(f"{TOP}.timer.t", t, signed=True) == s["timer.t"]
        assert d.int_at(f"{TOP}.light.loc", t) == s["light.ℓ"]
        assert d.int_at(f"{TOP}.light.at_l{s['light.ℓ']}", t) == 1


def test_final_frame_has_unknown_wires():
    _c, _tr, text = tl_vcd(4)
    d = parse_vcd(text)
    assert d.value_at(f"{TOP}.ie", 4) == "xx"
    assert d.int_at(f"{TOP}.ie", 3) is not None


def test_empty_frames_header_only():
    c = compiled("traffic_light")
    text = render_vcd(c.system, [], c.output)
    assert text.endswith("$enddefinitions $end\n#0\n$dumpvars\n$end\n")
    d = parse_vcd(text)
    assert d.changes == {}
    assert f"{TOP}.light.m" in d.signals


def test_signal_widths():
    c, _tr, text = tl_vcd(2)
    d = parse_vcd(text)
    assert d.signals[f"{TOP}.ie"][0] == len(c.system.interactions)
    assert d.signals[f"{TOP}.timer.t"][0] == 32
    assert d.signals[f"{TOP}.light.loc"][0] == 2
    assert d.signals[f"{TOP}.timer.loc"][0] == 1


def test_identifiers_unique():
    _c, _tr, text = tl_vcd(2)
    d = parse_vcd(text)
    idents = [i for _w, i in d.signals.values()]
    assert len(set(idents)) == len(idents)


def test_handshake_cex_ends_in_deadlock(tmp_path):
    c = compiled("handshake")
    v = bmc(c.checked, 0, 10)
    _cex, tr = lift_cex(v.trace, c.bitblast, c.output, c.system)
    path = tmp_path / "d.vcd"
    write_vcd(str(path), c.system, trace_frames(tr, upto=v.depth), c.output)
    d = parse_vcd(path.read_text())
    assert d.int_at("Handshake.ie", v.depth) == 0
    assert d.int_at("Handshake.deadlock_free", v.depth) == 0
    # the transfer reads k before the sender's action increments it
    assert d.int_at("Handshake.receiver.got", v.depth) == 0
    assert d.int_at("Handshake.sender.k", v.depth) == 1


def test_bip_frames_without_circuit_signals():
    c = compiled("toggle")
    from bipsynth.semantics import Interpreter

    it = Interpreter(c.system)
    s0 = it.initial_state()
    s1 = it.step(s0, 0)
    d = parse_vcd(render_vcd(c.system, bip_frames(c.system, [s0, s1])))
    assert "Toggle.cycle" not in d.signals
    assert [d.int_at("Toggle.sw.on", t) for t in (0, 1)] == [0, 1]
    assert [d.int_at("Toggle.sw.at_b", t) for t in (0, 1)] == [0, 1]


def test_vcdvcd_reads_output(tmp_path):
    vcdvcd = pytest.importorskip("vcdvcd")
    _c, _tr, text = tl_vcd()
    path = tmp_path / "tl.vcd"
    path.write_text(text)
    v = vcdvcd.VCDVCD(str(path))
    cyc = v[f"{TOP}.cycle"]
    assert [cyc[t] for t in range(6)] == ["0", "1", "0", "1", "0", "1"]
    assert f"{TOP}.light.m[31:0]" in v.references_to_ids


@pytest.mark.parametrize(
    "text",
    [
        "$scope module a $end\n",
        "$enddefinitions $end\n#0\n1!\n",
        "$var wire 1 ! a $end\n$enddefinitions $end\n#2\n1!\n#1\n0!\n",
        "$var wire 1 ! a $end\n$enddefinitions $end\n1!\n",
        "$var wire 2 ! a $end\n$enddefinitions $end\n#0\nb102 !\n",
        "$upscope $end\n$enddefinitions $end\n",
    ],
)
def test_parser_rejects(text):
    with pytest.raises(VcdError):
        parse_vcd(text)


def test_write_to_stream():
    c = compiled("toggle")
    buf = io.StringIO()
    write_vcd(buf, c.system, [], c.output)
    assert buf.getvalue().startswith("$version")
