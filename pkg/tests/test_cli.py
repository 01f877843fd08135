import io
import json
import shutil
import subprocess

import pytest

from bipsynth.aig import read_aiger
from bipsynth.cli import main
from bipsynth.olp import parse_program
from bipsynth.report import parse_report
from bipsynth.vcd import parse_vcd

from conftest import GOLDEN, MODELS, model_path


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = main([str(a) for a in argv], out, err)
    return code, out.getvalue(), err.getvalue()


TL = model_path("traffic_light")
TL_INV = MODELS / "traffic_light.inv"
HS = model_path("handshake")


def test_compile_stdout_matches_golden():
    code, out, err = run("compile", TL)
    assert code == 0
    assert out == (GOLDEN / "traffic_light.olp").read_text(encoding="utf-8")
    assert "reduced" in err and "properties: deadlock_free\n" in err


def test_compile_files(tmp_path):
    olp, aag, aig = tmp_path / "t.olp", tmp_path / "t.aag", tmp_path / "t.aig"
    code, out, _ = run("compile", TL, "-i", TL_INV, "-o", olp, "-o", aag, "-o", aig, "--reduce")
    assert code == 0
    assert out.startswith("system TrafficLight: 2 components")
    parse_program(olp.read_text(encoding="utf-8"))
    a1, a2 = read_aiger(aag.read_bytes()), read_aiger(aig.read_bytes())
    assert len(a1.bad) == len(a2.bad) == 2
    assert a1.stats() == a2.stats()


def test_compile_compat_has_outputs(tmp_path):
    aag = tmp_path / "t.aag"
    assert run("compile", HS, "-o", aag, "--aiger-compat")[0] == 0
    header = aag.read_text().split("\n", 1)[0].split()
    assert header[0] == "aag" and len(header) == 6 and header[4] == "1"


def test_compile_unknown_suffix(tmp_path):
    code, _, err = run("compile", HS, "-o", tmp_path / "t.v")
    assert code == 2 and "cannot infer" in err


def test_fuse_rejected_with_reason():
    code, _, err = run("compile", TL, "--fuse")
    assert code == 2
    assert "timer.n" in err


def test_fuse_accepted():
    code, out, _ = run("compile", HS, "--fuse", "-o", "-")
    assert code == 0
    assert "one-cycle translation" not in out  # report goes to stderr with OLP on stdout


def test_diagnostic_format(tmp_path):
    bad = tmp_path / "bad.bip"
    bad.write_text("system S;\n")
    code, _, err = run("compile", bad)
    assert code == 2
    assert err.startswith(f"{bad}:") and "system declares no components" in err


def test_invariant_diagnostic_names_invariant_file(tmp_path):
    inv = tmp_path / "x.inv"
    inv.write_text("timer.zz > 0\n")
    code, _, err = run("check", TL, "-i", inv)
    assert code == 2
    assert err.startswith(f"{inv}:")


def test_missing_file():
    code, _, err = run("explore", "/nonexistent/m.bip")
    assert code == 2 and "error" in err


@pytest.mark.parametrize("argv", [[], ["frobnicate"], ["check"], ["simulate", "m.bip", "-n", "-3"],
                                  ["compile", "m.bip", "--width", "bad"]])
def test_usage_errors(argv, capsys):
    assert run(*argv)[0] == 2


def test_width_override():
    code, out, _ = run("compile", TL, "--width", "timer.t=8")
    assert code == 0
    assert "int<8> timer.t" in out


def test_simulate_ok(tmp_path):
    vcd = tmp_path / "s.vcd"
    code, out, _ = run("simulate", TL, "-i", TL_INV, "-n", 50, "--vcd", vcd)
    assert code == 0
    assert out.splitlines()[0] == "seed: 1"
    assert "deadlock_free: ok" in out and "tle: ok" in out
    d = parse_vcd(vcd.read_text())
    assert d.int_at("TrafficLight.cycle", 50) == 0
    assert d.value_at("TrafficLight.ie", 50) != "xx"


def test_simulate_violation():
    code, out, _ = run("simulate", HS, "-n", 10)
    assert code == 1
    assert "deadlock_free: violated at step 2" in out


def test_simulate_zero_steps():
    assert run("simulate", HS, "-n", 0)[0] == 0


def test_simulate_seed_reproducible(tmp_path):
    a, b = tmp_path / "a.vcd", tmp_path / "b.vcd"
    run("simulate", TL, "--seed", 9, "-n", 30, "--vcd", a)
    run("simulate", TL, "--seed", 9, "-n", 30, "--vcd", b)
    assert a.read_text() == b.read_text()


def test_check_proved_and_bounded(tmp_path):
    report = tmp_path / "r.jsonl"
    code, out, _ = run("check", TL, "-i", TL_INV, "--maxk", 20, "--report", report)
    assert code == 0
    assert "tle: Proved(2)" in out
    assert "deadlock_free: SafeUpTo(20)" in out
    recs = {r.property: r for r in parse_report(report.read_text())}
    assert recs["tle"].verdict == "proved" and recs["tle"].k == 2
    assert recs["deadlock_free"].verdict == "safe_up_to"


def test_check_cex_writes_artifacts(tmp_path):
    code, out, _ = run("check", HS, "--out-dir", tmp_path, "--report", "-")
    assert code == 1
    assert "Cex(depth 2, 1 interaction(s))" in out
    assert "step 0: exchange" in out
    rec = json.loads(out.strip().splitlines()[-1])
    assert rec["verdict"] == "cex" and rec["interactions"] == ["exchange"] and rec["bip_depth"] == 1
    assert (tmp_path / "deadlock_free.trace").read_text().startswith("property deadlock_free violated")
    parse_vcd((tmp_path / "deadlock_free.vcd").read_text())


def test_check_engine_bmc_only():
    code, out, _ = run("check", model_path("toggle"), "--engine", "bmc", "--maxk", 6)
    assert code == 0 and "SafeUpTo(6)" in out


def test_check_engine_kind_only():
    code, out, _ = run("check", model_path("toggle"), "--engine", "kind")
    assert code == 0 and "Proved(1)" in out


def test_check_unknown_property():
    code, _, err = run("check", TL, "-p", "nope")
    assert code == 2 and "unknown property" in err


def test_check_bad_solver_spec():
    code, _, err = run("check", HS, "--solver", "glucose")
    assert code == 2


def test_check_time_limit_is_resource_exit():
    code, out, _ = run("check", model_path("atm"), "--engine", "bmc", "--maxk", 60, "--time-limit", 0.01)
    assert code == 3
    assert "ResourceLimit" in out


def test_solver_from_environment(monkeypatch):
    monkeypatch.setenv("BIPSYNTH_SOLVER", "bogus")
    assert run("check", HS)[0] == 2


def test_explore_ok():
    code, out, _ = run("explore", TL, "-i", TL_INV)
    assert code == 0
    assert "reachable states: 21" in out and "diameter: 20" in out and "tle: holds" in out


def test_explore_deadlock():
    code, out, _ = run("explore", HS)
    assert code == 1 and "deadlock after 1 interaction(s)" in out


def test_explore_bound():
    code, _, err = run("explore", model_path("atm"), "--max-states", 100)
    assert code == 3 and err


def test_explore_violation():
    code, out, _ = run("explore", model_path("quorum_bug"), "-i", MODELS / "quorum.inv")
    assert code == 1 and "violated after" in out


@pytest.mark.skipif(shutil.which("bipsynth") is None, reason="console script not installed")
def test_console_script():
    p = subprocess.run(["bipsynth", "explore", str(HS)], capture_output=True, text=True)
    assert p.returncode == 1
    assert "deadlock" in p.stdout
