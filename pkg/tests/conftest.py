import functools
from pathlib import Path

import pytest

from bipsynth.bip import load_invariants, load_system, parse_system
from bipsynth.pipeline import compile_system

ROOT = Path(__file__).resolve().parent.parent
MODELS = ROOT / "models"
GOLDEN = Path(__file__).resolve().parent / "golden"


def model_path(name: str) -> Path:
    return MODELS / f"{name}.bip"


@functools.lru_cache(maxsize=None)
def system(name: str):
    return load_system(model_path(name))


@functools.lru_cache(maxsize=None)
def invariants(name: str, inv: str = None):
    path = MODELS / f"{inv or name}.inv"
    return tuple(load_invariants(path, system(name))) if path.exists() else ()


@functools.lru_cache(maxsize=None)
def compiled(name: str, inv: str = None, fuse: bool = False):
    return compile_system(system(name), invariants(name, inv), fuse=fuse)


MINIMAL = """
system Minimal;
component c {
  place s;
  init s;
  port p();
  on p from s to s;
}
connector a { ports c.p; }
"""


@pytest.fixture
def tl():
    return system("traffic_light")


@pytest.fixture
def minimal():
    return parse_system(MINIMAL)


ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture
def criterion(request):
    """Record a PASS/FAIL line for an acceptance criterion; printed in the terminal summary."""
    results = request.config.stash.setdefault(ACCEPTANCE, {})

    def record(number: int, title: str):
        results[number] = [title, "FAIL", ""]
        return results[number]

    return record


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    results = item.config.stash.get(ACCEPTANCE, {})
    n = getattr(item.function, "criterion_number", None)
    if n in results and rep.when == "call":
        results[n][1] = "PASS" if rep.passed else "FAIL"


def pytest_terminal_summary(terminalreporter, config):
    results = config.stash.get(ACCEPTANCE, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        title, status, detail = results[n]
        line = f"criterion {n} {status}: {title}"
        terminalreporter.write_line(f"{line} ({detail})" if detail else line)
