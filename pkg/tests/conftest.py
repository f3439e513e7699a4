import json
import pathlib

import pytest

# Filled in by test_acceptance.py; printed after the run so the verdict for
# every criterion is visible even under output capture.
ACCEPTANCE_RESULTS: dict[int, tuple[str, bool]] = {}


def record_acceptance(num: int, label: str, ok: bool) -> bool:
    ACCEPTANCE_RESULTS[num] = (label, bool(ok))
    return ok


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE_RESULTS):
        label, ok = ACCEPTANCE_RESULTS[num]
        verdict = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"ACCEPTANCE {num} ({label}): {verdict}")

from conify import parse, reduce_problem

ROOT = pathlib.Path(__file__).resolve().parents[1]
CORPUS = ROOT / "corpus"

CHAIN1 = (CORPUS / "chain1.opt").read_text()

UNIT_PARAMS = {"a": 1.0, "b": 1.0, "c": 1.0, "d": 1.0}


@pytest.fixture(scope="session")
def manifest() -> dict:
    return json.loads((CORPUS / "manifest.json").read_text())


@pytest.fixture(scope="session")
def corpus_problems(manifest):
    return {name: parse((CORPUS / name).read_text()) for name in manifest}


@pytest.fixture(scope="session")
def chain1():
    return parse(CHAIN1)


@pytest.fixture(scope="session")
def chain1_trace(chain1):
    return reduce_problem(chain1)
