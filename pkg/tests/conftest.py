import json

import numpy as np
import pytest
from hypothesis import settings

from oracles import FROZEN
from twirlzne.molham import load_h2
from twirlzne.vqe import ansatz

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def frozen():
    return json.loads(FROZEN.read_text())


@pytest.fixture(scope="session")
def h2():
    return load_h2()


@pytest.fixture(scope="session")
def h2_ansatz(h2):
    return ansatz(h2)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# criterion number -> list of (passed, detail)
ACCEPTANCE: dict[int, list[tuple[bool, str]]] = {}


@pytest.fixture(scope="session")
def accept():
    def record(criterion: int, passed: bool, detail: str) -> bool:
        ACCEPTANCE.setdefault(criterion, []).append((bool(passed), detail))
        print(f"criterion {criterion}: {'PASS' if passed else 'FAIL'}  {detail}")
        return bool(passed)
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in range(1, 11):
        entries = ACCEPTANCE.get(k)
        if not entries:
            terminalreporter.write_line(f"criterion {k:2d}: NOT RUN")
            continue
        status = "PASS" if all(ok for ok, _ in entries) else "FAIL"
        terminalreporter.write_line(f"criterion {k:2d}: {status}  " + "; ".join(d for _, d in entries))
