from __future__ import annotations

import sys
import time
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from hexrhomb.engine import EngineConfig, run  # noqa: E402

# toy mode: M = 0, delta0 = 1/16, five steps
TOY = EngineConfig(delta0_override=1 / 16, max_steps=5)


@pytest.fixture(scope="session")
def toy_run():
    t0 = time.perf_counter()
    res = run(TOY, raise_on_violation=False, keep_states=True)
    res.seconds = time.perf_counter() - t0
    return res


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(RESULTS):
        terminalreporter.write_line(RESULTS[n])
