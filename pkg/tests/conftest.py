import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from gatebench.drb import ShotRecord

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

EXACT_SHOTS = 10**15


def exact_records(circuits, probs, shots=EXACT_SHOTS):
    """Records whose frequencies equal ``probs`` to ~1e-15."""
    return [ShotRecord(c, shots, int(round(p * shots))) for c, p in zip(circuits, probs)]


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# acceptance criteria summary ------------------------------------------------------------------

ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, passed: bool, detail: str) -> str:
    line = f"{'PASS' if passed else 'FAIL'} criterion {number}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
