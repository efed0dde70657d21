import math
from fractions import Fraction

import pytest

MU_GRID = [round(0.1 * i, 1) for i in range(1, 10)]

_ACCEPTANCE_LINES: list[str] = []


def exact_binomial(alpha: Fraction, n: int) -> Fraction:
    """binom(alpha, n) from the falling-factorial product, in exact arithmetic."""
    num = Fraction(1)
    for j in range(n):
        num *= alpha - j
    return num / math.factorial(n)


@pytest.fixture
def acceptance_report():
    def report(criterion: str, ok: bool, detail: str = "") -> None:
        line = f"[{'PASS' if ok else 'FAIL'}] {criterion}" + (f": {detail}" if detail else "")
        _ACCEPTANCE_LINES.append(line)
        print(line)

    return report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
