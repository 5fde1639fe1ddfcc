import numpy as np
import pytest

# the 4x5 constant matrix typed in independently of the package
PRINTED_T = [
    [1, -1, -3, -1, -6],
    [0, 0, 1, 0, 3],
    [0, 0, 2, 1, 3],
    [0, 1, 0, 0, 0],
]


def dense_matvec(rows, vec):
    """Plain-python matrix-vector product, used as an oracle."""
    return [sum(r * v for r, v in zip(row, vec)) for row in rows]


def bernstein_point(P, s):
    """Cubic Bezier with control points P evaluated by the Bernstein basis."""
    P = np.asarray(P, dtype=float)
    w = [(1 - s) ** 3, 3 * s * (1 - s) ** 2, 3 * s * s * (1 - s), s ** 3]
    return sum(wi * Pi for wi, Pi in zip(w, P))


def horner_oracle(c, t):
    a, b, cc, d = c
    return ((a * t + b) * t + cc) * t + d


@pytest.fixture
def rng():
    return np.random.default_rng(20040920)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
