import sys
from pathlib import Path

import numpy as np
import pytest

from macdisp.channel import Channel

sys.path.insert(0, str(Path(__file__).parent))

DATA = Path(__file__).resolve().parent.parent / "data"

# results of the acceptance checks, printed at the end of the session
ACCEPTANCE: dict = {}


def binary_mac(p1):
    """2x2x2 channel from ``P(Y=1 | x1, x2)`` given as a nested list."""
    p1 = np.asarray(p1, dtype=np.float64)
    return Channel(np.stack([1 - p1, p1], axis=-1))


def noiseless_product():
    w = np.zeros((2, 2, 4))
    for a in range(2):
        for b in range(2):
            w[a, b, 2 * a + b] = 1.0
    return Channel(w)


def single_user(rows):
    """Channel with a one-letter first input: ``rows[x2] = W(.|x2)``."""
    return Channel(np.asarray(rows, dtype=np.float64)[None])


@pytest.fixture(scope="session")
def f1():
    return binary_mac([[0.1, 0.9], [0.2, 0.8]])


@pytest.fixture(scope="session")
def f2():
    return binary_mac([[0.05, 0.35], [0.65, 0.95]])


@pytest.fixture(scope="session")
def f3():
    return binary_mac([[0.02, 0.3], [0.55, 0.85]])


@pytest.fixture(scope="session")
def noiseless():
    return noiseless_product()


@pytest.fixture(scope="session")
def x1_blind():
    """W(y | x1, x2) does not depend on x1."""
    return binary_mac([[0.1, 0.7], [0.1, 0.7]])


@pytest.fixture(scope="session")
def x2_useless():
    """Binary symmetric channel from x1; x2 is ignored."""
    return binary_mac([[0.11, 0.11], [0.89, 0.89]])


@pytest.fixture(scope="session")
def data_dir():
    return DATA


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def boundaries(f1, f2, f3, noiseless, x1_blind, x2_useless):
    """Lazily computed default-resolution boundaries keyed by fixture name."""
    from macdisp.capacity import boundary

    chans = {"f1": f1, "f2": f2, "f3": f3, "noiseless": noiseless, "x1_blind": x1_blind,
             "x2_useless": x2_useless}
    cache: dict = {}

    def get(name):
        if name not in cache:
            cache[name] = boundary(chans[name], resolution=128)
        return cache[name]

    return get
