import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=25, derandomize=True)
settings.load_profile("default")

#: criterion number -> (passed, one-line summary); filled by test_acceptance
ACCEPTANCE = {}


def record(n: int, ok: bool, text: str):
    ACCEPTANCE[n] = (bool(ok), text)
    print(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {text}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, text = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {text}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def hermitian(rng, n, complex_=True):
    X = rng.normal(size=(n, n)) + (1j * rng.normal(size=(n, n)) if complex_ else 0)
    return 0.5 * (X + X.conj().T)
