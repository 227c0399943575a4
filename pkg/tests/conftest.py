import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


def random_rotation(dim, rng):
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    return q * np.sign(np.diag(r))


ACCEPTANCE: dict[int, list] = {}


@pytest.fixture
def criterion():
    """Record (number, ok, detail) for the acceptance summary; returns the recorder."""

    def record(number, ok, detail):
        ACCEPTANCE.setdefault(number, []).append((bool(ok), detail))
        print(f"criterion {number}: {'ok' if ok else 'MISS'} {detail}")
        return bool(ok)

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        checks = ACCEPTANCE[number]
        ok = all(c[0] for c in checks)
        misses = [d for good, d in checks if not good]
        note = f"{len(checks)} checks" + (f"; failed: {'; '.join(misses)}" if misses else "")
        terminalreporter.write_line(f"CRITERION {number}: {'PASS' if ok else 'FAIL'} ({note})")
