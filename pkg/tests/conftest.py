import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_correlation(rng, n, complex_=True):
    """Random Hermitian matrix with spectrum in [0, 1]."""
    X = rng.normal(size=(n, n)) + (1j * rng.normal(size=(n, n)) if complex_ else 0)
    Q, _ = np.linalg.qr(X)
    w = rng.uniform(0, 1, size=n)
    return (Q * w) @ Q.conj().T


# acceptance bookkeeping: one summary line per criterion at the end of the run
ACCEPTANCE: dict = {}


def record(criterion: int, part: str, ok: bool, detail: str) -> bool:
    ACCEPTANCE.setdefault(criterion, []).append((part, bool(ok), detail))
    return bool(ok)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[criterion]
        status = "PASS" if all(ok for _, ok, _ in parts) else "FAIL"
        detail = "; ".join(f"{part}: {'ok' if ok else 'FAIL'} ({d})" for part, ok, d in parts)
        terminalreporter.write_line(f"criterion {criterion}: {status}  {detail}")
