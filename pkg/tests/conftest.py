import contextlib
import time

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

settings.register_profile(
    "default",
    deadline=None,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

_ACCEPTANCE: dict[int, tuple[str, str, float]] = {}


@pytest.fixture
def criterion():
    """Context manager that records PASS/FAIL of an acceptance criterion."""

    @contextlib.contextmanager
    def run(number: int, title: str):
        t0 = time.perf_counter()
        try:
            yield
        except BaseException:
            _ACCEPTANCE[number] = (title, "FAIL", time.perf_counter() - t0)
            print(f"criterion {number:2d} {title}: FAIL")
            raise
        _ACCEPTANCE[number] = (title, "PASS", time.perf_counter() - t0)
        print(f"criterion {number:2d} {title}: PASS")

    return run


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        title, status, secs = _ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d} {status}  {title}  ({secs:.2f}s)")


def flow_matrices(max_n: int = 12, min_n: int = 2):
    """Nonnegative square matrices with a mix of zero rows/columns."""

    @st.composite
    def build(draw):
        n = draw(st.integers(min_n, max_n))
        vals = draw(
            arrays(np.float64, (n, n), elements=st.floats(0.0, 1e3, allow_nan=False, allow_subnormal=False))
        )
        mask = draw(arrays(np.bool_, (n, n)))
        return np.where(mask, vals, 0.0)

    return build()


def random_flows(rng: np.random.Generator, n: int, density: float = 0.3) -> np.ndarray:
    support = rng.random((n, n)) < density
    return np.where(support, rng.exponential(1.0, (n, n)), 0.0)
