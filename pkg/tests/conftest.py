import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", max_examples=50, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


def random_symmetric(rng, J, scale=1.0, diag_scale=None):
    A = rng.uniform(-scale, scale, size=(J, J))
    S = np.tril(A, -1)
    S = S + S.T
    d = scale if diag_scale is None else diag_scale
    S[np.diag_indices(J)] = rng.uniform(-d, d, size=J)
    return S


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def study2_truth():
    from ising_impute.datagen import load_true_parameters

    return load_true_parameters("II")


_ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_report():
    """Records one summary line per acceptance criterion and returns a checker."""

    def report(criterion, ok, detail):
        _ACCEPTANCE_LINES.append(f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail

    return report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
