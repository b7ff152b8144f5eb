import warnings

import pytest
from hypothesis import HealthCheck, settings

from serverless_kw import CostWeights, ModelParams, SmoothingSpec

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance_log():
    """Collects the one-line verdict of each acceptance criterion."""

    def record(line: str) -> None:
        print(line, flush=True)
        _ACCEPTANCE_LINES.append(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def full_params():
    return ModelParams(lam=0.3, mu=1.0, beta=0.1, gamma_exp=0.01, N=50)


@pytest.fixture
def small_params():
    return ModelParams(lam=0.3, mu=1.0, beta=0.1, gamma_exp=0.01, N=5)


@pytest.fixture
def scaled():
    """Five-server instance with an interior optimum at theta* = 2."""
    params = ModelParams(lam=0.1, mu=1.0, beta=0.1, gamma_exp=0.01, N=5)
    return params, CostWeights(w3=20.0), SmoothingSpec(0.5, 4.0)


@pytest.fixture(autouse=True)
def _quiet_schedule_warnings():
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="sum of gamma_n")
        yield
