import numpy as np
import pytest

from psarima.arima import ArimaModel, ArimaOrder


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: Monte-Carlo checks that take tens of seconds or more")


def ar1(phi: float, mean: float = 0.0, sigma2: float = 1.0) -> ArimaModel:
    return ArimaModel(ArimaOrder(1, 0, 0), phi=[phi], mean=mean, sigma2=sigma2)


def white(mean: float = 0.0, sigma2: float = 1.0) -> ArimaModel:
    return ArimaModel(ArimaOrder(), mean=mean, sigma2=sigma2)


@pytest.fixture
def rng():
    return np.random.default_rng(20240101)


ACCEPTANCE_RESULTS: dict = {}


def record_criterion(number: int, title: str, passed: bool, detail: str) -> None:
    ACCEPTANCE_RESULTS[number] = (title, "PASS" if passed else "FAIL", detail)
    print(f"\ncriterion {number} [{ACCEPTANCE_RESULTS[number][1]}] {title}: {detail}")


def skip_criterion(number: int, title: str, reason: str) -> None:
    ACCEPTANCE_RESULTS[number] = (title, "SKIP", reason)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        title, verdict, detail = ACCEPTANCE_RESULTS[number]
        terminalreporter.write_line(f"criterion {number} {verdict:4s} {title}: {detail}")
