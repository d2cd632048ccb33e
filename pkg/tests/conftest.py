import warnings

import pytest

from lsgate import config


@pytest.fixture(scope="session")
def paper_doc():
    return config.load_config()


@pytest.fixture(scope="session")
def built(paper_doc):
    return config.build(paper_doc)


def build_with(*overrides):
    """Built objects for the preset plus ``key=value`` overrides."""
    return config.build(config.load_config(overrides=list(overrides)))


@pytest.fixture(autouse=True)
def _quiet_phase_warnings():
    # uncalibrated amplitudes trigger the loop-phase warning by design
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message=".*per-loop phase.*")
        yield


ACCEPTANCE: dict[int, str] = {}


def record_criterion(number: int, passed: bool, detail: str) -> bool:
    """Store the one-line verdict of an acceptance criterion for the summary."""
    ACCEPTANCE[number] = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    print(ACCEPTANCE[number])
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
