import pathlib

import pytest

from bufferdet import kernels
from bufferdet.annotations import load_annotations

FIXTURES = pathlib.Path(__file__).parent / "fixtures"

# lines recorded by test_acceptance, printed in the terminal summary
ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def fixtures_dir():
    return FIXTURES


@pytest.fixture(scope="session")
def small_set():
    return load_annotations(FIXTURES / "annotations.json")


@pytest.fixture(scope="session")
def plateau_set():
    return load_annotations(FIXTURES / "plateau_annotations.json")


@pytest.fixture(params=sorted(kernels.available_backends()))
def backend(request):
    return kernels.available_backends()[request.param]


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
