import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from twistk import kernels  # noqa: E402


@pytest.fixture(params=kernels.available_backends())
def each_backend(request):
    previous = kernels.use_backend(request.param)
    yield request.param
    kernels.use_backend(previous)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line[1])
