import pytest

from warmnet.graph import build_cycle, build_path, build_star, build_torus


@pytest.fixture
def cycle5():
    return build_cycle(5)


@pytest.fixture
def single_edge():
    return build_path(1)


@pytest.fixture
def star3():
    return build_star(3)


@pytest.fixture(scope="session")
def torus20():
    return build_torus(2, 20)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
