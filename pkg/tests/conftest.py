import numpy as np
import pytest
from hypothesis import settings

from coagtree.spectral import GridSpec
from coagtree.trees import LEAF, Tree, graft

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def small_grid():
    return GridSpec(20.0, 256)


@pytest.fixture(scope="session")
def desk_grid():
    return GridSpec(100.0, 2**14)


def nested_to_tree(t):
    """Build a Tree from nested pairs; ``None`` is the leaf."""
    if t is None:
        return LEAF
    return graft(nested_to_tree(t[0]), nested_to_tree(t[1]))
