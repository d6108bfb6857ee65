import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ultrlab.corpus_io import Document, Query  # noqa: E402
from ultrlab.simulate import SimSpec, simulate  # noqa: E402


@pytest.fixture
def toy_docs():
    return [
        Document("d1", "Unbiased ranking", "clicks are biased by position and position again"),
        Document("d2", "Learning to rank", "listwise softmax loss for ranking models"),
        Document("d3", "Cooking pasta", "boil water, add salt, cook pasta"),
        Document("d4", "Position bias", "users examine top results; clicks depend on examination"),
    ]


@pytest.fixture(scope="session")
def small_sim():
    spec = SimSpec(n_queries=40, n_docs=600, vocab_size=800, seed=7)
    return spec, *simulate(spec)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def toy_queries():
    return [Query("q1", "position bias clicks"), Query("q2", "ranking loss")]


ACCEPTANCE = {}


@pytest.fixture
def acceptance():
    """Record one result line per acceptance criterion."""

    def record(number, passed, detail):
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE[number] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[number])
