import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from linpm import games
from linpm.games import Graph

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def corpus():
    """The 12 reference games with their expected verdicts."""
    return [
        (games.full_information(3), "LocallyObservable"),
        (games.feedback_graph(Graph.cycle(5, True), name="strong_cycle5"), "LocallyObservable"),
        (games.revealing_path(), "GloballyObservable"),
        (games.linear_bandit([[1.0, 0.0], [0.0, 1.0], [-1.0, -1.0]]), "LocallyObservable"),
        (games.linear_dueling(3), "LocallyObservable"),
        (games.ill_conditioned(3, 0.5), "LocallyObservable"),
        (games.composite_graph(Graph.edgeless(4, True), name="composite_empty"), "LocallyObservable"),
        (games.composite_cycle(9), "Hopeless"),
        (games.composite_cycle(10), "GloballyObservable"),
        (games.composite_bipartite(2), "Hopeless"),
        (games.composite_bipartite(4), "GloballyObservable"),
        (games.single_action(), "Trivial"),
    ]


@pytest.fixture(scope="session")
def corpus_games():
    return corpus()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from .acceptance_log import LINES
    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
