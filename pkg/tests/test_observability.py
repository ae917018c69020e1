import itertools

import numpy as np
import pytest
from hypothesis import given
from scipy.stats import ortho_group

from linpm import games, observability as obs
from linpm.games import Graph, LpBall

from . import oracles
from .conftest import corpus
from .strategies import random_game, seeds


@pytest.mark.parametrize("game,expected", corpus(), ids=lambda x: getattr(x, "name", x))
def test_corpus_verdicts(game, expected):
    assert obs.classify(game).verdict == expected


def test_pareto_examples():
    assert obs.pareto_actions(games.full_information(3)) == [0, 1, 2]
    X = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, 0.0]])
    g = games.custom(X, [np.eye(2)] * 3)
    assert obs.pareto_actions(g) == [0, 1]
    d = games.linear_dueling(3)
    assert sorted(obs.pareto_actions(d)) == [a * 3 + a for a in range(3)]


def test_duplicates_map_to_one_representative():
    X = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 0.0]])
    g = games.custom(X, [np.eye(2)] * 3)
    dup = obs.duplicate_map(g)
    assert dup[2] == dup[0]
    assert len(obs.pareto_actions(g)) == 2


def test_neighbor_examples():
    assert sorted(obs.neighbor_pairs(games.bandit(3))) == [(0, 1), (0, 2), (1, 2)]
    g = games.custom(np.array([[0.0, 0.0], [1.0, 0.0]]), [np.eye(2)] * 2)
    assert obs.neighbor_pairs(g) == [(0, 1)]
    square = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    g = games.custom(square, [np.eye(2)] * 4)
    assert set(obs.neighbor_pairs(g)) == oracles.convex_hull_edges_2d(square)
    same = games.custom(np.ones((3, 2)), [np.eye(2)] * 3)
    assert obs.neighbor_pairs(same) == []


@given(seeds)
def test_neighbors_match_hull_edges_in_the_plane(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(int(rng.integers(3, 8)), 2))
    g = games.custom(X, [np.eye(2)] * X.shape[0], LpBall(2.0, 0.1))
    assert set(obs.neighbor_pairs(g)) == oracles.convex_hull_edges_2d(X)


@given(seeds)
def test_sampled_ties_are_neighbors(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(5, 3))
    g = games.custom(X, [np.eye(3)] * 5, LpBall(2.0, 0.1))
    found = set(obs.neighbor_pairs(g))
    for a, b in itertools.combinations(range(5), 2):
        diff = X[a] - X[b]
        basis = np.linalg.svd(diff[None, :])[2][1:]
        ls = rng.normal(size=(400, 2)) @ basis
        vals = ls @ X.T
        others = [c for c in range(5) if c not in (a, b)]
        if np.any(np.all(vals[:, others] > vals[:, [a]] + 1e-6, axis=1)):
            assert (a, b) in found


GRAPHS = [
    (Graph.clique(3, True), "strong"),
    (Graph.clique(3, False), "strong"),
    (Graph.edgeless(3, True), "strong"),
    (Graph.edgeless(3, False), "none"),
    (Graph.cycle(5, True), "strong"),
    (Graph.cycle(5, False), "weak"),
    (Graph.path(3, False), "weak"),
    (Graph.path(3, True), "strong"),
    (Graph.from_edges(4, [(0, 1), (0, 2), (0, 3)], False), "weak"),
    (Graph.from_edges(4, [(0, 1)], [False, False, True, False]), "none"),
]
EXPECTED = {"strong": obs.LOCAL, "weak": obs.GLOBAL, "none": obs.HOPELESS}


@pytest.mark.parametrize("graph,label", GRAPHS)
def test_graph_games_follow_graph_observability(graph, label):
    assert obs.classify(games.feedback_graph(graph)).verdict == EXPECTED[label]
    assert graph.is_strongly_observable() == (label == "strong")


@pytest.mark.parametrize("game", [g for g, _ in corpus()], ids=lambda g: g.name)
def test_witnesses_solve_their_equations(game):
    rep = obs.classify(game)
    X = game.features
    for w in rep.witnesses:
        if w.passed:
            a, b = w.pair
            assert np.linalg.norm(game.M @ w.weights - (X[a] - X[b])) <= 1e-6


@pytest.mark.parametrize("game", [g for g, _ in corpus()], ids=lambda g: g.name)
def test_local_implies_global(game):
    rep = obs.classify(game)
    if rep.verdict == obs.LOCAL:
        assert all(w.passed for w in rep.witnesses if w.allowed is None)


def test_composite_empty_equals_bandit():
    a = obs.classify(games.composite_graph(Graph.edgeless(4, True)))
    b = obs.classify(games.bandit(4))
    assert a.verdict == b.verdict and a.neighbor_pairs == b.neighbor_pairs


@given(seeds)
def test_verdict_invariant_under_rotation(seed):
    g = random_game(seed)
    R = ortho_group.rvs(g.d, random_state=seed % (2 ** 32))
    rotated = games.custom(g.features @ R.T, [R @ Mc for Mc in g.observations], g.loss_space)
    assert obs.classify(g).verdict == obs.classify(rotated).verdict


@pytest.mark.parametrize("game", [games.bandit(3), games.full_information(3), games.ill_conditioned(3, 0.5),
                                  games.feedback_graph(Graph.cycle(5, True)),
                                  games.linear_bandit([[1.0, 0.0], [0.0, 1.0], [-1.0, -1.0]])],
                         ids=lambda g: g.name)
def test_loss_condition_agrees_on_local_games(game, rng):
    for _ in range(200):
        assert obs.loss_condition_holds(game, rng.normal(size=game.d))


def test_loss_condition_fails_somewhere_on_weak_graph(rng):
    g = games.revealing_path()
    results = [obs.loss_condition_holds(g, rng.normal(size=3)) for _ in range(200)]
    assert not all(results)
