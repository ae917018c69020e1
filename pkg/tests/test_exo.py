import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from linpm import exo, games
from linpm.exceptions import EtaTooLargeError, InvalidInputError
from linpm.exo import ExoLearner, LearnerConfig

from . import oracles
from .strategies import random_game, seeds, simplex


def test_exp_weights_examples():
    q = exo.exp_weights(np.zeros(3), 1.0, [0, 1, 2])
    assert np.allclose(q, 1 / 3)
    q = exo.exp_weights(np.array([0.0, np.log(2), 5.0]), 1.0, [0, 1])
    assert np.allclose(q, [2 / 3, 1 / 3, 0.0])
    q = exo.exp_weights(np.array([1e6, 0.0]), 10.0, [0, 1])
    assert np.all(np.isfinite(q)) and q[1] == pytest.approx(1.0)
    with pytest.raises(InvalidInputError):
        exo.exp_weights(np.zeros(2), 0.0, [0, 1])


@given(seeds)
def test_estimator_mean_matches_dense_oracle(seed):
    # E_{A~p}[y(a)] = (x_a - H q)^T Q(p)^+ Q(p) l, computed by dense pseudo-inverse
    g = random_game(seed, full_rank=True)
    rng = np.random.default_rng(seed)
    q, p = simplex(rng, g.k), simplex(rng, g.k, floor=0.3)
    loss = rng.normal(size=g.d)
    mean = sum(p[b] * exo.estimate_losses(g, q, p, b, g.observations[b].T @ loss) for b in range(g.k))
    Q = oracles.dense_design(g, p, 0.0)
    proj = np.linalg.pinv(Q, hermitian=True) @ Q
    ref = (g.features - q @ g.features) @ proj @ loss
    assert np.allclose(mean, ref, atol=1e-9)
    # globally observable: feature differences lie in the observed span, so the mean is exact
    assert np.allclose(mean, g.features @ loss - q @ g.features @ loss, atol=1e-9)


def test_estimator_bandit_example():
    g = games.bandit(2)
    y = exo.estimate_losses(g, np.array([1.0, 0.0]), np.array([0.5, 0.5]), 1, np.array([0.3]))
    # Q = diag(p), so the observed coordinate is importance weighted and anchored at x_0
    assert np.allclose(y, [0.0, 0.6])


@given(seeds)
def test_anchoring_only_shifts_estimates(seed):
    g = random_game(seed, full_rank=True)
    rng = np.random.default_rng(seed)
    q, p = simplex(rng, g.k), simplex(rng, g.k, floor=0.3)
    b = int(rng.integers(g.k))
    sig = rng.normal(size=g.n_obs[b])
    diff = exo.estimate_losses(g, q, p, b, sig) - exo.estimate_losses(g, q, p, b, sig, anchored=False)
    assert np.allclose(diff, diff[0], atol=1e-9 * max(1.0, np.abs(diff).max()))
    cum = rng.normal(size=g.k)
    pareto = list(range(g.k))
    assert np.allclose(exo.exp_weights(cum + diff, 0.7, pareto), exo.exp_weights(cum, 0.7, pareto))


def test_estimate_rejects_bad_inputs():
    g = games.bandit(2)
    with pytest.raises(InvalidInputError):
        exo.estimate_losses(g, np.array([1.0, 0.0]), np.array([0.5, 0.5]), 2, np.array([0.3]))
    with pytest.raises(InvalidInputError):
        exo.estimate_losses(g, np.array([1.0, 0.0]), np.array([0.5, 0.5]), 0, np.array([0.3, 0.1]))


def test_config_validation():
    with pytest.raises(InvalidInputError):
        LearnerConfig("adaptive", 0.1, 1.0)
    with pytest.raises(InvalidInputError):
        LearnerConfig(-1.0, 0.1, 1.0)
    with pytest.raises(InvalidInputError):
        LearnerConfig(0.1, 0.0, 1.0)
    with pytest.raises(InvalidInputError):
        LearnerConfig(0.1, 0.1, 0.0)


def _play(game, config, T, seed, loss_fn):
    state = exo.initial_state(game, config, range(game.k))
    rng = np.random.default_rng(seed)
    hist = []
    for t in range(T):
        state = exo.learner_round(state, config, game)
        a = exo.sample_action(state.p, rng)
        loss = loss_fn(t)
        eta_t, q_t = state.eta, state.q
        state = exo.learner_update(state, config, game, a, game.observations[a].T @ loss)
        hist.append((eta_t, q_t, state.estimate))
    return state, hist


def test_adaptive_rate_schedule():
    g = games.bandit(3)
    cfg = LearnerConfig("adaptive", 0.01, 1.0, rate_cap=30.0)
    state, hist = _play(g, cfg, 40, 0, lambda t: np.array([0.3, -0.2, 0.5]))
    etas = [h[0] for h in hist] + [state.eta]
    assert etas[0] == pytest.approx(1 / 30)
    assert all(e2 <= e1 + 1e-15 for e1, e2 in zip(etas, etas[1:]))
    assert all(e <= 1 / 30 + 1e-15 for e in etas)
    assert state.eta == pytest.approx(min(1 / 30, math.sqrt(math.log(3) / (1 + sum(state.V)))))
    assert all(v >= 0 for v in state.V)


def test_fixed_rate_is_constant_and_audit_holds():
    g = games.revealing_path()
    cfg = LearnerConfig(0.02, 0.05, math.sqrt(2))
    rng = np.random.default_rng(3)
    losses = rng.uniform(-1, 1, size=(60, g.d))
    state, hist = _play(g, cfg, 60, 1, lambda t: losses[t])
    assert {h[0] for h in hist} == {0.02}
    etas, qs, ys = zip(*hist)
    assert exo.exp_weights_audit(qs, ys, etas, state.eta, range(g.k), g.k) >= -1e-9


@given(seeds, st.floats(0.01, 1.0))
def test_exp_weights_inequality_holds_for_bounded_estimates(seed, eta0):
    rng = np.random.default_rng(seed)
    k, T = int(rng.integers(2, 6)), 30
    cum = np.zeros(k)
    qs, ys, etas = [], [], []
    eta = eta0
    for t in range(T):
        q = exo.exp_weights(cum, eta, range(k))
        y = rng.uniform(-1, 1, size=k) / eta
        qs.append(q), ys.append(y), etas.append(eta)
        cum += y
        eta = eta * rng.uniform(0.8, 1.0)
    assert exo.exp_weights_audit(qs, ys, etas, eta, range(k), k) >= -1e-9


def test_audit_empty_history():
    assert exo.exp_weights_audit(np.zeros((0, 2)), np.zeros((0, 2)), np.zeros(0), 0.1, [0, 1], 2) == 0.0


def test_update_needs_round():
    g = games.bandit(2)
    cfg = LearnerConfig(0.1, 0.1, 1.0)
    with pytest.raises(InvalidInputError):
        exo.learner_update(exo.initial_state(g, cfg, [0, 1]), cfg, g, 0, np.zeros(1))


def test_rate_too_large_names_the_remedy():
    g = games.bandit(3)
    cfg = LearnerConfig(100.0, 0.01, 1.0)
    with pytest.raises(EtaTooLargeError, match="rate cap"):
        exo.learner_round(exo.initial_state(g, cfg, range(3)), cfg, g)


def test_sample_action_frequencies():
    p = np.array([0.2, 0.5, 0.3])
    rng = np.random.default_rng(0)
    counts = np.bincount([exo.sample_action(p, rng) for _ in range(20000)], minlength=3)
    assert np.allclose(counts / 20000, p, atol=0.015)
    assert exo.sample_action(np.array([0.0, 1.0]), rng) == 1


def test_estimator_api_round_trip():
    g = games.bandit(3)
    est = ExoLearner(eta=0.05, delta=0.1, scale_L=1.0, random_state=7)
    assert clone(est).get_params() == est.get_params()
    with pytest.raises(NotFittedError):
        est.predict_proba()
    est.fit(g)
    p = est.predict_proba()
    assert p.sum() == pytest.approx(1.0) and p.min() >= 0.1 / 3 - 1e-12
    actions = []
    for _ in range(10):
        a = est.predict()
        actions.append(a)
        est.partial_fit(a, np.array([0.5 if a == 0 else -0.5]))
    assert est.state_.t == 10
    again = ExoLearner(eta=0.05, delta=0.1, scale_L=1.0, random_state=7).fit(g)
    replay = []
    for _ in range(10):
        a = again.predict()
        replay.append(a)
        again.partial_fit(a, np.array([0.5 if a == 0 else -0.5]))
    assert replay == actions
    assert np.array_equal(again.state_.cumulative, est.state_.cumulative)


def test_estimator_defaults_and_hopeless():
    est = ExoLearner().fit(games.revealing_path())
    assert est.config_.adaptive and est.config_.rate_cap > 0 and est.config_.scale_L > 0
    with pytest.raises(InvalidInputError):
        ExoLearner().fit(games.composite_cycle(9))
