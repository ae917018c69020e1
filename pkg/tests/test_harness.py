import json
import math

import numpy as np
import pytest

from linpm import adversary as adv, games, harness
from linpm.exceptions import InvalidInputError
from linpm.exo import LearnerConfig

CFG = LearnerConfig(0.05, 0.1, 1.0)


def _trace(features, actions, losses, theta=None):
    X = np.asarray(features, float)
    losses = np.asarray(losses, float)
    actions = np.asarray(actions)
    T, k = len(actions), X.shape[0]
    return harness.Trace(X, tuple(range(k)), actions, losses, np.einsum("td,td->t", X[actions], losses),
                         np.full(T, 0.1), np.zeros(T), np.zeros(T, int), np.zeros(T, bool),
                         np.full((T, k), 1 / k), np.zeros((T, k)), 0.1,
                         None if theta is None else np.asarray(theta, float))


def test_regret_by_hand():
    tr = _trace(np.eye(2), [0, 1, 0], [[1.0, 0.0], [0.0, 1.0], [1.0, 0.0]])
    # played 1 + 1 + 1 = 3, best fixed action: a0 -> 2, a1 -> 1
    assert harness.regret(tr) == pytest.approx(2.0)
    assert harness.regret(tr, comparator=[0]) == pytest.approx(1.0)


def test_pseudo_regret_by_hand():
    tr = _trace(np.eye(2), [0, 1, 1, 0], np.zeros((4, 2)), theta=[0.2, 0.5])
    assert harness.pseudo_regret(tr) == pytest.approx(0.6)
    with pytest.raises(InvalidInputError):
        harness.pseudo_regret(_trace(np.eye(2), [0], np.zeros((1, 2))))


def test_zero_horizon():
    g = games.bandit(2)
    env = adv.StochasticParam([0.1, 0.2], 0.0, clip=False)
    tr = harness.run(g, CFG, env, 0)
    assert tr.T == 0 and harness.regret(tr) == 0.0 and harness.pseudo_regret(tr) == 0.0
    assert harness.audit(tr) == 0.0
    with pytest.raises(InvalidInputError):
        harness.run(g, CFG, env, -1)


def test_run_is_deterministic_and_consistent(tmp_path):
    g = games.bandit(3)
    env = adv.StochasticParam([0.3, -0.2, 0.1], 0.3, space=g.loss_space)
    a = harness.run(g, CFG, env, 50, seed=4, run_id=2)
    b = harness.run(g, CFG, env, 50, seed=4, run_id=2)
    c = harness.run(g, CFG, env, 50, seed=4, run_id=3)
    assert np.array_equal(a.actions, b.actions) and np.array_equal(a.losses, b.losses)
    assert not np.array_equal(a.losses, c.losses)
    assert np.allclose(a.realized, [g.features[x] @ l for x, l in zip(a.actions, a.losses)])
    assert np.allclose(a.q.sum(axis=1), 1.0)
    assert harness.audit(a) >= -1e-9
    a.to_csv(tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert len(lines) == 51 and lines[0].startswith("t,action,loss")


def test_fixed_sequence_run_and_horizon():
    g = games.full_information(2)
    env = adv.FixedSequence([[1.0, 0.0]] * 5)
    tr = harness.run(g, CFG, env, 5)
    assert harness.regret(tr) == pytest.approx(float(np.sum(tr.actions == 0)))
    with pytest.raises(IndexError):
        harness.run(g, CFG, env, 6)


def test_hopeless_run_needs_force():
    g = games.composite_cycle(9)
    env = adv.StochasticParam(np.zeros(9), 0.0, clip=False)
    with pytest.raises(InvalidInputError):
        harness.run(g, CFG, env, 2)


def test_make_config():
    g = games.bandit(3)
    cfg = harness.make_config({"delta_scale": 2.0}, g, 100)
    assert cfg.delta == pytest.approx(0.02) and cfg.adaptive and cfg.rate_cap > 0
    cfg = harness.make_config({"eta": 0.1, "delta": 0.3, "scale_L": 2.0}, g, 100)
    assert (cfg.eta, cfg.delta, cfg.scale_L, cfg.rate_cap) == (0.1, 0.3, 2.0, None)
    assert harness.make_config({"delta_scale": 5.0, "delta_exponent": 0.0}, g, 10).delta == 0.5


def test_fit_slope():
    h = [1000, 4000, 16000]
    slope, hw = harness.fit_slope(h, [2 * T ** 0.5 for T in h])
    assert slope == pytest.approx(0.5) and hw == pytest.approx(0.0, abs=1e-9)
    assert all(math.isnan(x) for x in harness.fit_slope(h, [0.0, 1.0, 2.0]))
    with pytest.raises(InvalidInputError):
        harness.fit_slope([1, 2], [1, 2])


def test_zero_loss_sweep_is_degenerate(tmp_path):
    spec = {"variant": "bandit", "params": {"k": 2}}
    env = {"type": "stochastic", "theta": [0.0, 0.0], "sigma": 0.0}
    res = harness.sweep(spec, {"eta": 0.1, "delta": 0.1, "scale_L": 1.0}, env, [5, 10, 20], 2, seed=1)
    assert res.degenerate and res.to_dict()["slope"] is None
    assert res.mean_regret == [0.0, 0.0, 0.0] and not res.failures
    assert [(r["T"], r["run"]) for r in res.rows] == [(T, r) for T in (5, 10, 20) for r in range(2)]
    res.write(tmp_path / "s.csv", tmp_path / "s.json")
    assert json.loads((tmp_path / "s.json").read_text())["degenerate"] is True
    header = (tmp_path / "s.csv").read_text().splitlines()[0]
    assert header == "game,class,eta_mode,T,seed,run,regret,pseudo_regret,violations,audit_slack,seconds"


def test_sweep_records_failures():
    spec = {"variant": "bandit", "params": {"k": 3}}
    env = {"type": "stochastic", "theta": [0.0, 0.0, 0.0]}
    res = harness.sweep(spec, {"eta": 100.0, "delta": 0.01, "scale_L": 1.0}, env, [2, 3, 4], 1)
    assert len(res.failures) == 3 and "EtaTooLargeError" in res.failures[0]["error"]
    assert res.degenerate


def test_sweep_validation():
    spec = {"variant": "bandit", "params": {"k": 2}}
    env = {"type": "stochastic", "theta": [0.0, 0.0]}
    with pytest.raises(InvalidInputError):
        harness.sweep(spec, {}, env, [5, 10], 1)
    with pytest.raises(InvalidInputError):
        harness.sweep(spec, {}, env, [5, 10, 20], 0)
    with pytest.raises(InvalidInputError):
        harness.sweep(spec, {}, env, [5, 10, 20], 1, slope_metric="other")


def test_pareto_comparator_matches_full_minimum():
    # action 2 is the midpoint of the others, so it is never the unique best
    g = games.custom([[1.0, 0.0], [0.0, 1.0], [0.5, 0.5]], [np.eye(2)] * 3)
    rng = np.random.default_rng(5)
    env = adv.FixedSequence(rng.uniform(-1, 1, size=(40, 2)))
    tr = harness.run(g, CFG, env, 40, seed=2)
    assert tr.pareto == (0, 1)
    assert harness.regret(tr, comparator=tr.pareto) == pytest.approx(harness.regret(tr), abs=1e-9)
