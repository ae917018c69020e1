"""Exploration-by-optimization learner with the anchored loss estimator.

Each round:

1. ``q_t`` is exponential weights over the Pareto actions on the cumulative
   loss estimates.
2. ``p~_t`` solves the exploration program for ``q_t``.
3. The action is drawn from ``p_t = (1 - delta) p~_t + delta / k``.
4. The loss estimate ``y_t(a) = (x_a - H q_t)^T Q(p_t)^+ M_{A_t} phi_t`` is
   added to the cumulative estimates.

With ``eta="adaptive"`` the learning rate follows
``eta_{t+1} = min(1/B, sqrt(log k / (1 + sum_s V_s)))`` where ``V_s`` is the
(clamped) optimal exploration value of round ``s``.
"""
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import check_action, check_delta, check_simplex, check_vector
from .exceptions import EtaTooLargeError, InvalidInputError
from .optimizer import ExplorationProblem, _kernel, solve_exploration

log = logging.getLogger(__name__)

ADAPTIVE = "adaptive"
BOUND_SLACK = 1e-6


def exp_weights(cumulative, eta, pareto):
    """``q(a) ∝ exp(-eta * cumulative(a))`` on the Pareto actions, zero elsewhere."""
    cumulative = check_vector(cumulative, name="cumulative")
    if not eta > 0:
        raise InvalidInputError("eta must be positive")
    pareto = list(pareto)
    if not pareto:
        raise InvalidInputError("pareto set must be nonempty")
    z = -eta * cumulative[pareto]
    z -= z.max()
    w = np.exp(z)
    q = np.zeros(cumulative.shape[0])
    q[pareto] = w / w.sum()
    return q


def _reduced_binv(game, p):
    return _kernel(game).binv(np.asarray(p, float))


def estimate_losses(game, q, p, played, signal, anchored=True):
    """Anchored importance-weighted loss estimate for every action.

    ``p`` is the sampling distribution (full support).  With
    ``anchored=False`` the anchor ``H q`` is dropped, which shifts every entry
    by the same constant.
    """
    played = check_action(played, game.k, "played")
    signal = check_vector(signal, game.n_obs[played], "signal")
    q = check_simplex(q, game.k, "q")
    p = check_simplex(p, game.k, "p")
    ker = _kernel(game)
    Binv = ker.binv(p)
    z = Binv @ (ker.Mr[played] @ signal)
    anchors = ker.XU - (q @ ker.XU)[None, :] if anchored else ker.XU
    return anchors @ z


@dataclass
class LearnerConfig:
    """Learner parameters.

    ``eta`` is a positive float or ``"adaptive"``; ``rate_cap`` is the
    adaptive cap ``B`` (learning rates never exceed ``1/B``).
    """

    eta: object
    delta: float
    scale_L: float
    epsilon: float = 0.0
    rate_cap: float = None
    seed: int = 0
    method: str = "slsqp"

    def __post_init__(self):
        check_delta(self.delta, allow_zero=False)
        if not self.scale_L > 0:
            raise InvalidInputError("scale_L must be positive")
        if self.eta == ADAPTIVE:
            if self.rate_cap is None or not self.rate_cap > 0:
                raise InvalidInputError("adaptive learning rate needs a positive rate_cap B")
        elif not (isinstance(self.eta, (int, float)) and self.eta > 0):
            raise InvalidInputError(f"eta must be positive or 'adaptive', got {self.eta!r}")

    @property
    def adaptive(self):
        return self.eta == ADAPTIVE


@dataclass
class LearnerState:
    cumulative: np.ndarray
    pareto: tuple
    t: int = 0
    eta: float = 0.0
    V: list = field(default_factory=list)
    q: np.ndarray = None
    p: np.ndarray = None
    p_tilde: np.ndarray = None
    phi: float = float("nan")
    solver_iterations: int = 0
    estimate: np.ndarray = None
    violations: int = 0
    max_scaled_estimate: float = 0.0


def _log_k(k):
    # log 2 for single-action games keeps the learning rate positive
    return math.log(max(k, 2))


def initial_state(game, config, pareto):
    k = game.k
    if config.adaptive:
        eta = min(1.0 / config.rate_cap, math.sqrt(_log_k(k)))
    else:
        eta = float(config.eta)
    return LearnerState(np.zeros(k), tuple(pareto), 0, eta)


def learner_round(state, config, game):
    """Compute ``q_t``, ``p~_t`` and ``p_t`` for the next round (state is copied)."""
    q = exp_weights(state.cumulative, state.eta, state.pareto)
    pb = ExplorationProblem(game, q, state.eta, config.delta, config.scale_L, config.epsilon)
    try:
        res = solve_exploration(pb, start=state.p_tilde, method=config.method)
    except EtaTooLargeError as exc:
        raise EtaTooLargeError(f"round {state.t + 1}: {exc}",
                               exc.min_z, exc.limit) from None
    p_tilde = res.p_tilde
    p = (1.0 - config.delta) * p_tilde + config.delta / game.k
    return replace(state, q=q, p=p, p_tilde=p_tilde, phi=res.attained_phi,
                   solver_iterations=res.iterations)


def sample_action(p, rng):
    """Inverse-CDF draw from ``p`` using one uniform variate."""
    c = np.cumsum(p)
    return int(min(np.searchsorted(c, rng.random() * c[-1], side="right"), len(p) - 1))


def learner_update(state, config, game, played, signal):
    """Add the round's loss estimate and, if adaptive, update the learning rate."""
    if state.q is None:
        raise InvalidInputError("learner_round must be called before learner_update")
    y = estimate_losses(game, state.q, state.p, played, signal)
    scaled = float(np.max(np.abs(state.eta * y)))
    violations = state.violations
    if scaled > 1.0 + BOUND_SLACK:
        violations += 1
        log.info("round %d: |eta * estimate| = %.6g exceeds 1", state.t + 1, scaled)
    V = list(state.V)
    eta = state.eta
    if config.adaptive:
        V.append(max(0.0, state.phi))
        eta = min(1.0 / config.rate_cap, math.sqrt(_log_k(game.k) / (1.0 + sum(V))))
    return replace(state, cumulative=state.cumulative + y, t=state.t + 1, eta=eta, V=V,
                   estimate=y, violations=violations,
                   max_scaled_estimate=max(state.max_scaled_estimate, scaled))


def exp_weights_audit(q_hist, y_hist, eta_hist, eta_final, pareto, k):
    """Slack of the exponential-weights regret inequality for every comparator in ``pareto``.

    Checks ``sum_t <q_t - e_a, y_t> <= log k / eta_{T+1} + sum_t eta_t <q_t, y_t^2>``,
    which reduces to the fixed-rate inequality when all rates are equal.
    Returns the smallest slack (right side minus left side).
    """
    q_hist = np.asarray(q_hist, float)
    y_hist = np.asarray(y_hist, float)
    eta_hist = np.asarray(eta_hist, float)
    if q_hist.shape[0] == 0:
        return 0.0
    qy = np.einsum("ta,ta->t", q_hist, y_hist).sum()
    right = _log_k(k) / eta_final + float(np.sum(eta_hist * np.einsum("ta,ta->t", q_hist, y_hist ** 2)))
    totals = y_hist.sum(axis=0)
    return float(min(right - (qy - totals[a]) for a in pareto))


class ExoLearner(BaseEstimator):
    """Estimator-style wrapper around the learner.

    ``fit(game)`` prepares the learner for a game; then each round call
    ``predict_proba()`` for the sampling distribution, ``predict()`` to draw an
    action and ``partial_fit(action, signal)`` with the observed signal.

    Parameters
    ----------
    eta : float or "adaptive"
    delta : float in (0, 1/2]
    scale_L : float or None
        Defaults to the observation scale bound of the game.
    rate_cap : float or None
        Adaptive cap ``B``; defaults to the learning-rate threshold of the game class.
    epsilon : float
    random_state : int or None
    """

    def __init__(self, eta=ADAPTIVE, delta=0.01, scale_L=None, rate_cap=None, epsilon=0.0,
                 method="slsqp", random_state=None):
        self.eta = eta
        self.delta = delta
        self.scale_L = scale_L
        self.rate_cap = rate_cap
        self.epsilon = epsilon
        self.method = method
        self.random_state = random_state

    def fit(self, game, report=None):
        from . import constants, observability
        obs_report = observability.classify(game)
        if obs_report.verdict == observability.HOPELESS:
            raise InvalidInputError("the game is hopeless; no learner has sublinear regret")
        L = self.scale_L
        B = self.rate_cap
        if L is None or (self.eta == ADAPTIVE and B is None):
            report = constants.compute_constants(game) if report is None else report
            L = report.omega_bound if L is None else L
            if self.eta == ADAPTIVE and B is None:
                B = constants.default_rate_cap(game, L, report)
        self.config_ = LearnerConfig(self.eta, self.delta, L, self.epsilon, B,
                                     self.random_state or 0, self.method)
        self.game_ = game
        self.observability_ = obs_report
        self.state_ = initial_state(game, self.config_, obs_report.pareto_set)
        self.rng_ = np.random.default_rng(self.random_state)
        self._planned = False
        return self

    def _plan(self):
        if not hasattr(self, "state_"):
            from sklearn.exceptions import NotFittedError
            raise NotFittedError("call fit(game) first")
        if not self._planned:
            self.state_ = learner_round(self.state_, self.config_, self.game_)
            self._planned = True

    def predict_proba(self):
        self._plan()
        return self.state_.p.copy()

    def predict(self):
        self._plan()
        return sample_action(self.state_.p, self.rng_)

    def partial_fit(self, action, signal):
        self._plan()
        self.state_ = learner_update(self.state_, self.config_, self.game_, action, signal)
        self._planned = False
        return self
