"""Experiment driver: single runs, regret, horizon sweeps and rate fits."""
import csv
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import constants, observability
from .adversary import make_environment, round_rng, sample_loss
from .exceptions import InvalidInputError
from .exo import (LearnerConfig, exp_weights_audit, initial_state, learner_round,
                  learner_update, sample_action)
from .games import make_game

log = logging.getLogger(__name__)

ACTION_STREAM = 1
LOSS_STREAM = 0


@dataclass
class Trace:
    """Per-round record of one run.

    ``losses`` holds the loss vectors so that regret can be recomputed from
    the trace alone; ``theta`` is the mean loss for stochastic environments.
    """

    features: np.ndarray
    pareto: tuple
    actions: np.ndarray
    losses: np.ndarray
    realized: np.ndarray
    eta: np.ndarray
    V: np.ndarray
    iterations: np.ndarray
    violation: np.ndarray
    q: np.ndarray
    estimates: np.ndarray
    eta_final: float
    theta: np.ndarray = None
    meta: dict = field(default_factory=dict)

    @property
    def T(self):
        return int(self.actions.shape[0])

    def rows(self):
        for t in range(self.T):
            yield {"t": t + 1, "action": int(self.actions[t]), "loss": float(self.realized[t]),
                   "eta": float(self.eta[t]), "V": float(self.V[t]),
                   "iterations": int(self.iterations[t]), "violation": bool(self.violation[t])}

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=["t", "action", "loss", "eta", "V", "iterations", "violation"])
            w.writeheader()
            for row in self.rows():
                w.writerow(row)


def _empty_trace(game, pareto, theta, eta):
    k, d = game.k, game.d
    return Trace(game.features.copy(), tuple(pareto), np.zeros(0, int), np.zeros((0, d)), np.zeros(0),
                 np.zeros(0), np.zeros(0), np.zeros(0, int), np.zeros(0, bool), np.zeros((0, k)),
                 np.zeros((0, k)), eta, theta)


def run(game, config, env, T, seed=0, run_id=0, force=False):
    """Play ``T`` rounds of the learner against ``env``; deterministic given the seeds."""
    if T < 0:
        raise InvalidInputError("T must be nonnegative")
    report = observability.classify(game)
    if report.verdict == observability.HOPELESS and not force:
        raise InvalidInputError("the game is hopeless; pass force=True to run anyway")
    state = initial_state(game, config, report.pareto_set)
    theta = None if env.mean is None else np.asarray(env.mean, float).copy()
    if T == 0:
        return _empty_trace(game, report.pareto_set, theta, state.eta)
    k, d = game.k, game.d
    actions = np.zeros(T, int)
    losses = np.zeros((T, d))
    etas = np.zeros(T)
    Vs = np.zeros(T)
    iters = np.zeros(T, int)
    viol = np.zeros(T, bool)
    qs = np.zeros((T, k))
    ys = np.zeros((T, k))
    X = game.features
    for t in range(1, T + 1):
        state = learner_round(state, config, game)
        a = sample_action(state.p, round_rng(seed, run_id, t, ACTION_STREAM))
        loss = sample_loss(env, t, round_rng(seed, run_id, t, LOSS_STREAM))
        signal = game.observations[a].T @ loss
        before = state.violations
        etas[t - 1] = state.eta
        Vs[t - 1] = state.phi
        iters[t - 1] = state.solver_iterations
        qs[t - 1] = state.q
        state = learner_update(state, config, game, a, signal)
        actions[t - 1] = a
        losses[t - 1] = loss
        viol[t - 1] = state.violations > before
        ys[t - 1] = state.estimate
    realized = np.einsum("td,td->t", X[actions], losses)
    return Trace(X.copy(), tuple(report.pareto_set), actions, losses, realized, etas, Vs, iters, viol,
                 qs, ys, state.eta, theta, {"seed": seed, "run": run_id, "game": game.name})


def regret(trace, comparator=None):
    """``sum_t x_{A_t}^T l_t - min_a sum_t x_a^T l_t``; ``comparator`` restricts the min."""
    if trace.T == 0:
        return 0.0
    totals = trace.features @ trace.losses.sum(axis=0)
    idx = range(len(totals)) if comparator is None else list(comparator)
    return float(trace.realized.sum() - min(totals[a] for a in idx))


def pseudo_regret(trace):
    """``sum_t (x_{A_t} - x_{a*})^T theta`` for the best action under the mean loss."""
    if trace.theta is None:
        raise InvalidInputError("pseudo-regret needs a stochastic environment")
    if trace.T == 0:
        return 0.0
    means = trace.features @ trace.theta
    return float(means[trace.actions].sum() - trace.T * means.min())


def audit(trace):
    """Smallest slack of the exponential-weights inequality over the Pareto comparators."""
    return exp_weights_audit(trace.q, trace.estimates, trace.eta, trace.eta_final, trace.pareto,
                             trace.features.shape[0])


def make_config(template, game, T, report=None):
    """Learner config from a dict; ``delta`` may be given as ``delta_scale * T ** delta_exponent``.

    Missing ``scale_L`` and ``rate_cap`` default to the game's scale bound and
    the rate threshold of its observability class.
    """
    t = dict(template)
    if "delta" in t:
        delta = float(t["delta"])
    else:
        delta = min(0.5, float(t.get("delta_scale", 1.0)) * float(T) ** float(t.get("delta_exponent", -1.0)))
    eta = t.get("eta", "adaptive")
    if eta != "adaptive":
        eta = float(eta)
    L = t.get("scale_L")
    B = t.get("rate_cap")
    if L is None or (eta == "adaptive" and B is None):
        report = constants.compute_constants(game) if report is None else report
        L = report.omega_bound if L is None else float(L)
        if eta == "adaptive" and B is None:
            B = constants.default_rate_cap(game, L, report)
    return LearnerConfig(eta, delta, float(L), float(t.get("epsilon", 0.0)),
                         None if B is None else float(B), int(t.get("seed", 0)), t.get("method", "slsqp"))


@dataclass
class SweepResult:
    """Per-horizon mean regret with standard errors and the fitted log-log slope."""

    horizons: list
    mean_regret: list
    stderr_regret: list
    mean_pseudo: list
    stderr_pseudo: list
    slope: float
    half_width: float
    slope_metric: str
    degenerate: bool
    rows: list
    failures: list

    def to_dict(self):
        return {"horizons": self.horizons, "mean_regret": self.mean_regret,
                "stderr_regret": self.stderr_regret, "mean_pseudo_regret": self.mean_pseudo,
                "stderr_pseudo_regret": self.stderr_pseudo,
                "slope": None if math.isnan(self.slope) else self.slope,
                "half_width": None if math.isnan(self.half_width) else self.half_width,
                "slope_metric": self.slope_metric, "degenerate": self.degenerate,
                "failures": self.failures}

    def write(self, csv_path=None, json_path=None):
        if csv_path:
            cols = ["game", "class", "eta_mode", "T", "seed", "run", "regret", "pseudo_regret",
                    "violations", "audit_slack", "seconds"]
            with open(csv_path, "w", newline="") as fh:
                w = csv.DictWriter(fh, fieldnames=cols, extrasaction="ignore")
                w.writeheader()
                for row in self.rows:
                    w.writerow(row)
        if json_path:
            with open(json_path, "w") as fh:
                json.dump(self.to_dict(), fh, indent=2)


def fit_slope(horizons, values, level=0.95):
    """Least-squares slope of ``log values`` against ``log horizons`` and its CI half-width."""
    x = np.log(np.asarray(horizons, float))
    y = np.asarray(values, float)
    if len(x) < 3:
        raise InvalidInputError("a slope needs at least 3 horizons")
    if np.any(~np.isfinite(y)) or np.any(y <= 0):
        return float("nan"), float("nan")
    fit = stats.linregress(x, np.log(y))
    tq = stats.t.ppf(0.5 + level / 2, len(x) - 2)
    return float(fit.slope), float(tq * fit.stderr)


def _one_run(args):
    game_spec, template, env_spec, T, seed, run_id = args
    game = make_game(game_spec)
    start = time.perf_counter()
    try:
        config = make_config(template, game, T)
        env = make_environment(env_spec, game, T)
        trace = run(game, config, env, T, seed, run_id)
    except Exception as exc:  # recorded as a failure marker
        return {"T": T, "seed": seed, "run": run_id, "error": f"{type(exc).__name__}: {exc}"}
    row = {"game": game.name, "class": observability.classify(game).verdict,
           "eta_mode": "adaptive" if config.adaptive else f"fixed:{config.eta}", "T": T, "seed": seed,
           "run": run_id, "regret": regret(trace),
           "pseudo_regret": pseudo_regret(trace) if trace.theta is not None else float("nan"),
           "violations": int(trace.violation.sum()), "audit_slack": audit(trace),
           "seconds": time.perf_counter() - start}
    return row


def sweep(game_spec, config_template, env_spec, horizons, repeats, seed=0, n_jobs=1,
          slope_metric="pseudo_regret"):
    """Run every (horizon, repeat) pair and fit the rate exponent.

    Run ``r`` at horizon ``T`` uses seed ``seed`` and run id ``r``; results
    are ordered by ``(T, r)`` whatever the execution order.
    """
    horizons = [int(T) for T in horizons]
    if len(horizons) < 3:
        raise InvalidInputError("a sweep needs at least 3 horizons")
    if repeats < 1:
        raise InvalidInputError("repeats must be positive")
    if repeats < 5:
        log.warning("fewer than 5 repeats per horizon")
    if slope_metric not in ("regret", "pseudo_regret"):
        raise InvalidInputError("slope_metric must be 'regret' or 'pseudo_regret'")
    jobs = [(game_spec, config_template, env_spec, T, seed, r) for T in horizons for r in range(repeats)]
    if n_jobs == 1:
        results = [_one_run(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=n_jobs) as ex:
            results = list(ex.map(_one_run, jobs))
    rows = [r for r in results if "error" not in r]
    failures = [r for r in results if "error" in r]
    means, ses, pmeans, pses = [], [], [], []
    for T in horizons:
        vals = np.array([r["regret"] for r in rows if r["T"] == T])
        pvals = np.array([r["pseudo_regret"] for r in rows if r["T"] == T])
        for arr, m, s in ((vals, means, ses), (pvals, pmeans, pses)):
            m.append(float(arr.mean()) if arr.size else float("nan"))
            s.append(float(arr.std(ddof=1) / math.sqrt(arr.size)) if arr.size > 1 else float("nan"))
    target = pmeans if slope_metric == "pseudo_regret" else means
    slope, hw = fit_slope(horizons, target)
    degenerate = bool(math.isnan(slope))
    return SweepResult(horizons, means, ses, pmeans, pses, slope, hw, slope_metric, degenerate, rows, failures)
