"""Loss environments: fixed sequences, noisy parameters, and hard instances.

Hard instances perturb a parameter ``theta`` on the boundary between two
neighboring cells along a direction ``q`` that the observations of the
relevant actions cannot see (or, for locally observable pairs, along the
feature difference itself).
"""
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from ._validation import check_matrix, check_vector
from .exceptions import InvalidInputError, NoWitnessError, UnsupportedError
from .games import LpBall, PolarOfFeatures, UnitBox01, loss_space_from_dict
from . import observability as obs

KINDS = ("local", "global", "hopeless")
NOISE_SHAPES = ("isotropic", "rank_one_ones")
MEMBERSHIP_TOL = 1e-9


def round_rng(seed, run, t, stream=0):
    """Generator keyed by ``(seed, run, t, stream)``; independent of call order."""
    return np.random.default_rng([int(seed), int(run), int(t), int(stream)])


def clip_loss(loss, space):
    """Map ``loss`` into ``space``; the identity on points already inside."""
    loss = check_vector(loss, name="loss")
    if isinstance(space, UnitBox01):
        return np.clip(loss, 0.0, 1.0)
    if isinstance(space, LpBall):
        if np.isinf(space.p):
            return np.clip(loss, -space.radius, space.radius)
        norm = float(np.linalg.norm(loss, ord=space.p))
        if norm <= space.radius:
            return loss.copy()
        return loss * (space.radius / norm)
    if isinstance(space, PolarOfFeatures):
        raise UnsupportedError("clipping into a polar loss space is not supported")
    raise UnsupportedError(f"cannot clip into {space!r}")


def in_space(loss, space, features=None, tol=MEMBERSHIP_TOL):
    return bool(space.contains(np.asarray(loss, float), features, tol))


@dataclass(frozen=True)
class FixedSequence:
    losses: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "losses", check_matrix(self.losses, name="losses"))
        self.losses.setflags(write=False)

    @property
    def horizon(self):
        return self.losses.shape[0]

    @property
    def mean(self):
        return None

    def to_dict(self):
        return {"type": "fixed", "losses": self.losses.tolist()}


@dataclass(frozen=True)
class StochasticParam:
    """``loss_t = theta + noise_t``, optionally clipped into ``space``.

    ``noise_shape="isotropic"`` draws ``sigma * N(0, I)``;
    ``"rank_one_ones"`` draws ``sigma * Z * ones`` with scalar ``Z``.
    """

    theta: np.ndarray
    sigma: float = 0.0
    noise_shape: str = "isotropic"
    clip: bool = True
    space: object = None

    def __post_init__(self):
        theta = check_vector(self.theta, name="theta").copy()
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)
        if not self.sigma >= 0:
            raise InvalidInputError("sigma must be nonnegative")
        if self.noise_shape not in NOISE_SHAPES:
            raise InvalidInputError(f"noise_shape must be one of {NOISE_SHAPES}")
        if self.clip and self.space is None:
            raise InvalidInputError("clipping needs a loss space")

    @property
    def horizon(self):
        return None

    @property
    def mean(self):
        return self.theta

    def to_dict(self):
        out = {"type": "stochastic", "theta": self.theta.tolist(), "sigma": self.sigma,
               "noise": self.noise_shape, "clip": self.clip}
        if self.space is not None:
            out["loss_space"] = self.space.to_dict()
        return out


def sample_loss(env, t, rng):
    """Loss of round ``t`` (1-based)."""
    if isinstance(env, FixedSequence):
        if not 1 <= t <= env.horizon:
            raise IndexError(f"round {t} outside the fixed sequence of length {env.horizon}")
        return env.losses[t - 1].copy()
    if isinstance(env, StochasticParam):
        d = env.theta.shape[0]
        if env.sigma == 0:
            loss = env.theta.copy()
        elif env.noise_shape == "isotropic":
            loss = env.theta + env.sigma * rng.standard_normal(d)
        else:
            loss = env.theta + env.sigma * rng.standard_normal() * np.ones(d)
        return clip_loss(loss, env.space) if env.clip else loss
    raise InvalidInputError(f"unknown environment {env!r}")


@dataclass(frozen=True)
class HardPair:
    """Perturbed parameters ``theta_a = theta - Delta q`` and ``theta_b = theta + Delta q``.

    ``margin`` is the smallest loss gap at ``theta`` between ``a`` and the
    actions outside the segment ``[x_a, x_b]``.
    """

    a: int
    b: int
    kind: str
    theta: np.ndarray
    q: np.ndarray
    v: np.ndarray
    Delta: float
    radius: float
    margin: float

    @property
    def theta_a(self):
        return self.theta - self.Delta * self.q

    @property
    def theta_b(self):
        return self.theta + self.Delta * self.q

    def __iter__(self):
        return iter((self.theta_a, self.theta_b))


def _orth_residual(v, blocks):
    if not blocks:
        return v.copy()
    S = np.hstack(blocks)
    coef = np.linalg.lstsq(S, v, rcond=None)[0]
    return v - S @ coef


def _boundary_point(game, a, b):
    """Point of the common boundary of the cells of ``a`` and ``b`` with maximal slack."""
    X = game.features
    seg = set(obs.segment_members(game, a, b))
    others = [c for c in range(game.k) if c not in seg]
    d = game.d
    # variables (l, s): max s st <x_a - x_c, l> + s <= 0, <x_a - x_b, l> = 0, l in [-1, 1]^d
    cost = np.zeros(d + 1)
    cost[-1] = -1.0
    A_ub = np.array([np.append((X[a] - X[c]) / max(np.linalg.norm(X[a] - X[c]), 1e-300), 1.0)
                     for c in others]) if others else None
    b_ub = np.zeros(len(others)) if others else None
    A_eq = np.append(X[a] - X[b], 0.0)[None, :]
    bounds = [(-1.0, 1.0)] * d + [(None, 1.0)]
    res = linprog(cost, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=[0.0], bounds=bounds, method="highs")
    if res.status != 0 or res.x[-1] <= 0:
        raise NoWitnessError(f"actions {a} and {b} have no common boundary with positive slack")
    return res.x[:d], others


def _candidate_pairs(game, kind, report):
    out = []
    for a, b in report.neighbor_pairs:
        diff = game.features[a] - game.features[b]
        if kind == "hopeless":
            v = _orth_residual(diff, list(game.observations))
        elif kind == "global":
            hood = obs.segment_members(game, a, b)
            v = _orth_residual(diff, [game.observations[c] for c in hood])
        else:
            v = diff
        if np.linalg.norm(v) > 1e-9 * max(1.0, np.linalg.norm(diff)):
            out.append((a, b, v))
    return out


def neighbor_hard_pair(game, kind, Delta, rng=None, a=None, b=None):
    """Hard pair of parameters around the boundary between neighbors ``a`` and ``b``.

    ``kind="local"`` perturbs along ``x_a - x_b``; ``"global"`` along its part
    orthogonal to the observations of the pair's neighborhood; ``"hopeless"``
    along its part orthogonal to all observations.  Without ``a, b`` the first
    qualifying neighbor pair is used (a random one when ``rng`` is given).
    """
    if kind not in KINDS:
        raise InvalidInputError(f"kind must be one of {KINDS}")
    if not Delta >= 0:
        raise InvalidInputError("Delta must be nonnegative")
    report = obs.classify(game)
    needed = {"local": (obs.LOCAL, obs.GLOBAL), "global": (obs.GLOBAL,), "hopeless": (obs.HOPELESS,)}[kind]
    if report.verdict not in needed:
        raise NoWitnessError(f"a {kind} hard pair needs a game that is {' or '.join(needed)}, "
                             f"got {report.verdict}")
    cands = _candidate_pairs(game, kind, report)
    if a is not None or b is not None:
        key = tuple(sorted((a, b)))
        cands = [c for c in cands if (c[0], c[1]) == key]
        if not cands:
            raise NoWitnessError(f"({a}, {b}) is not a {kind} neighbor pair")
        if a > b:
            x, y, v = cands[0]
            cands = [(y, x, -v)]
    if not cands:
        raise NoWitnessError(f"no neighbor pair of kind {kind}")
    pa, pb, v = cands[int(rng.integers(len(cands)))] if rng is not None else cands[0]
    r = game.loss_space.inscribed_radius(game.d, game.features)
    if not r > 0:
        raise UnsupportedError("the loss space contains no centered ball")
    point, others = _boundary_point(game, pa, pb)
    theta = point * (r / 4.0) / np.linalg.norm(point)
    q = (r / (4.0 * np.linalg.norm(v))) * v
    X = game.features
    gaps = [float((X[c] - X[pa]) @ theta) for c in others]
    margin = min(gaps) if gaps else float("inf")
    return HardPair(pa, pb, kind, theta, q, v, float(Delta), float(r), margin)


def ill_conditioned_family(k, epsilon, Delta):
    """Reference parameter ``theta_0`` and the parameters ``theta_a`` for the blurred bandit.

    ``theta_a = (1/2 + Delta (1 - eps) / k) 1 - Delta e_a`` and ``theta_0 = 1/2``.
    """
    if not 0 <= Delta <= 0.25:
        raise InvalidInputError("Delta must lie in [0, 1/4]")
    if not 0 < epsilon <= 1:
        raise InvalidInputError("epsilon must lie in (0, 1]")
    theta0 = np.full(k, 0.5)
    base = 0.5 + Delta * (1.0 - epsilon) / k
    thetas = [np.full(k, base) - Delta * np.eye(k)[a] for a in range(k)]
    return theta0, thetas


def make_environment(spec, game, T=None):
    """Environment from a JSON-style dict.

    Types: ``fixed`` (``losses``), ``stochastic`` (``theta``, ``sigma``,
    ``noise``, ``clip``), ``neighbor_pair`` (``kind``, ``Delta`` or
    ``Delta_scale`` with ``horizon_exponent`` so that
    ``Delta = Delta_scale * T ** horizon_exponent``, ``side`` in ``a``/``b``,
    ``sigma``), ``ill_conditioned`` (``epsilon``, ``Delta``, ``arm``; ``arm``
    ``null`` gives ``theta_0``).
    """
    if not isinstance(spec, dict) or "type" not in spec:
        raise InvalidInputError("environment spec must be a dict with a 'type'")
    kind = spec["type"]
    space = loss_space_from_dict(spec["loss_space"]) if "loss_space" in spec else game.loss_space
    sigma = float(spec.get("sigma", 0.0))
    noise = spec.get("noise", "isotropic")
    clip = bool(spec.get("clip", True))
    if kind == "fixed":
        losses = check_matrix(spec["losses"], name="losses")
        if losses.shape[1] != game.d:
            raise InvalidInputError(f"losses must have {game.d} columns")
        return FixedSequence(losses)
    if kind == "stochastic":
        theta = check_vector(spec["theta"], game.d, "theta")
        return StochasticParam(theta, sigma, noise, clip, space)
    if kind == "neighbor_pair":
        if "Delta" in spec:
            Delta = float(spec["Delta"])
        else:
            if T is None:
                raise InvalidInputError("a horizon-scaled Delta needs the horizon T")
            Delta = float(spec["Delta_scale"]) * float(T) ** float(spec["horizon_exponent"])
        pair = neighbor_hard_pair(game, spec.get("kind", "local"), Delta, a=spec.get("a"), b=spec.get("b"))
        theta = pair.theta_a if spec.get("side", "a") == "a" else pair.theta_b
        return StochasticParam(theta, sigma, noise, clip, space)
    if kind == "ill_conditioned":
        theta0, thetas = ill_conditioned_family(game.k, float(spec["epsilon"]), float(spec["Delta"]))
        arm = spec.get("arm")
        theta = theta0 if arm is None else thetas[int(arm)]
        return StochasticParam(theta, sigma, noise, clip, space)
    raise InvalidInputError(f"unknown environment type {kind!r}")
