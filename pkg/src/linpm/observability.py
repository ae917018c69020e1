"""Pareto actions, neighbor pairs and the observability classification."""
import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

TRIVIAL = "Trivial"
LOCAL = "LocallyObservable"
GLOBAL = "GloballyObservable"
HOPELESS = "Hopeless"

SPAN_TOL = 1e-7
SEGMENT_TOL = 1e-8
NEIGHBOR_MARGIN = 1e-7
DUPLICATE_TOL = 1e-12


@dataclass
class SpanWitness:
    """Outcome of a span-membership test ``M v = x_a - x_b``.

    ``allowed`` lists the actions whose blocks may be used (``None`` means all).
    ``weights`` is the least-norm solution restricted to those blocks; when the
    test fails, ``residual`` certifies the distance to the span.
    """

    pair: tuple
    allowed: tuple
    passed: bool
    weights: np.ndarray
    residual: float

    def to_dict(self):
        return {"pair": list(self.pair), "allowed": None if self.allowed is None else list(self.allowed),
                "passed": self.passed, "residual": self.residual, "weights": self.weights.tolist()}


@dataclass
class ObservabilityReport:
    pareto_set: list
    duplicate_map: dict
    neighbor_pairs: list
    verdict: str
    witnesses: list = field(default_factory=list)
    neighborhoods: dict = field(default_factory=dict)

    @property
    def is_observable(self):
        return self.verdict != HOPELESS

    def to_dict(self):
        return {
            "verdict": self.verdict,
            "pareto_set": list(self.pareto_set),
            "duplicate_map": {str(a): b for a, b in self.duplicate_map.items()},
            "neighbor_pairs": [list(p) for p in self.neighbor_pairs],
            "neighborhoods": {f"{a},{b}": list(v) for (a, b), v in self.neighborhoods.items()},
            "witnesses": [w.to_dict() for w in self.witnesses],
        }


def duplicate_map(game):
    """Map each action to the lowest-index action with identical features."""
    X = game.features
    scale = max(1.0, float(np.max(np.abs(X))))
    reps, out = [], {}
    for a in range(game.k):
        for r in reps:
            if np.max(np.abs(X[a] - X[r])) <= DUPLICATE_TOL * scale:
                out[a] = r
                break
        else:
            reps.append(a)
            out[a] = a
    return out


def _is_convex_combination(x, others):
    if len(others) == 0:
        return False
    A = np.vstack([np.asarray(others).T, np.ones(len(others))])
    b = np.concatenate([x, [1.0]])
    res = linprog(np.zeros(len(others)), A_eq=A, b_eq=b, bounds=(0, None), method="highs")
    return res.status == 0


def pareto_actions(game):
    """One representative per extreme point of the convex hull of the features."""
    dup = duplicate_map(game)
    reps = sorted(set(dup.values()))
    X = game.features
    return [a for a in reps if not _is_convex_combination(X[a], [X[b] for b in reps if b != a])]


def segment_members(game, a, b):
    """Actions whose features lie on the segment ``[x_a, x_b]``."""
    X = game.features
    u = X[b] - X[a]
    nu = float(u @ u)
    out = []
    for c in range(game.k):
        w = X[c] - X[a]
        if nu == 0:
            if np.linalg.norm(w) <= SEGMENT_TOL:
                out.append(c)
            continue
        alpha = float(w @ u) / nu
        resid = np.linalg.norm(w - alpha * u)
        if resid <= SEGMENT_TOL * max(1.0, np.sqrt(nu)) and -SEGMENT_TOL <= alpha <= 1 + SEGMENT_TOL:
            out.append(c)
    return out


def _edge_slack(game, a, b, segment):
    """Largest margin ``s`` such that some ``l`` in the unit box ties ``a`` and ``b``
    while every action off the segment is worse by at least ``s`` (after normalizing).
    """
    X = game.features
    d = game.d
    outside = [c for c in range(game.k) if c not in segment]
    if not outside:
        return np.inf
    rows = []
    for c in outside:
        g = X[a] - X[c]
        rows.append(np.concatenate([g / np.linalg.norm(g), [1.0]]))
    A_ub = np.array(rows)
    b_ub = np.zeros(len(outside))
    A_eq = np.concatenate([X[a] - X[b], [0.0]])[None, :]
    cost = np.zeros(d + 1)
    cost[-1] = -1.0
    bounds = [(-1, 1)] * d + [(None, 1)]
    res = linprog(cost, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=[0.0], bounds=bounds, method="highs")
    if res.status != 0:
        return -np.inf
    return -float(res.fun)


def neighbor_pairs(game, pareto=None):
    """Unordered pairs of Pareto actions that share a (d-1)-dimensional cell boundary."""
    pareto = pareto_actions(game) if pareto is None else pareto
    if len(pareto) < 2:
        return []
    if len(pareto) == 2:
        return [tuple(pareto)]
    out = []
    for a, b in itertools.combinations(pareto, 2):
        seg = segment_members(game, a, b)
        if _edge_slack(game, a, b, seg) > NEIGHBOR_MARGIN:
            out.append((a, b))
    return out


def span_witness(game, diff, allowed=None, pair=None):
    """Least-squares test of ``diff`` against the observation columns of ``allowed``."""
    diff = np.asarray(diff, dtype=float)
    cols = np.arange(game.n_total) if allowed is None else np.concatenate(
        [np.arange(game.n_total)[game.block_slices[c]] for c in allowed]).astype(int)
    v = np.zeros(game.n_total)
    norm = float(np.linalg.norm(diff))
    if norm == 0:
        return SpanWitness(pair, None if allowed is None else tuple(allowed), True, v, 0.0)
    sub = game.M[:, cols]
    sol = np.linalg.lstsq(sub, diff, rcond=None)[0] if cols.size else np.zeros(0)
    resid = float(np.linalg.norm(sub @ sol - diff)) if cols.size else norm
    v[cols] = sol
    return SpanWitness(pair, None if allowed is None else tuple(allowed),
                       bool(resid <= SPAN_TOL * norm), v, resid)


def classify(game):
    """Classify a game as trivial, locally observable, globally observable or hopeless."""
    dup = duplicate_map(game)
    pareto = pareto_actions(game)
    if len(pareto) <= 1:
        return ObservabilityReport(pareto, dup, [], TRIVIAL)
    X = game.features
    witnesses = []
    hopeless = False
    for a, b in itertools.combinations(pareto, 2):
        w = span_witness(game, X[a] - X[b], None, (a, b))
        witnesses.append(w)
        hopeless |= not w.passed
    pairs = neighbor_pairs(game, pareto)
    hoods = {}
    local = True
    for a, b in pairs:
        seg = segment_members(game, a, b)
        hoods[(a, b)] = seg
        w = span_witness(game, X[a] - X[b], seg, (a, b))
        witnesses.append(w)
        local &= w.passed
    if hopeless:
        verdict = HOPELESS
    elif local:
        verdict = LOCAL
    else:
        verdict = GLOBAL
    return ObservabilityReport(pareto, dup, pairs, verdict, witnesses, hoods)


def loss_condition_holds(game, loss, pareto=None):
    """Check the loss-indexed form of local observability at a single loss vector.

    For every Pareto ``a`` and the lowest-index optimal ``a*``, ``x_a - x_{a*}``
    must lie in the span of the observations of actions no worse than ``a``.
    """
    pareto = pareto_actions(game) if pareto is None else pareto
    y = game.features @ np.asarray(loss, float)
    star = int(np.argmin(y))
    tol = 1e-12 * max(1.0, float(np.max(np.abs(y))))
    for a in pareto:
        allowed = [b for b in range(game.k) if y[b] <= y[a] + tol]
        if not span_witness(game, game.features[a] - game.features[star], allowed).passed:
            return False
    return True
