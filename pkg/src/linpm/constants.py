"""Instance-dependent constants that enter the regret bounds.

``beta_2_glo``  largest least-norm solution length of ``M v = x_a - x_b``.
``beta_glo``    largest minimal group norm (sum of per-action block norms).
``beta_loc``    the group-norm constant where, for a loss ordering, action
                ``a`` may only borrow observations of actions no worse than ``a``.
``w_star``, ``u_star``   subset design constants.
``omega_bound`` upper bound on the observation scale ``L`` must dominate.
"""
import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from . import observability as obs
from .exceptions import (InfeasibilityError, InvalidInputError, LocalObservabilityError,
                         UnsupportedError)
from .games import LpBall, PolarOfFeatures, UnitBox01, feedback_graph
from .linalg import COND_LIMIT, RANK_TOL, pseudoinverse

GROUP_TOL = 1e-9
ORDER_MARGIN = 1e-6
EXHAUSTIVE_MAX_K = 12
ENUMERATE_MAX_K = 7
VERTEX_MAX_D = 12
GRAPH_VARIANTS = ("feedback_graph", "full_information", "bandit", "revealing_path")


# ------------------------------------------------------------ group norms

def group_norm(game, v, allowed=None):
    blocks = range(game.k) if allowed is None else allowed
    return float(sum(np.linalg.norm(v[game.block_slices[c]]) for c in blocks))


def min_group_norm(game, diff, allowed=None, tol=GROUP_TOL, max_iter=200000, window=100):
    """Minimize ``sum_c ||v(c)||`` subject to ``M v = diff`` with ``v(c) = 0`` off ``allowed``.

    The feasible set is parameterized as ``v0 + N z`` with ``v0`` the least-norm
    solution and ``N`` an orthonormal kernel basis, and the problem is solved by
    ADMM (projection onto the affine set alternating with block soft
    thresholding).  Every reported iterate is exactly feasible.  Stops when
    the objective has decreased by less than ``tol`` over ``window`` iterations.

    Returns ``(value, v)`` with ``v`` of full length ``n``.
    """
    diff = np.asarray(diff, dtype=float)
    allowed = list(range(game.k)) if allowed is None else sorted(set(allowed))
    cols = np.concatenate([np.arange(game.n_total)[game.block_slices[c]] for c in allowed]).astype(int)
    full = np.zeros(game.n_total)
    if not np.any(diff):
        return 0.0, full
    A = game.M[:, cols]
    v0 = pseudoinverse(A) @ diff
    resid = np.linalg.norm(A @ v0 - diff)
    if resid > obs.SPAN_TOL * np.linalg.norm(diff):
        raise InfeasibilityError("target is not in the span of the allowed observations",
                                 residual=float(resid))
    # blocks as index ranges into the restricted vector
    sizes = [game.n_obs[c] for c in allowed]
    offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(int)
    groups = [slice(offsets[i], offsets[i + 1]) for i in range(len(allowed))]
    _, s, Vt = np.linalg.svd(A, full_matrices=True)
    r = int(np.sum(s > RANK_TOL * s[0])) if s.size else 0
    N = Vt[r:].T

    def objective(v):
        return float(sum(np.linalg.norm(v[g]) for g in groups))

    if N.shape[1] == 0:
        full[cols] = v0
        return objective(v0), full

    best_v, best = v0.copy(), objective(v0)
    rho = 1.0 / max(np.max(np.abs(v0)), 1e-12)
    w = v0.copy()
    u = np.zeros_like(v0)
    history = [best]
    for it in range(max_iter):
        v = v0 + N @ (N.T @ (w - u - v0))
        val = objective(v)
        if val < best:
            best, best_v = val, v
        t = v + u
        w = np.empty_like(t)
        for g in groups:
            nrm = np.linalg.norm(t[g])
            w[g] = 0.0 if nrm <= 1.0 / rho else t[g] * (1.0 - 1.0 / (rho * nrm))
        u = u + v - w
        history.append(best)
        if it >= window and history[-window - 1] - best < tol and np.linalg.norm(v - w) < tol:
            break
        # residual balancing keeps both residuals shrinking together
        if it % 50 == 49:
            primal = np.linalg.norm(v - w)
            dual = rho * np.linalg.norm(N.T @ (w - prev_w)) if it else 0.0
            if primal > 10 * dual:
                rho *= 2.0
                u /= 2.0
            elif dual > 10 * primal:
                rho /= 2.0
                u *= 2.0
        prev_w = w
    full[cols] = best_v
    return best, full


# ------------------------------------------------------------ global constants

def _pair_iter(game, pareto=None):
    pareto = obs.pareto_actions(game) if pareto is None else pareto
    return itertools.combinations(pareto, 2)


def beta_2_glo(game):
    """``max_{a,b} ||M^+ (x_a - x_b)||``; raises for hopeless games."""
    Mp = pseudoinverse(game.M)
    X = game.features
    best = 0.0
    for a, b in _pair_iter(game):
        diff = X[a] - X[b]
        v = Mp @ diff
        resid = np.linalg.norm(game.M @ v - diff)
        if resid > obs.SPAN_TOL * np.linalg.norm(diff):
            raise InfeasibilityError(f"x_{a} - x_{b} is not in the observation span", (a, b), float(resid))
        best = max(best, float(np.linalg.norm(v)))
    return best


def beta_glo(game, solver_tol=GROUP_TOL):
    """``max_{a,b} min {sum_c ||v(c)|| : M v = x_a - x_b}``."""
    X = game.features
    best = 0.0
    for a, b in _pair_iter(game):
        try:
            val, _ = min_group_norm(game, X[a] - X[b], tol=solver_tol)
        except InfeasibilityError as exc:
            raise InfeasibilityError(f"x_{a} - x_{b} is not in the observation span", (a, b),
                                     exc.residual) from None
        best = max(best, val)
    return best


# ------------------------------------------------------------ local constant

@dataclass
class BetaLocResult:
    value: float
    method: str
    worst: dict = field(default_factory=dict)
    orderings_checked: int = 0


def _lower_set_realizable(game, reps, first, last, lower):
    """Is there ``l`` with ``first`` strictly best, ``last`` strictly worst within
    ``lower``, and everything outside ``lower`` strictly worse than ``last``?"""
    X = game.features
    rows = []

    def gap(worse, better):
        g = X[better] - X[worse]
        rows.append(np.concatenate([g / np.linalg.norm(g), [1.0]]))

    for c in lower:
        if c != first:
            gap(c, first)
        if c != last:
            gap(last, c)
    for c in reps:
        if c not in lower:
            gap(c, last)
    if not rows:
        return True
    d = game.d
    cost = np.zeros(d + 1)
    cost[-1] = -1.0
    res = linprog(cost, A_ub=np.array(rows), b_ub=np.zeros(len(rows)),
                  bounds=[(-1, 1)] * d + [(None, 1)], method="highs")
    return res.status == 0 and -res.fun > ORDER_MARGIN


def beta_loc(game, mode="enumerate", n_samples=2000, rng=None, solver_tol=GROUP_TOL):
    """Local alignment constant.

    ``mode="enumerate"`` visits every realizable configuration (optimal action,
    target action, set of actions no worse than the target); this is exact and
    needs at most 7 distinct feature vectors.  ``mode="sample"`` draws random
    loss directions and returns a lower estimate.

    The optimal action of an ordering is taken as the lowest-index minimizer.
    """
    report = obs.classify(game)
    if report.verdict == obs.TRIVIAL:
        return BetaLocResult(0.0, "exact")
    if report.verdict != obs.LOCAL:
        raise LocalObservabilityError(f"game is {report.verdict}, not locally observable")
    dup = report.duplicate_map
    reps = sorted(set(dup.values()))
    pareto = set(report.pareto_set)
    members = {r: [a for a in range(game.k) if dup[a] == r] for r in reps}
    X = game.features
    cache = {}

    def solve(first, target, lower):
        key = (first, target, lower)
        if key not in cache:
            allowed = sorted(a for r in lower for a in members[r])
            try:
                cache[key] = min_group_norm(game, X[target] - X[first], allowed, tol=solver_tol)
            except InfeasibilityError:
                raise LocalObservabilityError(
                    f"no local weights for target {target} with optimal action {first}") from None
        return cache[key]

    best = BetaLocResult(0.0, "exact" if mode == "enumerate" else "sampled")
    if mode == "enumerate":
        if len(reps) > ENUMERATE_MAX_K:
            raise InvalidInputError(f"enumeration needs at most {ENUMERATE_MAX_K} distinct features")
        count = 0
        for size in range(1, len(reps) + 1):
            for lower in itertools.combinations(reps, size):
                lower = frozenset(lower)
                for first in lower:
                    if first not in pareto:
                        continue
                    for last in lower:
                        if last not in pareto:
                            continue
                        if size > 1 and first == last:
                            continue
                        if not _lower_set_realizable(game, reps, first, last, lower):
                            continue
                        count += 1
                        val, v = solve(first, last, lower)
                        if val > best.value:
                            best.value = val
                            best.worst = {"optimal": first, "target": last,
                                          "allowed": sorted(lower), "weights": v}
        best.orderings_checked = count
        return best
    if mode != "sample":
        raise InvalidInputError(f"unknown mode {mode!r}")
    rng = np.random.default_rng(rng)
    for _ in range(n_samples):
        y = X @ rng.standard_normal(game.d)
        first = dup[int(np.argmin(y))]
        for a in pareto:
            lower = frozenset(dup[b] for b in range(game.k) if y[b] <= y[a])
            val, v = solve(first, a, lower)
            if val > best.value:
                best.value = val
                best.worst = {"optimal": first, "target": a, "allowed": sorted(lower), "weights": v}
    best.orderings_checked = n_samples
    return best


# ------------------------------------------------------------ design constants

@dataclass
class DesignResult:
    value: float
    subset: tuple
    method: str


def _subset_value(game, S, kind, total_gram=None):
    B = game.reduced_gram_stack[list(S)].sum(axis=0)
    if game.rank == 0:
        return 0.0
    w = np.linalg.eigvalsh(B)
    if w[0] <= RANK_TOL * max(w[-1], 1e-300) or w[-1] / w[0] > COND_LIMIT:
        return np.inf
    Binv = np.linalg.inv(B)
    if kind == "u":
        G = game.reduced_gram_stack.sum(axis=0) if total_gram is None else total_gram
        L = np.linalg.cholesky(Binv)
        return len(S) * float(np.linalg.eigvalsh(L.T @ G @ L)[-1])
    Ur = [game.basis.T @ Mb for Mb in game.observations]
    return len(S) * max(float(np.linalg.eigvalsh(Mr.T @ Binv @ Mr)[-1]) for Mr in Ur)


def _design_constant(game, kind, mode):
    k = game.k
    if mode == "exhaustive":
        if k > EXHAUSTIVE_MAX_K:
            raise InvalidInputError(f"exhaustive search needs k <= {EXHAUSTIVE_MAX_K}")
        # B_S <= B_all in the Loewner order, so every subset of a given size
        # scores at least size times the norm obtained with all actions
        floor = _subset_value(game, tuple(range(k)), kind) / k
        best, best_S = np.inf, None
        for size in range(1, k + 1):
            if size * floor >= best:
                break
            for S in itertools.combinations(range(k), size):
                if sum(game.n_obs[s] for s in S) < game.rank:
                    continue
                val = _subset_value(game, S, kind)
                if val < best:
                    best, best_S = val, S
        return DesignResult(float(best), best_S, "exact")
    if mode != "greedy":
        raise InvalidInputError(f"unknown mode {mode!r}")
    S = []
    best, best_S = np.inf, None
    while len(S) < k:
        rest = [c for c in range(k) if c not in S]
        vals = [_subset_value(game, S + [c], kind) for c in rest]
        if np.all(np.isinf(vals)):
            ranks = [np.linalg.matrix_rank(game.reduced_gram_stack[S + [c]].sum(axis=0)) for c in rest]
            S.append(rest[int(np.argmax(ranks))])
            continue
        i = int(np.argmin(vals))
        S.append(rest[i])
        if vals[i] < best:
            best, best_S = vals[i], tuple(sorted(S))
    return DesignResult(float(best), best_S, "greedy")


def w_star(game, mode="exhaustive"):
    """``min_S |S| max_b ||M_b^T U (sum_{s in S} U^T M_s M_s^T U)^{-1} U^T M_b||``."""
    return _design_constant(game, "w", mode)


def u_star(game, mode="exhaustive"):
    """As ``w_star`` with the stacked observation matrix in place of ``M_b``."""
    return _design_constant(game, "u", mode)


# ------------------------------------------------------------ scale bound

def _max_norm_over_space(space, Ma, features, d):
    if isinstance(space, LpBall):
        smax = float(np.linalg.norm(Ma, 2))
        if np.isinf(space.p):
            if d <= VERTEX_MAX_D:
                V = space.vertices(d)
                return float(np.max(np.linalg.norm(V @ Ma, axis=1)))
            return space.radius * float(np.sqrt(np.sum(np.abs(Ma).sum(axis=0) ** 2)))
        if space.p == 1:
            return space.radius * float(np.max(np.linalg.norm(Ma, axis=1)))
        if space.p == 2:
            return space.radius * smax
        if space.p > 2:
            return space.radius * d ** (0.5 - 1.0 / space.p) * smax
        return space.radius * smax
    if isinstance(space, UnitBox01):
        if d <= VERTEX_MAX_D:
            V = space.vertices(d)
            return float(np.max(np.linalg.norm(V @ Ma, axis=1)))
        return float(np.sqrt(d)) * float(np.linalg.norm(Ma, 2))
    if isinstance(space, PolarOfFeatures):
        # exact per column; the column-wise bound is exact when n(a) = 1
        per_col = [max(space.support(m, features), space.support(-m, features)) for m in Ma.T]
        return float(np.sqrt(np.sum(np.square(per_col))))
    raise UnsupportedError(f"no scale bound for {space!r}")


def omega_bound(game):
    """Upper bound on the observation scale: ``max_{a, l} ||M_a^T l||``,
    tightened for feedback-graph games (sqrt(2) with the L-infinity ball,
    1 with the unit box)."""
    space = game.loss_space
    val = max(_max_norm_over_space(space, Ma, game.features, game.d) for Ma in game.observations)
    if game.variant in GRAPH_VARIANTS:
        if isinstance(space, LpBall) and np.isinf(space.p) and space.radius == 1.0:
            val = min(val, math.sqrt(2.0))
        elif isinstance(space, UnitBox01):
            val = min(val, 1.0)
    return float(val)


# ------------------------------------------------------------ graph constants

def independence_number(graph):
    """Largest set of vertices with no edge between distinct members."""
    A = graph.adjacency()
    nbr = [sum(1 << b for b in range(graph.k) if b != a and A[a, b]) for a in range(graph.k)]
    memo = {}

    def alpha(mask):
        if mask == 0:
            return 0
        if mask in memo:
            return memo[mask]
        v = (mask & -mask).bit_length() - 1
        best = alpha(mask & ~(1 << v))
        best = max(best, 1 + alpha(mask & ~(1 << v) & ~nbr[v]))
        memo[mask] = best
        return best

    return alpha((1 << graph.k) - 1)


def total_domination_number(graph):
    """Smallest set whose neighborhoods (self-loops included) cover every vertex."""
    k = graph.k
    A = graph.adjacency()
    cover = [sum(1 << b for b in range(k) if A[a, b]) for a in range(k)]
    full = (1 << k) - 1
    if _union(cover) != full:
        raise InvalidInputError("some vertex is observed by no vertex; total domination is undefined")
    for size in range(1, k + 1):
        for S in itertools.combinations(range(k), size):
            m = 0
            for s in S:
                m |= cover[s]
            if m == full:
                return size
    raise AssertionError("unreachable")


def _union(values):
    m = 0
    for v in values:
        m |= v
    return m


def graph_constants(graph):
    if graph.k > 20:
        raise InvalidInputError("graph constants are computed exactly only for k <= 20")
    return {"independence_number": independence_number(graph),
            "total_domination_number": total_domination_number(graph)}


@dataclass
class WeightAssignment:
    """Weights ``lambda_a`` with ``M lambda_a = x_a - x_{a*}`` for every target ``a``."""

    game: object
    a_star: int
    weights: dict
    g1: dict = field(default_factory=dict)
    g2: dict = field(default_factory=dict)

    def block(self, a, b):
        return self.weights[a][self.game.block_slices[b]]

    @property
    def beta(self):
        return max((group_norm(self.game, v) for v in self.weights.values()), default=0.0)

    @property
    def support(self):
        out = set()
        for v in self.weights.values():
            for b in range(self.game.k):
                if np.any(v[self.game.block_slices[b]]):
                    out.add(b)
        return out

    def residual(self):
        X = self.game.features
        return max((float(np.linalg.norm(self.game.M @ v - (X[a] - X[self.a_star])))
                    for a, v in self.weights.items()), default=0.0)


def strong_graph_weights(graph, loss):
    """Node-elimination construction of local weights for a strongly observable graph.

    Ties in every argmin are broken by the lowest index.
    """
    if not graph.is_strongly_observable():
        raise InvalidInputError("graph is not strongly observable")
    loss = np.asarray(loss, dtype=float)
    if loss.shape != (graph.k,) or not np.all(np.isfinite(loss)):
        raise InvalidInputError("loss must be a finite vector with one entry per vertex")
    game = feedback_graph(graph)
    k = graph.k
    A = graph.adjacency()
    star = int(np.argmin(loss))
    remaining = set(range(k))
    g1 = {}
    while remaining:
        if len(remaining) == k:
            b = star
        else:
            b = min(remaining, key=lambda a: (loss[a], a))
        hood = {a for a in remaining if A[b, a]}
        for a in hood - {star}:
            g1[a] = b
        remaining -= hood | {b}
    if A[star, star]:
        g2 = {a: star for a in range(k) if a != star}
    else:
        c = min((a for a in range(k) if a != star), key=lambda a: (loss[a], a))
        g2 = {a: c for a in range(k) if a != star}
    weights = {star: np.zeros(game.n_total)}
    for a in range(k):
        if a == star:
            continue
        v = np.zeros(game.n_total)
        for b, target, sign in ((g1[a], a, 1.0), (g2[a], star, -1.0)):
            cols = graph.neighbors(b)
            v[game.block_slices[b].start + cols.index(target)] += sign
        weights[a] = v
    return WeightAssignment(game, star, weights, g1, g2)


# ------------------------------------------------------------ report

@dataclass
class ConstantsReport:
    beta_glo: float
    beta_2_glo: float
    beta_loc: float
    w_star: float
    u_star: float
    omega_bound: float
    rank: int
    k: int
    methods: dict = field(default_factory=dict)

    def to_dict(self):
        def clean(x):
            return None if x is None or (isinstance(x, float) and not np.isfinite(x)) else x
        return {"beta_glo": clean(self.beta_glo), "beta_2_glo": clean(self.beta_2_glo),
                "beta_loc": clean(self.beta_loc), "w_star": clean(self.w_star),
                "u_star": clean(self.u_star), "omega_bound": self.omega_bound,
                "rank": self.rank, "k": self.k, "methods": dict(self.methods)}


def compute_constants(game, mode="exact", n_samples=2000, rng=0):
    """All constants of a game.  ``mode`` is ``exact``, ``greedy`` or ``sampled``.

    ``exact`` falls back to greedy subset search and sampled orderings when the
    game is too large for exhaustive enumeration; the fallbacks are recorded in
    ``methods``.  Constants that are undefined for the game class are ``None``.
    """
    if mode not in ("exact", "greedy", "sampled"):
        raise InvalidInputError(f"unknown mode {mode!r}")
    report = obs.classify(game)
    methods = {}
    b2 = bg = bl = ws = us = None
    if report.verdict != obs.HOPELESS:
        b2 = beta_2_glo(game)
        bg = beta_glo(game)
        methods["beta_2_glo"] = "exact"
        methods["beta_glo"] = "exact"
        design_mode = "exhaustive" if mode != "greedy" and game.k <= EXHAUSTIVE_MAX_K else "greedy"
        ws = w_star(game, design_mode)
        us = u_star(game, design_mode)
        methods["w_star"] = ws.method
        methods["u_star"] = us.method
        ws, us = ws.value, us.value
    if report.verdict in (obs.LOCAL, obs.TRIVIAL):
        reps = len(set(report.duplicate_map.values()))
        loc_mode = "enumerate" if mode == "exact" and reps <= ENUMERATE_MAX_K else "sample"
        res = beta_loc(game, loc_mode, n_samples=n_samples, rng=rng)
        bl = res.value
        methods["beta_loc"] = res.method
    return ConstantsReport(bg, b2, bl, ws, us, omega_bound(game), game.rank, game.k, methods)


def local_eta_threshold(report, L):
    """``2 L (1 + beta_glo^2) min(rank, w*)``; a fixed learning rate must not exceed its inverse."""
    return 2.0 * L * (1.0 + report.beta_glo ** 2) * min(report.rank, report.w_star)


def global_eta_threshold(report, L):
    """``(1 + L^2) min((1 + beta_glo^2) min(rank, w*), (1 + beta_2_glo^2) u*)``."""
    return (1.0 + L ** 2) * min((1.0 + report.beta_glo ** 2) * min(report.rank, report.w_star),
                                (1.0 + report.beta_2_glo ** 2) * report.u_star)


def local_lambda_bound(report, L, support_bound=None):
    """Upper bound on the optimal exploration value for locally observable games.

    ``8 L^2 beta^2 min(rank, s) + 2 L (1 + beta_glo^2) min(rank, w*)`` where
    ``beta`` is ``beta_loc`` and ``s`` an upper bound on the weight support
    (``rank`` when unknown, which only loosens the bound).
    """
    s = report.rank if support_bound is None else min(report.rank, support_bound)
    return (8.0 * L ** 2 * report.beta_loc ** 2 * s
            + 2.0 * L * (1.0 + report.beta_glo ** 2) * min(report.rank, report.w_star))


def global_lambda_bound(report, L, eta):
    """``4 sqrt(1/eta) L min((1+beta_glo) sqrt(min(rank, w*)), (1+beta_2_glo) sqrt(u*))``."""
    return 4.0 * math.sqrt(1.0 / eta) * L * min(
        (1.0 + report.beta_glo) * math.sqrt(min(report.rank, report.w_star)),
        (1.0 + report.beta_2_glo) * math.sqrt(report.u_star))


def default_rate_cap(game, L=None, report=None):
    """Default ``B`` for the adaptive learning rate: the learning-rate threshold of the game class."""
    report = compute_constants(game) if report is None else report
    L = report.omega_bound if L is None else L
    verdict = obs.classify(game).verdict
    if verdict == obs.HOPELESS:
        raise InvalidInputError("hopeless games have no learning-rate threshold")
    if verdict == obs.GLOBAL:
        return global_eta_threshold(report, L)
    if verdict == obs.TRIVIAL:
        return max(1.0, 2.0 * L)
    return local_eta_threshold(report, L)
