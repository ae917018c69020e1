"""The per-round exploration program.

For a reference distribution ``q`` the learner picks ``p`` minimizing

    Phi(p) = (1/eta) sigma(H (p - q)) + L^2 sum_{a,b} q(a) q(b) E(a, b; p)

over the simplex subject to ``z(p) <= 2 / (eta L)``, where ``sigma`` is the
support function of the loss space,

    E(a, b; p) = (x_a - x_b)^T Q_delta(p)^+ (x_a - x_b)

and ``z(p) = max_{a,b} E(a, b; p) + max_c ||M_c^T Q_delta(p)^+ M_c||``.

All quadratic forms are evaluated in the orthonormal basis ``U`` of the
observation span, where ``Q_delta(p)^+ = U B(p)^{-1} U^T``.  For a vector
``y`` in that span ``d(y^T Q^+ y)/dp_j = -(1 - delta) ||M_j^T Q^+ y||^2``.
"""
import itertools
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from ._validation import check_delta, check_positive, check_simplex
from .exceptions import EtaTooLargeError, InvalidInputError
from .games import LpBall, PolarOfFeatures, UnitBox01
from .linalg import COND_LIMIT, _inverse_pd

log = logging.getLogger(__name__)

FEAS_TOL = 1e-7
LIMIT_MARGIN = 1e-7


# ------------------------------------------------------------ evaluator

class _Kernel:
    """Game-level arrays reused by every evaluation (reduced coordinates)."""

    def __init__(self, game):
        U = game.basis
        self.game = game
        self.k, self.r = game.k, game.rank
        self.grams = np.array(game.reduced_gram_stack)
        self.flat_grams = self.grams.reshape(self.k, -1)
        offdiag = self.grams.copy()
        for a in range(self.k):
            offdiag[a][np.diag_indices(self.r)] = 0.0
        self.diagonal = not np.any(offdiag)
        self.diag_grams = np.array([np.diag(G) for G in self.grams]).reshape(self.k, self.r)
        X = game.features
        pairs = []
        for a, b in itertools.combinations(range(game.k), 2):
            if np.any(X[a] != X[b]):
                pairs.append((a, b))
        self.pairs = pairs
        self.pair_vecs = np.array([U.T @ (X[a] - X[b]) for a, b in pairs]).reshape(len(pairs), self.r)
        self.Mr = [U.T @ Mc for Mc in game.observations]
        self.Mr_all = np.hstack(self.Mr) if self.r else np.zeros((0, game.n_total))
        self.starts = np.array([s.start for s in game.block_slices])
        self.vector_obs = all(n == 1 for n in game.n_obs)
        self.obs_vecs = self.Mr_all.T.copy() if self.vector_obs else None
        self.XU = X @ U

    def binv(self, p_mixed):
        if self.r == 0:
            return np.zeros((0, 0))
        if self.diagonal:
            b = p_mixed @ self.diag_grams
            lo, hi = b.min(), b.max()
            if lo <= 0 or hi / lo > COND_LIMIT:
                raise ArithmeticError("reduced design matrix is numerically singular")
            return np.diag(1.0 / b)
        B = (p_mixed @ self.flat_grams).reshape(self.r, self.r)
        w, V = np.linalg.eigh(B)
        if w[0] <= 0 or w[-1] / w[0] > COND_LIMIT:
            raise ArithmeticError("reduced design matrix is numerically singular")
        return (V / w) @ V.T

    def forms(self, Y, Binv, grad=True):
        """Values ``y^T B^-1 y`` for rows of ``Y`` and their gradients in the
        mixed distribution (``-||M_j^T Q^+ y||^2``)."""
        if Y.shape[0] == 0:
            return np.zeros(0), np.zeros((0, self.k))
        W = Y @ Binv
        vals = np.einsum("ir,ir->i", W, Y)
        if not grad:
            return vals, None
        P = W @ self.Mr_all
        G = -np.add.reduceat(P * P, self.starts, axis=1)
        return vals, G

    def spectral(self, Binv, grad=True):
        """``||M_c^T Q^+ M_c||`` for every action and the gradients."""
        if self.r == 0:
            return np.zeros(self.k), np.zeros((self.k, self.k))
        if self.vector_obs:
            return self.forms(self.obs_vecs, Binv, grad)
        vals = np.empty(self.k)
        tops = np.empty((self.k, self.r))
        for c, Mc in enumerate(self.Mr):
            w, V = np.linalg.eigh(Mc.T @ Binv @ Mc)
            vals[c] = w[-1]
            tops[c] = Mc @ V[:, -1]
        if not grad:
            return vals, None
        _, G = self.forms(tops, Binv, True)
        return vals, G


_KERNELS = {}


def _kernel(game):
    key = id(game)
    ker = _KERNELS.get(key)
    if ker is None or ker.game is not game:
        if len(_KERNELS) > 64:
            _KERNELS.clear()
        ker = _KERNELS[key] = _Kernel(game)
    return ker


def _mixed(p, delta):
    return (1.0 - delta) * p + delta / p.shape[0]


def energy(game, a, b, p, delta):
    """``(x_a - x_b)^T Q_delta(p)^+ (x_a - x_b)``."""
    delta = check_delta(delta, allow_zero=False)
    p = check_simplex(p, game.k, "p")
    ker = _kernel(game)
    y = game.basis.T @ (game.features[a] - game.features[b])
    vals, _ = ker.forms(y[None, :], ker.binv(_mixed(p, delta)), grad=False)
    return float(vals[0])


def z_value(game, p, delta):
    """``max_{a,b} E(a, b; p) + max_c ||M_c^T Q_delta(p)^+ M_c||``."""
    delta = check_delta(delta, allow_zero=False)
    p = check_simplex(p, game.k, "p")
    return _z_parts(_kernel(game), p, delta, grad=False)[0]


def _z_parts(ker, p, delta, grad=True, Binv=None):
    if Binv is None:
        Binv = ker.binv(_mixed(p, delta))
    e, Ge = ker.forms(ker.pair_vecs, Binv, grad)
    s, Gs = ker.spectral(Binv, grad)
    emax = float(e.max()) if e.size else 0.0
    smax = float(s.max())
    return emax + smax, e, Ge, s, Gs, Binv


# ------------------------------------------------------------ problem

@dataclass
class SolveResult:
    p_tilde: np.ndarray
    attained_phi: float
    z_value: float
    iterations: int
    feasible: bool
    method: str = ""


class ExplorationProblem:
    """The exploration program for one round.

    Parameters
    ----------
    game : Game
    q : array, the exponential-weights distribution
    eta : learning rate
    delta : uniform mixing weight in (0, 1/2]
    scale_L : scale parameter, at least the observation scale bound
    tolerance : accepted suboptimality of the returned value
    loss : optional fixed loss vector; when given, the support-function term
        is replaced by the linear term ``(1/eta) <p - q, H^T loss>``
    """

    def __init__(self, game, q, eta, delta, scale_L, tolerance=0.0, loss=None):
        self.game = game
        self.q = check_simplex(q, game.k, "q")
        self.eta = check_positive(eta, "eta")
        self.delta = check_delta(delta, allow_zero=False)
        self.scale_L = check_positive(scale_L, "scale_L")
        self.tolerance = float(tolerance)
        self.loss = None if loss is None else np.asarray(loss, dtype=float)
        self.kernel = _kernel(game)
        self.limit = 2.0 / (self.eta * self.scale_L)
        ker = self.kernel
        self.anchor_vecs = ker.XU - (self.q @ ker.XU)[None, :]
        self.Hq = game.H @ self.q

    def with_q(self, q, eta=None):
        return ExplorationProblem(self.game, q, self.eta if eta is None else eta, self.delta,
                                  self.scale_L, self.tolerance, self.loss)

    # value pieces -------------------------------------------------------

    def first_term(self, p):
        """``(1/eta) sigma(H(p - q))`` or the fixed-loss linear term."""
        x = self.game.H @ p - self.Hq
        if self.loss is not None:
            return float(x @ self.loss) / self.eta
        return self.game.loss_space.support(x, self.game.features) / self.eta

    def variance(self, p, grad=False, Binv=None):
        """Anchored form ``2 L^2 sum_a q(a) (x_a - Hq)^T Q^+ (x_a - Hq)`` and gradient in ``p``."""
        ker = self.kernel
        if Binv is None:
            Binv = ker.binv(_mixed(p, self.delta))
        vals, G = ker.forms(self.anchor_vecs, Binv, grad)
        c = 2.0 * self.scale_L ** 2
        val = c * float(self.q @ vals)
        if not grad:
            return val
        return val, c * (1.0 - self.delta) * (self.q @ G)

    def variance_pairwise(self, p):
        """``L^2 sum_{a,b} q(a) q(b) E(a, b; p)`` summed over all ordered pairs."""
        ker = self.kernel
        Binv = ker.binv(_mixed(p, self.delta))
        vals, _ = ker.forms(ker.pair_vecs, Binv, grad=False)
        tot = 0.0
        for (a, b), v in zip(ker.pairs, vals):
            tot += 2.0 * self.q[a] * self.q[b] * v
        return self.scale_L ** 2 * tot

    def value(self, p):
        p = np.asarray(p, dtype=float)
        return self.first_term(p) + self.variance(p)

    def z(self, p):
        return _z_parts(self.kernel, np.asarray(p, float), self.delta, grad=False)[0]


def phi(problem, p, form="anchored"):
    """Objective value at ``p``; ``form="pairwise"`` uses the double sum."""
    p = check_simplex(p, problem.game.k, "p")
    if form == "pairwise":
        return problem.first_term(p) + problem.variance_pairwise(p)
    if form != "anchored":
        raise InvalidInputError(f"unknown form {form!r}")
    return problem.value(p)


# ------------------------------------------------------------ SLSQP route

class _Epigraph:
    """Smooth reformulation: nonsmooth maxima and polytope support functions
    become auxiliary variables with linear or smooth constraints."""

    def __init__(self, problem, with_limit=True, objective="phi"):
        self.pb = problem
        game = problem.game
        self.k, self.d = game.k, game.d
        self.with_limit = with_limit
        self.objective_kind = objective
        space = game.loss_space
        self.mode = "linear" if problem.loss is not None else _support_mode(space)
        if objective == "z":
            self.mode = "none"
        H = game.H
        k, d = self.k, self.d
        if self.mode == "l1":        # L-infinity ball: radius * ||x||_1
            self.n_aux = d
        elif self.mode == "linf":    # L1 ball: radius * ||x||_inf
            self.n_aux = 1
        elif self.mode == "box":
            self.n_aux = d
        elif self.mode == "polar":
            self.n_aux = 2 * k
        else:
            self.n_aux = 0
        self.iE = k + self.n_aux
        self.iS = self.iE + 1
        self.n = self.iS + 1
        self.H = H
        self._cache_x = None
        self._cache_key = None
        self.n_pairs = len(problem.kernel.pairs)

    # pieces evaluated at x, cached for the current point
    def _eval(self, x):
        key = x.tobytes()
        if key == self._cache_key:
            return self._cache
        p = np.clip(x[:self.k], 0.0, None)
        pb = self.pb
        zval, e, Ge, s, Gs, Binv = _z_parts(pb.kernel, p, pb.delta, grad=True)
        scale = 1.0 - pb.delta
        out = {"e": e, "Ge": Ge * scale, "s": s, "Gs": Gs * scale}
        if self.objective_kind == "phi":
            v, gv = pb.variance(p, grad=True, Binv=Binv)
            out["v"], out["gv"] = v, gv
        self._cache_x = x.copy()
        self._cache_key = key
        self._cache = out
        return out

    # the objective is multiplied by eta (resp. divided by the limit for the
    # feasibility phase) so that SLSQP sees quantities of order one
    def fun(self, x):
        if self.objective_kind == "z":
            return (x[self.iE] + x[self.iS]) / self.pb.limit
        c = self._eval(x)
        return self.pb.eta * (self._linear_value(x) + c["v"])

    def jac(self, x):
        g = np.zeros(self.n)
        if self.objective_kind == "z":
            g[self.iE] = g[self.iS] = 1.0 / self.pb.limit
            return g
        c = self._eval(x)
        g[:self.k] = c["gv"]
        self._linear_grad(g)
        return self.pb.eta * g

    def _linear_value(self, x):
        pb, k = self.pb, self.k
        space = pb.game.loss_space
        aux = x[k:k + self.n_aux]
        if self.mode == "linear":
            return float((pb.game.H @ x[:k] - pb.Hq) @ pb.loss) / pb.eta
        if self.mode in ("l1", "linf"):
            return space.radius * float(aux.sum()) / pb.eta
        if self.mode in ("box", "polar"):
            return float(aux.sum()) / pb.eta
        if self.mode == "smooth":
            return pb.first_term(x[:k])
        return 0.0

    def _linear_grad(self, g):
        pb, k = self.pb, self.k
        space = pb.game.loss_space
        if self.mode == "linear":
            g[:k] += (pb.game.H.T @ pb.loss) / pb.eta
        elif self.mode in ("l1", "linf"):
            g[k:k + self.n_aux] = space.radius / pb.eta
        elif self.mode in ("box", "polar"):
            g[k:k + self.n_aux] = 1.0 / pb.eta
        elif self.mode == "smooth":
            x = pb.game.H @ self._cache_x[:k] - pb.Hq
            g[:k] += pb.game.H.T @ space.maximizer(x) / pb.eta

    def constraints(self):
        k, d, H = self.k, self.d, self.H
        pb = self.pb
        cons = []
        A = np.zeros((1, self.n))
        A[0, :k] = 1.0
        cons.append({"type": "eq", "fun": lambda x: np.array([x[:k].sum() - 1.0]),
                     "jac": lambda x, A=A: A})
        lin_rows, lin_off = [], []
        if self.mode == "l1":
            for sign in (1.0, -1.0):
                for i in range(d):
                    row = np.zeros(self.n)
                    row[k + i] = 1.0
                    row[:k] = -sign * H[i]
                    lin_rows.append(row)
                    lin_off.append(sign * pb.Hq[i])
        elif self.mode == "linf":
            for sign in (1.0, -1.0):
                for i in range(d):
                    row = np.zeros(self.n)
                    row[k] = 1.0
                    row[:k] = -sign * H[i]
                    lin_rows.append(row)
                    lin_off.append(sign * pb.Hq[i])
        elif self.mode == "box":
            for i in range(d):
                row = np.zeros(self.n)
                row[k + i] = 1.0
                row[:k] = -H[i]
                lin_rows.append(row)
                lin_off.append(pb.Hq[i])
        elif self.mode == "polar":
            E = np.zeros((d, self.n))
            E[:, k:2 * k] = H
            E[:, 2 * k:3 * k] = -H
            E[:, :k] = -H
            off = pb.Hq.copy()
            cons.append({"type": "eq", "fun": lambda x, E=E, off=off: E @ x + off,
                         "jac": lambda x, E=E: E})
        iE, iS = self.iE, self.iS
        inv_lim = 1.0 / pb.limit
        # one inequality block: linear rows, smooth epigraph rows, the limit row
        rows = list(lin_rows)
        offs = list(lin_off)
        if self.with_limit:
            row = np.zeros(self.n)
            row[iE] = row[iS] = -inv_lim
            rows.append(row)
            # a slightly tighter limit so that SLSQP's constraint tolerance
            # rarely leaves the returned point outside the true feasible set
            offs.append(1.0 - LIMIT_MARGIN)
        Al = np.array(rows).reshape(len(rows), self.n)
        bl = np.array(offs)
        n_lin = len(rows)

        def ineq_fun(x):
            c = self._eval(x)
            return np.concatenate([Al @ x + bl, inv_lim * (x[iE] - c["e"]), inv_lim * (x[iS] - c["s"])])

        def ineq_jac(x):
            c = self._eval(x)
            ne, ns = c["e"].shape[0], c["s"].shape[0]
            J = np.zeros((n_lin + ne + ns, self.n))
            J[:n_lin] = Al
            J[n_lin:n_lin + ne, :k] = -inv_lim * c["Ge"]
            J[n_lin:n_lin + ne, iE] = inv_lim
            J[n_lin + ne:, :k] = -inv_lim * c["Gs"]
            J[n_lin + ne:, iS] = inv_lim
            return J

        cons.append({"type": "ineq", "fun": ineq_fun, "jac": ineq_jac})
        return cons

    def bounds(self):
        b = [(0.0, 1.0)] * self.k
        if self.mode in ("l1", "linf", "box", "polar"):
            b += [(0.0, None)] * self.n_aux
        b += [(None, None), (None, None)]
        return b

    def start(self, p):
        pb, k = self.pb, self.k
        x = np.zeros(self.n)
        x[:k] = p
        diff = pb.game.H @ p - pb.Hq
        if self.mode == "l1":
            x[k:k + self.d] = np.abs(diff)
        elif self.mode == "linf":
            x[k] = np.max(np.abs(diff)) if diff.size else 0.0
        elif self.mode == "box":
            x[k:k + self.d] = np.maximum(diff, 0.0)
        elif self.mode == "polar":
            w = p - pb.q
            x[k:2 * k] = np.maximum(w, 0.0)
            x[2 * k:3 * k] = np.maximum(-w, 0.0)
        _, e, _, s, _, _ = _z_parts(pb.kernel, p, pb.delta, grad=False)
        x[self.iE] = e.max() if e.size else 0.0
        x[self.iS] = s.max()
        return x


def _support_mode(space):
    if isinstance(space, LpBall):
        if np.isinf(space.p):
            return "l1"
        if space.p == 1:
            return "linf"
        return "smooth"
    if isinstance(space, UnitBox01):
        return "box"
    if isinstance(space, PolarOfFeatures):
        return "polar"
    raise InvalidInputError(f"unsupported loss space {space!r}")


def _clean(p):
    p = np.clip(np.asarray(p, float), 0.0, None)
    return p / p.sum()


def _run_slsqp(epi, x0, max_iter, ftol):
    res = minimize(epi.fun, x0, jac=epi.jac, method="SLSQP", bounds=epi.bounds(),
                   constraints=epi.constraints(), options={"maxiter": max_iter, "ftol": ftol})
    return _clean(res.x[:epi.k]), int(res.nit)


def minimize_z(problem, start=None, max_iter=200):
    """Feasibility phase: the distribution with the smallest constraint value."""
    k = problem.game.k
    p0 = np.full(k, 1.0 / k) if start is None else _clean(start)
    if k == 1:
        return p0, problem.z(p0), 0
    epi = _Epigraph(problem, with_limit=False, objective="z")
    p, nit = _run_slsqp(epi, epi.start(p0), max_iter, 1e-12)
    zp, z0 = problem.z(p), problem.z(p0)
    if z0 < zp:
        p, zp = p0, z0
    return p, zp, nit


def _pull_inside(problem, p, feasible):
    """Largest step from a feasible point towards ``p`` that stays feasible (z is convex)."""
    if problem.z(p) <= problem.limit:
        return p
    lo, hi = 0.0, 1.0
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        if problem.z((1 - mid) * feasible + mid * p) <= problem.limit:
            lo = mid
        else:
            hi = mid
    return (1 - lo) * feasible + lo * p


def solve_exploration(problem, start=None, method="slsqp", max_iter=None):
    """Approximately minimize the exploration objective over the feasible set.

    ``start`` is a warm start (typically last round's solution).  The output
    always satisfies the constraint; ``EtaTooLargeError`` is raised when no
    distribution does.

    ``method="slsqp"`` solves a smooth epigraph reformulation with SLSQP.
    ``method="subgradient"`` runs projected subgradient descent on the
    penalized objective.
    """
    game = problem.game
    k = game.k
    if k == 1:
        p = np.ones(1)
        zp = problem.z(p)
        if zp > problem.limit + FEAS_TOL:
            raise EtaTooLargeError(f"constraint value {zp:.4g} exceeds limit {problem.limit:.4g}",
                                   zp, problem.limit)
        return SolveResult(p, problem.value(p), zp, 0, True, method)
    feasible = None
    iters = 0
    if start is not None:
        s = _clean(start)
        if problem.z(s) <= problem.limit:
            feasible = s
    if feasible is None:
        u = np.full(k, 1.0 / k)
        if problem.z(u) <= problem.limit:
            feasible = u
        else:
            pz, zmin, iters = minimize_z(problem)
            if zmin > problem.limit + FEAS_TOL:
                raise EtaTooLargeError(
                    f"no distribution satisfies z(p) <= {problem.limit:.6g} (minimum {zmin:.6g}); "
                    "reduce eta or raise the rate cap", zmin, problem.limit)
            feasible = pz
    if method == "slsqp":
        p, nit = _solve_slsqp(problem, feasible, max_iter or 100)
    elif method == "subgradient":
        p, nit = _solve_subgradient(problem, feasible, max_iter or 2000)
    else:
        raise InvalidInputError(f"unknown method {method!r}")
    iters += nit
    p = _pull_inside(problem, p, feasible)
    cands = [(problem.value(p), p), (problem.value(feasible), feasible)]
    val, best = min(cands, key=lambda c: c[0])
    zb = problem.z(best)
    return SolveResult(best, val, zb, iters, bool(zb <= problem.limit + FEAS_TOL), method)


def _solve_slsqp(problem, p0, max_iter):
    epi = _Epigraph(problem, with_limit=True)
    try:
        return _run_slsqp(epi, epi.start(p0), max_iter, 1e-10)
    except (np.linalg.LinAlgError, ArithmeticError) as exc:
        log.debug("SLSQP failed: %s", exc)
        return p0, 0


def project_simplex(v):
    """Euclidean projection onto the probability simplex (sort-based)."""
    v = np.asarray(v, float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / idx > 0)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def phi_subgradient(problem, p):
    """A subgradient of the objective at ``p``."""
    game = problem.game
    x = game.H @ p - problem.Hq
    if problem.loss is not None:
        g = game.H.T @ problem.loss / problem.eta
    else:
        g = game.H.T @ game.loss_space.maximizer(x, game.features) / problem.eta
    _, gv = problem.variance(p, grad=True)
    return g + gv


def z_subgradient(problem, p):
    zval, e, Ge, s, Gs, _ = _z_parts(problem.kernel, p, problem.delta, grad=True)
    g = Gs[int(np.argmax(s))].copy()
    if e.size:
        g += Ge[int(np.argmax(e))]
    return zval, (1.0 - problem.delta) * g


def _solve_subgradient(problem, p0, iters):
    p = p0.copy()
    best, best_val = p0.copy(), problem.value(p0)
    rho = 1.0 / problem.eta
    radius = math.sqrt(2.0)
    viol_run = 0
    for t in range(1, iters + 1):
        zval, gz = z_subgradient(problem, p)
        g = phi_subgradient(problem, p)
        if zval > problem.limit:
            g = g + rho * gz
            viol_run += 1
            if viol_run >= 10:
                rho *= 2.0
                viol_run = 0
        else:
            viol_run = 0
            val = problem.value(p)
            if val < best_val:
                best, best_val = p.copy(), val
        gn = np.linalg.norm(g)
        if gn == 0:
            break
        p = project_simplex(p - radius / math.sqrt(t) * g / gn)
    return best, iters


# ------------------------------------------------------------ two-sided check

@dataclass
class LossGrid:
    """Finite set of loss vectors covering the loss space."""

    points: np.ndarray


def loss_grid(game, refine=0, n_sphere=64):
    """Vertices of a polytope loss space (plus a regular lattice of ``refine``
    points per axis for boxes), or Fibonacci-sphere points for other balls."""
    space = game.loss_space
    d = game.d
    if space.is_polytope:
        pts = [space.vertices(d, game.features)]
        if refine and isinstance(space, (LpBall, UnitBox01)) and not (
                isinstance(space, LpBall) and space.p == 1):
            lo, hi = (0.0, 1.0) if isinstance(space, UnitBox01) else (-space.radius, space.radius)
            axis = np.linspace(lo, hi, refine)
            pts.append(np.array(list(itertools.product(axis, repeat=d))))
        return LossGrid(np.unique(np.vstack(pts).round(12), axis=0))
    if d == 1:
        return LossGrid(np.array([[-space.radius], [space.radius]]))
    pts = _fibonacci_sphere(n_sphere, d) * space.radius
    return LossGrid(pts)


def _fibonacci_sphere(n, d):
    if d == 2:
        ang = 2 * np.pi * np.arange(n) / n
        return np.stack([np.cos(ang), np.sin(ang)], axis=1)
    if d == 3:
        i = np.arange(n) + 0.5
        phi_ = np.arccos(1 - 2 * i / n)
        th = np.pi * (1 + 5 ** 0.5) * i
        return np.stack([np.cos(th) * np.sin(phi_), np.sin(th) * np.sin(phi_), np.cos(phi_)], axis=1)
    g = np.random.default_rng(0).standard_normal((n, d))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def inner_min(game, q, eta, delta, L, loss, start=None):
    """``min_{p feasible} Lambda(p, loss)`` for a fixed loss vector."""
    pb = ExplorationProblem(game, q, eta, delta, L, loss=loss)
    return solve_exploration(pb, start=start).attained_phi


def lambda_star_two_sided(game, q, eta, delta, L, grid=None, zoom_rounds=6):
    """Both sides of the minimax identity for the exploration program.

    ``min_max`` minimizes the worst-case objective; ``max_min`` maximizes the
    fixed-loss minimum over the grid, then zooms around the best grid point
    (inside the loss space) until the value stops improving.  Weak duality
    ``max_min <= min_max`` always holds up to solver tolerance.
    """
    grid = loss_grid(game, refine=5) if grid is None else grid
    pb = ExplorationProblem(game, q, eta, delta, L)
    outer = solve_exploration(pb)
    min_max = outer.attained_phi
    space = game.loss_space
    feats = game.features
    vals = [inner_min(game, q, eta, delta, L, l, start=outer.p_tilde) for l in grid.points]
    i = int(np.argmax(vals))
    best_l, best = grid.points[i], vals[i]
    width = _grid_spacing(grid.points)
    for _ in range(zoom_rounds):
        width /= 2.0
        improved = False
        for step in itertools.product((-1.0, 0.0, 1.0), repeat=game.d):
            cand = best_l + width * np.array(step)
            if not np.any(step) or not space.contains(cand, feats):
                continue
            v = inner_min(game, q, eta, delta, L, cand, start=outer.p_tilde)
            if v > best:
                best, best_l, improved = v, cand, True
        if not improved and width < 1e-3:
            break
    return {"min_max": float(min_max), "max_min": float(best), "argmax_loss": best_l,
            "p_tilde": outer.p_tilde}


def _grid_spacing(points):
    if len(points) < 2:
        return 1.0
    diffs = np.abs(points[:, None, :] - points[None, :, :]).max(axis=2)
    diffs[diffs == 0] = np.inf
    return float(np.min(diffs))
