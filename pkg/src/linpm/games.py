"""Game model, loss spaces and the example game constructors.

A game has ``k`` actions.  Action ``a`` has a feature vector ``x_a`` in R^d
(the loss is ``x_a^T l``) and an observation matrix ``M_a`` of shape
``d x n(a)`` (the learner sees ``M_a^T l``).  The adversary picks ``l`` from a
loss space, which enters the algorithms only through its support function.
"""
import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from ._validation import check_matrix, check_vector
from .exceptions import InvalidInputError, UnsupportedError
from .linalg import orthonormal_basis

BOUND_TOL = 1e-9


# ---------------------------------------------------------------- loss spaces

class LpBall:
    """Centered L_p ball of the given radius, ``1 <= p <= inf``."""

    kind = "lp"

    def __init__(self, p=np.inf, radius=1.0):
        p = float(p)
        if not p >= 1:
            raise InvalidInputError(f"p must be >= 1, got {p}")
        if not radius > 0:
            raise InvalidInputError(f"radius must be positive, got {radius}")
        self.p = p
        self.radius = float(radius)

    @property
    def dual_exponent(self):
        if self.p == 1:
            return np.inf
        if np.isinf(self.p):
            return 1.0
        return self.p / (self.p - 1.0)

    @property
    def is_polytope(self):
        return self.p == 1 or np.isinf(self.p)

    def support(self, x, features=None):
        return self.radius * float(np.linalg.norm(x, self.dual_exponent))

    def maximizer(self, x, features=None):
        """A loss vector attaining the support function at ``x``."""
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        if not np.any(x):
            return out
        q = self.dual_exponent
        if np.isinf(self.p):
            out = np.sign(x)
        elif self.p == 1:
            i = int(np.argmax(np.abs(x)))
            out[i] = np.sign(x[i])
        else:
            w = np.sign(x) * np.abs(x) ** (q - 1)
            out = w / np.linalg.norm(x, q) ** (q - 1)
        return self.radius * out

    def contains(self, l, features=None, tol=1e-9):
        return float(np.linalg.norm(l, self.p)) <= self.radius * (1 + tol) + tol

    def inscribed_radius(self, d, features=None):
        if self.p >= 2:
            return self.radius
        return self.radius * d ** (0.5 - 1.0 / self.p)

    def vertices(self, d, features=None):
        if np.isinf(self.p):
            return self.radius * np.array(list(itertools.product([-1.0, 1.0], repeat=d)))
        if self.p == 1:
            eye = np.eye(d)
            return self.radius * np.vstack([eye, -eye])
        raise UnsupportedError("only L1 and L-infinity balls have finitely many vertices")

    def to_dict(self):
        return {"type": "lp", "p": "inf" if np.isinf(self.p) else self.p, "radius": self.radius}

    def __eq__(self, other):
        return isinstance(other, LpBall) and other.p == self.p and other.radius == self.radius

    def __repr__(self):
        return f"LpBall(p={self.p}, radius={self.radius})"


class PolarOfFeatures:
    """The polar set ``{l : |x_a^T l| <= 1 for all a}``.

    Compact only when the features span R^d.
    """

    kind = "polar"
    is_polytope = True

    def _check(self, features):
        if features is None:
            raise InvalidInputError("the polar loss space needs the feature vectors")
        X = np.asarray(features, dtype=float)
        if np.linalg.matrix_rank(X) < X.shape[1]:
            raise UnsupportedError("features do not span R^d; the polar set is unbounded")
        return X

    def _solve(self, x, features):
        # min ||w||_1 subject to H w = x, written with w = u - v
        X = self._check(features)
        H = X.T
        k = H.shape[1]
        res = linprog(np.ones(2 * k), A_eq=np.hstack([H, -H]), b_eq=np.asarray(x, float),
                      bounds=(0, None), method="highs")
        if res.status != 0:
            raise UnsupportedError(f"support LP failed: {res.message}")
        return res

    def support(self, x, features=None):
        x = np.asarray(x, dtype=float)
        if not np.any(x):
            return 0.0
        return float(self._solve(x, features).fun)

    def maximizer(self, x, features=None):
        x = np.asarray(x, dtype=float)
        if not np.any(x):
            return np.zeros_like(x)
        # equality duals of the min-norm program are a maximizing loss vector
        return np.asarray(self._solve(x, features).eqlin.marginals, dtype=float)

    def contains(self, l, features=None, tol=1e-9):
        X = self._check(features)
        return float(np.max(np.abs(X @ l))) <= 1 + tol

    def inscribed_radius(self, d, features=None):
        X = self._check(features)
        return 1.0 / float(np.max(np.linalg.norm(X, axis=1)))

    def vertices(self, d, features=None):
        X = self._check(features)
        verts = []
        for rows in itertools.combinations(range(X.shape[0]), d):
            A = X[list(rows)]
            if abs(np.linalg.det(A)) < 1e-12:
                continue
            for signs in itertools.product([-1.0, 1.0], repeat=d):
                l = np.linalg.solve(A, np.array(signs))
                if self.contains(l, X, tol=1e-9):
                    verts.append(l)
        return _unique_rows(np.array(verts))

    def to_dict(self):
        return {"type": "polar"}

    def __eq__(self, other):
        return isinstance(other, PolarOfFeatures)

    def __repr__(self):
        return "PolarOfFeatures()"


class UnitBox01:
    """The box ``[0, 1]^d``."""

    kind = "box01"
    is_polytope = True

    def support(self, x, features=None):
        return float(np.sum(np.maximum(np.asarray(x, float), 0.0)))

    def maximizer(self, x, features=None):
        return (np.asarray(x, float) > 0).astype(float)

    def contains(self, l, features=None, tol=1e-9):
        l = np.asarray(l, float)
        return bool(np.all(l >= -tol) and np.all(l <= 1 + tol))

    def inscribed_radius(self, d, features=None):
        return 0.0

    def vertices(self, d, features=None):
        return np.array(list(itertools.product([0.0, 1.0], repeat=d)))

    def to_dict(self):
        return {"type": "box01"}

    def __eq__(self, other):
        return isinstance(other, UnitBox01)

    def __repr__(self):
        return "UnitBox01()"


def loss_space_from_dict(spec):
    if spec is None:
        return None
    kind = spec.get("type")
    if kind == "lp":
        p = spec.get("p", "inf")
        p = np.inf if p in ("inf", "infinity", None) else float(p)
        return LpBall(p, float(spec.get("radius", 1.0)))
    if kind == "linf":
        return LpBall(np.inf, float(spec.get("radius", 1.0)))
    if kind == "l2":
        return LpBall(2.0, float(spec.get("radius", 1.0)))
    if kind == "polar":
        return PolarOfFeatures()
    if kind == "box01":
        return UnitBox01()
    raise InvalidInputError(f"unknown loss space type {kind!r}")


def support_function(space, features, x):
    """``max_{l in space} <x, l>``."""
    x = check_vector(x, name="x")
    if features is not None and np.shape(features)[1] != x.shape[0]:
        raise InvalidInputError("dimension mismatch between x and features")
    return space.support(x, features)


def _unique_rows(A, tol=1e-9):
    out = []
    for row in A:
        if not any(np.max(np.abs(row - r)) <= tol for r in out):
            out.append(row)
    return np.array(out)


# --------------------------------------------------------------------- graphs

@dataclass(frozen=True)
class Graph:
    """Undirected feedback graph with optional self-loops.

    Playing ``a`` reveals the losses of every vertex in ``neighbors(a)``.
    """

    k: int
    edges: frozenset
    self_loops: tuple

    def __post_init__(self):
        if self.k < 1:
            raise InvalidInputError("a graph needs at least one vertex")
        if len(self.self_loops) != self.k:
            raise InvalidInputError("self_loops must have one flag per vertex")
        for e in self.edges:
            a, b = e
            if not (0 <= a < b < self.k):
                raise InvalidInputError(f"invalid edge {e}")

    @classmethod
    def from_edges(cls, k, edges, self_loops=True):
        norm = set()
        for a, b in edges:
            a, b = int(a), int(b)
            if not (0 <= a < k and 0 <= b < k):
                raise InvalidInputError(f"edge ({a}, {b}) references a missing vertex")
            if a == b:
                raise InvalidInputError("use self_loops for loops, not edges")
            norm.add((min(a, b), max(a, b)))
        if isinstance(self_loops, (bool, np.bool_)):
            loops = (bool(self_loops),) * k
        else:
            loops = tuple(bool(s) for s in self_loops)
        return cls(int(k), frozenset(norm), loops)

    @classmethod
    def cycle(cls, k, self_loops=True):
        if k < 3:
            raise InvalidInputError("a cycle needs at least 3 vertices")
        return cls.from_edges(k, [(a, (a + 1) % k) for a in range(k)], self_loops)

    @classmethod
    def path(cls, k, self_loops=True):
        return cls.from_edges(k, [(a, a + 1) for a in range(k - 1)], self_loops)

    @classmethod
    def clique(cls, k, self_loops=True):
        return cls.from_edges(k, itertools.combinations(range(k), 2), self_loops)

    @classmethod
    def edgeless(cls, k, self_loops=True):
        return cls.from_edges(k, [], self_loops)

    @classmethod
    def complete_bipartite(cls, k, self_loops=True):
        if k % 2:
            raise InvalidInputError("the balanced bipartite graph needs an even vertex count")
        h = k // 2
        return cls.from_edges(k, [(a, h + b) for a in range(h) for b in range(h)], self_loops)

    @classmethod
    def from_adjacency(cls, A):
        A = np.asarray(A)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise InvalidInputError("adjacency matrix must be square")
        if not np.array_equal(A, A.T):
            raise InvalidInputError("adjacency matrix must be symmetric")
        k = A.shape[0]
        edges = [(a, b) for a in range(k) for b in range(a + 1, k) if A[a, b]]
        return cls.from_edges(k, edges, [bool(A[a, a]) for a in range(k)])

    def adjacency(self):
        A = np.zeros((self.k, self.k), dtype=int)
        for a, b in self.edges:
            A[a, b] = A[b, a] = 1
        A[np.diag_indices(self.k)] = np.array(self.self_loops, dtype=int)
        return A

    def neighbors(self, a):
        """Vertices observed when playing ``a``, in increasing order."""
        return [int(b) for b in np.flatnonzero(self.adjacency()[a])]

    def is_strongly_observable(self):
        A = self.adjacency()
        for a in range(self.k):
            others = [b for b in range(self.k) if b != a]
            if not (A[a, a] or all(A[b, a] for b in others)):
                return False
        return True

    def is_weakly_observable(self):
        return bool(np.all(self.adjacency().sum(axis=0) > 0))

    def to_dict(self):
        return {"k": self.k, "edges": sorted([list(e) for e in self.edges]),
                "self_loops": list(self.self_loops)}

    @classmethod
    def from_dict(cls, spec):
        kind = spec.get("kind")
        loops = spec.get("self_loops", True)
        if kind is None:
            return cls.from_edges(int(spec["k"]), spec.get("edges", []), loops)
        k = int(spec["k"])
        builders = {"cycle": cls.cycle, "path": cls.path, "clique": cls.clique,
                    "edgeless": cls.edgeless, "bipartite": cls.complete_bipartite}
        if kind not in builders:
            raise InvalidInputError(f"unknown graph kind {kind!r}")
        return builders[kind](k, loops)


# ----------------------------------------------------------------------- game

@dataclass
class BoundednessReport:
    max_value: float
    passed: bool
    worst_pair: tuple = None


class Game:
    """A linear partial monitoring game.

    Parameters
    ----------
    features : array of shape (k, d)
        Row ``a`` is the feature vector ``x_a``.
    observations : sequence of k arrays of shape (d, n(a))
        Observation matrices ``M_a``.  1-d arrays are read as a single column.
    loss_space : LpBall, PolarOfFeatures or UnitBox01
        Defaults to the unit L-infinity ball.
    """

    def __init__(self, features, observations, loss_space=None, *, name="custom",
                 variant="custom", params=None, graph=None, feature_scale=1.0):
        X = check_matrix(features, "features")
        k, d = X.shape
        if k < 1 or d < 1:
            raise InvalidInputError("a game needs at least one action and one dimension")
        obs = []
        for a, Ma in enumerate(observations):
            Ma = np.asarray(Ma, dtype=float)
            if Ma.ndim == 1:
                Ma = Ma[:, None]
            Ma = check_matrix(Ma, f"observation matrix {a}")
            if Ma.shape[0] != d or Ma.shape[1] < 1:
                raise InvalidInputError(f"observation matrix {a} has shape {Ma.shape}, expected ({d}, n>=1)")
            obs.append(Ma)
        if len(obs) != k:
            raise InvalidInputError(f"expected {k} observation matrices, got {len(obs)}")
        self.features = _frozen(X)
        self.observations = tuple(_frozen(Ma) for Ma in obs)
        self.loss_space = loss_space if loss_space is not None else LpBall(np.inf, 1.0)
        self.name = name
        self.variant = variant
        self.params = dict(params or {})
        self.graph = graph
        self.feature_scale = float(feature_scale)
        self._init_cache()

    def _init_cache(self):
        self.k, self.d = self.features.shape
        self.H = _frozen(self.features.T)
        self.n_obs = tuple(Ma.shape[1] for Ma in self.observations)
        offsets = np.concatenate([[0], np.cumsum(self.n_obs)])
        self.block_slices = tuple(slice(int(offsets[a]), int(offsets[a + 1])) for a in range(self.k))
        self.M = _frozen(np.hstack(self.observations))
        self.gram_stack = _frozen(np.stack([Ma @ Ma.T for Ma in self.observations]))
        self.basis = _frozen(orthonormal_basis(self.M))
        self.rank = self.basis.shape[1]
        U = self.basis
        self.reduced_gram_stack = _frozen(np.einsum("ir,aij,js->ars", U, self.gram_stack, U))

    @property
    def n_total(self):
        return self.M.shape[1]

    def block(self, v, a):
        return v[self.block_slices[a]]

    def to_spec(self):
        spec = {"variant": self.variant, "params": _jsonable(self.params),
                "loss_space": self.loss_space.to_dict()}
        if self.variant == "custom":
            spec["explicit_features"] = self.features.tolist()
            spec["explicit_observations"] = [Ma.tolist() for Ma in self.observations]
        return spec

    def __repr__(self):
        return f"Game(name={self.name!r}, k={self.k}, d={self.d}, rank={self.rank}, loss_space={self.loss_space!r})"


def _frozen(A):
    A = np.array(A, dtype=float)
    A.setflags(write=False)
    return A


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Graph):
        return obj.to_dict()
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def validate(game):
    """Check ``max_{a,b,l} |(x_a - x_b)^T l| <= 2`` through the support function."""
    X = game.features
    best, worst = 0.0, None
    uniq = _unique_indices(X)
    for a, b in itertools.permutations(uniq, 2):
        val = game.loss_space.support(X[a] - X[b], X)
        if val > best:
            best, worst = val, (a, b)
    return BoundednessReport(float(best), bool(best <= 2 + BOUND_TOL), worst)


def _unique_indices(X, tol=1e-12):
    reps = []
    for a in range(X.shape[0]):
        if not any(np.max(np.abs(X[a] - X[b])) <= tol for b in reps):
            reps.append(a)
    return reps


def _scaled_to_bound(features, observations, space, scale_obs):
    # divide the features by (max / 2) when the boundedness check fails
    probe = Game(features, observations, space)
    rep = validate(probe)
    if rep.passed or rep.max_value == 0:
        return features, observations, 1.0
    s = 2.0 / rep.max_value
    obs = [Ma * s for Ma in observations] if scale_obs else observations
    return features * s, obs, s


# --------------------------------------------------------------- constructors

def feedback_graph(graph, loss_space=None, name=None, variant="feedback_graph"):
    """Feedback-graph game: ``x_a = e_a`` and ``M_a`` has columns ``e_b`` for ``b`` in N(a).

    Vertices that observe nothing get a zero column so that every ``M_a`` has
    at least one column.
    """
    k = graph.k
    eye = np.eye(k)
    obs = []
    for a in range(k):
        nb = graph.neighbors(a)
        obs.append(eye[:, nb] if nb else np.zeros((k, 1)))
    params = {"graph": graph.to_dict()} if variant == "feedback_graph" else {"k": k}
    return Game(eye, obs, loss_space or LpBall(np.inf, 1.0), name=name or variant,
                variant=variant, params=params, graph=graph)


def full_information(k, loss_space=None):
    """Every action reveals the whole loss vector (``M_a = I``)."""
    return feedback_graph(Graph.clique(k, True), loss_space, name=f"full_information({k})",
                          variant="full_information")


def bandit(k, loss_space=None):
    """Standard k-armed bandit: ``x_a = M_a = e_a``."""
    return feedback_graph(Graph.edgeless(k, True), loss_space, name=f"bandit({k})", variant="bandit")


def linear_bandit(features, loss_space=None):
    """Linear bandit: ``M_a = x_a``."""
    X = check_matrix(features, "features")
    space = loss_space or PolarOfFeatures()
    X, obs, s = _scaled_to_bound(X, [x[:, None] for x in X], space, scale_obs=True)
    return Game(X, obs, space, name=f"linear_bandit({X.shape[0]})", variant="linear_bandit",
                params={"features": np.asarray(features, float).tolist()}, feature_scale=s)


def linear_dueling(m, base_features=None, loss_space=None):
    """Dueling game over ordered pairs ``(a, b)`` of ``m`` base arms.

    Action ``(a, b)`` has index ``a * m + b``, feature ``x_a + x_b`` and
    observation ``x_a - x_b``.  Base features default to the standard basis.
    """
    if m < 1:
        raise InvalidInputError("m must be positive")
    base = np.eye(m) if base_features is None else check_matrix(base_features, "base_features")
    if base.shape[0] != m:
        raise InvalidInputError("need one base feature per arm")
    feats, obs = [], []
    for a in range(m):
        for b in range(m):
            feats.append(base[a] + base[b])
            obs.append((base[a] - base[b])[:, None])
    X = np.array(feats)
    space = loss_space or PolarOfFeatures()
    X, obs, s = _scaled_to_bound(X, obs, space, scale_obs=False)
    params = {"m": m}
    if base_features is not None:
        params["base_features"] = base.tolist()
    return Game(X, obs, space, name=f"linear_dueling({m})", variant="linear_dueling",
                params=params, feature_scale=s)


def ill_conditioned(k, epsilon, loss_space=None):
    """Bandit whose observations are blurred: ``M_a = (1 - eps) 1/k + eps e_a``."""
    if not 0 < epsilon <= 1:
        raise InvalidInputError("epsilon must lie in (0, 1]")
    eye = np.eye(k)
    obs = [((1 - epsilon) * np.ones(k) / k + epsilon * eye[a])[:, None] for a in range(k)]
    return Game(eye, obs, loss_space or LpBall(np.inf, 1.0), name=f"ill_conditioned({k}, {epsilon})",
                variant="ill_conditioned", params={"k": k, "epsilon": epsilon})


def composite_graph(graph, loss_space=None, name=None, variant="composite_graph"):
    """Composite feedback: playing ``a`` shows the average loss of its neighborhood.

    ``M_a`` is column ``a`` of ``A D^{-1}`` with ``A`` the adjacency matrix
    (self-loops required) and ``D`` the degree matrix.
    """
    if not all(graph.self_loops):
        raise InvalidInputError("composite graph feedback requires every self-loop")
    A = graph.adjacency().astype(float)
    W = A / A.sum(axis=0)
    k = graph.k
    params = {"graph": graph.to_dict()} if variant == "composite_graph" else {"k": k}
    return Game(np.eye(k), [W[:, a] for a in range(k)], loss_space or LpBall(np.inf, 1.0),
                name=name or variant, variant=variant, params=params, graph=graph)


def composite_cycle(k, loss_space=None):
    return composite_graph(Graph.cycle(k, True), loss_space, name=f"composite_cycle({k})",
                           variant="composite_cycle")


def composite_bipartite(k, loss_space=None):
    return composite_graph(Graph.complete_bipartite(k, True), loss_space,
                           name=f"composite_bipartite({k})", variant="composite_bipartite")


def revealing_path(loss_space=None):
    """Three-vertex path without self-loops; the middle vertex reveals both ends.

    The end vertices are only observed from the middle one, so the graph is
    weakly but not strongly observable.
    """
    return feedback_graph(Graph.path(3, False), loss_space, name="revealing_path",
                          variant="revealing_path")


def single_action(d=1, loss_space=None):
    return Game(np.ones((1, d)), [np.eye(d)], loss_space, name="single_action", variant="single_action",
                params={"d": d})


def custom(features, observations, loss_space=None, name="custom"):
    return Game(features, observations, loss_space, name=name)


def make_game(spec):
    """Build a game from a JSON-style dictionary.

    Fields: ``variant``, ``params``, optional ``explicit_features`` and
    ``explicit_observations`` for custom games, optional ``loss_space``.
    """
    if not isinstance(spec, dict) or "variant" not in spec:
        raise InvalidInputError("game spec must be a dict with a 'variant' field")
    variant = spec["variant"]
    params = dict(spec.get("params") or {})
    space = loss_space_from_dict(spec.get("loss_space"))
    try:
        if variant == "custom":
            return custom(spec["explicit_features"], spec["explicit_observations"], space,
                          name=spec.get("name", "custom"))
        if variant == "full_information":
            return full_information(int(params["k"]), space)
        if variant == "bandit":
            return bandit(int(params["k"]), space)
        if variant == "feedback_graph":
            return feedback_graph(Graph.from_dict(params["graph"]), space)
        if variant == "linear_bandit":
            return linear_bandit(params["features"], space)
        if variant == "linear_dueling":
            return linear_dueling(int(params["m"]), params.get("base_features"), space)
        if variant == "ill_conditioned":
            return ill_conditioned(int(params["k"]), float(params["epsilon"]), space)
        if variant == "composite_graph":
            return composite_graph(Graph.from_dict(params["graph"]), space)
        if variant == "composite_cycle":
            return composite_cycle(int(params["k"]), space)
        if variant == "composite_bipartite":
            return composite_bipartite(int(params["k"]), space)
        if variant == "revealing_path":
            return revealing_path(space)
        if variant == "single_action":
            return single_action(int(params.get("d", 1)), space)
    except KeyError as exc:
        raise InvalidInputError(f"missing parameter {exc} for variant {variant!r}") from None
    raise InvalidInputError(f"unknown game variant {variant!r}")
