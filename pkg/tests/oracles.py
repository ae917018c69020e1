"""Independent reference computations used by the tests.

Each oracle takes a different route from the library: dense numpy
pseudoinverses instead of the reduced basis, cvxpy instead of ADMM, vertex
enumeration instead of closed forms, networkx instead of bitmask search.
"""
import itertools

import cvxpy as cp
import networkx as nx
import numpy as np


def dense_design(game, pi, delta):
    pm = (1 - delta) * np.asarray(pi, float) + delta / game.k
    return sum(pm[a] * game.observations[a] @ game.observations[a].T for a in range(game.k))


def dense_qdagger(game, pi, delta):
    return np.linalg.pinv(dense_design(game, pi, delta), rcond=1e-10, hermitian=True)


def energy(game, a, b, p, delta):
    y = game.features[a] - game.features[b]
    return float(y @ dense_qdagger(game, p, delta) @ y)


def z_value(game, p, delta):
    Qd = dense_qdagger(game, p, delta)
    X = game.features
    e = max((float((X[a] - X[b]) @ Qd @ (X[a] - X[b])) for a in range(game.k) for b in range(game.k)),
            default=0.0)
    s = max(float(np.linalg.norm(Mc.T @ Qd @ Mc, 2)) for Mc in game.observations)
    return e + s


def phi_pairwise(game, q, p, eta, delta, L, vertices):
    """First term by maximizing over the vertices of the loss space, variance by the double sum."""
    x = game.H @ (np.asarray(p) - np.asarray(q))
    first = max(float(v @ x) for v in vertices) / eta
    var = sum(q[a] * q[b] * energy(game, a, b, p, delta) for a in range(game.k) for b in range(game.k))
    return first + L ** 2 * var


def group_norm_min(game, diff, allowed=None):
    """``min sum_c ||v_c||`` subject to ``M v = diff`` and ``v_c = 0`` off ``allowed``, via cvxpy."""
    blocks = [cp.Variable(Mc.shape[1]) for Mc in game.observations]
    allowed = range(game.k) if allowed is None else allowed
    cons = [sum(game.observations[c] @ blocks[c] for c in range(game.k)) == diff]
    cons += [blocks[c] == 0 for c in range(game.k) if c not in allowed]
    prob = cp.Problem(cp.Minimize(sum(cp.norm(blocks[c], 2) for c in range(game.k))), cons)
    prob.solve(solver=cp.CLARABEL)
    return float(prob.value)


def beta_glo(game):
    X = game.features
    return max((group_norm_min(game, X[a] - X[b]) for a, b in itertools.combinations(range(game.k), 2)),
               default=0.0)


def beta_2_glo(game):
    Mp = np.linalg.pinv(game.M)
    X = game.features
    return max((float(np.linalg.norm(Mp @ (X[a] - X[b]))) for a, b in itertools.combinations(range(game.k), 2)),
               default=0.0)


def subset_constant(game, kind):
    """Exhaustive ``min_S |S| * norm`` with dense pseudoinverses restricted to col(M)."""
    M = game.M
    P = M @ np.linalg.pinv(M)
    rank = np.linalg.matrix_rank(M)
    best = np.inf
    for size in range(1, game.k + 1):
        for S in itertools.combinations(range(game.k), size):
            G = sum(game.observations[s] @ game.observations[s].T for s in S)
            if np.linalg.matrix_rank(G, tol=1e-9) < rank or np.linalg.norm(P @ G - G) > 1e-9:
                continue
            Gd = np.linalg.pinv(G, rcond=1e-10)
            if kind == "w":
                val = max(np.linalg.norm(Mb.T @ Gd @ Mb, 2) for Mb in game.observations)
            else:
                val = np.linalg.norm(M.T @ Gd @ M, 2)
            best = min(best, size * val)
    return float(best)


def independence_number(graph):
    G = nx.Graph()
    G.add_nodes_from(range(graph.k))
    G.add_edges_from(graph.edges)
    comp = nx.complement(G)
    return max(len(c) for c in nx.find_cliques(comp))


def total_domination_number(graph):
    A = graph.adjacency()
    for size in range(1, graph.k + 1):
        for S in itertools.combinations(range(graph.k), size):
            if np.all(A[list(S)].any(axis=0)):
                return size
    return None


def convex_hull_edges_2d(points):
    """Edges of the convex hull of points in the plane (scipy)."""
    from scipy.spatial import ConvexHull
    hull = ConvexHull(points)
    return {tuple(sorted(s)) for s in hull.simplices}
