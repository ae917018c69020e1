"""Dense linear algebra for the observation design matrices.

The central objects are ``Q(pi) = sum_a pi(a) M_a M_a^T`` and its mixed
version ``Q_delta(pi) = Q((1 - delta) pi + delta / k)``.  Because the column
space of ``Q_delta`` equals the span of all observation columns, its
pseudoinverse can be formed as ``U B^{-1} U^T`` where ``U`` is a fixed
orthonormal basis and ``B = U^T Q U`` is small and positive definite.
"""
import numpy as np

from ._validation import check_delta, check_matrix, check_simplex
from .exceptions import IllConditionedError, InvalidInputError

RANK_TOL = 1e-10
COND_LIMIT = 1e12


def pseudoinverse(A, tol=RANK_TOL):
    """Moore-Penrose pseudoinverse through the SVD.

    Singular values below ``tol * s_max`` are treated as zero.
    """
    A = check_matrix(A, "A")
    if tol <= 0:
        raise InvalidInputError("tol must be positive")
    if A.size == 0:
        return np.zeros(A.shape[::-1])
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    keep = s > tol * s[0] if s.size and s[0] > 0 else np.zeros_like(s, dtype=bool)
    inv = np.zeros_like(s)
    inv[keep] = 1.0 / s[keep]
    return (Vt.T * inv) @ U.T


def orthonormal_basis(M, tol=RANK_TOL):
    """Orthonormal basis of the column space of ``M`` (columns of the result)."""
    M = check_matrix(M, "M")
    if M.shape[1] == 0:
        raise InvalidInputError("M must have at least one column")
    U, s, _ = np.linalg.svd(M, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return np.zeros((M.shape[0], 0))
    r = int(np.sum(s > tol * s[0]))
    return U[:, :r].copy()


def numerical_rank(M, tol=RANK_TOL):
    return orthonormal_basis(M, tol).shape[1]


def mix(pi, delta):
    """The mixture ``(1 - delta) pi + delta / k``."""
    pi = np.asarray(pi, dtype=float)
    return (1.0 - delta) * pi + delta / pi.shape[0]


def design_matrix(game, pi, delta=0.0):
    """``Q_delta(pi)``, a symmetric PSD ``d x d`` matrix."""
    delta = check_delta(delta)
    pi = check_simplex(pi, game.k, "pi")
    return np.tensordot(mix(pi, delta), game.gram_stack, axes=1)


def reduced_design(game, pi, delta=0.0):
    """``B_delta(pi) = U^T Q_delta(pi) U`` in the basis of the observation span."""
    delta = check_delta(delta)
    pi = check_simplex(pi, game.k, "pi")
    return np.tensordot(mix(pi, delta), game.reduced_gram_stack, axes=1)


def q_dagger(game, pi, delta=0.0, return_reduced=False):
    """Pseudoinverse of ``Q_delta(pi)`` computed as ``U B^{-1} U^T``.

    Raises ``IllConditionedError`` when ``B`` has condition number above 1e12,
    which happens for ``delta = 0`` when the support of ``pi`` does not span
    the observation space.
    """
    B = reduced_design(game, pi, delta)
    Binv = _inverse_pd(B)
    U = game.basis
    Qd = U @ Binv @ U.T
    if return_reduced:
        return Qd, Binv
    return Qd


def _inverse_pd(B):
    r = B.shape[0]
    if r == 0:
        return np.zeros((0, 0))
    w = np.linalg.eigvalsh(B)
    if w[0] <= 0 or w[-1] / w[0] > COND_LIMIT:
        raise IllConditionedError(
            f"reduced design matrix is numerically singular (eigenvalues {w[0]:.3g} .. {w[-1]:.3g})")
    return np.linalg.inv(B)


def design_traces(game, pi):
    """``g_a(pi) = tr(M_a^T U B(pi)^{-1} U^T M_a)`` for every action."""
    Binv = _inverse_pd(reduced_design(game, pi, 0.0))
    return np.einsum("rs,asr->a", Binv, game.reduced_gram_stack)


def optimal_design(game, tol=1e-7, max_iter=200000):
    """Maximize ``log det B(pi)`` over the simplex with multiplicative updates.

    At the maximizer the largest trace ``max_a g_a(pi)`` equals the rank of
    the stacked observation matrix, which is also the minimum of that
    largest trace over the simplex.  Returns ``(pi, max_a g_a(pi))``.
    """
    r = game.rank
    pi = np.full(game.k, 1.0 / game.k)
    if r == 0:
        return pi, 0.0
    for _ in range(max_iter):
        g = design_traces(game, pi)
        if g.max() - r <= tol:
            break
        pi = pi * g / r
        pi /= pi.sum()
    return pi, float(design_traces(game, pi).max())
