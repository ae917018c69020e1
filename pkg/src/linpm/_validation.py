"""Input validation helpers shared by the public functions."""
import numpy as np

from .exceptions import InvalidInputError

SIMPLEX_TOL = 1e-9


def check_matrix(A, name="matrix", ndim=2):
    A = np.asarray(A, dtype=float)
    if A.ndim != ndim:
        raise InvalidInputError(f"{name} must be {ndim}-dimensional, got shape {A.shape}")
    if A.size and not np.all(np.isfinite(A)):
        raise InvalidInputError(f"{name} has non-finite entries")
    return A


def check_vector(x, size=None, name="vector"):
    x = check_matrix(x, name=name, ndim=1)
    if size is not None and x.shape[0] != size:
        raise InvalidInputError(f"{name} must have length {size}, got {x.shape[0]}")
    return x


def check_simplex(p, k=None, name="distribution", tol=SIMPLEX_TOL):
    """Return ``p`` as a float array after checking it lies in the probability simplex."""
    p = check_vector(p, size=k, name=name)
    if np.any(p < -tol) or abs(p.sum() - 1.0) > tol * max(1, p.shape[0]):
        raise InvalidInputError(f"{name} is not a probability vector: {p}")
    return p


def check_delta(delta, allow_zero=True):
    delta = float(delta)
    lo_ok = delta >= 0 if allow_zero else delta > 0
    if not (lo_ok and delta <= 0.5):
        bound = "[0, 1/2]" if allow_zero else "(0, 1/2]"
        raise InvalidInputError(f"delta must lie in {bound}, got {delta}")
    return delta


def check_positive(x, name):
    x = float(x)
    if not (np.isfinite(x) and x > 0):
        raise InvalidInputError(f"{name} must be positive, got {x}")
    return x


def check_action(a, k, name="action"):
    if not (isinstance(a, (int, np.integer)) and 0 <= a < k):
        raise InvalidInputError(f"{name} must be an integer in [0, {k}), got {a!r}")
    return int(a)
