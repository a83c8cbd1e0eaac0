"""
Dense real linear algebra on 4x4 symplectic matrices and the Lie algebra sp_2(R).

Conventions
-----------
The symplectic form is ``J = [[0, -I], [I, 0]]`` with 2x2 blocks. A matrix
``X`` lies in sp_2(R) when ``X^T J + J X = 0``, equivalently

    X = [[A, B], [C, -A^T]],   B = B^T,  C = C^T.

Coordinates of ``X`` in the fixed basis are the 10-vector

    (A11, A12, A21, A22, B11, B12, B22, C11, C12, C22).
"""

from itertools import combinations

import numpy as np

from .errors import NormTooLarge

I2 = np.eye(2)
I4 = np.eye(4)
J = np.block([[np.zeros((2, 2)), -I2], [I2, np.zeros((2, 2))]])

SP2_DIM = 10

_LOG_TERM_TOL = 1e-16
_LOG_MAX_TERMS = 200
_PAIRS = list(combinations(range(4), 2))


def symplectic_defect(A):
    """Return ``max |A^T J A - J|``, zero iff `A` is symplectic."""
    A = np.asarray(A, dtype=float)
    return float(np.max(np.abs(A.T @ J @ A - J)))


def membership_defect(X):
    """Return ``max |X^T J + J X|``, zero iff `X` lies in sp_2(R)."""
    X = np.asarray(X, dtype=float)
    return float(np.max(np.abs(X.T @ J + J @ X)))


def matrix_exp(B):
    """Matrix exponential by scaling and squaring.

    The argument is scaled by ``2**-s`` so that its 1-norm is at most 1/2,
    the exponential of the scaled matrix is summed as a Taylor series until
    the terms drop below machine precision, and the result is squared `s`
    times.

    Parameters
    ----------
    B : array_like, shape (n, n)

    Returns
    -------
    ndarray, shape (n, n)
    """
    B = np.asarray(B, dtype=float)
    n = B.shape[0]
    norm = np.linalg.norm(B, 1)
    s = 0
    if norm > 0.5:
        s = int(np.ceil(np.log2(norm / 0.5)))
    X = B / 2.0**s
    result = np.eye(n)
    term = np.eye(n)
    for k in range(1, 40):
        term = term @ X / k
        result = result + term
        if np.linalg.norm(term, 1) <= np.finfo(float).eps * np.linalg.norm(result, 1):
            break
    for _ in range(s):
        result = result @ result
    return result


def matrix_log_series(A):
    """Logarithm of `A` from the Mercator series ``sum (-1)^{k+1} (A-I)^k / k``.

    Raises
    ------
    NormTooLarge
        If the Frobenius norm of ``A - I`` is not below 1.
    """
    A = np.asarray(A, dtype=float)
    D = A - np.eye(A.shape[0])
    norm = np.linalg.norm(D, "fro")
    if norm >= 1.0:
        raise NormTooLarge(f"||A - I||_F = {norm:.6g} >= 1; log series diverges")
    result = np.zeros_like(D)
    power = np.eye(A.shape[0])
    for k in range(1, _LOG_MAX_TERMS + 1):
        power = power @ D
        term = power / k
        if k % 2 == 0:
            term = -term
        result += term
        if np.linalg.norm(term, "fro") < _LOG_TERM_TOL:
            break
    return result


def matrix_power(A, m):
    """``A**m`` for a positive integer `m` by binary exponentiation."""
    A = np.asarray(A, dtype=float)
    if m < 0:
        raise ValueError("negative powers are not supported")
    result = np.eye(A.shape[0])
    base = A.copy()
    while m:
        if m & 1:
            result = result @ base
        base = base @ base
        m >>= 1
    return result


def wedge2(A):
    """Second exterior power of a 4x4 matrix.

    Entry ``(I, K)`` is the 2x2 minor of `A` on rows ``I = (i, j)`` and
    columns ``K = (k, l)``, both ordered lexicographically with ``i < j``.
    """
    A = np.asarray(A, dtype=float)
    W = np.empty((6, 6))
    for a, (i, j) in enumerate(_PAIRS):
        for b, (k, l) in enumerate(_PAIRS):
            W[a, b] = A[i, k] * A[j, l] - A[i, l] * A[j, k]
    return W


def lie_bracket(X, Y):
    """Commutator ``XY - YX``."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    return X @ Y - Y @ X


def sp2_coords(X):
    """Coordinates of `X` in the fixed basis of sp_2(R).

    Only the entries that parametrize the algebra are read; for `X` outside
    sp_2(R) this is a projection, not an inverse of `sp2_from_coords`.
    """
    X = np.asarray(X, dtype=float)
    return np.array([
        X[0, 0], X[0, 1], X[1, 0], X[1, 1],
        X[0, 2], X[0, 3], X[1, 3],
        X[2, 0], X[2, 1], X[3, 1],
    ])


def sp2_from_coords(c):
    """Inverse of `sp2_coords` on sp_2(R)."""
    c = np.asarray(c, dtype=float)
    A = np.array([[c[0], c[1]], [c[2], c[3]]])
    B = np.array([[c[4], c[5]], [c[5], c[6]]])
    C = np.array([[c[7], c[8]], [c[8], c[9]]])
    return np.block([[A, B], [C, -A.T]])


def sp2_basis():
    """The ten basis matrices of sp_2(R), in coordinate order."""
    return [sp2_from_coords(e) for e in np.eye(SP2_DIM)]


def rank_with_tolerance(elements, tol=1e-8):
    """Numerical rank of the span of sp_2(R) elements.

    The coordinate vectors are stacked as rows and the singular values
    greater than ``tol * sigma_max`` are counted.
    """
    if len(elements) == 0:
        raise ValueError("need at least one element")
    if tol <= 0:
        raise ValueError("tol must be positive")
    rows = np.array([sp2_coords(X) for X in elements])
    sv = np.linalg.svd(rows, compute_uv=False)
    if sv[0] == 0.0:
        return 0
    return int(np.sum(sv > tol * sv[0]))
