"""
Simultaneous Dirichlet approximation and near-identity powers of transfer matrices.
"""

from dataclasses import dataclass

import numpy as np

from .errors import SearchExhausted
from .linalg import I4, matrix_power
from .transfer import transfer_matrix

TWO_PI = 2.0 * np.pi
BRANCH_MARGIN = 0.1
M_START = 16


@dataclass(frozen=True)
class DirichletWitness:
    """Integers ``y, x_1..x_N`` with ``|alpha_i y - x_i| < M**(-1/N)``.

    ``residuals[i] = 2 pi (alpha_i y - x_i)``, the angle left over after
    ``y`` turns.
    """

    y: int
    x: tuple
    M: int
    residuals: tuple

    def errors(self, alphas):
        return np.abs(np.asarray(alphas) * self.y - np.asarray(self.x))


def _qualifying(alphas, M):
    """All ``y`` in ``1..M`` meeting the Dirichlet bound, with their nearest integers."""
    alphas = np.asarray(alphas, dtype=float).reshape(-1)
    y = np.arange(1, M + 1, dtype=np.int64)
    prod = np.outer(y, alphas)
    x = np.rint(prod)
    err = np.max(np.abs(prod - x), axis=1)
    hits = np.flatnonzero(err < M ** (-1.0 / alphas.size))
    return y[hits], x[hits].astype(np.int64)


def _witness(alphas, y, x, M):
    alphas = np.asarray(alphas, dtype=float).reshape(-1)
    res = TWO_PI * (alphas * y - x)
    return DirichletWitness(
        y=int(y), x=tuple(int(v) for v in x), M=int(M), residuals=tuple(float(v) for v in res)
    )


def dirichlet_approx(alphas, M):
    """Smallest ``y`` in ``1..M`` approximating all `alphas` to within ``M**(-1/N)``.

    The search is exhaustive with ``x_i = round(alpha_i y)``. Dirichlet's
    theorem guarantees a hit.
    """
    alphas = np.atleast_1d(np.asarray(alphas, dtype=float))
    if M < 2:
        raise ValueError("M must be at least 2")
    if alphas.size < 1:
        raise ValueError("need at least one alpha")
    ys, xs = _qualifying(alphas, int(M))
    if ys.size == 0:
        # Only reachable through floating-point round-off at the bound.
        raise RuntimeError(f"no Dirichlet witness found for M={M}")
    return _witness(alphas, ys[0], xs[0], M)


def power_conditions(r1, r2, m, A=None, delta=None):
    """Check the acceptance conditions for ``A**m``.

    Returns ``(ok, reason)`` where `reason` is one of ``"ok"``, ``"parity"``,
    ``"branch"``, ``"delta"``.
    """
    for r in (r1, r2):
        if abs(np.mod(m * r, TWO_PI) - np.pi) <= BRANCH_MARGIN:
            return False, "branch"
    for r in (r1, r2):
        theta = m * r - TWO_PI * np.rint(m * r / TWO_PI)
        if abs(theta) >= np.pi / 2:
            return False, "parity"
    if A is not None and delta is not None:
        if np.linalg.norm(matrix_power(A, m) - I4, "fro") >= delta:
            return False, "delta"
    return True, "ok"


def near_identity_power(E, omega, delta=0.4, M_max=2**20, exclude=()):
    """Find ``m`` with ``||A(E)**m - I||_F < delta``.

    Dirichlet approximation is run on ``(r_1 / 2 pi, r_2 / 2 pi)`` with
    ``M = 16, 32, 64, ...`` up to `M_max`. For each ``M`` the qualifying
    ``y`` are tried in increasing order; the first one that passes the
    ``delta`` test, keeps both residual angles inside ``(-pi/2, pi/2)`` and
    stays clear of the logarithm's branch cut is returned.

    Parameters
    ----------
    E : float
    omega : OmegaPair
    delta : float
        Target Frobenius distance to the identity, ``0 < delta < 1``.
    M_max : int
        Largest Dirichlet bound tried, at least 16.
    exclude : iterable of int
        Powers that must not be returned.

    Returns
    -------
    m : int
    witness : DirichletWitness

    Raises
    ------
    SearchExhausted
        If no admissible power exists up to `M_max`.
    """
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if M_max < M_START:
        raise ValueError(f"M_max must be at least {M_START}")
    tm = transfer_matrix(E, omega)
    alphas = np.array([tm.r1, tm.r2]) / TWO_PI
    excluded = set(int(v) for v in exclude)
    tried = set()
    M = M_START
    while True:
        ys, xs = _qualifying(alphas, M)
        for y, x in zip(ys, xs):
            y = int(y)
            if y in tried or y in excluded:
                continue
            tried.add(y)
            ok, _ = power_conditions(tm.r1, tm.r2, y, tm.A, delta)
            if ok:
                return y, _witness(alphas, y, x, M)
        if M >= M_max:
            break
        M = min(2 * M, M_max)
    raise SearchExhausted(
        f"no power m <= {M_max} brings A(E={E}, omega={tuple(omega)}) within {delta} of I"
    )
