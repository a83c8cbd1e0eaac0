"""
Single-cell transfer matrices of the two-channel Anderson-Bernoulli operator

    H = -d^2/dx^2 + [[0, 1], [1, 0]] + sum_n diag(w1(n), w2(n)) chi_[0,1](x - n).

On a cell the potential is the constant symmetric matrix ``M = [[w1, 1], [1, w2]]``
and ``(u, u')`` evolves under ``Y' = [[0, I], [M - E, 0]] Y``. For ``E`` above
both eigenvalues of ``M`` the flow is a pair of rotations in the eigenbasis.
"""

from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .errors import EnergyBelowSpectrum
from .linalg import I2


class OmegaPair(NamedTuple):
    """Bernoulli configuration of one unit cell."""

    w1: int
    w2: int

    @classmethod
    def parse(cls, text):
        """Parse ``"1,0"`` style strings."""
        parts = [p.strip() for p in str(text).split(",")]
        if len(parts) != 2:
            raise ValueError(f"omega must be two comma-separated values, got {text!r}")
        return cls.checked(int(parts[0]), int(parts[1]))

    @classmethod
    def checked(cls, w1, w2):
        if w1 not in (0, 1) or w2 not in (0, 1):
            raise ValueError(f"omega components must be 0 or 1, got ({w1}, {w2})")
        return cls(int(w1), int(w2))

    @property
    def label(self):
        return f"{self.w1}{self.w2}"


OMEGAS = (OmegaPair(0, 0), OmegaPair(1, 0), OmegaPair(0, 1), OmegaPair(1, 1))


@dataclass(frozen=True)
class SpectralData:
    S: np.ndarray
    lambda1: float
    lambda2: float

    @property
    def R(self):
        Z = np.zeros((2, 2))
        return np.block([[self.S, Z], [Z, self.S]])

    def rs(self, E):
        """Wave numbers ``r_l = sqrt(E - lambda_l)``."""
        if E <= self.lambda1:
            raise EnergyBelowSpectrum(
                f"energy {E} must exceed the top eigenvalue {self.lambda1:.6g}"
            )
        return np.sqrt(E - self.lambda1), np.sqrt(E - self.lambda2)


@dataclass(frozen=True)
class TransferMatrix:
    A: np.ndarray
    energy: float
    couplings: tuple
    spectral: SpectralData
    r1: float
    r2: float

    @property
    def omega(self):
        """The `OmegaPair`, or None when the couplings are not Bernoulli values."""
        w1, w2 = self.couplings
        if w1 in (0, 1) and w2 in (0, 1):
            return OmegaPair(int(w1), int(w2))
        return None


@dataclass(frozen=True)
class ModelConfig:
    """Common single-site law ``nu`` (finite support) and PRNG seed.

    The default is Bernoulli(1/2) on {0, 1}.
    """

    support: tuple = ((0.0, 0.5), (1.0, 0.5))
    seed: int = 0
    values: np.ndarray = field(init=False, repr=False, compare=False)
    probs: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        support = tuple((float(v), float(p)) for v, p in self.support)
        if not support:
            raise ValueError("support must be non-empty")
        values = np.array([v for v, _ in support])
        probs = np.array([p for _, p in support])
        if np.any(probs <= 0):
            raise ValueError("probabilities must be positive")
        if abs(probs.sum() - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {probs.sum()!r}, not 1")
        if len(set(values)) != len(values):
            raise ValueError("support values must be distinct")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "probs", probs)

    @classmethod
    def bernoulli(cls, p=0.5, seed=0):
        """Bernoulli(p) on {0, 1}: value 1 with probability `p`."""
        return cls(support=((0.0, 1.0 - p), (1.0, p)), seed=seed)

    @classmethod
    def degenerate(cls, value=0.0, seed=0):
        return cls(support=((value, 1.0),), seed=seed)

    @property
    def covers_bernoulli(self):
        """Whether {0, 1} is contained in the support."""
        return {0.0, 1.0} <= set(self.values.tolist())

    def with_seed(self, seed):
        return ModelConfig(support=self.support, seed=seed)

    def max_eigenvalue(self):
        """Largest eigenvalue of ``M`` over all pairs of support values."""
        return max(
            _spectral(v1, v2).lambda1 for v1 in self.values for v2 in self.values
        )


def potential_matrix(omega):
    """Cell potential ``[[w1, 1], [1, w2]]``."""
    w1, w2 = omega
    return np.array([[float(w1), 1.0], [1.0, float(w2)]])


def eigendecompose(M):
    """Eigenvalues (descending) and orthonormal eigenvectors of a symmetric 2x2 matrix.

    Each eigenvector column is signed so that its first nonzero entry is
    positive.
    """
    M = np.asarray(M, dtype=float)
    lam, S = np.linalg.eigh(M)
    lam = lam[::-1]
    S = S[:, ::-1].copy()
    for j in range(2):
        col = S[:, j]
        lead = col[np.flatnonzero(np.abs(col) > 1e-14)[0]]
        if lead < 0:
            S[:, j] = -col
    return SpectralData(S=S, lambda1=float(lam[0]), lambda2=float(lam[1]))


@lru_cache(maxsize=64)
def _spectral(w1, w2):
    return eigendecompose(potential_matrix((w1, w2)))


def rotation_block(r1, r2, angle1, angle2):
    """Transfer matrix in the eigenbasis for phases ``angle_l`` and wave numbers ``r_l``."""
    c1, s1 = np.cos(angle1), np.sin(angle1)
    c2, s2 = np.cos(angle2), np.sin(angle2)
    return np.array([
        [c1, 0.0, s1 / r1, 0.0],
        [0.0, c2, 0.0, s2 / r2],
        [-r1 * s1, 0.0, c1, 0.0],
        [0.0, -r2 * s2, 0.0, c2],
    ])


def transfer_matrix(E, omega):
    """Closed-form transfer matrix over one unit cell.

    Parameters
    ----------
    E : float
        Energy, strictly above the top eigenvalue of the cell potential.
    omega : OmegaPair or pair of floats
        Couplings ``(w1, w2)``.

    Returns
    -------
    TransferMatrix

    Raises
    ------
    EnergyBelowSpectrum
    """
    w1, w2 = float(omega[0]), float(omega[1])
    spec = _spectral(w1, w2)
    r1, r2 = spec.rs(E)
    R = spec.R
    A = R @ rotation_block(r1, r2, r1, r2) @ R.T
    return TransferMatrix(
        A=A, energy=float(E), couplings=(w1, w2), spectral=spec, r1=r1, r2=r2
    )


def generator(E, omega):
    """The first-order system matrix ``[[0, I], [M - E, 0]]``."""
    M = potential_matrix(omega)
    Z = np.zeros((2, 2))
    return np.block([[Z, I2], [M - E * I2, Z]])


def integrate_linear_rk4(B, step, length=1.0):
    """Solve ``Y' = B Y``, ``Y(0) = I`` on ``[0, length]`` with classical RK4.

    The number of steps is ``ceil(length / step)`` so the effective step
    never exceeds `step`. A stack of generators of shape ``(..., d, d)`` is
    integrated in one pass.
    """
    B = np.asarray(B, dtype=float)
    n = int(np.ceil(length / step - 1e-12))
    h = length / n
    Y = np.broadcast_to(np.eye(B.shape[-1]), B.shape).copy()
    for _ in range(n):
        k1 = B @ Y
        k2 = B @ (Y + 0.5 * h * k1)
        k3 = B @ (Y + 0.5 * h * k2)
        k4 = B @ (Y + h * k3)
        Y = Y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return Y


def transfer_matrix_ode(E, omega, step=1e-4):
    """Transfer matrix by RK4 integration of the first-order system (oracle)."""
    if not 0 < step <= 0.1:
        raise ValueError("step must lie in (0, 0.1]")
    return integrate_linear_rk4(generator(E, omega), step)


def sample_couplings(config, n, rng=None):
    """Draw ``n`` i.i.d. coupling pairs as indices into ``config.values``.

    Returns
    -------
    idx1, idx2 : ndarray of int, shape (n,)
    """
    if rng is None:
        rng = np.random.default_rng(config.seed)
    k = len(config.values)
    idx1 = rng.choice(k, size=n, p=config.probs)
    idx2 = rng.choice(k, size=n, p=config.probs)
    return idx1, idx2


def transfer_table(config, E):
    """All ``k x k`` transfer matrices for the support, shape ``(k, k, 4, 4)``."""
    vals = config.values
    k = len(vals)
    table = np.empty((k, k, 4, 4))
    for i in range(k):
        for j in range(k):
            table[i, j] = transfer_matrix(E, (vals[i], vals[j])).A
    return table


def sample_transfer_sequence(config, E, n):
    """Sample ``n`` i.i.d. transfer matrices at energy `E`.

    The couplings ``w1(k), w2(k)`` are drawn independently from ``nu`` using a
    PCG64 generator seeded with ``config.seed``; equal seeds give identical
    sequences.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    vals = config.values
    cache = {}
    for v1 in vals:
        for v2 in vals:
            cache[(v1, v2)] = transfer_matrix(E, (v1, v2))
    idx1, idx2 = sample_couplings(config, n)
    return [cache[(vals[i], vals[j])] for i, j in zip(idx1, idx2)]
