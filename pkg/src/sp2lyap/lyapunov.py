"""
Monte Carlo Lyapunov spectrum of the i.i.d. transfer-matrix cocycle.

Two estimators are provided:

* `lyapunov_spectrum` pushes an orthonormal 4-frame through the product and
  re-orthonormalizes it by QR, accumulating ``log |R_ii|``;
* `top_exponent_sum_wedge` follows a single vector under the first or
  second exterior power, which estimates ``gamma_1`` or ``gamma_1 + gamma_2``.

Error bars are batch means over consecutive stretches of the same run.
"""

from dataclasses import dataclass

import numpy as np

from .liealgebra import SpanCertificate, span_certificate
from .linalg import wedge2
from .transfer import sample_couplings, transfer_table

N_BATCHES = 30
MIN_STEPS = 10**4
CHUNK_BLOCKS = 20000


@dataclass(frozen=True)
class LyapunovSpectrum:
    gammas: tuple
    stderr: tuple
    steps: int
    energy: float
    seed: int

    @property
    def symmetry_defects(self):
        """``(|g1 + g4|, |g2 + g3|)``; both vanish for a symplectic cocycle."""
        g = self.gammas
        return abs(g[0] + g[3]), abs(g[1] + g[2])

    def symmetric_within(self, k=3.0):
        s = self.stderr
        d14, d23 = self.symmetry_defects
        return d14 <= k * (s[0] + s[3]) and d23 <= k * (s[1] + s[2])


@dataclass(frozen=True)
class SeparabilityReport:
    spectrum: LyapunovSpectrum
    certificate: SpanCertificate
    separable: bool
    margin: float

    def to_dict(self):
        sp = self.spectrum
        return {
            "energy": sp.energy,
            "gammas": list(sp.gammas),
            "stderr": list(sp.stderr),
            "steps": sp.steps,
            "seed": sp.seed,
            "separable": self.separable,
            "margin": self.margin,
            "certificate": self.certificate.to_dict(),
        }


def _check_steps(steps, block):
    if steps < 1:
        raise ValueError("steps must be positive")
    if not 1 <= block <= 100:
        raise ValueError("reorth_every must lie in [1, 100]")


def _block_products(table, config, steps, block):
    """Yield products ``A_{k+b-1} ... A_k`` of consecutive blocks, with their lengths.

    Matrices are drawn in one pass from a generator seeded by ``config.seed``,
    so the sequence does not depend on `block` or on chunking.
    """
    idx1, idx2 = sample_couplings(config, steps)
    chunk = CHUNK_BLOCKS * block
    for start in range(0, steps, chunk):
        stop = min(start + chunk, steps)
        i1, i2 = idx1[start:stop], idx2[start:stop]
        n = stop - start
        full = n // block
        if full:
            mats = table[i1[: full * block], i2[: full * block]]
            mats = mats.reshape(full, block, *table.shape[2:])
            P = mats[:, 0]
            for j in range(1, block):
                P = mats[:, j] @ P
            for b in range(full):
                yield P[b], block
        rest = n - full * block
        if rest:
            P = np.eye(table.shape[-1])
            for a, b in zip(i1[full * block:], i2[full * block:]):
                P = table[a, b] @ P
            yield P, rest


def _batch_stats(logs, lengths, steps, n_batches):
    """Overall rate and batch-means standard error for per-block log increments."""
    logs = np.asarray(logs)
    lengths = np.asarray(lengths)
    n_blocks = len(lengths)
    nb = min(n_batches, n_blocks)
    owner = (np.arange(n_blocks) * nb) // n_blocks
    sums = np.zeros((nb,) + logs.shape[1:])
    counts = np.zeros(nb)
    np.add.at(sums, owner, logs)
    np.add.at(counts, owner, lengths)
    means = sums / counts.reshape((-1,) + (1,) * (logs.ndim - 1))
    rate = logs.sum(axis=0) / steps
    if nb < 2:
        return rate, np.full_like(rate, np.inf)
    stderr = means.std(axis=0, ddof=1) / np.sqrt(nb)
    return rate, stderr


def lyapunov_spectrum(config, E, steps=10**6, reorth_every=10, n_batches=N_BATCHES):
    """Estimate all four Lyapunov exponents at energy `E`.

    Parameters
    ----------
    config : ModelConfig
        Single-site law and seed.
    E : float
        Energy above every cell eigenvalue.
    steps : int
        Number of unit cells in the product.
    reorth_every : int
        Cells between QR re-orthonormalizations (1..100).
    n_batches : int
        Number of consecutive batches for the standard errors.

    Returns
    -------
    LyapunovSpectrum
        Exponents sorted in decreasing order with batch-means standard errors.
    """
    _check_steps(steps, reorth_every)
    if steps < MIN_STEPS:
        raise ValueError(f"steps must be at least {MIN_STEPS}")
    table = transfer_table(config, E)
    Q = np.eye(4)
    logs, lengths = [], []
    for P, n in _block_products(table, config, steps, reorth_every):
        Q, R = np.linalg.qr(P @ Q)
        d = np.diag(R)
        signs = np.where(d < 0, -1.0, 1.0)
        Q = Q * signs
        logs.append(np.log(np.abs(d)))
        lengths.append(n)
    rate, stderr = _batch_stats(logs, lengths, steps, n_batches)
    order = np.argsort(-rate, kind="stable")
    return LyapunovSpectrum(
        gammas=tuple(float(v) for v in rate[order]),
        stderr=tuple(float(v) for v in stderr[order]),
        steps=int(steps),
        energy=float(E),
        seed=config.seed,
    )


def wedge_estimate(config, E, p, steps=10**6, block=10, n_batches=N_BATCHES):
    """``sum_{i<=p} gamma_i`` from the growth of one vector, with a batch-means error.

    Returns
    -------
    value, stderr : float
    """
    if p not in (1, 2):
        raise ValueError("p must be 1 or 2")
    _check_steps(steps, block)
    table = transfer_table(config, E)
    if p == 2:
        k = table.shape[0]
        table = np.array([[wedge2(table[i, j]) for j in range(k)] for i in range(k)])
    dim = table.shape[-1]
    v = np.ones(dim) / np.sqrt(dim)
    logs, lengths = [], []
    for P, n in _block_products(table, config, steps, block):
        v = P @ v
        norm = np.linalg.norm(v)
        v = v / norm
        logs.append(np.log(norm))
        lengths.append(n)
    rate, stderr = _batch_stats(logs, lengths, steps, n_batches)
    return float(rate), float(stderr)


def top_exponent_sum_wedge(config, E, p, steps=10**6):
    """Estimate ``gamma_1`` (p=1) or ``gamma_1 + gamma_2`` (p=2)."""
    return wedge_estimate(config, E, p, steps)[0]


def integrability_bound(config, E):
    """``max ||A||`` over the support; finite support makes ``E log+ ||A||`` finite."""
    table = transfer_table(config, E)
    return float(max(np.linalg.norm(A, 2) for A in table.reshape(-1, 4, 4)))


def is_separable(spectrum, k=3.0):
    """``gamma_1 - gamma_2`` and ``gamma_2`` both exceed `k` standard errors.

    Returns
    -------
    separable : bool
    margin : float
        ``min((g1 - g2) / (s1 + s2), g2 / s2)``.
    """
    g, s = spectrum.gammas, spectrum.stderr
    gap = (g[0] - g[1]) / (s[0] + s[1]) if s[0] + s[1] > 0 else np.inf * np.sign(g[0] - g[1])
    pos = g[1] / s[1] if s[1] > 0 else np.inf * np.sign(g[1])
    margin = float(min(gap, pos))
    return bool(gap > k and pos > k), margin


def separability_report(
    config, E, steps=10**6, reorth_every=10, delta=0.4, M_max=2**20, tol_f=1e-12,
    rank_tol=1e-8,
):
    """Span certificate and Lyapunov statistics at one energy, side by side.

    The separability verdict comes from the statistics alone; the
    certificate is reported next to it and does not gate it.
    """
    if E <= 2:
        raise ValueError("energy must exceed 2")
    cert = span_certificate(E, delta=delta, M_max=M_max, tol_f=tol_f, rank_tol=rank_tol)
    spectrum = lyapunov_spectrum(config, E, steps, reorth_every)
    separable, margin = is_separable(spectrum)
    return SeparabilityReport(spectrum=spectrum, certificate=cert, separable=separable, margin=margin)
