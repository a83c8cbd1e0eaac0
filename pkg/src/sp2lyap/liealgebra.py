"""
Logarithms of near-identity transfer-matrix powers and the sp_2(R) span certificate.

The four logarithms ``LA_w`` (one per Bernoulli configuration) generate a Lie
subalgebra of sp_2(R). It is the whole algebra when

* the four brackets ``U_i`` fill the block-diagonal subspace ``V1``
  (``f1 != 0``), and
* three differences of logarithms plus their brackets with fixed elements
  of ``V1`` fill the anti-diagonal subspace ``V2`` (``f2 != 0``).
"""

import enum
from dataclasses import dataclass, field

import numpy as np

from .diophantine import BRANCH_MARGIN, TWO_PI, near_identity_power, power_conditions
from .errors import BranchCut, FloorParity, MixedEnergy, SearchExhausted
from .linalg import lie_bracket, rank_with_tolerance
from .transfer import OMEGAS, OmegaPair, transfer_matrix

O00, O10, O01, O11 = OMEGAS

Z1 = np.diag([1.0, 0.0, -1.0, 0.0])
Z2 = np.diag([0.0, 1.0, 0.0, -1.0])
Z3 = np.zeros((4, 4))
Z3[0, 1] = 1.0
Z3[3, 2] = -1.0

# (row, col) entries read off each family, 0-based
V1_ENTRIES = ((0, 0), (0, 1), (1, 0), (1, 1))
V2_ENTRIES = ((2, 0), (2, 1), (3, 1), (0, 2), (0, 3), (1, 3))


class Verdict(str, enum.Enum):
    CERTIFIED_DENSE = "CERTIFIED_DENSE"
    DEGENERATE = "DEGENERATE"
    IN_S1 = "IN_S1"


@dataclass(frozen=True)
class LogTransfer:
    LA: np.ndarray
    alpha: tuple
    beta: tuple
    xints: tuple
    m: int
    omega: OmegaPair
    energy: float
    thetas: tuple = ()


@dataclass(frozen=True)
class SpanCertificate:
    energy: float
    f1: float
    f2: float
    f1_scaled: float
    f2_scaled: float
    rank: int
    powers: dict
    verdict: Verdict
    detail: str = ""
    logs: dict = field(default=None, repr=False, compare=False)

    def to_dict(self):
        return {
            "energy": self.energy,
            "powers": {w.label: m for w, m in self.powers.items()},
            "f1": self.f1,
            "f2": self.f2,
            "f1_scaled": self.f1_scaled,
            "f2_scaled": self.f2_scaled,
            "rank": self.rank,
            "verdict": self.verdict.value,
        }


def _residual(m, r):
    x = int(np.rint(m * r / TWO_PI))
    return x, m * r - TWO_PI * x


def log_from_angles(R, r1, r2, theta1, theta2):
    """``R [[0, diag(beta)], [diag(alpha), 0]] R^T`` with ``alpha = -theta r``, ``beta = theta / r``."""
    alpha = (-theta1 * r1, -theta2 * r2)
    beta = (theta1 / r1, theta2 / r2)
    K = np.zeros((4, 4))
    K[0, 2], K[1, 3] = beta
    K[2, 0], K[3, 1] = alpha
    return R @ K @ R.T, alpha, beta


def log_transfer_closed(E, omega, m):
    """Closed-form logarithm of ``A(E, omega)**m``.

    ``x_l`` is the integer nearest ``m r_l / 2 pi`` and the residual angle is
    ``theta_l = m r_l - 2 pi x_l``; in the eigenbasis the logarithm has
    ``beta_l = theta_l / r_l`` above and ``alpha_l = -theta_l r_l`` below the
    diagonal block.

    Raises
    ------
    BranchCut
        If ``m r_l mod 2 pi`` lies within 0.1 of pi.
    FloorParity
        If ``|theta_l| >= pi / 2``.
    """
    omega = OmegaPair(*omega)
    m = int(m)
    if m < 1:
        raise ValueError("m must be a positive integer")
    tm = transfer_matrix(E, omega)
    for r in (tm.r1, tm.r2):
        if abs(np.mod(m * r, TWO_PI) - np.pi) <= BRANCH_MARGIN:
            raise BranchCut(f"m r = {m * r:.6g} is within {BRANCH_MARGIN} of pi mod 2 pi")
    xs, thetas = [], []
    for r in (tm.r1, tm.r2):
        x, theta = _residual(m, r)
        if abs(theta) >= np.pi / 2:
            raise FloorParity(f"residual angle {theta:.6g} outside (-pi/2, pi/2)")
        xs.append(x)
        thetas.append(theta)
    LA, alpha, beta = log_from_angles(tm.spectral.R, tm.r1, tm.r2, *thetas)
    return LogTransfer(
        LA=LA, alpha=alpha, beta=beta, xints=tuple(xs), m=m, omega=omega, energy=float(E),
        thetas=tuple(thetas),
    )


def _shared_energy(logs):
    energies = {lt.energy for lt in logs.values()}
    if len(energies) > 1:
        raise MixedEnergy(f"logarithms at different energies: {sorted(energies)}")


def upsilon_brackets(logs):
    """The four brackets spanning ``V1``.

    ``U1 = [LA10, LA00]``, ``U2 = [LA01, LA00]``, ``U3 = [LA10, LA11]``,
    ``U4 = [LA01, LA11]``. `logs` maps each `OmegaPair` to its `LogTransfer`.
    """
    _shared_energy(logs)
    la = {w: logs[w].LA for w in OMEGAS}
    return [
        lie_bracket(la[O10], la[O00]),
        lie_bracket(la[O01], la[O00]),
        lie_bracket(la[O10], la[O11]),
        lie_bracket(la[O01], la[O11]),
    ]


def theta_matrices(logs):
    """Six elements spanning ``V2``: three differences and their brackets with Z1, Z2, Z3."""
    _shared_energy(logs)
    la = {w: logs[w].LA for w in OMEGAS}
    t1 = la[O10] - la[O00]
    t2 = la[O10] - la[O11]
    t3 = la[O01] - la[O00]
    return [t1, t2, t3, lie_bracket(t1, Z1), lie_bracket(t2, Z2), lie_bracket(t3, Z3)]


def _entry_matrix(mats, entries):
    return np.array([[X[i, j] for X in mats] for i, j in entries])


def _det_and_scaled(C):
    det = float(np.linalg.det(C))
    norms = np.linalg.norm(C, axis=0)
    scale = float(np.prod(norms))
    return det, (det / scale if scale > 0 else 0.0)


def f1_determinant(upsilons):
    """Determinant of the 4x4 matrix of upper-left block entries of the four ``U_i``."""
    return _det_and_scaled(_entry_matrix(upsilons, V1_ENTRIES))[0]


def f2_determinant(thetas):
    """Determinant of the 6x6 matrix of the ``V2`` coordinates of the six ``Theta_j``."""
    return _det_and_scaled(_entry_matrix(thetas, V2_ENTRIES))[0]


def scaled_f1(upsilons):
    """``f1`` divided by the product of its column norms (Hadamard ratio in [-1, 1])."""
    return _det_and_scaled(_entry_matrix(upsilons, V1_ENTRIES))[1]


def scaled_f2(thetas):
    return _det_and_scaled(_entry_matrix(thetas, V2_ENTRIES))[1]


def certificate_from_logs(logs, tol_f=1e-12, rank_tol=1e-8):
    """Span certificate for a given set of four logarithms."""
    _shared_energy(logs)
    ups = upsilon_brackets(logs)
    ths = theta_matrices(logs)
    f1, f1s = _det_and_scaled(_entry_matrix(ups, V1_ENTRIES))
    f2, f2s = _det_and_scaled(_entry_matrix(ths, V2_ENTRIES))
    rank = rank_with_tolerance(ups + ths, rank_tol)
    dense = abs(f1s) > tol_f and abs(f2s) > tol_f and rank == 10
    return SpanCertificate(
        energy=next(iter(logs.values())).energy,
        f1=f1,
        f2=f2,
        f1_scaled=f1s,
        f2_scaled=f2s,
        rank=rank,
        powers={w: logs[w].m for w in OMEGAS},
        verdict=Verdict.CERTIFIED_DENSE if dense else Verdict.DEGENERATE,
        logs=logs,
    )


def find_powers(E, delta=0.4, M_max=2**20):
    """Near-identity powers for the four configurations, with ``m10 != m11``.

    When the searches return ``m10 == m11``, ``2 m10`` is tried first; if it
    violates the acceptance conditions the (1,0) search is resumed with
    ``m11`` excluded.
    """
    powers = {w: near_identity_power(E, w, delta, M_max)[0] for w in OMEGAS}
    if powers[O10] == powers[O11]:
        tm = transfer_matrix(E, O10)
        doubled = 2 * powers[O10]
        if power_conditions(tm.r1, tm.r2, doubled, tm.A, delta)[0]:
            powers[O10] = doubled
        else:
            powers[O10] = near_identity_power(E, O10, delta, M_max, exclude={powers[O11]})[0]
    return powers


def span_certificate(E, delta=0.4, M_max=2**20, tol_f=1e-12, rank_tol=1e-8, powers=None):
    """Check that the logarithms of near-identity powers generate sp_2(R) at energy `E`.

    Parameters
    ----------
    E : float
        Energy, ``E > 2``.
    delta, M_max
        Passed to `near_identity_power`.
    tol_f : float
        Threshold on the column-normalized determinants.
    rank_tol : float
        Relative singular-value threshold for the rank.
    powers : dict, optional
        Explicit powers per `OmegaPair`, bypassing the search.

    Returns
    -------
    SpanCertificate
        ``IN_S1`` if a logarithm hits the branch cut, else ``CERTIFIED_DENSE``
        or ``DEGENERATE``.

    Raises
    ------
    SearchExhausted
    """
    if E <= 2:
        raise ValueError("energy must exceed 2")
    if powers is None:
        powers = find_powers(E, delta, M_max)
    else:
        powers = {OmegaPair(*w): int(m) for w, m in powers.items()}
    try:
        logs = {w: log_transfer_closed(E, w, powers[w]) for w in OMEGAS}
    except (BranchCut, FloorParity) as exc:
        return SpanCertificate(
            energy=float(E), f1=0.0, f2=0.0, f1_scaled=0.0, f2_scaled=0.0, rank=0,
            powers=dict(powers), verdict=Verdict.IN_S1, detail=str(exc),
        )
    return certificate_from_logs(logs, tol_f, rank_tol)


@dataclass(frozen=True)
class FlaggedCell:
    E_left: float
    E_right: float
    reason: str


@dataclass
class ScanResult:
    energies: np.ndarray
    certificates: list
    flagged: list

    @property
    def flagged_fraction(self):
        cells = max(len(self.energies) - 1, 1)
        return len({(c.E_left, c.E_right) for c in self.flagged if not c.reason.startswith("root")}) / cells


def energy_grid(E_min, E_max, step):
    """Grid ``E_min, E_min + step, ...`` ending at `E_max` (inclusive, to round-off)."""
    if E_max < E_min:
        raise ValueError("E_max must not be below E_min")
    if E_max == E_min:
        return np.array([float(E_min)])
    n = int(np.floor((E_max - E_min) / step + 1e-9))
    grid = E_min + step * np.arange(n + 1)
    if E_max - grid[-1] > 1e-9 * step:
        grid = np.append(grid, E_max)
    return grid


def _safe_certificate(E, params):
    try:
        return span_certificate(E, **params)
    except SearchExhausted as exc:
        return exc


def _bisect(E_lo, E_hi, value_lo, key, params, width):
    """Shrink a sign-change bracket of ``certificate.<key>`` to the given width."""
    while E_hi - E_lo > width:
        mid = 0.5 * (E_lo + E_hi)
        cert = _safe_certificate(mid, params)
        if isinstance(cert, Exception) or cert.verdict is Verdict.IN_S1:
            break
        v = getattr(cert, key)
        if v == 0.0:
            return mid, mid
        if np.sign(v) == np.sign(value_lo):
            E_lo, value_lo = mid, v
        else:
            E_hi = mid
    return E_lo, E_hi


def scan_critical_energies(
    E_min, E_max, grid_step=1e-2, delta=0.4, M_max=2**20, tol_f=1e-12, rank_tol=1e-8,
    sign_tol=None, bisect_width=1e-6, workers=1,
):
    """Scan an energy range for points where the span certificate fails.

    A grid cell ``[E_i, E_{i+1}]`` is flagged

    * ``UNRESOLVED`` if the power search is exhausted at an endpoint,
    * ``IN_S1`` or ``DEGENERATE`` if an endpoint carries that verdict,
    * ``f1_sign_change`` / ``f2_sign_change`` if the scaled determinant
      changes sign and is below `sign_tol` in magnitude at an endpoint
      (default ``sqrt(rank_tol)``). The powers change from one grid point to
      the next, so most sign changes are jumps between analytic branches
      with both endpoint values of order one; the magnitude test keeps only
      the near-singular ones.

    Each sign-change cell is bisected to width `bisect_width`; the bracket
    is reported as an extra entry with reason ``root:f1`` / ``root:f2``.

    Returns
    -------
    ScanResult
    """
    params = dict(delta=delta, M_max=M_max, tol_f=tol_f, rank_tol=rank_tol)
    if sign_tol is None:
        sign_tol = np.sqrt(rank_tol)
    if E_max == E_min:
        return ScanResult(energies=np.array([]), certificates=[], flagged=[])
    grid = energy_grid(E_min, E_max, grid_step)
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            certs = list(pool.map(_safe_certificate, grid, [params] * len(grid)))
    else:
        certs = [_safe_certificate(E, params) for E in grid]

    flagged = []
    for i in range(len(grid) - 1):
        a, b = certs[i], certs[i + 1]
        left, right = float(grid[i]), float(grid[i + 1])
        if isinstance(a, Exception) or isinstance(b, Exception):
            flagged.append(FlaggedCell(left, right, "UNRESOLVED"))
            continue
        bad = [c.verdict.value for c in (a, b) if c.verdict is not Verdict.CERTIFIED_DENSE]
        if bad:
            reason = Verdict.IN_S1.value if Verdict.IN_S1.value in bad else bad[0]
            flagged.append(FlaggedCell(left, right, reason))
            continue
        for key, name in (("f1_scaled", "f1"), ("f2_scaled", "f2")):
            va, vb = getattr(a, key), getattr(b, key)
            if np.sign(va) != np.sign(vb) and min(abs(va), abs(vb)) < sign_tol:
                flagged.append(FlaggedCell(left, right, f"{name}_sign_change"))
                lo, hi = _bisect(left, right, va, key, params, bisect_width)
                flagged.append(FlaggedCell(lo, hi, f"root:{name}"))
    return ScanResult(energies=grid, certificates=certs, flagged=flagged)
