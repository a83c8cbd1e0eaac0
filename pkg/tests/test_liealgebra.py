import numpy as np
import pytest

from sp2lyap.diophantine import near_identity_power
from sp2lyap.errors import BranchCut, FloorParity, MixedEnergy
from sp2lyap.liealgebra import (
    O00, O01, O10, O11, V1_ENTRIES, V2_ENTRIES, Verdict, Z1, Z2, Z3, LogTransfer,
    certificate_from_logs, energy_grid, f1_determinant, f2_determinant, find_powers,
    log_from_angles, log_transfer_closed, scan_critical_energies, span_certificate,
    theta_matrices, upsilon_brackets,
)
from sp2lyap.linalg import (
    I4, matrix_exp, matrix_log_series, matrix_power, membership_defect, rank_with_tolerance,
    sp2_coords,
)
from sp2lyap.transfer import OMEGAS, transfer_matrix


@pytest.fixture(scope="module")
def cert5():
    return span_certificate(5.0)


def logs_at(E, delta=0.4):
    powers = find_powers(E, delta)
    return {w: log_transfer_closed(E, w, powers[w]) for w in OMEGAS}


def scaled_logs(logs, c):
    return {w: LogTransfer(c * lt.LA, lt.alpha, lt.beta, lt.xints, lt.m, lt.omega, lt.energy)
            for w, lt in logs.items()}


def is_v1(X, tol=1e-10):
    A = X[:2, :2]
    return (np.abs(X[:2, 2:]).max() <= tol and np.abs(X[2:, :2]).max() <= tol
            and np.abs(X[2:, 2:] + A.T).max() <= tol)


def is_v2(X, tol=1e-10):
    return (np.abs(X[:2, :2]).max() <= tol and np.abs(X[2:, 2:]).max() <= tol
            and np.abs(X[:2, 2:] - X[:2, 2:].T).max() <= tol
            and np.abs(X[2:, :2] - X[2:, :2].T).max() <= tol)


class TestLogTransfer:
    def test_zero_angles_give_zero(self):
        R = transfer_matrix(4.0, (1, 0)).spectral.R
        LA, alpha, beta = log_from_angles(R, 1.3, 2.1, 0.0, 0.0)
        np.testing.assert_array_equal(LA, np.zeros((4, 4)))
        assert alpha == (0.0, 0.0) and beta == (0.0, 0.0)

    def test_exact_turn_on_one_channel(self):
        # r_1 = 2 pi for (1,1) at E = 2 + 4 pi^2, so theta_1 = 0 for m = 1
        lt = log_transfer_closed(2 + 4 * np.pi**2, (1, 1), 1)
        assert lt.thetas[0] == pytest.approx(0.0, abs=1e-14)
        assert lt.alpha[0] == pytest.approx(0.0, abs=1e-13)
        assert lt.xints[0] == 1

    def test_matches_series_e3(self):
        m, _ = near_identity_power(3.0, (0, 0), 0.4)
        lt = log_transfer_closed(3.0, (0, 0), m)
        Am = matrix_power(transfer_matrix(3.0, (0, 0)).A, m)
        np.testing.assert_allclose(lt.LA, matrix_log_series(Am), atol=1e-8)
        np.testing.assert_allclose(matrix_exp(lt.LA), Am, atol=1e-8)

    @pytest.mark.parametrize("E", [2.2, 3.0, 4.5, 8.0])
    def test_invariants(self, E):
        for w, lt in logs_at(E).items():
            tm = transfer_matrix(E, w)
            r = (tm.r1, tm.r2)
            for l in range(2):
                assert lt.alpha[l] == pytest.approx(-lt.beta[l] * r[l] ** 2)
                assert lt.alpha[l] * lt.beta[l] == pytest.approx(-lt.thetas[l] ** 2)
                assert lt.alpha[l] * lt.beta[l] <= 0
                assert lt.thetas[l] == pytest.approx(lt.m * r[l] - 2 * np.pi * lt.xints[l])
            assert membership_defect(lt.LA) <= 1e-10
            np.testing.assert_allclose(matrix_exp(lt.LA), matrix_power(tm.A, lt.m), atol=1e-8)

    def test_branch_cut(self):
        # 11 * r_2 = 22, within 0.01 of 7 pi
        with pytest.raises(BranchCut):
            log_transfer_closed(3.0, (0, 0), 11)

    def test_floor_parity(self):
        tm = transfer_matrix(3.0, (0, 0))
        for m in range(1, 100):
            thetas = [m * r - 2 * np.pi * round(m * r / (2 * np.pi)) for r in (tm.r1, tm.r2)]
            far = [abs(np.mod(m * r, 2 * np.pi) - np.pi) > 0.1 for r in (tm.r1, tm.r2)]
            if all(far) and max(abs(t) for t in thetas) >= np.pi / 2:
                with pytest.raises(FloorParity):
                    log_transfer_closed(3.0, (0, 0), m)
                return
        pytest.fail("no parity-violating power found")


class TestUpsilon:
    def test_zero_logs(self):
        zero = {w: LogTransfer(np.zeros((4, 4)), (0, 0), (0, 0), (0, 0), 1, w, 5.0)
                for w in OMEGAS}
        for U in upsilon_brackets(zero):
            np.testing.assert_array_equal(U, np.zeros((4, 4)))

    def test_block_diagonal_form(self, cert5):
        for U in upsilon_brackets(cert5.logs):
            assert is_v1(U)
            assert membership_defect(U) <= 1e-10

    def test_antisymmetry(self, cert5):
        la = {w: lt.LA for w, lt in cert5.logs.items()}
        U1 = upsilon_brackets(cert5.logs)[0]
        np.testing.assert_allclose(U1, -(la[O00] @ la[O10] - la[O10] @ la[O00]), atol=1e-15)

    def test_mixed_energy(self):
        logs = logs_at(5.0)
        logs[O11] = log_transfer_closed(5.5, O11, find_powers(5.5)[O11])
        with pytest.raises(MixedEnergy):
            upsilon_brackets(logs)
        with pytest.raises(MixedEnergy):
            theta_matrices(logs)


class TestF1:
    def test_zero_column(self, cert5):
        ups = upsilon_brackets(cert5.logs)
        ups[2] = np.zeros((4, 4))
        assert f1_determinant(ups) == 0.0

    def test_proportional_columns(self, cert5):
        ups = upsilon_brackets(cert5.logs)
        ups[3] = 2.5 * ups[1]
        assert abs(f1_determinant(ups)) <= 1e-12 * abs(f1_determinant(upsilon_brackets(cert5.logs)))

    def test_entries_layout(self):
        ups = [np.arange(16.0).reshape(4, 4) + 100 * k for k in range(4)]
        C = np.array([[U[i, j] for U in ups] for i, j in V1_ENTRIES])
        assert f1_determinant(ups) == pytest.approx(np.linalg.det(C))

    def test_e5_regression(self, cert5):
        assert cert5.f1 != 0
        assert cert5.f1 == pytest.approx(-2.2873337496166508e-11, rel=1e-6)


class TestTheta:
    def test_synthetic_equal_logs(self, cert5):
        logs = dict(cert5.logs)
        logs[O10] = logs[O00]
        th = theta_matrices(logs)
        np.testing.assert_array_equal(th[0], np.zeros((4, 4)))
        np.testing.assert_array_equal(th[3], np.zeros((4, 4)))

    @pytest.mark.parametrize("E", [2.5, 5.0, 9.0])
    def test_structural_zeros(self, E):
        th = theta_matrices(logs_at(E))
        # 1-based [4,2], [2,4] of Theta_4; [3,1], [1,3] of Theta_5; [3,1], [2,4] of Theta_6
        assert th[3][3, 1] == 0 and th[3][1, 3] == 0
        assert th[4][2, 0] == 0 and th[4][0, 2] == 0
        assert th[5][2, 0] == 0 and th[5][1, 3] == 0

    @pytest.mark.parametrize("E", [2.5, 5.0, 9.0])
    def test_anti_block_form(self, E):
        for T in theta_matrices(logs_at(E)):
            assert is_v2(T)
            assert membership_defect(T) <= 1e-10


class TestF2:
    def test_zero_column(self, cert5):
        th = theta_matrices(cert5.logs)
        th[4] = np.zeros((4, 4))
        assert f2_determinant(th) == 0.0

    def test_column_swap_flips_sign(self, cert5):
        th = theta_matrices(cert5.logs)
        swapped = [th[1], th[0]] + th[2:]
        assert f2_determinant(swapped) == pytest.approx(-f2_determinant(th), rel=1e-12)

    def test_e5_regression(self, cert5):
        assert cert5.f2 == pytest.approx(1.3572169264107632e-06, rel=1e-6)


class TestSubspaces:
    def test_V1_V2_complementary(self):
        v1 = [np.block([[E, np.zeros((2, 2))], [np.zeros((2, 2)), -E.T]])
              for E in np.eye(4).reshape(4, 2, 2)]
        v2 = []
        for i, j in V2_ENTRIES:
            X = np.zeros((4, 4))
            X[i, j] = X[j - 2 if j >= 2 else j + 2, i - 2 if i >= 2 else i + 2] = 1.0
            v2.append(X)
        assert all(is_v2(X) for X in v2)
        assert rank_with_tolerance(v1) == 4
        assert rank_with_tolerance(v2) == 6
        assert rank_with_tolerance(v1 + v2) == 10

    def test_constants_and_one_theta(self, cert5):
        th = theta_matrices(cert5.logs)
        for Z in (Z1, Z2, Z3):
            assert is_v1(Z)
        assert rank_with_tolerance([Z1, Z2, Z3, th[0]]) == 4


class TestSpanCertificate:
    def test_e5_certified(self, cert5):
        assert cert5.verdict is Verdict.CERTIFIED_DENSE
        assert cert5.rank == 10
        assert abs(cert5.f1_scaled) > 1e-12 and abs(cert5.f2_scaled) > 1e-12

    def test_roundtrip(self, cert5):
        for w, lt in cert5.logs.items():
            Am = matrix_power(transfer_matrix(5.0, w).A, lt.m)
            np.testing.assert_allclose(matrix_exp(lt.LA), Am, atol=1e-8)
            assert np.linalg.norm(Am - I4, "fro") < 0.4

    def test_forced_zero_upsilon(self, cert5):
        logs = dict(cert5.logs)
        logs[O10] = logs[O00]
        cert = certificate_from_logs(logs)
        assert cert.f1 == 0.0
        assert cert.verdict is Verdict.DEGENERATE

    def test_branch_cut_energy(self):
        powers = dict(find_powers(3.0))
        powers[O00] = 11
        cert = span_certificate(3.0, powers=powers)
        assert cert.verdict is Verdict.IN_S1
        assert np.isfinite(cert.f1) and np.isfinite(cert.f2)

    def test_m10_differs_from_m11(self):
        for E in np.linspace(2.05, 12, 40):
            p = find_powers(E)
            assert p[O10] != p[O11]

    def test_rejects_low_energy(self):
        with pytest.raises(ValueError):
            span_certificate(2.0)

    def test_soundness(self):
        for E in np.linspace(2.05, 12, 60):
            cert = span_certificate(E)
            if abs(cert.f1_scaled) > 1e-12 and abs(cert.f2_scaled) > 1e-12:
                assert cert.rank == 10

    @pytest.mark.parametrize("c", [0.5, 0.8, 1.7, 2.0])
    def test_scaling(self, cert5, c):
        scaled = certificate_from_logs(scaled_logs(cert5.logs, c))
        assert scaled.f1 == pytest.approx(c**8 * cert5.f1, rel=1e-8)
        assert scaled.f2 == pytest.approx(c**6 * cert5.f2, rel=1e-8)
        assert scaled.rank == cert5.rank
        assert scaled.verdict is cert5.verdict

    def test_to_dict(self, cert5):
        d = cert5.to_dict()
        assert d["powers"] == {"00": 531, "10": 106, "01": 106, "11": 399}
        assert d["verdict"] == "CERTIFIED_DENSE"


class TestScan:
    def test_empty_interval(self):
        res = scan_critical_energies(3.0, 3.0)
        assert res.flagged == [] and len(res.energies) == 0

    def test_grid(self):
        g = energy_grid(3.0, 4.0, 0.01)
        assert len(g) == 101 and g[0] == 3.0 and g[-1] == pytest.approx(4.0)
        assert len(energy_grid(3.0, 3.05, 0.02)) == 4

    def test_regression_3_4(self):
        res = scan_critical_energies(3.0, 4.0, 1e-2)
        reasons = [c.reason for c in res.flagged]
        assert reasons == ["f2_sign_change", "root:f2", "f1_sign_change", "root:f1"]
        assert res.flagged_fraction == pytest.approx(0.02)

    def test_bisection_width(self):
        res = scan_critical_energies(3.0, 4.0, 1e-2)
        roots = [c for c in res.flagged if c.reason.startswith("root")]
        assert roots
        for c in roots:
            assert c.E_right - c.E_left <= 1e-6
            cell = next(f for f in res.flagged
                        if f.reason.endswith("sign_change") and f.E_left <= c.E_left <= f.E_right)
            assert cell.E_left <= c.E_right <= cell.E_right

    def test_sign_change_brackets_root(self):
        res = scan_critical_energies(3.0, 4.0, 1e-2)
        for c in res.flagged:
            if c.reason.startswith("root"):
                key = "f1_scaled" if c.reason.endswith("f1") else "f2_scaled"
                a = getattr(span_certificate(c.E_left), key)
                b = getattr(span_certificate(c.E_right), key)
                assert np.sign(a) != np.sign(b)

    def test_unresolved(self):
        res = scan_critical_energies(5.0, 5.02, 1e-2, delta=1e-9, M_max=32)
        assert {c.reason for c in res.flagged} == {"UNRESOLVED"}

    def test_parallel_matches_serial(self):
        a = scan_critical_energies(3.0, 3.3, 1e-2)
        b = scan_critical_energies(3.0, 3.3, 1e-2, workers=2)
        assert a.flagged == b.flagged
        assert [c.f1 for c in a.certificates] == [c.f1 for c in b.certificates]
