import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import eval_hermite, factorial

from gibbs_nsho import discretize as d
from gibbs_nsho import linalg, mehler
from gibbs_nsho.errors import RecurrenceOverflow


def classical_hermite_function(n, x):
    return eval_hermite(n, x) * np.exp(-x * x / 2) / (math.pi**0.25 * math.sqrt(2.0**n * factorial(n)))


class TestHermite:
    def test_ground_state_values(self):
        assert d.psi_n(0.0, 0, 0.0) == pytest.approx(math.pi**-0.25, abs=1e-15)
        assert d.psi_n(0.0, 0, 0.0) == pytest.approx(0.7511255, abs=1e-7)
        assert abs(d.psi_n(0.0, 1, 0.0)) == 0.0

    @pytest.mark.parametrize("n", [0, 1, 2, 5, 17, 40])
    def test_matches_classical_formula(self, n):
        x = np.linspace(-6, 6, 41)
        got = d.hermite_functions(n, x)[n]
        assert np.max(np.abs(got - classical_hermite_function(n, x))) < 1e-12

    def test_discrete_l2_normalisation(self):
        x = np.linspace(-40, 40, 40001)
        h = x[1] - x[0]
        phi = d.hermite_functions(400, x)
        norms = (phi**2).sum(axis=1) * h
        assert np.max(np.abs(norms - 1)) < 1e-6

    def test_no_underflow_far_out(self):
        # near the turning point of n = 800 the Gaussian factor alone underflows
        val = d.hermite_functions(800, np.array([40.0]))[800, 0]
        assert val != 0 and abs(val) < 1

    def test_envelope_guard(self):
        with pytest.raises(RecurrenceOverflow):
            d.psi_n(0.3, 401, 0.5)
        with pytest.raises(RecurrenceOverflow):
            d.psi_n(0.3, 3, 41.0)

    def test_rotated_eigenfunctions(self):
        theta = 0.4
        x = np.linspace(-8, 8, 3201)
        h = x[1] - x[0]
        for n in range(4):
            psi = d.psi_n(theta, n, x)
            # -e^{-i theta} psi'' + e^{i theta} x^2 psi = (2n+1) psi
            second = (psi[2:] - 2 * psi[1:-1] + psi[:-2]) / h**2
            residual = -cmath.exp(-1j * theta) * second + cmath.exp(1j * theta) * x[1:-1] ** 2 * psi[1:-1]
            assert np.max(np.abs(residual - (2 * n + 1) * psi[1:-1])) < 1e-3

    def test_mehler_eigenrelation(self):
        theta, tau = 0.3, 0.4
        for x in (0.0, 0.7):
            out = mehler.apply_semigroup(theta, tau, lambda y: d.psi_n(theta, 0, y), [x])
            assert out.values[0] == pytest.approx(cmath.exp(-tau) * d.psi_n(theta, 0, x), abs=1e-10)


class TestFock:
    def test_theta_zero(self):
        mat = d.fock_matrix(d.FockSpec(0.0, 3)).entries
        assert np.array_equal(mat, np.diag([1.0, 3.0, 5.0]).astype(complex))

    def test_entry_against_quadrature(self):
        theta = 0.5
        mat = d.fock_matrix(d.FockSpec(theta, 5)).entries
        assert mat[2, 0] == pytest.approx(1j * math.sin(theta) * math.sqrt(2), abs=1e-15)
        # <Phi_2, H_theta Phi_0> with H Phi_0 computed from the differential operator
        x, w = d.gauss_hermite(80)
        phi = d.hermite_functions(3, x)
        # Phi_0'' = (x^2 - 1) Phi_0
        h_phi0 = -cmath.exp(-1j * theta) * (x * x - 1) * phi[0] + cmath.exp(1j * theta) * x * x * phi[0]
        assert np.sum(w * phi[2] * h_phi0) == pytest.approx(mat[2, 0], abs=1e-12)

    @pytest.mark.parametrize("theta", [-1.0, 0.2, 0.9])
    def test_complex_symmetric(self, theta):
        mat = d.fock_matrix(d.FockSpec(theta, 12)).entries
        assert np.array_equal(mat, mat.T)

    def test_theta_zero_spectrum_exact(self):
        vals = linalg.eigenvalues(d.fock_matrix(d.FockSpec(0.0, 50)))
        assert np.array_equal(vals, (2 * np.arange(50) + 1).astype(complex))

    def test_rotated_spectrum(self):
        vals = linalg.eigenvalues(d.fock_matrix(d.FockSpec(0.3, 400)))[:8]
        assert np.max(np.abs(vals - (2 * np.arange(8) + 1))) < 1e-6


class TestPotential:
    def test_x_squared(self):
        mat = d.potential_fock_matrix(d.PotentialSpec.custom(lambda x: x * x), 20).entries
        n = np.arange(20)
        ref = np.diag((2 * n + 1) / 2.0)
        ref[n[:-2], n[:-2] + 2] = np.sqrt((n[:-2] + 1) * (n[:-2] + 2)) / 2
        ref = ref + np.triu(ref, 1).T
        assert np.max(np.abs(mat - ref)) < 1e-10

    def test_constant(self):
        mat = d.potential_fock_matrix(d.PotentialSpec.custom(lambda x: np.ones_like(x)), 30).entries
        assert np.max(np.abs(mat - np.eye(30))) < 1e-12
        mat = d.potential_fock_matrix(d.PotentialSpec(alpha=0.0), 30).entries
        assert np.max(np.abs(mat - np.eye(30))) < 1e-12

    def test_abs_parity_and_symmetry(self):
        mat = d.potential_fock_matrix(d.PotentialSpec(alpha=1.0), 6).entries
        assert np.allclose(mat, mat.T, atol=1e-15) and np.allclose(mat, mat.conj().T, atol=1e-15)
        m, n = np.indices(mat.shape)
        assert np.all(mat[(m + n) % 2 == 1] == 0)
        # <Phi_0, |x| Phi_0> = 1/sqrt(pi)
        assert mat[0, 0].real == pytest.approx(1 / math.sqrt(math.pi), rel=1e-13)

    def test_split_rule_beats_hermite_for_kink(self):
        pot = d.PotentialSpec(alpha=1.0)
        split = d.potential_fock_matrix(pot, 40, rule="split").entries
        # brute-force reference on a fine trapezoid grid
        x = np.linspace(-25, 25, 200001)
        phi = d.hermite_functions(39, x)
        ref = (phi * (np.abs(x) * (x[1] - x[0]))) @ phi.T
        assert np.max(np.abs(split - ref)) < 1e-8

    def test_phased_power_complex_symmetric(self):
        mat = d.potential_fock_matrix(d.PotentialSpec("PhasedPower", alpha=0.5), 16).entries
        assert np.allclose(mat, mat.T, atol=1e-13)
        assert not np.allclose(mat, mat.conj().T)

    def test_quad_points_precondition(self):
        with pytest.raises(ValueError):
            d.potential_fock_matrix(d.PotentialSpec(), 10, quad_points=20)

    @settings(max_examples=40, deadline=None)
    @given(a=st.floats(0.1, 5), b=st.floats(-3, 3), alpha=st.floats(0, 1.99), x=st.floats(-50, 50))
    def test_potential_bound(self, a, b, alpha, x):
        for kind in ("PowerAbs", "PhasedPower"):
            pot = d.PotentialSpec(kind, a=a, b=b, alpha=alpha)
            assert abs(pot(x)) <= pot.bound(x) * (1 + 1e-12) + 1e-12


class TestGrid:
    @staticmethod
    def lowest(scheme, m, L=12.0, theta=0.0, pot=None):
        mat = d.grid_matrix(theta, pot, d.GridSpec(L, m, scheme))
        return linalg.eigenvalues(mat)[:8]

    def test_central2_accuracy_and_rate(self):
        exact = 2 * np.arange(8) + 1
        coarse = np.abs(self.lowest("Central2", 599) - exact)
        fine = np.abs(self.lowest("Central2", 1199) - exact)
        assert fine.max() < 5e-3
        rate = math.log2(coarse.max() / fine.max())
        assert rate == pytest.approx(2.0, abs=0.1)

    def test_central4_rate(self):
        exact = 2 * np.arange(8) + 1
        coarse = np.abs(self.lowest("Central4", 299) - exact)
        fine = np.abs(self.lowest("Central4", 599) - exact)
        rate = math.log2(coarse.max() / fine.max())
        assert rate == pytest.approx(4.0, abs=0.2)

    def test_constant_shift(self):
        base = self.lowest("Central2", 300, L=10.0, theta=0.4)
        shifted = self.lowest("Central2", 300, L=10.0, theta=0.4,
                              pot=d.PotentialSpec.custom(lambda x: np.full_like(x, 2.5)))
        assert np.max(np.abs(shifted - base - 2.5)) < 1e-9

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            d.GridSpec(-1.0, 10)
        with pytest.raises(ValueError):
            d.GridSpec(1.0, 2)
        grid = d.GridSpec(2.0, 3)
        assert np.allclose(grid.nodes, [-1, 0, 1])

    def test_half_width_heuristic(self):
        assert d.grid_half_width(8, 1.0, 1.0) == pytest.approx(1.5 * math.sqrt(17))
