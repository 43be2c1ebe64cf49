import numpy as np
import pytest

from gramor.core import reduction
from gramor.core.lyapunov import LyapunovSolution, residual_generalized
from gramor.core.reduction import (
    balanced_truncation_reduce,
    bilinear_gramian,
    energy_bounds,
    galerkin_reduce,
    hankel_singular_values,
    observability_gramian,
    reachability_gramian,
    reduced_gramian,
    reduced_gramian_with_report,
    spectral_factorize,
)
from gramor.core.stability import spectral_abscissa
from gramor.core.system_model import InputSignal, StochasticLinearSystem, scaled_stochastic
from gramor.exceptions import ArgumentError, NonPSDError, StabilityError


def test_two_state_gramian(two_state_system):
    P, solution = reachability_gramian(two_state_system)
    np.testing.assert_allclose(P, np.diag([50.0, 5.0]), atol=1e-10)
    assert solution.method == 'direct-kron'
    assert solution.clipped == 0.0
    assert solution.minEigenvalue == pytest.approx(5.0)


def test_negative_gramian_eigenvalues_are_clipped(two_state_system, monkeypatch):
    raw = np.diag([2.0, -1e-13])
    monkeypatch.setattr(reduction, 'solve_generalized_lyapunov',
                        lambda *args: LyapunovSolution(raw, 0.0, 'direct-kron'))
    P, report = reachability_gramian(two_state_system, check='none')
    np.testing.assert_allclose(P, np.diag([2.0, 0.0]), atol=1e-15)
    assert report.clipped == pytest.approx(1e-13)
    assert report.minEigenvalue == pytest.approx(-1e-13)
    np.testing.assert_array_equal(report.solution.X, raw)


def test_unstable_system_has_no_gramian():
    sys = StochasticLinearSystem(np.array([[1.0]]), (), np.ones((1, 1)))
    with pytest.raises(StabilityError):
        reachability_gramian(sys)


def test_witness_check_for_large_systems(make_stable_system):
    sys = make_stable_system(20, 6, 1)
    P, _ = reachability_gramian(sys, check='witness')
    P_ref, _ = reachability_gramian(sys, check='spectral')
    np.testing.assert_allclose(P, P_ref)


def test_unknown_stability_check(two_state_system):
    with pytest.raises(ArgumentError):
        reachability_gramian(two_state_system, check='maybe')


def test_observability_gramian_residual(two_state_system):
    Q = observability_gramian(two_state_system)
    assert residual_generalized(two_state_system.A.T, (), np.eye(2), Q) <= 1e-10


class TestSpectralFactorize:
    def test_eigenpairs_of_rank_one_gramian(self):
        spectrum = spectral_factorize(np.full((2, 2), 0.25))
        np.testing.assert_allclose(spectrum.eigenvalues, [0.5, 0.0], atol=1e-15)
        np.testing.assert_allclose(np.abs(spectrum.basis[:, 0]), np.ones(2) / np.sqrt(2.0))
        np.testing.assert_allclose(spectrum.reconstruct(), np.full((2, 2), 0.25), atol=1e-15)

    def test_eigenvalues_decrease(self, make_stable_system):
        sys = make_stable_system(21, 10, 2)
        P, _ = reachability_gramian(sys)
        spectrum = spectral_factorize(P)
        assert np.all(np.diff(spectrum.eigenvalues) <= 0.0)
        assert spectrum.leading(3).size == 3 and spectrum.tail(3).size == 7

    def test_indefinite_matrix_is_rejected(self):
        with pytest.raises(NonPSDError) as err:
            spectral_factorize(np.diag([1.0, -1.0]))
        assert err.value.min_eigenvalue == pytest.approx(-1.0)


class TestGalerkin:
    def test_two_state_rom_is_uncontrolled(self, two_state_system):
        P, _ = reachability_gramian(two_state_system)
        rom = galerkin_reduce(two_state_system, spectral_factorize(P), 1)
        np.testing.assert_allclose(rom.reducedA, [[0.0]], atol=1e-12)
        np.testing.assert_allclose(rom.reducedB, [[0.0]], atol=1e-12)
        np.testing.assert_array_equal(reduced_gramian(rom), np.zeros((1, 1)))
        _, report = reduced_gramian_with_report(rom)
        assert report.verdict == 'marginally-stable'

    def test_order_out_of_range(self, two_state_system):
        P, _ = reachability_gramian(two_state_system)
        for r in (0, 3):
            with pytest.raises(ArgumentError):
                galerkin_reduce(two_state_system, spectral_factorize(P), r)

    def test_full_order_reproduces_gramian_eigenvalues(self, make_stable_system):
        sys = make_stable_system(22, 6, 2)
        P, _ = reachability_gramian(sys)
        spectrum = spectral_factorize(P)
        rom = galerkin_reduce(sys, spectrum, 6)
        np.testing.assert_allclose(reduced_gramian(rom), np.diag(spectrum.eigenvalues),
                                   atol=1e-9 * spectrum.eigenvalues[0])

    def test_trace_inequality(self, make_stable_system):
        for seed in range(10):
            sys = make_stable_system(30 + seed, 8, 2)
            P, _ = reachability_gramian(sys)
            spectrum = spectral_factorize(P)
            for r in (1, 4, 7):
                rom = galerkin_reduce(sys, spectrum, r)
                trace = np.trace(reduced_gramian(rom))
                assert trace <= spectrum.leading(r).sum() * (1.0 + 1e-9)


class TestBalancedTruncation:
    def test_biorthogonal_projection(self, make_stable_system):
        sys = make_stable_system(23, 8, 1)
        P, _ = reachability_gramian(sys)
        Q = observability_gramian(sys)
        rom = balanced_truncation_reduce(sys, P, Q, 3)
        np.testing.assert_allclose(rom.W.T @ rom.V, np.eye(3), atol=1e-10)
        assert rom.method == 'BT'

    def test_balanced_gramians_are_diagonal(self, make_stable_system):
        sys = make_stable_system(24, 6, 1, m=3)
        P, _ = reachability_gramian(sys)
        Q = observability_gramian(sys)
        rom = balanced_truncation_reduce(sys, P, Q, 6)
        sigma = hankel_singular_values(P, Q)
        np.testing.assert_allclose(rom.W.T @ P @ rom.W, np.diag(sigma), atol=1e-8 * sigma[0])
        np.testing.assert_allclose(rom.V.T @ Q @ rom.V, np.diag(sigma), atol=1e-8 * sigma[0])

    def test_hankel_values_decrease(self, make_stable_system):
        sys = make_stable_system(25, 7, 2)
        P, _ = reachability_gramian(sys)
        sigma = hankel_singular_values(P, observability_gramian(sys))
        assert np.all(np.diff(sigma) <= 0.0) and sigma[-1] >= 0.0

    def test_order_above_rank(self, make_stable_system):
        sys = make_stable_system(26, 4, 1)
        P, _ = reachability_gramian(sys)
        with pytest.raises(ArgumentError):
            balanced_truncation_reduce(sys, P, observability_gramian(sys), 5)


def test_bilinear_gramian_uses_scaled_system(make_bilinear_system):
    sys = make_bilinear_system(27, 5, 2, gamma=2.0)
    P, _ = reachability_gramian(scaled_stochastic(sys))
    np.testing.assert_allclose(bilinear_gramian(sys), P)


def test_energy_bounds(make_stable_system):
    sys = make_stable_system(28, 4, 1)
    P, _ = reachability_gramian(sys)
    spectrum = spectral_factorize(P)
    u = InputSignal.from_registry('unit', 4.0)
    np.testing.assert_allclose(energy_bounds(spectrum, u), 2.0 * np.sqrt(spectrum.eigenvalues), rtol=1e-9)
    scaled = energy_bounds(spectrum, u, gamma=2.0, u0_norm=1.0)
    np.testing.assert_allclose(scaled, np.sqrt(spectrum.eigenvalues) * np.exp(2.0) * 4.0, rtol=1e-9)


def test_os_rom_with_positive_gramian_block_is_never_unstable(make_stable_system):
    for seed in range(20):
        rng = np.random.default_rng(400 + seed)
        n, q = int(rng.integers(3, 13)), int(rng.integers(0, 3))
        sys = make_stable_system(seed, n, q)
        P, _ = reachability_gramian(sys)
        spectrum = spectral_factorize(P)
        lam = spectrum.eigenvalues
        for r in range(1, n + 1):
            if lam[r - 1] <= 1e-12 * lam[0]:
                break
            rom = galerkin_reduce(sys, spectrum, r)
            report = spectral_abscissa(rom.reducedA, list(rom.reducedN))
            assert report.verdict != 'unstable', f"graine {seed}, n={n}, r={r}"
