import numpy as np
import pytest
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from gramor.benchmark.heat import HeatBenchmarkSpec, generate_heat_system
from gramor.core.lyapunov import solve_mixed_sylvester
from gramor.core.reduction import galerkin_reduce, reachability_gramian, spectral_factorize
from gramor.core.system_model import (
    BilinearControlSystem,
    GalerkinRom,
    InputSignal,
    StochasticLinearSystem,
)
from gramor.exceptions import ArgumentError, StepSizeError
from gramor.simulation.rng import uniforms, sample_stream, wiener_block, wiener_increments
from gramor.simulation.simulate import (
    SimulationConfig,
    bilinear_simulate_paired,
    euler_maruyama_paired,
    mixed_gramian_ode_oracle,
    monte_carlo_second_moment,
    pairwise_sum,
)


def _identity_rom(sys):
    n = sys.n
    return GalerkinRom.from_projection(sys, np.eye(n), np.eye(n), 'OS')


def _small_config(**overrides):
    settings = dict(stepSize=1.0 / 64.0, horizon=0.5, samples=40, seed=3, threads=2, chunkSize=7)
    settings.update(overrides)
    return SimulationConfig(**settings)


class TestRandomStreams:
    def test_streams_are_reproducible(self):
        a = wiener_increments(7, 12, 10, 2, 0.01)
        b = wiener_increments(7, 12, 10, 2, 0.01)
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, wiener_increments(7, 13, 10, 2, 0.01))
        assert not np.array_equal(a, wiener_increments(8, 12, 10, 2, 0.01))

    def test_block_columns_are_individual_streams(self):
        block = wiener_block(5, 20, 4, 6, 3, 0.1)
        assert block.shape == (6, 3, 4)
        for j in range(4):
            np.testing.assert_array_equal(block[:, :, j], wiener_increments(5, 20 + j, 6, 3, 0.1))

    def test_uniforms_stay_inside_unit_interval(self):
        values = uniforms(sample_stream(0, 0), 10000)
        assert values.min() > 0.0 and values.max() < 1.0

    def test_increment_variance(self):
        dW = wiener_increments(1, 0, 20000, 1, 0.25)
        assert dW.mean() == pytest.approx(0.0, abs=0.02)
        assert dW.var() == pytest.approx(0.25, rel=0.05)

    def test_negative_seed(self):
        with pytest.raises(ValueError):
            sample_stream(-1, 0)


def test_pairwise_sum_keeps_order():
    assert pairwise_sum([1, 2, 3, 4, 5]) == 15
    with pytest.raises(ValueError):
        pairwise_sum([])


class TestSimulationConfig:
    def test_effective_step_divides_horizon(self):
        cfg = SimulationConfig(stepSize=0.3, horizon=1.0, samples=1)
        assert cfg.steps == 3
        assert cfg.effective_step == pytest.approx(1.0 / 3.0)
        assert cfg.time_grid()[-1] == 1.0

    def test_bilinear_defaults(self):
        cfg = SimulationConfig.for_bilinear(samples=1)
        assert cfg.horizon == 10.0 and cfg.rkRelTol == 1e-6 and cfg.rkAbsTol == 1e-9

    def test_invalid_step(self):
        with pytest.raises(ArgumentError):
            SimulationConfig(stepSize=0.0)


class TestEulerMaruyama:
    def test_identity_projection_has_zero_error(self, make_stable_system):
        sys = make_stable_system(60, 5, 2)
        u = InputSignal.from_registry('paper-default', 0.5)
        curve = euler_maruyama_paired(sys, _identity_rom(sys), u, _small_config())
        assert np.all(curve.meanError == 0.0)
        assert np.all(curve.stderr == 0.0)

    def test_zero_input_without_noise(self, make_stable_system):
        sys = make_stable_system(61, 5, 0)
        V = np.eye(5)[:, :2]
        rom = GalerkinRom.from_projection(sys, V, V, 'OS')
        curve = euler_maruyama_paired(sys, rom, InputSignal.from_registry('zero', 0.5), _small_config())
        assert np.all(curve.meanError == 0.0)

    def test_result_does_not_depend_on_threads(self, make_stable_system):
        sys = make_stable_system(62, 6, 2)
        P, _ = reachability_gramian(sys)
        rom = galerkin_reduce(sys, spectral_factorize(P), 2)
        u = InputSignal.from_registry('paper-default', 0.5)
        one = euler_maruyama_paired(sys, rom, u, _small_config(threads=1))
        many = euler_maruyama_paired(sys, rom, u, _small_config(threads=4))
        np.testing.assert_array_equal(one.meanError, many.meanError)
        np.testing.assert_array_equal(one.stderr, many.stderr)
        assert one.supValue == many.supValue > 0.0

    @pytest.mark.parametrize('threads', [2, 4])
    def test_benchmark_result_does_not_depend_on_threads(self, threads):
        sys = generate_heat_system(HeatBenchmarkSpec(k=6))
        P, _ = reachability_gramian(sys)
        rom = galerkin_reduce(sys, spectral_factorize(P), 5)
        u = InputSignal.from_registry('paper-default', 0.25)
        cfg = dict(stepSize=1.0 / 256.0, horizon=0.25, samples=3000, seed=11, chunkSize=250)
        one = euler_maruyama_paired(sys, rom, u, SimulationConfig(threads=1, **cfg))
        many = euler_maruyama_paired(sys, rom, u, SimulationConfig(threads=threads, **cfg))
        np.testing.assert_array_equal(one.meanError, many.meanError)
        np.testing.assert_array_equal(one.stderr, many.stderr)

    def test_singular_implicit_step(self):
        sys = StochasticLinearSystem(np.array([[64.0]]), (), np.ones((1, 1)))
        with pytest.raises(StepSizeError):
            euler_maruyama_paired(sys, _identity_rom(sys), InputSignal.from_registry('unit', 0.5),
                                  _small_config())

    def test_input_channels_must_match(self, make_stable_system):
        sys = make_stable_system(63, 4, 1)
        u = InputSignal.from_registry('unit', 0.5, channels=2)
        with pytest.raises(ArgumentError):
            euler_maruyama_paired(sys, _identity_rom(sys), u, _small_config())


class TestBilinearSimulation:
    def test_identity_projection(self, make_bilinear_system):
        sys = make_bilinear_system(64, 5, 2, gamma=1.0)
        u = InputSignal.from_registry('paper-default', 2.0, channels=2)
        cfg = SimulationConfig.for_bilinear(horizon=2.0, samples=1)
        curve = bilinear_simulate_paired(sys, _identity_rom(sys), u, cfg)
        assert curve.timeGrid.size == 1024
        # ż = Az + Σ uᵢNᵢz + Bu intégré seul donne l'échelle de ‖z‖
        A, N, B = np.asarray(sys.A), [np.asarray(Ni) for Ni in sys.N], np.asarray(sys.B)

        def rhs(t, z):
            v = u.evaluate(t)
            return A @ z + sum(v[i] * (N[i] @ z) for i in range(len(N))) + B @ v
        ref = solve_ivp(rhs, (0.0, 2.0), np.zeros(sys.n), rtol=cfg.rkRelTol, atol=cfg.rkAbsTol,
                        t_eval=curve.timeGrid)
        z_max = float(np.linalg.norm(ref.y, axis=0).max())
        assert curve.supValue <= 10.0 * cfg.rkRelTol * z_max

    def test_zero_input_stays_at_rest(self, make_bilinear_system):
        sys = make_bilinear_system(65, 4, 1, gamma=1.0)
        P, _ = reachability_gramian(BilinearControlSystem(sys.A, sys.N, sys.B))
        rom = galerkin_reduce(sys, spectral_factorize(P), 2)
        curve = bilinear_simulate_paired(sys, rom, InputSignal.from_registry('zero', 1.0),
                                         SimulationConfig.for_bilinear(horizon=1.0, samples=1))
        assert np.all(curve.meanError == 0.0)


class TestMatrixOdeOracle:
    def test_zero_horizon(self, make_stable_system):
        sys = make_stable_system(66, 4, 1)
        trajectory = mixed_gramian_ode_oracle(sys, sys, 0.0)
        np.testing.assert_array_equal(trajectory.final, sys.B @ sys.B.T)

    def test_deterministic_pair_matches_exponentials(self, make_stable_system):
        sys = make_stable_system(67, 8, 0)
        P, _ = reachability_gramian(sys)
        rom = galerkin_reduce(sys, spectral_factorize(P), 3)
        trajectory = mixed_gramian_ode_oracle(sys, rom, 1.0)
        expected = expm(sys.A) @ sys.B @ rom.reducedB.T @ expm(rom.reducedA.T)
        np.testing.assert_allclose(trajectory.final, expected, atol=1e-8 * np.abs(expected).max())

    def test_nonunique_lyapunov_case_has_finite_gramian(self, nonunique_system):
        trajectory = mixed_gramian_ode_oracle(nonunique_system, nonunique_system, 20.0)
        np.testing.assert_allclose(trajectory.integral, np.full((2, 2), 0.25), atol=1e-6)

    def test_integral_matches_mixed_sylvester(self, make_stable_system):
        sys = make_stable_system(68, 6, 2)
        P, _ = reachability_gramian(sys)
        rom = galerkin_reduce(sys, spectral_factorize(P), 3)
        P2 = solve_mixed_sylvester(sys.A, rom.reducedA, sys.N, rom.reducedN, sys.B @ rom.reducedB.T).X
        integral = mixed_gramian_ode_oracle(sys, rom, 15.0, steps=4096).integral
        assert np.linalg.norm(integral - P2) <= 1e-5 * np.linalg.norm(P2)

    def test_shifted_origin(self, make_stable_system):
        sys = make_stable_system(69, 5, 2)
        shifted = mixed_gramian_ode_oracle(sys, sys, 1.3, t0=0.3)
        plain = mixed_gramian_ode_oracle(sys, sys, 1.0)
        np.testing.assert_allclose(shifted.final, plain.final, atol=1e-8)


class TestSecondMoment:
    def test_initial_moment_is_exact(self, make_stable_system):
        sys = make_stable_system(70, 3, 1)
        estimate = monte_carlo_second_moment(sys, [0.0], _small_config())
        np.testing.assert_allclose(estimate.mean[0], sys.B @ sys.B.T)

    def test_moments_do_not_depend_on_threads(self, make_stable_system):
        sys = make_stable_system(72, 3, 1, noise=0.8)
        estimates = [
            monte_carlo_second_moment(sys, [0.25, 1.0], _small_config(
                stepSize=1.0 / 256.0, horizon=1.0, samples=16000, chunkSize=250, threads=threads))
            for threads in (1, 2, 4)
        ]
        for other in estimates[1:]:
            np.testing.assert_array_equal(other.mean, estimates[0].mean)
            np.testing.assert_array_equal(other.stderr, estimates[0].stderr)
        exact = mixed_gramian_ode_oracle(sys, sys, 0.25).final
        assert np.all(np.abs(estimates[0].mean[0] - exact) <= 5.0 * estimates[0].stderr[0] + 2e-2 * np.abs(exact).max())

    def test_agrees_with_matrix_ode(self, make_stable_system):
        sys = make_stable_system(71, 3, 1, noise=0.8)
        cfg = _small_config(stepSize=1.0 / 256.0, horizon=1.0, samples=4000, chunkSize=250)
        estimate = monte_carlo_second_moment(sys, [0.25, 0.5, 1.0], cfg)
        for k, t in enumerate((0.25, 0.5, 1.0)):
            exact = mixed_gramian_ode_oracle(sys, sys, t).final
            tolerance = 5.0 * estimate.stderr[k] + 2e-2 * np.abs(exact).max()
            assert np.all(np.abs(estimate.mean[k] - exact) <= tolerance), f"t={t}"
