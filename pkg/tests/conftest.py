import numpy as np
import pytest

from gramor.benchmark.heat import HeatBenchmarkSpec, generate_heat_system
from gramor.core.system_model import BilinearControlSystem, StochasticLinearSystem


def random_stable_system(seed, n, q, m=1, noise=0.5):
    """
    Système MS-asymptotiquement stable : μ₂(A) = −1 et Σ‖Nᵢ‖₂² = noise², d'où
    l'abscisse de K majorée par −2 + noise²
    """
    rng = np.random.default_rng(seed)
    S = rng.standard_normal((n, n))
    shift = np.max(np.linalg.eigvalsh(0.5 * (S + S.T))) + 1.0
    A = S - shift * np.eye(n)
    N = []
    for _ in range(q):
        M = rng.standard_normal((n, n))
        N.append(M * (noise / np.sqrt(q)) / np.linalg.norm(M, 2))
    B = rng.standard_normal((n, m))
    return StochasticLinearSystem(A, tuple(N), B)


def random_bilinear_system(seed, n, m, gamma, noise=0.5):
    """Système bilinéaire dont la version (A, N/γ, B/γ) vérifie la même marge"""
    base = random_stable_system(seed, n, m, m, noise)
    return BilinearControlSystem(base.A, tuple(gamma * Ni for Ni in base.N), gamma * base.B, gamma)


@pytest.fixture(autouse=True)
def isolated_env(monkeypatch, tmp_path):
    monkeypatch.setenv('GRAMOR_OUTPUT_DIR', str(tmp_path / 'runs'))
    monkeypatch.setenv('GRAMOR_THREADS', '2')
    monkeypatch.setenv('GRAMOR_VERBOSITY', '0')


@pytest.fixture
def two_state_system():
    """A = [[0, −10], [1, −10]], B = [0; 10], sans bruit : P = diag(50, 5)"""
    return StochasticLinearSystem(np.array([[0.0, -10.0], [1.0, -10.0]]), (), np.array([[0.0], [10.0]]))


@pytest.fixture
def nonunique_system():
    """A = [[−1, −1], [−1, −1]], B = [1; 1] : équation de Lyapunov singulière, gramien fini"""
    return StochasticLinearSystem(np.array([[-1.0, -1.0], [-1.0, -1.0]]), (), np.ones((2, 1)))


@pytest.fixture
def make_stable_system():
    return random_stable_system


@pytest.fixture
def make_bilinear_system():
    return random_bilinear_system


@pytest.fixture
def small_heat():
    return generate_heat_system(HeatBenchmarkSpec(k=4))


@pytest.fixture
def small_heat_bilinear():
    return generate_heat_system(HeatBenchmarkSpec(k=4, mode='bilinear', tieInputs=True))
