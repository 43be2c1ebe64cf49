"""
Simulations de validation : Euler–Maruyama apparié, Runge–Kutta 4(5) bilinéaire,
oracle EDO matriciel du gramien mixte
"""

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from joblib import Parallel, delayed
from scipy import linalg
from scipy.integrate import solve_ivp

from gramor.config import get_settings
from gramor.console import print_info, print_step, print_success
from gramor.core.system_model import BilinearControlSystem, GalerkinRom, InputSignal, scaled_stochastic
from gramor.exceptions import ArgumentError, StepSizeError, StiffnessError
from gramor.simulation.rng import wiener_block

DENSE_GRID_POINTS = 1024


@dataclass(frozen=True)
class SimulationConfig:
    stepSize: float = 1.0 / 256.0
    horizon: float = 1.0
    samples: int = 100_000
    seed: int = field(default_factory=lambda: get_settings().seed)
    rkRelTol: float = 1e-6
    rkAbsTol: float = 1e-9
    threads: int = field(default_factory=lambda: get_settings().threads)
    chunkSize: int = field(default_factory=lambda: get_settings().chunk_size)

    def __post_init__(self):
        if not self.stepSize > 0 or not self.horizon > 0:
            raise ArgumentError(f"h et T doivent être > 0 (h={self.stepSize}, T={self.horizon})")
        if self.samples < 1 or self.chunkSize < 1:
            raise ArgumentError("le nombre d'échantillons et la taille de lot doivent être ≥ 1")

    @classmethod
    def for_bilinear(cls, **overrides):
        overrides.setdefault('horizon', 10.0)
        return cls(**overrides)

    @property
    def steps(self):
        return max(1, int(round(self.horizon / self.stepSize)))

    @property
    def effective_step(self):
        return self.horizon / self.steps

    def time_grid(self):
        return np.linspace(0.0, self.horizon, self.steps + 1)


@dataclass(frozen=True)
class MeanErrorCurve:
    timeGrid: np.ndarray
    meanError: np.ndarray
    stderr: np.ndarray
    samples: int = 0
    effectiveStep: float = float('nan')

    @property
    def supValue(self):
        return float(np.max(self.meanError))

    @property
    def supStderr(self):
        return float(self.stderr[int(np.argmax(self.meanError))])

    def rows(self):
        return [{'t': t, 'meanError': e, 'stderr': s}
                for t, e, s in zip(self.timeGrid, self.meanError, self.stderr)]


@dataclass(frozen=True)
class MixedGramianTrajectory:
    """X(T) de l'EDO matricielle et ∫_{t0}^{T} X dt (Simpson composite sur la grille RK4)"""
    start: float
    horizon: float
    final: np.ndarray
    integral: np.ndarray
    steps: int


@dataclass(frozen=True)
class SecondMomentEstimate:
    times: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    samples: int


def pairwise_sum(parts):
    """Somme en arbre binaire, dans l'ordre de la liste"""
    parts = list(parts)
    if not parts:
        raise ValueError("aucune contribution à réduire")
    while len(parts) > 1:
        merged = [parts[i] + parts[i + 1] for i in range(0, len(parts) - 1, 2)]
        if len(parts) % 2:
            merged.append(parts[-1])
        parts = merged
    return parts[0]


def _chunks(samples, chunk_size):
    return [(start, min(chunk_size, samples - start)) for start in range(0, samples, chunk_size)]


def _implicit_factor(A, h, label):
    M = np.eye(A.shape[0]) - h * np.asarray(A)
    lu, piv = linalg.lu_factor(M, check_finite=False)
    smallest = float(np.min(np.abs(np.diag(lu))))
    if smallest <= 1e-14 * max(np.linalg.norm(M), 1.0):
        raise StepSizeError(f"(I − hA) singulière pour {label} avec h={h:.3e} : réduire le pas")
    return lu, piv


def _private_factor(factor):
    """Copie propre à un lot : les threads ne partagent jamais les tableaux LAPACK"""
    lu, piv = factor
    return lu.copy(), piv.copy()


def _check_pairing(sys, rom):
    if rom.sourceDim != sys.n:
        raise ArgumentError(f"ROM construit pour n={rom.sourceDim}, système de dimension {sys.n}")
    if rom.q != sys.q or rom.m != sys.m:
        raise ArgumentError("le système et le ROM doivent partager q et m")


def _input_grid(u, sys, cfg):
    if u.channels != sys.m:
        raise ArgumentError(f"le signal a {u.channels} canaux, le système en attend m={sys.m}")
    if u.times is not None and u.horizon < cfg.horizon:
        raise ArgumentError(f"la table d'entrée s'arrête à {u.horizon} < T={cfg.horizon}")
    return u.evaluate_grid(cfg.time_grid())


def _em_chunk(model, start, count, cfg, drive):
    """Sommes par instant de ‖x_k − V x̂_k‖ et de leurs carrés sur un lot"""
    A_lu, Ahat_lu, N, Nhat, V = model
    A_lu, Ahat_lu = _private_factor(A_lu), _private_factor(Ahat_lu)
    h = cfg.effective_step
    steps = cfg.steps
    dW = wiener_block(cfg.seed, start, count, steps, len(N), h)

    n, r = V.shape
    x = np.zeros((n, count))
    xh = np.zeros((r, count))
    total = np.zeros(steps + 1)
    squares = np.zeros(steps + 1)
    for k in range(steps):
        rhs = x + drive[0][:, k:k + 1]
        rhs_h = xh + drive[1][:, k:k + 1]
        for i in range(len(N)):
            rhs = rhs + (N[i] @ x) * dW[k, i]
            rhs_h = rhs_h + (Nhat[i] @ xh) * dW[k, i]
        x = linalg.lu_solve(A_lu, rhs, check_finite=False)
        xh = linalg.lu_solve(Ahat_lu, rhs_h, check_finite=False)
        err = np.linalg.norm(x - V @ xh, axis=0)
        total[k + 1] = err.sum()
        squares[k + 1] = (err ** 2).sum()
    return np.stack([total, squares])


def euler_maruyama_paired(sys, rom: GalerkinRom, u: InputSignal,
                          cfg: Optional[SimulationConfig] = None) -> MeanErrorCurve:
    """
    Euler–Maruyama semi-implicite (dérive implicite, diffusion explicite) sur le système
    complet et le ROM avec les mêmes incréments browniens ; x₀ = 0, x̂₀ = 0
    """
    cfg = cfg or SimulationConfig()
    _check_pairing(sys, rom)
    h = cfg.effective_step
    values = _input_grid(u, sys, cfg)[:-1].T
    drive = (h * np.asarray(sys.B) @ values, h * np.asarray(rom.reducedB) @ values)
    model = (
        _implicit_factor(sys.A, h, "le système complet"),
        _implicit_factor(rom.reducedA, h, "le ROM"),
        [np.asarray(Ni) for Ni in sys.N],
        [np.asarray(Ni) for Ni in rom.reducedN],
        np.asarray(rom.V),
    )

    chunks = _chunks(cfg.samples, cfg.chunkSize)
    print_step(f"Euler–Maruyama : {cfg.samples} trajectoires, {cfg.steps} pas, "
               f"{len(chunks)} lots, {cfg.threads} threads")
    started = time.time()
    parts = Parallel(n_jobs=cfg.threads, backend='threading')(
        delayed(_em_chunk)(model, start, count, cfg, drive) for start, count in chunks
    )
    total, squares = pairwise_sum(parts)

    M = cfg.samples
    mean = total / M
    if M > 1:
        variance = np.maximum(squares - M * mean ** 2, 0.0) / (M - 1)
        stderr = np.sqrt(variance / M)
    else:
        stderr = np.zeros_like(mean)
    curve = MeanErrorCurve(cfg.time_grid(), mean, stderr, M, h)
    print_success(f"erreur moyenne max {curve.supValue:.6e} ± {curve.supStderr:.2e} "
                  f"({time.time() - started:.1f}s)")
    return curve


def _bilinear_rhs(A, N, B, u):
    def rhs(t, z):
        ut = u.evaluate(t)
        dz = A @ z + B @ ut
        for i, Ni in enumerate(N):
            dz = dz + ut[i] * (Ni @ z)
        return dz
    return rhs


def bilinear_simulate_paired(sys: BilinearControlSystem, rom: GalerkinRom, u: InputSignal,
                             cfg: Optional[SimulationConfig] = None) -> MeanErrorCurve:
    """‖z(t) − V ẑ(t)‖₂ sur une grille uniforme de 1024 points, RK45 à pas adaptatif"""
    cfg = cfg or SimulationConfig.for_bilinear()
    _check_pairing(sys, rom)
    if u.channels != sys.m:
        raise ArgumentError(f"le signal a {u.channels} canaux, le système en attend m={sys.m}")

    n, r = rom.V.shape
    full = _bilinear_rhs(np.asarray(sys.A), [np.asarray(Ni) for Ni in sys.N], np.asarray(sys.B), u)
    reduced = _bilinear_rhs(rom.reducedA, list(rom.reducedN), rom.reducedB, u)

    def rhs(t, y):
        return np.concatenate([full(t, y[:n]), reduced(t, y[n:])])

    grid = np.linspace(0.0, cfg.horizon, DENSE_GRID_POINTS)
    print_step(f"RK45 bilinéaire sur [0, {cfg.horizon}] (n={n}, r={r})")
    solution = solve_ivp(rhs, (0.0, cfg.horizon), np.zeros(n + r), method='RK45',
                         t_eval=grid, rtol=cfg.rkRelTol, atol=cfg.rkAbsTol)
    if solution.status == -1:
        raise StiffnessError(f"intégration interrompue : {solution.message}")

    z, zh = solution.y[:n], solution.y[n:]
    error = np.linalg.norm(z - rom.V @ zh, axis=0)
    print_info(f"{solution.nfev} évaluations du second membre, erreur max {error.max():.6e}")
    return MeanErrorCurve(solution.t, error, np.zeros_like(error), 1, float('nan'))


def _stochastic_matrices(obj):
    if isinstance(obj, GalerkinRom):
        if obj.kind == 'bilinear':
            g = obj.gamma
            return obj.reducedA, [Ni / g for Ni in obj.reducedN], obj.reducedB / g
        return obj.reducedA, list(obj.reducedN), obj.reducedB
    if isinstance(obj, BilinearControlSystem):
        obj = scaled_stochastic(obj)
    return np.asarray(obj.A), [np.asarray(Ni) for Ni in obj.N], np.asarray(obj.B)


def mixed_gramian_ode_oracle(sys, rom, T, t0=0.0, steps=2048) -> MixedGramianTrajectory:
    """
    RK4 classique sur Ẋ = AX + XÂᵀ + ΣNᵢXN̂ᵢᵀ, X(t0) = BB̂ᵀ, pas (T − t0)/steps ;
    steps est arrondi au pair supérieur pour la quadrature de Simpson
    """
    A, N, B = _stochastic_matrices(sys)
    Ahat, Nhat, Bhat = _stochastic_matrices(rom)
    if len(N) != len(Nhat):
        raise ArgumentError(f"{len(N)} matrices Nᵢ pour {len(Nhat)} matrices N̂ᵢ")
    span = float(T) - float(t0)
    X = B @ Bhat.T
    if span <= 0.0:
        return MixedGramianTrajectory(float(t0), float(T), X, np.zeros_like(X), 0)

    def F(X):
        out = A @ X + X @ Ahat.T
        for Ni, Nh in zip(N, Nhat):
            out = out + Ni @ X @ Nh.T
        return out

    steps = int(steps) + int(steps) % 2
    dt = span / steps
    integral = X.copy()
    for k in range(steps):
        k1 = F(X)
        k2 = F(X + 0.5 * dt * k1)
        k3 = F(X + 0.5 * dt * k2)
        k4 = F(X + dt * k3)
        X = X + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        integral = integral + (1.0 if k == steps - 1 else (4.0 if k % 2 == 0 else 2.0)) * X
    return MixedGramianTrajectory(float(t0), float(T), X, (dt / 3.0) * integral, steps)


def _moment_chunk(model, start, count, cfg, indices):
    A_lu, N, B = model
    A_lu = _private_factor(A_lu)
    n, m = B.shape
    h = cfg.effective_step
    dW = wiener_block(cfg.seed, start, count, cfg.steps, len(N), h)
    X = np.repeat(B[:, :, None], count, axis=2)
    sums = np.zeros((len(indices), n, n))
    squares = np.zeros((len(indices), n, n))
    slot = {k: j for j, k in enumerate(indices)}

    def record(k, X):
        if k in slot:
            outer = np.einsum('ims,jms->ijs', X, X)
            sums[slot[k]] = outer.sum(axis=2)
            squares[slot[k]] = (outer ** 2).sum(axis=2)

    record(0, X)
    for k in range(cfg.steps):
        rhs = X.copy()
        for i, Ni in enumerate(N):
            rhs += np.einsum('ij,jms->ims', Ni, X) * dW[k, i][None, None, :]
        X = linalg.lu_solve(A_lu, rhs.reshape(n, -1), check_finite=False).reshape(n, m, count)
        record(k + 1, X)
    return np.stack([sums, squares])


def monte_carlo_second_moment(sys, t_values, cfg: Optional[SimulationConfig] = None) -> SecondMomentEstimate:
    """Estimation Monte Carlo de E[Φ(t)BBᵀΦᵀ(t)] avec erreurs standard entrée par entrée"""
    cfg = cfg or SimulationConfig()
    A, N, B = _stochastic_matrices(sys)
    h = cfg.effective_step
    t_values = np.atleast_1d(np.asarray(t_values, dtype=float))
    indices = [int(round(t / h)) for t in t_values]
    if min(indices) < 0 or max(indices) > cfg.steps:
        raise ArgumentError(f"instants hors de [0, {cfg.horizon}]")
    model = (_implicit_factor(A, h, "le système"), N, B)

    chunks = _chunks(cfg.samples, cfg.chunkSize)
    parts = Parallel(n_jobs=cfg.threads, backend='threading')(
        delayed(_moment_chunk)(model, start, count, cfg, indices) for start, count in chunks
    )
    sums, squares = pairwise_sum(parts)
    M = cfg.samples
    mean = sums / M
    variance = np.maximum(squares - M * mean ** 2, 0.0) / max(M - 1, 1)
    return SecondMomentEstimate(np.array(indices) * h, mean, np.sqrt(variance / M), M)
