"""
Types partagés : systèmes stochastiques et bilinéaires, signaux d'entrée, ROM de Galerkin
"""

from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

import numpy as np
from scipy.integrate import simpson

from gramor.console import print_info, print_warning
from gramor.exceptions import ArgumentError, InputEvaluationError, ValidationError


def _frozen(matrix):
    arr = np.array(matrix, dtype=float, copy=True)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    arr.setflags(write=False)
    return arr


def _frozen_sequence(matrices):
    return tuple(_frozen(m) for m in (matrices or ()))


@dataclass(frozen=True)
class StochasticLinearSystem:
    """dx = (Ax + Bu)dt + Σ Nᵢ x dWᵢ ; q = 0 donne un système linéaire déterministe"""
    A: np.ndarray
    N: Tuple[np.ndarray, ...]
    B: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'A', _frozen(self.A))
        object.__setattr__(self, 'N', _frozen_sequence(self.N))
        object.__setattr__(self, 'B', _frozen(self.B))

    kind = 'stochastic'

    @property
    def n(self):
        return int(self.A.shape[0])

    @property
    def m(self):
        return int(self.B.shape[1])

    @property
    def q(self):
        return len(self.N)


@dataclass(frozen=True)
class BilinearControlSystem:
    """ż = Az + Bu + Σ Nᵢ z uᵢ, avec le facteur d'échelle γ > 0"""
    A: np.ndarray
    N: Tuple[np.ndarray, ...]
    B: np.ndarray
    gamma: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, 'A', _frozen(self.A))
        object.__setattr__(self, 'N', _frozen_sequence(self.N))
        object.__setattr__(self, 'B', _frozen(self.B))
        object.__setattr__(self, 'gamma', float(self.gamma))

    kind = 'bilinear'

    @property
    def n(self):
        return int(self.A.shape[0])

    @property
    def m(self):
        return int(self.B.shape[1])

    @property
    def q(self):
        return len(self.N)

    def active_channels(self):
        """Canaux dont la matrice Nᵢ est non nulle (ceux qui forment u⁰)"""
        return [i for i, Ni in enumerate(self.N) if np.any(Ni != 0.0)]


def _finite_violations(name, matrix):
    bad = np.argwhere(~np.isfinite(matrix))
    return [f"{name}[{i}, {j}] = {matrix[i, j]!r} n'est pas fini" for i, j in bad]


def validate_system(sys) -> list:
    """Lister toutes les violations de dimensions et de finitude (liste vide = valide)"""
    violations = []
    A, B = sys.A, sys.B

    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        violations.append(f"A doit être carrée, forme reçue {A.shape}")
    n = A.shape[0]
    if n < 1:
        violations.append("n doit être ≥ 1")
    if B.ndim != 2 or B.shape[0] != n:
        violations.append(f"B doit avoir n={n} lignes, elle en a {B.shape[0]}")
    if B.ndim == 2 and B.shape[1] < 1:
        violations.append("m doit être ≥ 1")

    for i, Ni in enumerate(sys.N):
        if Ni.shape != (n, n):
            violations.append(f"N[{i}] doit être de forme ({n}, {n}), forme reçue {Ni.shape}")

    if isinstance(sys, BilinearControlSystem):
        if len(sys.N) != B.shape[1]:
            violations.append(
                f"le nombre de matrices N ({len(sys.N)}) doit égaler le nombre de colonnes de B ({B.shape[1]})"
            )
        if not np.isfinite(sys.gamma) or sys.gamma <= 0:
            violations.append(f"gamma doit être > 0, reçu {sys.gamma!r}")

    violations.extend(_finite_violations('A', A))
    violations.extend(_finite_violations('B', B))
    for i, Ni in enumerate(sys.N):
        violations.extend(_finite_violations(f'N[{i}]', Ni))
    return violations


def ensure_valid(sys):
    violations = validate_system(sys)
    if violations:
        raise ValidationError("système invalide: " + "; ".join(violations), violations)
    return sys


def tie_inputs(sys: BilinearControlSystem) -> BilinearControlSystem:
    """Relier tous les canaux à un même signal u : B·1 et Σ Nᵢ, un seul canal"""
    ensure_valid(sys)
    B_tied = sys.B.sum(axis=1, keepdims=True)
    N_tied = sum((np.asarray(Ni) for Ni in sys.N), np.zeros_like(sys.A))
    return BilinearControlSystem(sys.A, (N_tied,), B_tied, sys.gamma)


def scaled_stochastic(sys: BilinearControlSystem, gamma=None) -> StochasticLinearSystem:
    """Système stochastique associé (A, N/γ, B/γ)"""
    g = float(sys.gamma if gamma is None else gamma)
    return StochasticLinearSystem(sys.A, tuple(Ni / g for Ni in sys.N), sys.B / g)


# ============================================
# Signaux d'entrée
# ============================================

def _damped_sine(t):
    return np.exp(-0.5 * t) * np.sin(10.0 * t)


def _gaussian_pulse(t):
    return np.exp(-((t - 0.25) / 0.05) ** 2)


SIGNAL_REGISTRY = {
    'paper-default': _damped_sine,
    'zero': lambda t: np.zeros_like(t),
    'unit': lambda t: np.ones_like(t),
    'gaussian-pulse': _gaussian_pulse,
}


@dataclass(frozen=True)
class InputSignal:
    """Signal déterministe sur [0, T] : forme close du registre ou table linéaire par morceaux"""
    horizon: float
    name: Optional[str] = None
    times: Optional[np.ndarray] = None
    values: Optional[np.ndarray] = None
    channels: int = 1
    scale: float = 1.0
    function: Optional[Callable] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if not np.isfinite(self.horizon) or self.horizon <= 0:
            raise ArgumentError(f"l'horizon T doit être > 0, reçu {self.horizon!r}")
        if self.times is not None:
            times = _frozen(self.times).ravel()
            values = np.array(self.values, dtype=float)
            if values.ndim == 1:
                values = values.reshape(-1, 1)
            if values.shape[0] != times.size:
                raise ValidationError("la table doit avoir autant de valeurs que d'instants")
            if np.any(np.diff(times) <= 0):
                raise ValidationError("les instants de la table doivent être strictement croissants")
            if times[0] > 0.0 or times[-1] < self.horizon:
                raise ValidationError(f"la table doit couvrir [0, {self.horizon}]")
            values.setflags(write=False)
            object.__setattr__(self, 'times', times)
            object.__setattr__(self, 'values', values)
            object.__setattr__(self, 'channels', int(values.shape[1]))
        elif self.function is None:
            if self.name not in SIGNAL_REGISTRY:
                raise ArgumentError(
                    f"signal inconnu {self.name!r}, choix: {', '.join(sorted(SIGNAL_REGISTRY))}"
                )
            object.__setattr__(self, 'function', SIGNAL_REGISTRY[self.name])

    @classmethod
    def from_registry(cls, name, horizon, channels=1):
        return cls(horizon=float(horizon), name=name, channels=int(channels))

    @classmethod
    def from_table(cls, times, values, horizon=None, name='table'):
        times = np.asarray(times, dtype=float)
        return cls(horizon=float(times[-1] if horizon is None else horizon), name=name,
                   times=times, values=values)

    def scaled(self, factor):
        return InputSignal(self.horizon, self.name, self.times, self.values, self.channels,
                           self.scale * float(factor), self.function)

    def with_horizon(self, horizon):
        return InputSignal(float(horizon), self.name, self.times, self.values, self.channels,
                           self.scale, self.function)

    def evaluate_grid(self, t):
        """Valeurs sur une grille : tableau (len(t), canaux)"""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if self.times is not None:
            out = np.column_stack([np.interp(t, self.times, self.values[:, j])
                                   for j in range(self.channels)])
        else:
            raw = np.asarray(self.function(t), dtype=float)
            if raw.ndim == 1:
                raw = np.repeat(raw.reshape(-1, 1), self.channels, axis=1)
            out = raw
        out = self.scale * out
        bad = ~np.isfinite(out)
        if np.any(bad):
            k = int(np.argwhere(bad)[0][0])
            raise InputEvaluationError(float(t[k]), out[k].tolist())
        return out

    def evaluate(self, t):
        """Valeur en un instant : vecteur (canaux,)"""
        return self.evaluate_grid([t])[0]


def input_l2_norm(u: InputSignal, min_points=4097, rtol=1e-8, max_points=2 ** 22 + 1) -> float:
    """Norme L² de u sur [0, T] par Simpson composite raffiné jusqu'à stabilisation"""
    points = max(int(min_points), 5)
    if points % 2 == 0:
        points += 1
    previous = None
    integral = 0.0
    while True:
        grid = np.linspace(0.0, u.horizon, points)
        squared = np.sum(u.evaluate_grid(grid) ** 2, axis=1)
        integral = float(simpson(squared, dx=u.horizon / (points - 1)))
        if previous is not None and abs(integral - previous) <= rtol * abs(integral):
            break
        if points * 2 - 1 > max_points:
            print_warning(f"quadrature L² non stabilisée à {points} points, valeur retenue {integral:.6e}")
            break
        previous = integral
        points = points * 2 - 1
    print_info(f"‖u‖² = {integral:.12e} ({points} points)")
    return float(np.sqrt(max(integral, 0.0)))


def active_input_signal(u: InputSignal, sys: BilinearControlSystem) -> InputSignal:
    """u⁰ : canaux de u conservés seulement là où Nᵢ ≠ 0"""
    mask = np.zeros(u.channels)
    for i in sys.active_channels():
        if i < u.channels:
            mask[i] = 1.0
    base = u

    def masked(t):
        return base.evaluate_grid(t) * mask

    return InputSignal(u.horizon, name=f"{u.name or 'u'}⁰", channels=u.channels, function=masked)


# ============================================
# Modèles réduits
# ============================================

@dataclass(frozen=True)
class GalerkinRom:
    """ROM obtenu par projection (W, V) : Â = WᵀAV, N̂ᵢ = WᵀNᵢV, B̂ = WᵀB"""
    V: np.ndarray
    W: np.ndarray
    reducedA: np.ndarray
    reducedN: Tuple[np.ndarray, ...]
    reducedB: np.ndarray
    method: str
    sourceDim: int
    kind: str = 'stochastic'
    gamma: float = 1.0
    parent: object = field(default=None, compare=False, repr=False)
    parent_hash: Optional[str] = None

    def __post_init__(self):
        for name in ('V', 'W', 'reducedA', 'reducedB'):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        object.__setattr__(self, 'reducedN', _frozen_sequence(self.reducedN))

    @property
    def r(self):
        return int(self.V.shape[1])

    @property
    def m(self):
        return int(self.reducedB.shape[1])

    @property
    def q(self):
        return len(self.reducedN)

    @classmethod
    def from_projection(cls, sys, V, W, method, parent_hash=None):
        """Projeter sys sur (W, V) et vérifier les invariants de projection"""
        V = np.asarray(V, dtype=float)
        W = np.asarray(W, dtype=float)
        r = V.shape[1]
        if method == 'OS':
            gap = np.linalg.norm(V.T @ V - np.eye(r))
            if gap > 1e-12 * max(1.0, np.sqrt(r)):
                raise ValidationError(f"base OS non orthonormale (‖VᵀV − I‖ = {gap:.2e})")
        elif method == 'BT':
            gap = np.linalg.norm(W.T @ V - np.eye(r))
            if gap > 1e-10:
                raise ValidationError(f"projecteur BT non biorthogonal (‖WᵀV − I‖ = {gap:.2e})")
        else:
            raise ArgumentError(f"méthode inconnue {method!r}")
        gamma = getattr(sys, 'gamma', 1.0)
        return cls(
            V=V, W=W,
            reducedA=W.T @ sys.A @ V,
            reducedN=tuple(W.T @ Ni @ V for Ni in sys.N),
            reducedB=W.T @ sys.B,
            method=method,
            sourceDim=sys.n,
            kind=sys.kind,
            gamma=gamma,
            parent=sys,
            parent_hash=parent_hash,
        )

    def as_stochastic(self):
        """Triplet réduit (Â, N̂, B̂) vu comme système stochastique"""
        return StochasticLinearSystem(self.reducedA, self.reducedN, self.reducedB)

    def as_bilinear(self):
        return BilinearControlSystem(self.reducedA, self.reducedN, self.reducedB, self.gamma)

    def projection_residuals(self, sys):
        """Écarts ‖Â − WᵀAV‖, ‖N̂ᵢ − WᵀNᵢV‖, ‖B̂ − WᵀB‖ (normes de Frobenius)"""
        W, V = self.W, self.V
        return {
            'A': float(np.linalg.norm(self.reducedA - W.T @ sys.A @ V)),
            'N': [float(np.linalg.norm(Nh - W.T @ Ni @ V)) for Nh, Ni in zip(self.reducedN, sys.N)],
            'B': float(np.linalg.norm(self.reducedB - W.T @ sys.B)),
        }
