"""
Équations de Lyapunov standard, généralisées et de Sylvester mixtes
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import linalg
from scipy.linalg import lapack

from gramor.config import get_settings
from gramor.console import print_info
from gramor.exceptions import (
    ArgumentError,
    IterationDivergenceError,
    SingularPencilError,
)

METHODS = ('auto', 'direct-kron', 'splitting-iteration')


@dataclass(frozen=True)
class LyapunovSolution:
    X: np.ndarray
    residualNorm: float
    method: str
    iterations: int = 0


@dataclass(frozen=True)
class SolverOptions:
    method: str = 'auto'
    kronCutoff: int = field(default_factory=lambda: get_settings().kron_cutoff)
    maxIter: int = field(default_factory=lambda: get_settings().max_iter)
    stepTol: float = 1e-12

    def __post_init__(self):
        if self.method not in METHODS:
            raise ArgumentError(f"méthode de résolution inconnue {self.method!r}, choix: {METHODS}")

    def resolve(self, unknowns):
        """Choisir la stratégie d'après le nombre d'inconnues (n² ou n·r) ; à n = kronCutoff on part sur le splitting"""
        limit = self.kronCutoff ** 2
        if self.method == 'auto':
            return 'direct-kron' if unknowns < limit else 'splitting-iteration'
        if self.method == 'direct-kron' and unknowns > limit:
            raise ArgumentError(
                f"résolution directe demandée pour {unknowns} inconnues > kronCutoff²={limit}"
            )
        return self.method


def _symmetrize(X):
    return 0.5 * (X + X.T)


def _as_list(N):
    return [np.asarray(Ni, dtype=float) for Ni in (N or ())]


class SchurSylvesterSolver:
    """Bartels–Stewart pour A X + X Bᵀ = −C, formes de Schur réelles calculées une fois"""

    def __init__(self, A, B=None, pivot_rtol=1e-13):
        self.A = np.asarray(A, dtype=float)
        self.B = self.A if B is None else np.asarray(B, dtype=float)
        self.TA, self.UA = linalg.schur(self.A, output='real')
        if B is None:
            self.TB, self.UB = self.TA, self.UA
        else:
            self.TB, self.UB = linalg.schur(self.B, output='real')
        self._check_pivots(pivot_rtol)

    def _check_pivots(self, pivot_rtol):
        lam_a = linalg.eigvals(self.TA)
        lam_b = lam_a if self.B is self.A else linalg.eigvals(self.TB)
        pivots = np.abs(lam_a[:, None] + lam_b[None, :])
        smallest = float(pivots.min()) if pivots.size else np.inf
        scale = max(np.linalg.norm(self.A), np.linalg.norm(self.B))
        threshold = pivot_rtol * scale
        if smallest <= threshold:
            raise SingularPencilError(
                f"pivot λᵢ+λⱼ = {smallest:.3e} sous le seuil {threshold:.3e}: solution non unique",
                pivot=smallest,
            )

    def solve(self, C):
        F = self.UA.T @ (-np.asarray(C, dtype=float)) @ self.UB
        Y, scale, info = lapack.dtrsyl(self.TA, self.TB, F, trana='N', tranb='T', isgn=1)
        if info < 0:
            raise ArgumentError(f"argument {-info} invalide pour trsyl")
        if info == 1:
            raise SingularPencilError("trsyl a perturbé des valeurs propres presque opposées")
        return self.UA @ (Y / scale) @ self.UB.T


def residual_generalized(A, N, C, X) -> float:
    """‖AX + XAᵀ + ΣNᵢXNᵢᵀ + C‖_F"""
    A = np.asarray(A, dtype=float)
    R = A @ X + X @ A.T + np.asarray(C, dtype=float)
    for Ni in _as_list(N):
        R = R + Ni @ X @ Ni.T
    return float(np.linalg.norm(R))


def residual_mixed(A, Ahat, N, Nhat, C, X) -> float:
    """‖AX + XÂᵀ + ΣNᵢXN̂ᵢᵀ + C‖_F"""
    A = np.asarray(A, dtype=float)
    Ahat = np.asarray(Ahat, dtype=float)
    R = A @ X + X @ Ahat.T + np.asarray(C, dtype=float)
    for Ni, Nh in zip(_as_list(N), _as_list(Nhat)):
        R = R + Ni @ X @ Nh.T
    return float(np.linalg.norm(R))


def solve_standard_lyapunov(A, C) -> LyapunovSolution:
    """AX + XAᵀ = −C par réduction de Schur réelle et substitution"""
    solver = SchurSylvesterSolver(A)
    X = _symmetrize(solver.solve(C))
    return LyapunovSolution(X, residual_generalized(A, (), C, X), 'bartels-stewart', 0)


def kronecker_matrix(A, Ahat, N, Nhat):
    """I⊗A + Â⊗I + Σ N̂ᵢ⊗Nᵢ, explicite (petits systèmes uniquement)"""
    n, r = A.shape[0], Ahat.shape[0]
    K = np.kron(np.eye(r), A) + np.kron(Ahat, np.eye(n))
    for Ni, Nh in zip(N, Nhat):
        K += np.kron(Nh, Ni)
    return K


def _solve_direct(A, Ahat, N, Nhat, C):
    n, r = A.shape[0], Ahat.shape[0]
    K = kronecker_matrix(A, Ahat, N, Nhat)
    lu, piv = linalg.lu_factor(K, check_finite=False)
    smallest = float(np.min(np.abs(np.diag(lu)))) if K.size else np.inf
    threshold = 1e-13 * max(np.linalg.norm(K), 1.0)
    if smallest <= threshold:
        raise SingularPencilError(
            f"matrice de Kronecker singulière (pivot {smallest:.3e} ≤ {threshold:.3e})",
            pivot=smallest,
        )
    x = linalg.lu_solve((lu, piv), -np.asarray(C, dtype=float).reshape(-1, order='F'))
    return x.reshape((n, r), order='F')


def _solve_splitting(A, Ahat, N, Nhat, C, opts, symmetric):
    solver = SchurSylvesterSolver(A, None if Ahat is A else Ahat)
    C = np.asarray(C, dtype=float)
    X = np.zeros_like(C)
    step = np.inf
    for k in range(1, opts.maxIter + 1):
        rhs = C.copy()
        for Ni, Nh in zip(N, Nhat):
            rhs += Ni @ X @ Nh.T
        X_next = solver.solve(rhs)
        if symmetric:
            X_next = _symmetrize(X_next)
        if not np.all(np.isfinite(X_next)):
            raise IterationDivergenceError(k, np.inf, np.inf)
        step = float(np.linalg.norm(X_next - X))
        X = X_next
        if step <= opts.stepTol * (1.0 + np.linalg.norm(X)):
            return X, k
    residual = residual_mixed(A, Ahat, N, Nhat, C, X)
    raise IterationDivergenceError(opts.maxIter, step, residual)


def _solve(A, Ahat, N, Nhat, C, opts, symmetric, label):
    opts = opts or SolverOptions()
    A = np.asarray(A, dtype=float)
    Ahat = A if Ahat is None else np.asarray(Ahat, dtype=float)
    N = _as_list(N)
    Nhat = N if Nhat is None else _as_list(Nhat)
    if len(N) != len(Nhat):
        raise ArgumentError(f"{len(N)} matrices Nᵢ pour {len(Nhat)} matrices N̂ᵢ")
    method = opts.resolve(A.shape[0] * Ahat.shape[0])

    if method == 'direct-kron':
        X, iterations = _solve_direct(A, Ahat, N, Nhat, C), 0
        if symmetric:
            X = _symmetrize(X)
    else:
        X, iterations = _solve_splitting(A, Ahat, N, Nhat, C, opts, symmetric)

    residual = residual_mixed(A, Ahat, N, Nhat, C, X)
    print_info(f"{label}: {method}, {iterations} itérations, résidu {residual:.3e}")
    return LyapunovSolution(X, residual, method, iterations)


def solve_generalized_lyapunov(A, N, C, opts: Optional[SolverOptions] = None) -> LyapunovSolution:
    """AX + XAᵀ + Σ NᵢXNᵢᵀ = −C"""
    return _solve(A, None, N, None, C, opts, symmetric=True, label="Lyapunov généralisée")


def solve_mixed_sylvester(A, Ahat, N, Nhat, C, opts: Optional[SolverOptions] = None) -> LyapunovSolution:
    """A X + X Âᵀ + Σ Nᵢ X N̂ᵢᵀ = −C, X de taille n×r"""
    Ahat = np.asarray(Ahat, dtype=float)
    return _solve(A, Ahat, N, Nhat, C, opts, symmetric=False, label="Sylvester mixte")
