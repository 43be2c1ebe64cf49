"""
Stabilité en moyenne quadratique et extraction de réalisations stables
"""

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from scipy import linalg
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigs

from gramor.config import get_settings
from gramor.console import print_info, print_warning
from gramor.core.lyapunov import (
    SolverOptions,
    kronecker_matrix,
    solve_generalized_lyapunov,
)
from gramor.exceptions import (
    ContractError,
    ConvergenceError,
    DegenerateEigenspaceError,
    IterationDivergenceError,
    SingularPencilError,
)

VERDICTS = ('asymptotically-stable', 'marginally-stable', 'unstable')


@dataclass(frozen=True)
class StabilityOptions:
    denseCutoff: int = field(default_factory=lambda: get_settings().dense_eig_cutoff)
    maxIter: int = 5000
    rtol: float = 1e-9


@dataclass(frozen=True)
class StabilityReport:
    abscissa: float
    verdict: str
    method: str
    tolerance: float

    @property
    def is_asymptotically_stable(self):
        return self.verdict == 'asymptotically-stable'

    def to_dict(self):
        return {
            'abscissa': self.abscissa,
            'verdict': self.verdict,
            'method': self.method,
            'tolerance': self.tolerance,
        }


@dataclass(frozen=True)
class WitnessReport:
    """Résultat de la recherche d'un X ≻ 0 avec 𝓛_A(X) + Π_N(X) ≤ −Y"""
    status: str
    X: Optional[np.ndarray]
    minEigenvalue: float
    epsilon: float
    reason: str = ''

    @property
    def certified(self):
        return self.status == 'certified'


@dataclass(frozen=True)
class PsdEigenmatrix:
    matrix: np.ndarray
    eigenvalue: float
    residual: float
    minEigenvalue: float


@dataclass(frozen=True)
class StableRealization:
    V0: np.ndarray
    projectedA: np.ndarray
    projectedN: Tuple[np.ndarray, ...]
    projectedB: np.ndarray
    steps: int

    @property
    def r0(self):
        return int(self.V0.shape[1])


def _matrices(A, N):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    return A, [np.atleast_2d(np.asarray(Ni, dtype=float)) for Ni in (N or ())]


def kron_operator_action(A, N, X):
    """AX + XAᵀ + Σ NᵢXNᵢᵀ, sans jamais former K"""
    A, N = _matrices(A, N)
    X = np.asarray(X, dtype=float)
    out = A @ X + X @ A.T
    for Ni in N:
        out = out + Ni @ X @ Ni.T
    return out


def adjoint_operator_action(A, N, X):
    """AᵀX + XA + Σ NᵢᵀXNᵢ"""
    A, N = _matrices(A, N)
    return kron_operator_action(A.T, [Ni.T for Ni in N], X)


def _tolerance(A, N, rtol):
    n = A.shape[0]
    return rtol * max(float(np.linalg.norm(kron_operator_action(A, N, np.eye(n)))), 1.0)


def _classify(abscissa, tol):
    if abscissa < -tol:
        return 'asymptotically-stable'
    if abscissa <= tol:
        return 'marginally-stable'
    return 'unstable'


def _shift(A, N):
    return 2.0 * np.linalg.norm(A) + sum(np.linalg.norm(Ni) ** 2 for Ni in N)


def _operator(action, A, N, sigma):
    n = A.shape[0]

    def matvec(v):
        X = np.asarray(v, dtype=float).reshape((n, n), order='F')
        return (action(A, N, X) + sigma * X).reshape(-1, order='F')

    return LinearOperator((n * n, n * n), matvec=matvec, dtype=float)


def _rightmost_matrix_free(action, A, N, opts):
    """Valeur propre la plus à droite de K via Arnoldi sur K + σI"""
    sigma = _shift(A, N)
    op = _operator(action, A, N, sigma)
    try:
        values, vectors = eigs(op, k=1, which='LR', maxiter=opts.maxIter, tol=1e-12)
    except ArpackNoConvergence as exc:
        partial = exc.eigenvalues
        estimate = float(np.max(partial.real) - sigma) if len(partial) else None
        raise ConvergenceError(
            f"Arnoldi non convergé après {opts.maxIter} itérations (estimation de Ritz {estimate})",
            ritz_estimate=estimate,
        ) from exc
    return values - sigma, vectors


def spectral_abscissa(A, N, opts: Optional[StabilityOptions] = None) -> StabilityReport:
    """max ℜλ(I⊗A + A⊗I + ΣNᵢ⊗Nᵢ) et verdict de stabilité"""
    opts = opts or StabilityOptions()
    A, N = _matrices(A, N)
    n = A.shape[0]
    tol = _tolerance(A, N, opts.rtol)

    if n <= opts.denseCutoff:
        K = kronecker_matrix(A, A, N, N)
        abscissa = float(np.max(linalg.eigvals(K).real))
        method = 'dense-eig'
    else:
        values, _ = _rightmost_matrix_free(kron_operator_action, A, N, opts)
        abscissa = float(np.max(values.real))
        method = 'matrix-free-power'

    report = StabilityReport(abscissa, _classify(abscissa, tol), method, tol)
    print_info(f"abscisse spectrale {abscissa:.6e} ({method}) → {report.verdict}")
    return report


def sufficient_ms_stability(A, N, Y, solver_opts: Optional[SolverOptions] = None) -> WitnessReport:
    """Chercher un témoin X ≻ 0 en résolvant 𝓛_A(X) + Π_N(X) = −(Y + εI)"""
    A, N = _matrices(A, N)
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    eps = 1e-8 * (1.0 + float(np.linalg.norm(Y)))
    C = Y + eps * np.eye(A.shape[0])
    try:
        solution = solve_generalized_lyapunov(A, N, C, solver_opts)
    except (SingularPencilError, IterationDivergenceError) as exc:
        return WitnessReport('inconclusive', None, float('nan'), eps, str(exc))

    lam_min = float(np.min(linalg.eigvalsh(solution.X)))
    if lam_min > 0.0 and np.all(np.isfinite(solution.X)):
        return WitnessReport('certified', solution.X, lam_min, eps)
    return WitnessReport('inconclusive', solution.X, lam_min, eps,
                         f"X n'est pas définie positive (λ_min = {lam_min:.3e})")


def _real_eigvec(v):
    v = np.asarray(v)
    k = int(np.argmax(np.abs(v)))
    if abs(v[k]) == 0.0:
        return np.real(v)
    return np.real(v * np.exp(-1j * np.angle(v[k])))


def _as_psd_candidate(v, n):
    X = _real_eigvec(v).reshape((n, n), order='F')
    X = 0.5 * (X + X.T)
    norm = np.linalg.norm(X)
    if norm == 0.0:
        return None
    if np.trace(X) < 0:
        X = -X
    return X / norm


def psd_null_eigenmatrix(A, N, opts: Optional[StabilityOptions] = None) -> PsdEigenmatrix:
    """
    Matrice propre V̂ ⪰ 0, ‖V̂‖_F = 1, de l'opérateur adjoint X ↦ AᵀX + XA + ΣNᵢᵀXNᵢ
    à sa valeur propre la plus à droite
    """
    opts = opts or StabilityOptions()
    A, N = _matrices(A, N)
    n = A.shape[0]

    if n <= opts.denseCutoff:
        At, Nt = A.T, [Ni.T for Ni in N]
        values, vectors = linalg.eig(kronecker_matrix(At, At, Nt, Nt))
        alpha = float(np.max(values.real))
        cluster = 1e-8 * max(1.0, abs(alpha))
        order = [i for i in np.argsort(-values.real, kind='stable')
                 if abs(values[i] - alpha) <= cluster]
        candidates = [vectors[:, i] for i in order]
    else:
        values, vectors = _rightmost_matrix_free(adjoint_operator_action, A, N, opts)
        alpha = float(values.real[0])
        candidates = [vectors[:, 0]]

    best_min = -np.inf
    for v in candidates:
        X = _as_psd_candidate(v, n)
        if X is None:
            continue
        lam_min = float(np.min(linalg.eigvalsh(X)))
        residual = float(np.linalg.norm(adjoint_operator_action(A, N, X) - alpha * X))
        best_min = max(best_min, lam_min)
        if lam_min >= -1e-8 and residual <= 1e-8:
            return PsdEigenmatrix(X, alpha, residual, lam_min)

    raise DegenerateEigenspaceError(
        f"aucune matrice propre semi-définie positive à λ = {alpha:.3e} "
        f"({len(candidates)} candidats, meilleur λ_min = {best_min:.3e})"
    )


def _triple(rom):
    if hasattr(rom, 'reducedA'):
        return rom.reducedA, list(rom.reducedN), rom.reducedB
    Ahat, Nhat, Bhat = rom
    return (np.atleast_2d(np.asarray(Ahat, dtype=float)),
            [np.atleast_2d(np.asarray(Ni, dtype=float)) for Ni in (Nhat or ())],
            np.asarray(Bhat, dtype=float).reshape(np.atleast_2d(Ahat).shape[0], -1))


def _kernel_basis(V_hat, cutoff):
    d, Q = linalg.eigh(V_hat)
    return Q[:, d <= cutoff * max(float(d.max()), 0.0)]


def extract_stable_realization(rom, opts: Optional[StabilityOptions] = None,
                               kernel_rtol=1e-10, zero_atol=1e-12) -> StableRealization:
    """
    Projeter un ROM marginalement stable sur le noyau de matrices propres nulles
    jusqu'à obtenir un sous-système asymptotiquement stable qui préserve Φ̂(t)B̂
    """
    opts = opts or StabilityOptions()
    Ahat, Nhat, Bhat = _triple(rom)
    r = Ahat.shape[0]
    V0 = np.eye(r)
    steps = 0

    while True:
        dim = Ahat.shape[0]
        if dim == 0 or np.linalg.norm(Bhat) <= zero_atol:
            if dim > 0 and spectral_abscissa(Ahat, Nhat, opts).is_asymptotically_stable:
                return StableRealization(V0, Ahat, tuple(Nhat), Bhat, steps)
            print_info("B̂ ≈ 0 : réalisation vide, Φ̂(t)B̂ ≡ 0")
            m = Bhat.shape[1]
            return StableRealization(np.zeros((r, 0)), np.zeros((0, 0)),
                                     tuple(np.zeros((0, 0)) for _ in Nhat),
                                     np.zeros((0, m)), steps)

        report = spectral_abscissa(Ahat, Nhat, opts)
        if report.is_asymptotically_stable:
            return StableRealization(V0, Ahat, tuple(Nhat), Bhat, steps)
        if report.verdict == 'unstable':
            raise ContractError(
                f"ROM instable (abscisse {report.abscissa:.3e}) : aucune réalisation stable n'existe"
            )

        V_hat = psd_null_eigenmatrix(Ahat, Nhat, opts).matrix
        kernel = _kernel_basis(V_hat, kernel_rtol)
        if kernel.shape[1] == 0:
            raise ContractError("V̂ définie positive alors que B̂ ≠ 0 : hypothèse de dissipation violée")
        if kernel.shape[1] == dim:
            print_warning("la projection ne réduit pas la dimension, seuil de noyau resserré ×10")
            kernel = _kernel_basis(V_hat, kernel_rtol / 10.0)
            if kernel.shape[1] in (0, dim):
                raise ContractError(f"extraction bloquée en dimension {dim}")

        Ahat = kernel.T @ Ahat @ kernel
        Nhat = [kernel.T @ Ni @ kernel for Ni in Nhat]
        Bhat = kernel.T @ Bhat
        V0 = V0 @ kernel
        steps += 1
        print_info(f"projection {steps} : dimension {dim} → {Ahat.shape[0]}")
