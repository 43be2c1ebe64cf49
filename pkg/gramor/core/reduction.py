"""
Gramiens, réduction de Galerkin sur les vecteurs propres (OS) et troncature équilibrée (BT)
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import linalg

from gramor.console import print_info, print_warning
from gramor.core.lyapunov import LyapunovSolution, SolverOptions, solve_generalized_lyapunov
from gramor.core.stability import (
    StabilityOptions,
    extract_stable_realization,
    spectral_abscissa,
    sufficient_ms_stability,
)
from gramor.core.system_model import (
    BilinearControlSystem,
    GalerkinRom,
    InputSignal,
    input_l2_norm,
    scaled_stochastic,
)
from gramor.exceptions import (
    ArgumentError,
    ContractError,
    IllConditionedTruncationError,
    NonPSDError,
    StabilityError,
)

STABILITY_CHECKS = ('auto', 'spectral', 'witness', 'none')


@dataclass(frozen=True)
class GramianSpectrum:
    """P = Sᵀ diag(λ) S, valeurs propres décroissantes ; basis[:, k] est le vecteur propre de λₖ"""
    eigenvalues: np.ndarray
    basis: np.ndarray
    clipped: float = 0.0

    @property
    def n(self):
        return int(self.eigenvalues.size)

    def leading(self, r):
        return self.eigenvalues[:r]

    def tail(self, r):
        return self.eigenvalues[r:]

    def reconstruct(self):
        return (self.basis * self.eigenvalues) @ self.basis.T


def _stochastic_view(sys):
    if isinstance(sys, BilinearControlSystem):
        return scaled_stochastic(sys)
    return sys


def _check_stability(A, N, check, stability_opts):
    if check not in STABILITY_CHECKS:
        raise ArgumentError(f"contrôle de stabilité inconnu {check!r}, choix: {STABILITY_CHECKS}")
    if check == 'none':
        return None
    stability_opts = stability_opts or StabilityOptions()
    n = A.shape[0]
    if check == 'spectral' or (check == 'auto' and n <= stability_opts.denseCutoff):
        report = spectral_abscissa(A, N, stability_opts)
        if not report.is_asymptotically_stable:
            raise StabilityError(
                f"système non asymptotiquement stable en moyenne quadratique "
                f"(abscisse {report.abscissa:.3e}, {report.verdict})",
                report,
            )
        return report
    witness = sufficient_ms_stability(A, N, np.zeros((n, n)))
    if not witness.certified:
        raise StabilityError(f"aucun témoin de stabilité trouvé : {witness.reason}", witness)
    return witness


@dataclass(frozen=True)
class GramianReport:
    """Solution brute du solveur et masse spectrale négative retirée de P"""
    solution: LyapunovSolution
    clipped: float = 0.0
    minEigenvalue: float = 0.0

    @property
    def method(self):
        return self.solution.method

    @property
    def residualNorm(self):
        return self.solution.residualNorm

    @property
    def iterations(self):
        return self.solution.iterations


def _gramian(A, N, C, solver_opts, check, stability_opts, label):
    _check_stability(A, N, check, stability_opts)
    solution = solve_generalized_lyapunov(A, N, C, solver_opts)
    P = solution.X
    if not P.size:
        return P, GramianReport(solution)
    w, S = linalg.eigh(0.5 * (P + P.T))
    negative = w < 0.0
    if not np.any(negative):
        return P, GramianReport(solution, 0.0, float(w[0]))
    clipped = float(-w[negative].sum())
    print_info(f"{label}: {int(negative.sum())} valeur(s) propre(s) négative(s) ramenée(s) à 0 "
               f"(min {w[0]:.3e}, masse {clipped:.3e})")
    P = (S * np.where(negative, 0.0, w)) @ S.T
    return P, GramianReport(solution, clipped, float(w[0]))


def reachability_gramian(sys, solver_opts: Optional[SolverOptions] = None, check='auto',
                         stability_opts: Optional[StabilityOptions] = None):
    """
    P solution de AP + PAᵀ + ΣNᵢPNᵢᵀ = −BBᵀ, précédée d'un contrôle de stabilité.
    Renvoie (P, GramianReport) ; les valeurs propres négatives de P sont ramenées à 0
    et leur masse est reportée dans GramianReport.clipped
    """
    sys = _stochastic_view(sys)
    B = np.asarray(sys.B)
    return _gramian(np.asarray(sys.A), list(sys.N), B @ B.T, solver_opts, check,
                    stability_opts, "gramien d'atteignabilité")


def bilinear_gramian(sys: BilinearControlSystem, solver_opts: Optional[SolverOptions] = None,
                     check='auto', stability_opts: Optional[StabilityOptions] = None):
    """P_γ : gramien du système (A, N/γ, B/γ)"""
    P, _ = reachability_gramian(scaled_stochastic(sys), solver_opts, check, stability_opts)
    return P


def observability_gramian(sys, solver_opts: Optional[SolverOptions] = None, check='auto',
                          stability_opts: Optional[StabilityOptions] = None):
    """Q solution de AᵀQ + QA + ΣNᵢᵀQNᵢ = −I"""
    sys = _stochastic_view(sys)
    A = np.asarray(sys.A)
    Q, _ = _gramian(A.T, [np.asarray(Ni).T for Ni in sys.N], np.eye(sys.n), solver_opts,
                    check, stability_opts, "gramien d'observabilité")
    return Q


def spectral_factorize(P) -> GramianSpectrum:
    P = np.asarray(P, dtype=float)
    P = 0.5 * (P + P.T)
    w, S = linalg.eigh(P)
    order = np.argsort(-w, kind='stable')
    w, S = w[order], S[:, order]
    lam1 = max(float(w[0]), 0.0) if w.size else 0.0
    worst = float(w.min()) if w.size else 0.0
    if worst < -1e-12 * lam1:
        raise NonPSDError(
            f"gramien non semi-défini positif : λ_min = {worst:.3e} < −1e-12·λ₁",
            min_eigenvalue=worst,
        )
    negative = w < 0.0
    clipped = float(-w[negative].sum()) if np.any(negative) else 0.0
    if clipped:
        print_info(f"{int(negative.sum())} valeurs propres négatives ramenées à 0 (masse {clipped:.3e})")
    w = np.where(negative, 0.0, w)
    return GramianSpectrum(w, S, clipped)


def galerkin_reduce(sys, spectrum: GramianSpectrum, r: int, parent_hash=None) -> GalerkinRom:
    """ROM OS : V = r premières colonnes de Sᵀ, W = V"""
    n = spectrum.n
    if not isinstance(r, (int, np.integer)) or not 1 <= r <= n:
        raise ArgumentError(f"ordre r={r!r} hors de [1, {n}]")
    lam = spectrum.eigenvalues
    if lam[r - 1] <= 1e-12 * lam[0]:
        print_warning(f"λ_{r} = {lam[r - 1]:.3e} ≤ 1e-12·λ₁ : Λ₁ n'est pas définie positive")
    V = np.ascontiguousarray(spectrum.basis[:, :r])
    return GalerkinRom.from_projection(sys, V, V, 'OS', parent_hash)


def _eig_factor(M, rtol=1e-12):
    w, U = linalg.eigh(0.5 * (M + M.T))
    keep = w > rtol * max(float(w.max()), 0.0)
    return U[:, keep] * np.sqrt(w[keep])


def balanced_truncation_reduce(sys, P, Q, r: int, parent_hash=None) -> GalerkinRom:
    """Troncature équilibrée par la méthode de la racine carrée"""
    Z_P = _eig_factor(np.asarray(P, dtype=float))
    Z_Q = _eig_factor(np.asarray(Q, dtype=float))
    rank = min(Z_P.shape[1], Z_Q.shape[1])
    if not isinstance(r, (int, np.integer)) or not 1 <= r <= rank:
        raise ArgumentError(f"ordre r={r!r} hors de [1, {rank}] (rang numérique de P et Q)")

    U, s, Mt = linalg.svd(Z_Q.T @ Z_P)
    if s[r - 1] / s[0] < 1e-13:
        raise IllConditionedTruncationError(
            f"σ_{r}/σ₁ = {s[r - 1] / s[0]:.3e} < 1e-13 : troncature mal conditionnée"
        )
    scale = 1.0 / np.sqrt(s[:r])
    V = (Z_P @ Mt[:r].T) * scale
    W = (Z_Q @ U[:, :r]) * scale
    return GalerkinRom.from_projection(sys, V, W, 'BT', parent_hash)


def hankel_singular_values(P, Q):
    """√eig(PQ), décroissantes, complétées par des zéros jusqu'à n"""
    P = np.asarray(P, dtype=float)
    n = P.shape[0]
    Z_P = _eig_factor(P)
    Z_Q = _eig_factor(np.asarray(Q, dtype=float))
    s = linalg.svdvals(Z_Q.T @ Z_P) if Z_P.size and Z_Q.size else np.zeros(0)
    out = np.zeros(n)
    out[:s.size] = s
    return out


def rom_stochastic_triple(rom: GalerkinRom):
    """(Â, N̂, B̂), à l'échelle 1/γ pour un ROM bilinéaire"""
    if rom.kind == 'bilinear':
        g = rom.gamma
        return rom.reducedA, [Ni / g for Ni in rom.reducedN], rom.reducedB / g
    return rom.reducedA, list(rom.reducedN), rom.reducedB


def reduced_gramian_with_report(rom: GalerkinRom, solver_opts: Optional[SolverOptions] = None,
                                stability_opts: Optional[StabilityOptions] = None):
    Ahat, Nhat, Bhat = rom_stochastic_triple(rom)
    report = spectral_abscissa(Ahat, Nhat, stability_opts)
    if report.verdict == 'unstable':
        raise ContractError(
            f"ROM {rom.method} d'ordre {rom.r} instable (abscisse {report.abscissa:.3e})"
        )
    if report.is_asymptotically_stable:
        return solve_generalized_lyapunov(Ahat, Nhat, Bhat @ Bhat.T, solver_opts).X, report

    realization = extract_stable_realization((Ahat, Nhat, Bhat), stability_opts)
    print_info(f"ROM marginal : réalisation stable de dimension {realization.r0} "
               f"après {realization.steps} projection(s)")
    if realization.r0 == 0:
        return np.zeros((rom.r, rom.r)), report
    B0 = realization.projectedB
    P0 = solve_generalized_lyapunov(realization.projectedA, list(realization.projectedN),
                                    B0 @ B0.T, solver_opts).X
    V0 = realization.V0
    return V0 @ P0 @ V0.T, report


def reduced_gramian(rom: GalerkinRom, solver_opts: Optional[SolverOptions] = None,
                    stability_opts: Optional[StabilityOptions] = None):
    """P̂ du ROM, par la réalisation stable si le ROM n'est que marginalement stable"""
    P_hat, _ = reduced_gramian_with_report(rom, solver_opts, stability_opts)
    return P_hat


def energy_bounds(spectrum: GramianSpectrum, u: InputSignal, gamma=None, u0_norm=None):
    """
    Majorants de sup_t E|⟨x(t), pₖ⟩| pour chaque vecteur propre pₖ :
    λₖ^{1/2}‖u‖ en stochastique, λ_{γ,k}^{1/2}·exp(0.5γ²‖u⁰‖²)·γ‖u‖ en bilinéaire
    """
    norm = input_l2_norm(u)
    roots = np.sqrt(np.maximum(spectrum.eigenvalues, 0.0))
    if gamma is None:
        return roots * norm
    g = float(gamma)
    u0 = 0.0 if u0_norm is None else float(u0_norm)
    return roots * np.exp(0.5 * g ** 2 * u0 ** 2) * g * norm
