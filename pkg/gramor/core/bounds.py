"""
Bornes d'erreur a priori pour les ROM stochastiques et bilinéaires
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from joblib import Parallel, delayed

from gramor.config import get_settings
from gramor.console import print_info, print_step
from gramor.core.lyapunov import (
    SolverOptions,
    solve_generalized_lyapunov,
    solve_mixed_sylvester,
)
from gramor.core.reduction import (
    GramianSpectrum,
    balanced_truncation_reduce,
    galerkin_reduce,
    observability_gramian,
    reachability_gramian,
    reduced_gramian_with_report,
    rom_stochastic_triple,
    spectral_factorize,
)
from gramor.core.stability import StabilityOptions
from gramor.core.system_model import (
    BilinearControlSystem,
    GalerkinRom,
    InputSignal,
    active_input_signal,
    input_l2_norm,
    scaled_stochastic,
)
from gramor.exceptions import ArgumentError, ContractError, NumericalInconsistencyError

WEIGHT_FORMS = ('auto', 'W', 'W0')


@dataclass(frozen=True)
class ErrorBoundReport:
    inputIndependentFactor: float
    inputNorm: float
    exponentialFactor: float
    bound: float
    terms: dict = field(default_factory=dict)
    method: str = 'general'
    gamma: float = 1.0
    r: int = 0
    romMethod: str = 'OS'

    def recompute(self):
        """Produit ℰ(r) × facteur exponentiel × ‖u‖ (× γ en bilinéaire)"""
        value = self.inputIndependentFactor * self.exponentialFactor * self.inputNorm
        if self.method.startswith('bilinear'):
            value *= self.gamma
        return value

    def as_row(self):
        return {
            'r': self.r,
            'method': self.romMethod,
            'trP': self.terms.get('trP', float('nan')),
            'trPhat': self.terms.get('trPhat', float('nan')),
            'trP2Vt': self.terms.get('trP2Vt', float('nan')),
            'inputIndependentFactor': self.inputIndependentFactor,
            'bound': self.bound,
        }


def _root(radicand, scale, traces):
    if radicand < -1e-10 * max(scale, 0.0):
        raise NumericalInconsistencyError(
            "radicande négatif au-delà de la tolérance : "
            + ", ".join(f"{k}={v:.6e}" for k, v in traces.items()),
            traces,
        )
    return float(np.sqrt(max(radicand, 0.0)))


def _view(sys):
    if isinstance(sys, BilinearControlSystem):
        return scaled_stochastic(sys)
    return sys


def _general_factor(sys, rom: GalerkinRom, P=None, solver_opts=None, stability_opts=None, reduced=None):
    """ℰ(r)² = tr P + tr(P̂ VᵀV) − 2 tr(P₂ Vᵀ) sur le système (éventuellement γ-normalisé)"""
    view = _view(sys)
    if P is None:
        P, _ = reachability_gramian(view, solver_opts, stability_opts=stability_opts)
    Ahat, Nhat, Bhat = rom_stochastic_triple(rom)
    P_hat, report = reduced or reduced_gramian_with_report(rom, solver_opts, stability_opts)
    B = np.asarray(view.B)
    P2 = solve_mixed_sylvester(view.A, Ahat, list(view.N), Nhat, B @ Bhat.T, solver_opts).X

    V = rom.V
    terms = {
        'trP': float(np.trace(P)),
        'trPhat': float(np.trace(P_hat @ (V.T @ V))),
        'trP2Vt': float(np.trace(P2 @ V.T)),
    }
    radicand = terms['trP'] + terms['trPhat'] - 2.0 * terms['trP2Vt']
    factor = _root(radicand, terms['trP'], terms)
    return factor, terms, report


def general_bound(sys, rom: GalerkinRom, u: Optional[InputSignal] = None, P=None,
                  solver_opts: Optional[SolverOptions] = None,
                  stability_opts: Optional[StabilityOptions] = None) -> ErrorBoundReport:
    """
    sup_t E‖x(t) − Vx̂(t)‖₂ ≤ ℰ(r)·‖u‖ ; sans signal, ‖u‖ vaut 1 et la borne est ℰ(r)
    """
    factor, terms, _ = _general_factor(sys, rom, P, solver_opts, stability_opts)
    norm = 1.0 if u is None else input_l2_norm(u)
    return ErrorBoundReport(factor, norm, 1.0, factor * norm, terms, 'general', 1.0, rom.r, rom.method)


def _balanced_blocks(view, rom: GalerkinRom, spectrum: GramianSpectrum):
    S_t = np.hstack([rom.V, spectrum.basis[:, rom.r:]])
    A_b = S_t.T @ np.asarray(view.A) @ S_t
    N_b = [S_t.T @ np.asarray(Ni) @ S_t for Ni in view.N]
    return A_b, N_b


def _weighted_factor(sys, rom: GalerkinRom, spectrum=None, form='auto', solver_opts=None,
                     stability_opts=None, reduced=None):
    if form not in WEIGHT_FORMS:
        raise ArgumentError(f"forme de poids inconnue {form!r}, choix: {WEIGHT_FORMS}")
    if rom.method != 'OS':
        raise ArgumentError("la borne pondérée ne s'applique qu'aux ROM OS")
    view = _view(sys)
    if spectrum is None:
        P, _ = reachability_gramian(view, solver_opts, stability_opts=stability_opts)
        spectrum = spectral_factorize(P)

    n, r = view.n, rom.r
    lam1, lam2 = spectrum.leading(r), spectrum.tail(r)
    trace_lambda = float(spectrum.eigenvalues.sum())
    P_hat, report = reduced or reduced_gramian_with_report(rom, solver_opts, stability_opts)
    trace_gap = float(np.trace(P_hat) - lam1.sum())

    if form == 'W' and not report.is_asymptotically_stable:
        raise ContractError(
            f"la forme 𝒲 exige un ROM asymptotiquement stable ({report.verdict}) : utiliser la forme 𝒲₀"
        )
    use_w = form == 'W' or (form == 'auto' and report.is_asymptotically_stable)

    terms = {'trP': trace_lambda, 'trPhatMinusLambda1': trace_gap}
    if r == n:
        terms.update({'trLambda2W0': 0.0, 'trLambda2Weighted': 0.0})
        radicand = 0.0 if use_w else trace_gap
        return _root(radicand, trace_lambda, terms), terms, 'W' if use_w else 'W0'

    A_b, N_b = _balanced_blocks(view, rom, spectrum)
    A11, A12 = A_b[:r, :r], A_b[:r, r:]
    N11 = [Nb[:r, :r] for Nb in N_b]

    # Y (r×n) par l'équation transposée : A_bᵀYᵀ + YᵀA₁₁ + ΣN_bᵀYᵀN₁₁ = −[I; 0]
    C = np.zeros((n, r))
    C[:r, :r] = np.eye(r)
    Y = solve_mixed_sylvester(A_b.T, A11.T, [Nb.T for Nb in N_b], [M.T for M in N11], C,
                              solver_opts).X.T
    Y2 = Y[:, r:]

    W0 = np.eye(n - r) + 2.0 * A12.T @ Y2
    for Nb in N_b:
        W0 += Nb[:r, r:].T @ (2.0 * Y @ Nb[:, r:])
    terms['trLambda2W0'] = float(np.sum(lam2 * np.diag(W0)))

    if use_w:
        Q_hat = solve_generalized_lyapunov(A11.T, [M.T for M in N11], np.eye(r), solver_opts).X
        W = W0.copy()
        for Nb in N_b:
            W -= Nb[:r, r:].T @ Q_hat @ Nb[:r, r:]
        terms['trLambda2Weighted'] = float(np.sum(lam2 * np.diag(W)))
        radicand = terms['trLambda2Weighted']
    else:
        terms['trLambda2Weighted'] = float('nan')
        radicand = trace_gap + terms['trLambda2W0']

    return _root(radicand, trace_lambda, terms), terms, 'W' if use_w else 'W0'


def weighted_bound(sys, rom: GalerkinRom, u: Optional[InputSignal] = None,
                   spectrum: Optional[GramianSpectrum] = None, form='auto',
                   solver_opts: Optional[SolverOptions] = None,
                   stability_opts: Optional[StabilityOptions] = None) -> ErrorBoundReport:
    """
    Représentation pondérée par les valeurs propres tronquées Λ₂ :
    (tr(P̂ − Λ₁) + tr(Λ₂𝒲₀))^{1/2}, ou (tr(Λ₂𝒲))^{1/2} si le ROM est asymptotiquement stable
    """
    factor, terms, used = _weighted_factor(sys, rom, spectrum, form, solver_opts, stability_opts)
    terms['form'] = used
    norm = 1.0 if u is None else input_l2_norm(u)
    return ErrorBoundReport(factor, norm, 1.0, factor * norm, terms, 'weighted', 1.0, rom.r, rom.method)


def _bilinear_prefactor(sys: BilinearControlSystem, u: Optional[InputSignal]):
    if u is None:
        return 1.0, 1.0, 0.0
    norm = input_l2_norm(u)
    u0_norm = input_l2_norm(active_input_signal(u, sys)) if sys.active_channels() else 0.0
    exponential = float(np.exp(0.5 * sys.gamma ** 2 * u0_norm ** 2))
    return norm, exponential, u0_norm


def _require_stable_rom(rom, solver_opts, stability_opts):
    """(P̂, rapport) du ROM, réutilisés ensuite par le calcul de ℰ_γ"""
    P_hat, report = reduced_gramian_with_report(rom, solver_opts, stability_opts)
    if not report.is_asymptotically_stable:
        raise ContractError(
            f"le ROM bilinéaire d'ordre {rom.r} n'est pas asymptotiquement stable ({report.verdict})"
        )
    return P_hat, report


def _bilinear_report(sys, rom, u, factor, terms, method):
    norm, exponential, u0_norm = _bilinear_prefactor(sys, u)
    terms['u0Norm'] = u0_norm
    bound = factor * exponential * sys.gamma * norm
    return ErrorBoundReport(factor, norm, exponential, bound, terms, method, sys.gamma, rom.r, rom.method)


def bilinear_general_bound(sys: BilinearControlSystem, rom: GalerkinRom,
                           u: Optional[InputSignal] = None, P=None,
                           solver_opts: Optional[SolverOptions] = None,
                           stability_opts: Optional[StabilityOptions] = None) -> ErrorBoundReport:
    """sup_t ‖z(t) − Vẑ(t)‖₂ ≤ ℰ_γ(r)·exp(0.5γ²‖u⁰‖²)·γ‖u‖"""
    reduced = _require_stable_rom(rom, solver_opts, stability_opts)
    factor, terms, _ = _general_factor(sys, rom, P, solver_opts, stability_opts, reduced)
    return _bilinear_report(sys, rom, u, factor, terms, 'bilinear-general')


def bilinear_weighted_bound(sys: BilinearControlSystem, rom: GalerkinRom,
                            u: Optional[InputSignal] = None,
                            spectrum: Optional[GramianSpectrum] = None,
                            solver_opts: Optional[SolverOptions] = None,
                            stability_opts: Optional[StabilityOptions] = None) -> ErrorBoundReport:
    reduced = _require_stable_rom(rom, solver_opts, stability_opts)
    factor, terms, used = _weighted_factor(sys, rom, spectrum, 'W', solver_opts, stability_opts, reduced)
    terms['form'] = used
    return _bilinear_report(sys, rom, u, factor, terms, 'bilinear-weighted')


def trace_inequality_margin(rom: GalerkinRom, spectrum: GramianSpectrum, P_hat=None) -> float:
    """tr(Λ₁) − tr(P̂), positif ou nul pour un ROM OS"""
    if P_hat is None:
        P_hat, _ = reduced_gramian_with_report(rom)
    return float(spectrum.leading(rom.r).sum() - np.trace(P_hat))


def bound_sweep(sys, r_values, method='OS', u: Optional[InputSignal] = None, P=None, Q=None,
                threads=None, solver_opts: Optional[SolverOptions] = None,
                stability_opts: Optional[StabilityOptions] = None):
    """
    ℰ(r) sur une plage d'ordres, en parallèle (threads) ; résultats dans l'ordre de r_values
    """
    if method not in ('OS', 'BT'):
        raise ArgumentError(f"méthode inconnue {method!r}, choix: OS, BT")
    r_values = [int(r) for r in r_values]
    view = _view(sys)
    if P is None:
        P, _ = reachability_gramian(view, solver_opts, stability_opts=stability_opts)
    spectrum = spectral_factorize(P)
    if method == 'BT' and Q is None:
        Q = observability_gramian(view, solver_opts, stability_opts=stability_opts)

    bilinear = isinstance(sys, BilinearControlSystem)
    norm, exponential, _ = _bilinear_prefactor(sys, u) if bilinear else (
        1.0 if u is None else input_l2_norm(u), 1.0, 0.0)
    threads = threads or get_settings().threads
    print_step(f"Balayage {method} de ℰ(r) pour r ∈ [{min(r_values)}, {max(r_values)}] ({threads} threads)")

    def one(r):
        if method == 'OS':
            rom = galerkin_reduce(sys, spectrum, r)
        else:
            rom = balanced_truncation_reduce(sys, P, Q, r)
        factor, terms, _ = _general_factor(sys, rom, P, solver_opts, stability_opts)
        print_info(f"{method} r={r} : ℰ = {factor:.12e}")
        if bilinear:
            return ErrorBoundReport(factor, norm, exponential, factor * exponential * sys.gamma * norm,
                                    terms, 'bilinear-general', sys.gamma, r, method)
        return ErrorBoundReport(factor, norm, 1.0, factor * norm, terms, 'general', 1.0, r, method)

    return Parallel(n_jobs=threads, backend='threading')(delayed(one)(r) for r in r_values)
