"""
Hiérarchie d'erreurs de gramor
"""


class GramorError(Exception):
    """Erreur de base de la bibliothèque"""
    exit_code = 1


class ValidationError(GramorError):
    """Violation structurelle d'un système ou d'un signal"""

    def __init__(self, message, violations=None):
        super().__init__(message)
        self.violations = list(violations or [])


class ArgumentError(ValidationError):
    """Argument hors domaine (ordre r, plage de balayage...)"""
    exit_code = 2


class InputEvaluationError(GramorError):
    """Évaluation non finie d'un signal d'entrée"""

    def __init__(self, t, value=None):
        super().__init__(f"valeur non finie du signal d'entrée en t={t!r} ({value!r})")
        self.t = t
        self.value = value


class SingularPencilError(GramorError):
    """λᵢ+λⱼ ≈ 0 : l'équation n'a pas de solution unique"""

    def __init__(self, message, pivot=None):
        super().__init__(message)
        self.pivot = pivot


class IterationDivergenceError(GramorError):
    """L'itération de splitting n'a pas convergé"""

    def __init__(self, iterations, step_norm, residual):
        super().__init__(
            f"itération de splitting non convergée après {iterations} itérations "
            f"(pas={step_norm:.3e}, résidu={residual:.3e})"
        )
        self.iterations = iterations
        self.step_norm = step_norm
        self.residual = residual


class ConvergenceError(GramorError):
    """Échec de l'itération matrix-free sur l'abscisse spectrale"""

    def __init__(self, message, ritz_estimate=None):
        super().__init__(message)
        self.ritz_estimate = ritz_estimate


class StabilityError(GramorError):
    """Précondition de stabilité en moyenne quadratique non satisfaite"""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class DegenerateEigenspaceError(GramorError):
    """Aucune matrice propre semi-définie positive trouvée"""


class ContractError(GramorError):
    """Hypothèse d'un résultat théorique violée"""


class NonPSDError(GramorError):
    """Matrice supposée semi-définie positive qui ne l'est pas"""

    def __init__(self, message, min_eigenvalue=None):
        super().__init__(message)
        self.min_eigenvalue = min_eigenvalue


class NumericalInconsistencyError(GramorError):
    """Radicande négatif au-delà de la tolérance"""

    def __init__(self, message, traces=None):
        super().__init__(message)
        self.traces = dict(traces or {})


class IllConditionedTruncationError(GramorError):
    """Σ_r / Σ₁ trop petit pour une troncature équilibrée fiable"""


class StepSizeError(GramorError):
    """(I − hA) singulière : réduire h"""


class StiffnessError(GramorError):
    """Pas de temps adaptatif trop petit"""


class StageFailure(GramorError):
    """Exception inattendue (LAPACK, E/S...) levée pendant une étape nommée"""

    def __init__(self, stage, cause):
        super().__init__(f"{type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause
