from gramor.core.system_model import (
    BilinearControlSystem,
    GalerkinRom,
    InputSignal,
    StochasticLinearSystem,
    input_l2_norm,
    validate_system,
)
from gramor.core.lyapunov import (
    LyapunovSolution,
    SolverOptions,
    solve_generalized_lyapunov,
    solve_mixed_sylvester,
    solve_standard_lyapunov,
)
from gramor.core.stability import StabilityOptions, StabilityReport, spectral_abscissa
from gramor.core.reduction import (
    GramianReport,
    GramianSpectrum,
    balanced_truncation_reduce,
    galerkin_reduce,
    reachability_gramian,
    spectral_factorize,
)
from gramor.core.bounds import ErrorBoundReport, general_bound, weighted_bound
