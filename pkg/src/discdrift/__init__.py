"""Strong approximation of scalar SDEs with piecewise Lipschitz drift."""

from .drift import (
    Decomposition,
    DriftSpec,
    DriftSpecError,
    FunctionDrift,
    ValidationReport,
    decompose,
    evaluate,
    linear_growth_constant,
    one_sided_limits,
    validate,
)
from .lamperti import LampertiSpec, lamperti_drift, lamperti_phi, reduced_drift
from .paths import (
    BrownianPath,
    CoupledPathPair,
    TimeGrid,
    couple,
    linear_interp,
    refine,
    sample_brownian,
)
from .solvers import SolveResult, euler_maruyama, quasi_milstein_transformed, reference_solution
from .transform import (
    TransformSpec,
    build_transform,
    g_eval,
    g_inverse,
    g_prime,
    g_second,
    mu_tilde,
    sigma_tilde,
)

__version__ = "0.1.0"
