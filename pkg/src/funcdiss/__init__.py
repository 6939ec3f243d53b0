"""funcdiss: functional dissipativity analysis for second order elliptic
systems, with a small Lame finite element solver and an Orlicz norm kit."""

from .errors import (
    ToolkitError,
    NonPositivePhi,
    NotIncreasing,
    BracketFailure,
    NonConvergent,
    BadTruncation,
    QuadratureFailure,
    EllipticityViolation,
    BudgetExhausted,
    NotStrict,
    SolverDiverged,
    NotIntegrable,
    OrliczNormFailure,
)
from .phi import (
    PhiSpec,
    PhiValidation,
    LambdaProfile,
    LambdaLimit,
    YoungPair,
    power_phi,
    exp_square_phi,
    truncated_power,
    custom_phi,
    validate_phi,
    inverse_s_phi,
    dual_phi,
    young_pair,
)
from .coefficients import (
    CoefficientField,
    GeneralSystem,
    EssBounds,
    ess_bounds,
    gamma_field,
    bmo_seminorm,
    bilinear,
    constant_field,
    ramp_field,
    checkerboard_field,
    radial_field,
    lame_system,
    save_field,
    load_field,
)
from .criteria import (
    Verdict,
    AlgebraicProbe,
    MarginResult,
    algebraic_margin,
    algebraic_form,
    lame2d_verdict,
    lameNd_sufficient,
    perturbation_budget,
    comparison_constant,
    kappa_policy,
    constant_threshold,
    poisson_threshold,
    STRICT_DISSIPATIVE,
    DISSIPATIVE_BOUNDARY,
    NOT_DISSIPATIVE,
    INCONCLUSIVE,
)
from .forms import (
    TestField,
    bump_field,
    rotation_field,
    gradient_field,
    oscillatory_field,
    standard_ensemble,
    xy_decompose,
    dissipativity_form,
    gradient_energy,
    strict_margin,
    MarginReport,
    FormBreakdown,
    elasticity_breakdown,
    commutator_ibp,
    laplacian_shift,
    weighted_map_gradients,
    oscillatory_counterexample,
    CounterexampleReport,
)
from .orlicz import (
    SampledField,
    YoungFunction,
    validate_young,
    power_young,
    exp_young,
    exp_conjugate,
    exp_power_young,
    log_young,
    legendre_conjugate,
    luxemburg_norm,
    orlicz_norm,
    holder_orlicz,
    HolderReport,
)
from .fem import (
    FemProblem,
    FemSolution,
    assemble_and_solve,
    weighted_energy,
    regularity_ratio,
    holder_split_check,
    HolderSplitReport,
    manufactured_problem,
    manufactured_reference,
    fiber_problem,
    fiber_reference,
)
from .cli import RunConfig, load_config, run

__version__ = "0.1.0"
