"""Ricci iteration for constant scalar curvature Kähler potentials on a discretised flat torus."""
from .errors import (
    CsckError,
    KrylovBreakdown,
    MaxIterations,
    MonotonicityViolation,
    NotKahler,
    ParseError,
    SolverError,
    StepFailed,
    Unstable,
    ValidationError,
)
from .flow import FlowConfig, FlowTrace, RotheReport, compare_rothe, flow_rhs
from .flow import integrate as integrate_flow
from .functionals import (
    FunctionalReport,
    TwistForm,
    energy_E,
    entropy,
    func_I,
    func_J,
    functional_report,
    j_chi,
    k_energy,
    mixed,
    normalize_E0,
    quasi_d1,
    ricci_twist,
    twisted_k_energy,
    variation_E,
    variation_j_chi,
    variation_twisted_k,
)
from .grid import (
    BackgroundGeometry,
    Field,
    GridSpec,
    HessianMetric,
    constant_metric,
    flat_torus,
    hessian,
    hessian_metric,
    integrate,
    laplacian,
    random_kahler_potential,
    scalar_curvature,
    spectral_derivative,
    trace,
)
from .iteration import (
    TRACE_COLUMNS,
    IterationConfig,
    IterationTrace,
    MonotonicityReport,
    StepRecord,
    equality_case_check,
    run,
    twisted_residual,
    verify_monotonicity,
)
from .persistence import RunManifest, emit_trace, load_field, parse_config, read_config, save_field, write_config
from .solver import SolverConfig, StepResult, linear_symbol, newton_direction, residual, solve_step

__version__ = "0.1.0"
