"""Numerical laboratory for blow-up vs. global existence on exterior domains.

Simulates the semilinear heat flow u_t = Lap(u) + u^p outside a ball (or
outside an interval in 1d) under the dissipative dynamical boundary
condition sigma u_t + d_nu u = 0, with an absorbing cap truncating the
domain.  Closed-form majorants and barriers double as oracles: every
qualitative claim about the flow is checked as an executable study.
"""

from .closed_forms import (
    AdmissibilityReport,
    BlowupDomainError,
    GaussianBarrier,
    HypothesisReport,
    ReactionMajorant,
    TwoRayBarrier,
    UnsupportedExponentError,
    admissibility_report,
    ball_admissible,
    barrier_constants,
    check_monotonicity_hypothesis,
    shift_admissible,
    two_ray_admissible,
)
from .config import ConfigError, RunConfig, config_from_dict, parse_config
from .discretization import (
    BoundaryClosure,
    ConstantSigma,
    MonotonicityError,
    SigmaProfile,
    SpatialOperator,
    apply_operator,
    assemble_laplacian,
    dynamical_closure,
)
from .experiments import (
    AdmissibilityRefused,
    HypothesisRefused,
    StudyError,
    StudyReport,
    SweepRecord,
    comparison_study,
    exhaustion_study,
    fujita_sweep,
    majorant_margin,
    monotone_in_amplitude,
    neumann_monotonicity_study,
    supersolution_bound_study,
)
from .geometry import (
    DomainSpec,
    Field,
    Grid,
    RadialExterior,
    TwoRays,
    build_grid,
    outward_normal,
    truncate_initial_data,
)
from .integrator import (
    BlowUp,
    GlobalUpTo,
    Inconclusive,
    SolverConfig,
    Trace,
    adaptive_dt,
    decay_slope,
    estimate_blowup_time,
    run,
    run_many,
    step,
)
from .problems import (
    Problem,
    assemble_problem,
    barrier_on_grid,
    barrier_profile,
    gaussian_profile,
    harmonic_profile,
    initial_field,
    zero_profile,
)

__version__ = "0.1.0"
