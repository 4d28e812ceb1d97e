"""dgdlab: fixed step-size distributed gradient descent over agent networks.

A numpy library plus experiment harness for simulating synchronous
distributed gradient descent (DGD), its perturbed variant (NDGD) that
actively evades saddle points, and plain gradient descent on the
consensus-penalized objective the distributed update secretly performs.
Includes mixing-matrix validation with spectral summaries, a variance
budget for the perturbations, bound evaluators at stationary points, and
reproducible CSV-emitting experiment sweeps.
"""

from .config import (
    ConfigError,
    DiagnosticsRequest,
    EscapeSpec,
    ExperimentConfig,
    builtin_config,
    load_config,
    load_state_file,
)
from .diagnostics import (
    BoundReport,
    CoercivityProbe,
    DescentEstimate,
    LipschitzUnavailableError,
    ReferenceDistance,
    RegionMembership,
    RegularityParams,
    StepSizeCaps,
    bound_report_csv_rows,
    bound_report_table,
    coercivity_probe,
    consensus_distance_check,
    dist_to_reference,
    escape_iteration,
    expected_descent_mc,
    mean_curvature_check,
    mean_gradient_check,
    region_membership,
    step_size_caps,
)
from .dynamics import (
    AuditReport,
    RunConfig,
    StopRule,
    Trajectory,
    TrajectoryRecord,
    VARIANTS,
    dgd_step,
    ndgd_step,
    run,
)
from .experiment import (
    EscapeComparison,
    ExperimentSummary,
    RunResult,
    escape_compare,
    generate_mixing,
    run_experiment,
)
from .graph import NetworkGraph, is_connected, neighbors
from .mixing import (
    MixingMatrix,
    MixingValidationError,
    SpectralInfo,
    apply_lifted,
    consensus_average,
    validate_mixing,
)
from .noise import (
    NoiseSpec,
    RandomStream,
    agent_streams,
    sample,
    sigma_max_sq,
    sphere_radius_for,
)
from .objective import (
    LipschitzConstants,
    LocalObjective,
    PowerIterationError,
    Problem,
    StationaryClass,
    StationaryKind,
    ToleranceSpec,
    F_grad,
    F_value,
    broadcast_state,
    classify_stationary,
    f_grad,
    f_hess,
    f_value,
    lipschitz_aggregate,
    polynomial_objective,
    q_grad,
    q_hess_apply,
    q_hess_dense,
    q_hess_min_eig,
    q_value,
    with_lipschitz,
)
from .problems import (
    FIVE_AGENT_QUARTIC,
    FIVE_AGENT_QUARTIC_MINIMIZERS,
    FIVE_AGENT_QUARTIC_SADDLE,
    builtin_problem,
    builtin_problem_names,
    five_agent_quartic,
)

__version__ = "0.1.0"
