"""qbsde: a numerical laboratory for quadratic semimartingale BSDEs.

Solves dY = Z.dM + dN - F(t,Y,Z) dA - (1/2) d<N> on simulated scenarios and
verifies, at desk scale, the quantitative statements that hold under an
exponential-moments condition: the a priori bound, moment bounds on the
solution, comparison and truncation monotonicity, stability and its failure
mode, and the true-martingale property of the stochastic exponential of the
martingale part.
"""

__version__ = "0.1.0"

from .analytics import (
    BoundProcess,
    CheckReport,
    ExpMartingaleEstimate,
    KazamakiReport,
    OrderingEvidence,
    StabilityMetrics,
    apriori_bound,
    check_apriori,
    comparison_check,
    exp_martingale_check,
    kazamaki_statistic,
    norm_bound_checks,
    sample_ordering,
    stability_metrics,
    stochastic_exponential_mean,
)
from .drivers import (
    AssumptionReport,
    DriverSpec,
    MomentReport,
    ParamSet,
    SamplingPlan,
    TerminalCondition,
    exponential_moment_estimate,
    list_builtins,
    make_builtin,
    terminal_abs,
    terminal_affine,
    terminal_constant,
    validate_assumptions,
)
from .errors import (
    CapacityError,
    ConfigValidationError,
    DegenerateBasisError,
    GridMismatchError,
    MomentFailureError,
    QbsdeError,
    SolverDivergenceError,
    UnknownDriverError,
)
from .experiments import (
    ExperimentConfig,
    ExperimentReport,
    bundled_configs,
    load_config,
    run_experiment,
    validate_config,
)
from .scenarios import (
    ClockSpec,
    RandomSource,
    ScenarioBundle,
    TimeGrid,
    build_grid,
    coarsen_bundle,
    load_scenario,
    quadratic_variation,
    save_scenario,
    simulate_scenario,
)
from .solver import (
    SolutionField,
    SolverConfig,
    TruncationLadder,
    exponential_transform_reference,
    nested_mc_oracle,
    solve_backward,
    solve_ladder,
    y0_with_se,
)
