"""Energy-efficiency optimization for a UAV-relayed THz NOMA network.

A source node reaches a ground destination directly and through a miniature
UAV that harvests RF energy with a holographic surface and relays the
destination's message on that harvest. The library models the geometry and
THz channels, the per-slot NOMA link metrics, and the two-step efficiency
maximizer: a successive-convex-approximation trajectory step wrapped in a
sum-of-ratios parametric transform, and a quadratic-transform power step
driven by an augmented Lagrangian.
"""

from .algorithm import AlgoConfig, RunReport, brute_force_oracle, run_algorithm1, run_baseline
from .errors import (
    ConfigError,
    DegenerateGeometry,
    EeSimError,
    InfeasibleProblem,
    InvalidParameter,
    LineSearchStall,
    NonPositivePower,
    OracleTooLarge,
    SurrogateCollapse,
)
from .geometry import (
    ChannelParams,
    Position3D,
    RhsLayout,
    TrajectoryGrid,
    gain_sd,
    gain_sr_sum,
    gain_su,
    gain_ud,
    path_gain,
    validate_trajectory,
)
from .kernel import ConvexProblem, SolveResult, SolverOptions, solve
from .link import LinkMetrics, NomaPower, SlotGains, SlotRadioParams, slot_metrics
from .power import PowerSolution, chi, lambda_update, rhat_sum, solve_power_alm, varpi_update
from .scenario import DEFAULTS, Scenario, build_scenario, evaluate, random_scenario
from .trajectory import (
    FractionalParams,
    optimize_trajectory,
    solve_inner_sca,
    subtractive_objective,
    taylor_distance_lower_bound,
    taylor_exp_lower_bound,
    theta_residual,
)

__version__ = "0.1.0"
