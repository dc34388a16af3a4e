"""Risk-aware power allocation for parallel fading channels.

Solver library and experiment runner for CVaR-constrained power policies:
closed-form waterfilling with a quantile floor, model-based and model-free
quantile-level updates, stochastic dual descent, and figure-ready output
tables.
"""

from .cvar import cvar_objective, empirical_cvar, value_at_risk
from .fading import FadingKind, FadingModel
from .kernels import compiled_available
from .outputs import moving_average, run_scenario, sweep_surface
from .policy import (
    DualState,
    TerminalConfig,
    UnboundedPolicyError,
    c_parameter,
    optimal_power,
    rate,
)
from .radius import confidence_from_radius, radius_from_confidence
from .scenario import Scenario, ScenarioError, SweepGrid, load_scenario, preset_names
from .solver import (
    IterationRecord,
    Mode,
    SolverConfig,
    SolverDivergenceError,
    Trajectory,
    dual_subgradient,
    dual_update,
    run,
)
from .utility import UtilityKind, optimal_rate_vector, utility_value
from .var_levels import (
    Branch,
    BranchEval,
    BracketExpansionError,
    VarLevels,
    classify_branch,
    solve_var_level,
    var_supergradient_step,
    z_subgradient,
)
from .verify import verify

__version__ = "0.1.0"

__all__ = [
    "Branch",
    "BranchEval",
    "BracketExpansionError",
    "DualState",
    "FadingKind",
    "FadingModel",
    "IterationRecord",
    "Mode",
    "Scenario",
    "ScenarioError",
    "SolverConfig",
    "SolverDivergenceError",
    "SweepGrid",
    "TerminalConfig",
    "Trajectory",
    "UnboundedPolicyError",
    "UtilityKind",
    "VarLevels",
    "c_parameter",
    "classify_branch",
    "compiled_available",
    "confidence_from_radius",
    "cvar_objective",
    "dual_subgradient",
    "dual_update",
    "empirical_cvar",
    "load_scenario",
    "moving_average",
    "optimal_power",
    "optimal_rate_vector",
    "preset_names",
    "radius_from_confidence",
    "rate",
    "run",
    "run_scenario",
    "solve_var_level",
    "sweep_surface",
    "utility_value",
    "value_at_risk",
    "var_supergradient_step",
    "verify",
    "z_subgradient",
    "__version__",
]
