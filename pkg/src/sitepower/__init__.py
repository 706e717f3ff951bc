"""Site-and-power assignment toolkit: big-M MILP formulations, a slack
reformulation with priority branching, reduced-cost-fixing presolve with
big-M tightening, an LP-rounding upper-bound heuristic, and a
brute-force oracle for equivalence testing."""

from .core import (
    FeasibilityReport,
    Instance,
    InstanceDataError,
    Solution,
    objective,
    received_power,
    sinr,
    verify_solution,
)
from .formulation import (
    BigMTable,
    BigMTier,
    MilpModel,
    RowTag,
    VarRole,
    big_m_base,
    build_natural,
    build_reformulated,
    extend_solution,
    project_solution,
)
from .bnb import (
    BnbConfig,
    Framework,
    SolveConfig,
    SolveReport,
    branch_and_bound,
    solve_framework,
)
from .heuristic import HeuristicConfig, fixing_heuristic
from .instgen import GenParams, generate, scale
from .lp import (
    BackendError,
    DenseSimplexBackend,
    HighsBackend,
    InstanceInfeasibleError,
    LpResult,
    get_lp_backend,
    solve_lp,
)
from .oracle import OracleResult, brute_force
from .presolve import (
    RcfReport,
    gamma_from_ub,
    reduced_cost_fix,
    run_rcf_pipeline,
    strongest_interferers,
    tighten_big_m_double_prime,
    tighten_big_m_prime,
)

__version__ = "0.1.0"
