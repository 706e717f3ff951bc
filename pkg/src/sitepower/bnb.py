"""Branch-and-bound over a pluggable LP backend, plus the named solve
frameworks combining formulation, branching priorities and presolve.

Branching is priority-driven: fractional columns are grouped into
strict classes (scheme ``PBw`` ranks the reformulation slacks above
assignments above activations, ``PBx`` ranks assignments above
everything), the most fractional column of the highest class is chosen,
and the two children pin it to 0 and 1 via bound overrides.  Node
selection is best-bound-first by default (depth-first available for
memory-constrained runs).  Single-threaded and fully deterministic for
a fixed backend.
"""

from __future__ import annotations

import enum
import heapq
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .core import Instance, Solution, objective, verify_solution
from .formulation import (
    BigMTable,
    MilpModel,
    VarRole,
    big_m_base,
    build_natural,
    build_reformulated,
    encode_point,
    point_violations,
    solution_from_point,
)
from .heuristic import HeuristicConfig, MipSolver, fixing_heuristic, trivial_upper_bound
from .lp import (
    BackendError,
    BoundOverrides,
    InstanceInfeasibleError,
    HighsMipSolver,
    LpBackend,
    MipResult,
    get_lp_backend,
    solve_lp,
    _DENSE_CELL_LIMIT,
)
from .presolve import RcfReport, run_rcf_pipeline

INTEGRALITY_TOL = 1e-6
GAP_TOL = 1e-9


class Framework(enum.Enum):
    """The seven solve configurations benchmarked by the toolkit."""

    N = ("N", "natural", "none", False)
    N_PBX = ("N+PBx", "natural", "PBx", False)
    R = ("R", "reformulated", "none", False)
    R_PBW = ("R+PBw", "reformulated", "PBw", False)
    N_RCF = ("N+RCF", "natural", "none", True)
    R_RCF = ("R+RCF", "reformulated", "none", True)
    R_PBW_RCF = ("R+PBw+RCF", "reformulated", "PBw", True)

    def __init__(self, label: str, formulation: str, scheme: str, rcf: bool):
        self.label = label
        self.formulation = formulation
        self.scheme = scheme
        self.rcf = rcf

    @classmethod
    def parse(cls, text: str) -> "Framework":
        norm = text.strip().lower().replace("_", "+")
        for fw in cls:
            if norm in (fw.label.lower(), fw.name.lower().replace("_", "+")):
                return fw
        raise ValueError(f"unknown framework {text!r}; choose from "
                         + ", ".join(fw.label for fw in cls))


_SCHEME_RANKS: dict[str, dict[VarRole, int]] = {
    "none": {},
    "PBw": {VarRole.W: 2, VarRole.X: 1, VarRole.Z: 0},
    "PBx": {VarRole.X: 1, VarRole.W: 0, VarRole.Z: 0},
}


@dataclass(frozen=True)
class BnbConfig:
    priority_scheme: str = "none"  # none | PBw | PBx | model
    node_limit: Optional[int] = None
    time_limit: Optional[float] = None
    integrality_tol: float = INTEGRALITY_TOL
    gap_tol: float = GAP_TOL
    node_selection: str = "best_bound"  # best_bound | depth_first
    trace: bool = False

    def __post_init__(self) -> None:
        if self.priority_scheme not in ("none", "PBw", "PBx", "model"):
            raise ValueError(f"unknown priority scheme {self.priority_scheme!r}")
        if self.node_selection not in ("best_bound", "depth_first"):
            raise ValueError(f"unknown node selection {self.node_selection!r}")


@dataclass(frozen=True)
class NodeTrace:
    node: int
    parent_bound: float
    bound: float


@dataclass
class BnbResult:
    status: str  # optimal | infeasible | limit
    objective: Optional[float]
    point: Optional[np.ndarray]
    node_count: int
    proven: bool
    gap: float
    rejected_incumbents: int = 0
    trace: list[NodeTrace] = field(default_factory=list)


@dataclass(frozen=True)
class SolveReport:
    """One benchmark row: framework, objective, tree size and timings."""

    framework: str
    objective: float
    node_count: int
    time_total: float
    time_heuristic: float
    time_reduced: float
    proven: bool
    gap: float
    rcf: Optional[RcfReport] = None
    nondeterministic: bool = False


def _priority_ranks(model: MilpModel, scheme: str) -> np.ndarray:
    if scheme == "model":
        return np.array([v.priority for v in model.variables], dtype=np.int64)
    table = _SCHEME_RANKS[scheme]
    return np.array([table.get(v.role, 0) for v in model.variables], dtype=np.int64)


def _pick_branch_column(point: np.ndarray, fractional: np.ndarray, ranks: np.ndarray) -> int:
    top = ranks[fractional].max()
    pool = fractional[ranks[fractional] == top]
    # most fractional first, then lowest column index
    distance = np.abs(point[pool] - 0.5)
    best = distance.min()
    return int(pool[distance <= best + 1e-15][0])


def branch_and_bound(
    model: MilpModel,
    cfg: BnbConfig,
    backend: LpBackend,
    incumbent: Optional[tuple[np.ndarray, float]] = None,
    accept: Optional[Callable[[np.ndarray], bool]] = None,
    root_overrides: Optional[BoundOverrides] = None,
) -> BnbResult:
    """Solve the 0-1 model to proven optimality within the limits.

    ``incumbent`` seeds the search with a known feasible point and its
    cost; ``accept`` is called on every integral candidate and must
    return True before it may become the incumbent (candidates failing
    it are counted, never silently kept).
    """
    obj_vec = model.objective_vector()
    ranks = _priority_ranks(model, cfg.priority_scheme)
    integer_cols = np.array([v.is_integer for v in model.variables], dtype=bool)

    inc_point: Optional[np.ndarray] = None
    inc_obj = np.inf
    if incumbent is not None:
        inc_point, inc_obj = incumbent[0].copy(), float(incumbent[1])

    node_count = 0
    rejected = 0
    seq = 0
    trace: list[NodeTrace] = []
    start = time.perf_counter()

    warm = hasattr(backend, "solve_warm")

    # node entries: (bound estimate, -insertion sequence, overrides,
    # parent bound, parent basis); newest node wins among equal bounds
    open_nodes: list = [(-np.inf, 0, dict(root_overrides or {}), -np.inf, None)]
    use_heap = cfg.node_selection == "best_bound"
    hit_limit = False

    while open_nodes:
        if cfg.node_limit is not None and node_count >= cfg.node_limit:
            hit_limit = True
            break
        if cfg.time_limit is not None and time.perf_counter() - start > cfg.time_limit:
            hit_limit = True
            break
        if use_heap:
            est, _, overrides, parent_bound, hint = heapq.heappop(open_nodes)
        else:
            est, _, overrides, parent_bound, hint = open_nodes.pop()
        if est >= inc_obj - cfg.gap_tol:
            continue  # pruned by a bound found after insertion

        child_hint = None
        if warm:
            try:
                lp, child_hint = backend.solve_warm(model, overrides, hint)
            except Exception as exc:
                raise BackendError(f"LP backend raised at node {node_count + 1}: {exc}")
        else:
            lp = solve_lp(backend, model, overrides)
        node_count += 1
        if lp.status == "infeasible":
            continue
        if lp.status != "optimal":
            raise BackendError(f"LP backend failed at node {node_count}: "
                               f"{lp.status} {lp.diagnostics}")
        bound = lp.objective
        if cfg.trace:
            trace.append(NodeTrace(node_count, parent_bound, bound))
        if bound >= inc_obj - cfg.gap_tol:
            continue

        frac = np.abs(lp.primal - np.round(lp.primal))
        fractional = np.nonzero(integer_cols & (frac > cfg.integrality_tol))[0]
        if fractional.size == 0:
            point = np.round(lp.primal)
            point_obj = float(obj_vec @ point)
            if point_obj < inc_obj - cfg.gap_tol:
                if accept is None or accept(point):
                    inc_point, inc_obj = point, point_obj
                else:
                    rejected += 1
            continue

        col = _pick_branch_column(lp.primal, fractional, ranks)
        for value in (0.0, 1.0):
            child = dict(overrides)
            child[col] = (value, value)
            seq += 1
            entry = (bound, -seq, child, bound, child_hint)
            if use_heap:
                heapq.heappush(open_nodes, entry)
            else:
                open_nodes.append(entry)

    if open_nodes:
        best_bound_global = min(e[0] for e in open_nodes)
    else:
        best_bound_global = inc_obj if inc_point is not None else np.inf

    if inc_point is not None:
        proven = not hit_limit
        gap = 0.0 if proven else (
            max(0.0, inc_obj - best_bound_global) if np.isfinite(best_bound_global) else np.inf)
        return BnbResult("optimal" if proven else "limit", inc_obj, inc_point,
                         node_count, proven, gap, rejected, trace)
    if hit_limit:
        return BnbResult("limit", None, None, node_count, False, np.inf, rejected, trace)
    return BnbResult("infeasible", None, None, node_count, True, np.inf, rejected, trace)


class BnbMipSolver:
    """The built-in branch-and-bound exposed through the sub-MIP
    contract (used for step 4 of the fixing heuristic on small models)."""

    name = "bnb"

    def __init__(self, backend_spec: Optional[str] = None):
        self.backend_spec = backend_spec

    def __call__(self, model: MilpModel,
                 bound_overrides: Optional[BoundOverrides] = None,
                 node_limit: Optional[int] = None,
                 time_limit: Optional[float] = None) -> MipResult:
        backend = get_lp_backend(self.backend_spec, model)
        cfg = BnbConfig(node_limit=node_limit, time_limit=time_limit)
        res = branch_and_bound(model, cfg, backend, root_overrides=bound_overrides)
        if res.status == "optimal":
            return MipResult("optimal", res.objective, res.point, res.node_count)
        if res.status == "limit" and res.point is not None:
            return MipResult("feasible", res.objective, res.point, res.node_count)
        if res.status == "infeasible":
            return MipResult("infeasible", None, None, res.node_count)
        return MipResult("no_solution", None, None, res.node_count)


@dataclass(frozen=True)
class SolveConfig:
    """Knobs for :func:`solve_framework`; the defaults pick backends by
    model size and run the search without limits."""

    lp_backend: Optional[Union[str, LpBackend]] = None
    sub_mip: str = "auto"  # auto | bnb | highs
    heuristic: HeuristicConfig = HeuristicConfig()
    node_limit: Optional[int] = None
    time_limit: Optional[float] = None
    node_selection: str = "best_bound"
    use_strongest_interferers: bool = True
    trace: bool = False


def _resolve_backend(cfg: SolveConfig, model: MilpModel) -> LpBackend:
    if cfg.lp_backend is not None and not isinstance(cfg.lp_backend, str):
        return cfg.lp_backend
    return get_lp_backend(cfg.lp_backend, model)


def _resolve_sub_mip(cfg: SolveConfig, model: MilpModel) -> MipSolver:
    choice = cfg.sub_mip
    if choice == "auto":
        big = model.n_rows * model.n_cols > _DENSE_CELL_LIMIT
        choice = "highs" if big else "bnb"
    if choice == "highs":
        return HighsMipSolver()
    if choice == "bnb":
        spec = cfg.lp_backend if isinstance(cfg.lp_backend, str) else None
        return BnbMipSolver(spec)
    raise ValueError(f"unknown sub-MIP engine {cfg.sub_mip!r}")


def _builder(framework: Framework):
    return build_natural if framework.formulation == "natural" else build_reformulated


def _seed_from_solution(model: MilpModel, sol: Solution) -> Optional[tuple[np.ndarray, float]]:
    """Encode a known solution as an incumbent seed, but only when it is
    feasible in (possibly tightened) model coordinates."""
    point = encode_point(model, sol)
    lb, ub = model.bounds_arrays()
    if np.any(point < lb - 1e-9) or np.any(point > ub + 1e-9):
        return None
    if point_violations(model, point, tol=1e-7):
        return None
    return point, float(model.objective_vector() @ point)


def solve_framework(inst: Instance, framework: Union[Framework, str],
                    cfg: Optional[SolveConfig] = None) -> tuple[SolveReport, Solution]:
    """Run one named framework end to end and return its report and
    verified solution.

    RCF frameworks first obtain a lower bound from the root relaxation
    and an upper bound from the fixing heuristic, then fix, tighten,
    rebuild and solve the reduced model.  All frameworks return the same
    objective on the same instance.

    Raises InstanceInfeasibleError when the instance has no feasible
    assignment.
    """
    if isinstance(framework, str):
        framework = Framework.parse(framework)
    cfg = cfg or SolveConfig()
    t_start = time.perf_counter()

    base_table = big_m_base(inst)
    build = _builder(framework)
    model = build(inst, base_table)
    backend = _resolve_backend(cfg, model)

    h_time = 0.0
    rcf_report: Optional[RcfReport] = None
    seed: Optional[tuple[np.ndarray, float]] = None
    solve_model = model

    if framework.rcf:
        root_lp = solve_lp(backend, model, None)
        if root_lp.status == "infeasible":
            raise InstanceInfeasibleError("instance infeasible: LP relaxation has no solution")
        if root_lp.status != "optimal":
            raise BackendError(f"root LP failed: {root_lp.status} {root_lp.diagnostics}")
        lb = root_lp.objective

        mip_solver = _resolve_sub_mip(cfg, model)
        outcome = fixing_heuristic(inst, model, cfg.heuristic, backend, mip_solver,
                                   lp_result=root_lp)
        ub_solution: Optional[Solution] = None
        ub: Optional[float] = None
        if outcome is not None:
            h_time = outcome.wall_time
            ub_solution, ub = outcome.solution, outcome.upper_bound
        else:
            fallback = trivial_upper_bound(inst)
            if fallback is not None:
                ub_solution, ub = fallback

        if ub is not None and ub > lb + GAP_TOL:
            solve_model, rcf_report, _table = run_rcf_pipeline(
                inst, model, base_table, root_lp, ub, build,
                use_strongest_interferers=cfg.use_strongest_interferers)
            if rcf_report.infeasible:
                # certified bound says feasible: distrust the reduction
                solve_model, rcf_report = model, None
        # with no usable gap the reduction is unavailable; solve as built
        if ub_solution is not None:
            seed = _seed_from_solution(solve_model, ub_solution)

    bnb_cfg = BnbConfig(
        priority_scheme=framework.scheme,
        node_limit=cfg.node_limit,
        time_limit=cfg.time_limit,
        node_selection=cfg.node_selection,
        trace=cfg.trace,
    )

    def accept(point: np.ndarray) -> bool:
        try:
            sol = solution_from_point(solve_model, point)
        except ValueError:
            return False
        return verify_solution(inst, sol).feasible

    t_bnb = time.perf_counter()
    result = branch_and_bound(solve_model, bnb_cfg, backend, incumbent=seed, accept=accept)
    r_time = time.perf_counter() - t_bnb

    if result.status == "infeasible":
        raise InstanceInfeasibleError("instance infeasible: search exhausted with no solution")
    if result.point is None:
        raise BackendError(f"search stopped without a solution: {result.status}")

    solution = solution_from_point(solve_model, result.point)
    report = SolveReport(
        framework=framework.label,
        objective=objective(inst, solution),
        node_count=result.node_count,
        time_total=time.perf_counter() - t_start,
        time_heuristic=h_time,
        time_reduced=r_time if framework.rcf else 0.0,
        proven=result.proven,
        gap=result.gap,
        rcf=rcf_report,
    )
    return report, solution
