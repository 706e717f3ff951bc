"""LP-rounding fixing heuristic for a fast certified upper bound.

Fractional LP values are good predictors of which activation variables
an optimal integer solution leaves at zero, especially when the
relaxation is tight.  The heuristic therefore:

1. solves the LP relaxation,
2. collects the activation (z) variables whose fractional value falls
   below a small threshold,
3. fixes them to zero and propagates the implications,
4. solves the reduced integer problem within a node/time budget.

Any returned solution has been verified against the coverage
semantics, so its cost is a valid upper bound on the true optimum.
Only z variables are rounded; assignment variables follow via
propagation.  With a zero threshold nothing is fixed and the heuristic
degenerates to an exact solve of the full model.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional, Protocol

from .core import Instance, Solution, is_served, objective, sinr, verify_solution
from .formulation import MilpModel, VarRole, solution_from_point
from .lp import (
    BoundOverrides,
    InstanceInfeasibleError,
    LpBackend,
    LpResult,
    MipResult,
    solve_lp,
)
from .presolve import apply_fixings, propagate_fixings


@dataclass(frozen=True)
class HeuristicConfig:
    """Threshold below which a fractional activation counts as zero,
    plus the budget for the reduced integer solve (None = unlimited).

    The default threshold sits one order of magnitude above the usual
    LP feasibility tolerance and far below any meaningful activation.
    """

    zero_threshold: float = 1e-4
    sub_mip_node_limit: Optional[int] = None
    sub_mip_time_limit: Optional[float] = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.zero_threshold < 0.5:
            raise ValueError("zero_threshold must lie in [0, 0.5)")


class MipSolver(Protocol):
    """Integer-solve contract used for step 4 of the heuristic."""

    def __call__(self, model: MilpModel,
                 bound_overrides: Optional[BoundOverrides] = None,
                 node_limit: Optional[int] = None,
                 time_limit: Optional[float] = None) -> MipResult:
        ...


@dataclass(frozen=True)
class HeuristicOutcome:
    solution: Solution
    upper_bound: float
    wall_time: float
    fixed_count: int


def fixing_heuristic(
    inst: Instance,
    model: MilpModel,
    cfg: HeuristicConfig,
    lp_backend: LpBackend,
    mip_solver: MipSolver,
    lp_result: Optional[LpResult] = None,
) -> Optional[HeuristicOutcome]:
    """Run the four rounding steps; ``None`` means no solution was found
    within budget (the reduced problem may be infeasible after an
    over-aggressive threshold, in which case the caller must fall back
    to another bound).

    ``lp_result`` lets the caller reuse an already-solved root
    relaxation of the same model.
    """
    start = time.perf_counter()
    lp = lp_result if lp_result is not None else solve_lp(lp_backend, model, None)
    if lp.status == "infeasible":
        raise InstanceInfeasibleError("instance infeasible: LP relaxation has no solution")
    if lp.status != "optimal":
        raise RuntimeError(f"LP relaxation failed: {lp.status} {lp.diagnostics}")

    near_zero = frozenset(
        var.key
        for col, var in enumerate(model.variables)
        if var.role is VarRole.Z
        and var.ub > var.lb
        and lp.primal[col] < cfg.zero_threshold
    )
    prop = propagate_fixings(model, near_zero, inst.coverage_target)
    if prop.infeasible:
        return None
    reduced = apply_fixings(model, prop.fixed_cols)

    result = mip_solver(reduced,
                        node_limit=cfg.sub_mip_node_limit,
                        time_limit=cfg.sub_mip_time_limit)
    if result.point is None:
        return None
    try:
        sol = solution_from_point(reduced, result.point)
    except ValueError:
        return None
    if not verify_solution(inst, sol).feasible:
        return None
    ub = objective(inst, sol)
    return HeuristicOutcome(
        solution=sol,
        upper_bound=ub,
        wall_time=time.perf_counter() - start,
        fixed_count=len(near_zero),
    )


def trivial_upper_bound(inst: Instance) -> Optional[tuple[Solution, float]]:
    """Fallback bound: the everything-on-at-full-power solution, when it
    verifies feasible.  Returns None otherwise (interference may make it
    infeasible even when the instance is not)."""
    top = inst.n_levels - 1
    levels = tuple([top] * inst.n_transmitters)
    server: list[Optional[int]] = [None] * inst.n_testpoints
    for t in range(inst.n_testpoints):
        best, best_ratio = None, -1.0
        for b in range(inst.n_transmitters):
            if is_served(inst, levels, t, b):
                ratio = sinr(inst, levels, t, b)
                if ratio > best_ratio:
                    best, best_ratio = b, ratio
        server[t] = best
    sol = Solution(server=tuple(server), level=levels)
    if not verify_solution(inst, sol).feasible:
        return None
    return sol, objective(inst, sol)
