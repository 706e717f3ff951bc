"""LP-relaxation backends behind one small contract.

A backend solves the continuous relaxation of a
:class:`~sitepower.formulation.MilpModel` under temporary bound
overrides and reports status, primal values and reduced costs
(minimization convention: nonnegative on columns nonbasic at lower
bound in an optimal basis).

Two implementations are provided: a dense bounded-variable simplex
(reference; exact reduced costs, fully deterministic, adequate up to a
few hundred rows) and a sparse HiGHS adapter via scipy for large
models.  ``solve_lp`` wraps either one and enforces the result
invariants; backend failures surface as status ``limit`` with
diagnostics, never as silent garbage.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Optional, Protocol

import numpy as np
import scipy.sparse as sp
from scipy.optimize import Bounds, LinearConstraint, linprog, milp

from .formulation import MilpModel

BoundOverrides = dict[int, tuple[float, float]]

LP_FEAS_TOL = 1e-7
LP_RESULT_TOL = 1e-6

#: Environment variable selecting the default backend (auto|reference|highs).
BACKEND_ENV_VAR = "SITEPOWER_LP_BACKEND"

#: Auto rule: tiny models go to the dense reference simplex (it beats the
#: scipy call overhead there), everything else to HiGHS.
_REFERENCE_CELL_LIMIT = 5_000

#: Hard size cap for the dense backend regardless of selection.
_DENSE_CELL_LIMIT = 2_000_000


class BackendError(RuntimeError):
    """An LP/MIP engine failed to produce a usable, contract-conforming result."""


class InstanceInfeasibleError(RuntimeError):
    """The instance admits no feasible assignment."""


@dataclass(frozen=True)
class LpResult:
    status: str  # optimal | infeasible | unbounded | limit
    objective: float
    primal: np.ndarray
    reduced_costs: np.ndarray
    diagnostics: str = ""

    def __post_init__(self) -> None:
        if self.status not in ("optimal", "infeasible", "unbounded", "limit"):
            raise ValueError(f"unknown LP status {self.status!r}")


@dataclass(frozen=True)
class MipResult:
    status: str  # optimal | feasible | infeasible | no_solution
    objective: Optional[float]
    point: Optional[np.ndarray]
    node_count: int = 0
    diagnostics: str = ""


class LpBackend(Protocol):
    name: str

    def solve(self, model: MilpModel, bound_overrides: Optional[BoundOverrides] = None) -> LpResult:
        ...


def _effective_bounds(model: MilpModel, overrides: Optional[BoundOverrides]) -> tuple[np.ndarray, np.ndarray]:
    lb, ub = model.bounds_arrays()
    lb, ub = lb.copy(), ub.copy()
    for col, (low, high) in (overrides or {}).items():
        lb[col], ub[col] = low, high
    return lb, ub


# ---------------------------------------------------------------------------
# Reference backend: dense bounded-variable two-phase simplex
# ---------------------------------------------------------------------------

_REFACTOR_EVERY = 64
_BLAND_AFTER_DEGENERATE = 400


def _standard_form(model: MilpModel) -> dict:
    """Dense [A | slack] block with one slack column per row: +1 on <=
    rows, -1 on >= rows, +1 pinned to [0, 0] on equality rows (so the
    all-slack basis always exists and infeasibility repair handles the
    rest).  Cached on the model; bound overrides never touch it."""
    cached = model._cache.get("simplex_std")
    if cached is not None:
        return cached
    a, senses, rhs = model.to_csr()
    m, n = a.shape
    a_std = np.zeros((m, n + m))
    a_std[:, :n] = a.toarray()
    slack_lo = np.zeros(m)
    slack_hi = np.full(m, np.inf)
    for i in range(m):
        if senses[i] == ">=":
            a_std[i, n + i] = -1.0
        else:
            a_std[i, n + i] = 1.0
            if senses[i] == "==":
                slack_hi[i] = 0.0
    std = {
        "a": a_std,
        "rhs": rhs.astype(np.float64).copy(),
        "n": n,
        "m": m,
        "c_full": np.concatenate([model.objective_vector(), np.zeros(m)]),
        "slack_lo": slack_lo,
        "slack_hi": slack_hi,
    }
    model._cache["simplex_std"] = std
    return std


def _bounded_simplex(full: np.ndarray, rhs: np.ndarray, cost_real: np.ndarray,
                     lo: np.ndarray, hi: np.ndarray,
                     basis0: np.ndarray, at_upper0: np.ndarray,
                     tol: float = 1e-9, max_iter: Optional[int] = None):
    """Primal simplex on ``full @ x == rhs`` with box bounds, started
    from a given (not necessarily primal-feasible) basis.

    The repair phase minimizes the total bound violation of the basic
    columns (a piecewise-linear phase-1 cost recomputed each pivot, so
    the basis may start anywhere -- the all-slack crash basis or a warm
    basis inherited after a bound change).  Both phases share one
    feasibility-aware ratio test: an out-of-bounds basic blocks at the
    bound it is approaching, never beyond it.

    Returns (status, x, objective, reduced_costs, basis, at_upper,
    iterations); x covers all columns of ``full``.
    """
    m, n_total = full.shape
    feas_tol = 1e-9

    basis = basis0.copy()
    in_basis = np.zeros(n_total, dtype=bool)
    in_basis[basis] = True
    at_upper = at_upper0.copy()
    at_upper[in_basis] = False

    x = np.where(at_upper, np.where(np.isfinite(hi), hi, 0.0),
                 np.where(np.isfinite(lo), lo, 0.0))
    try:
        b_inv = np.linalg.inv(full[:, basis])
    except np.linalg.LinAlgError:
        return "singular", x, float("nan"), None, basis, at_upper, 0

    def recompute_basics() -> None:
        mask = ~in_basis
        x[basis] = b_inv @ (rhs - full[:, mask] @ x[mask])

    recompute_basics()

    if max_iter is None:
        max_iter = 5000 + 50 * n_total
    fixed = hi - lo <= tol
    iters = 0
    block_tol = 1e-9   # |direction| below this never blocks the step
    pivot_tol = 1e-7   # weak pivots trigger a refactorization first
    since_refactor = 0

    for phase in ("repair", "optimize"):
        degenerate = 0
        use_bland = False
        while True:
            xb = x[basis]
            lo_b, hi_b = lo[basis], hi[basis]
            if phase == "repair":
                below = xb < lo_b - feas_tol
                above = xb > hi_b + feas_tol
                if not below.any() and not above.any():
                    break
                cost = np.zeros(n_total)
                cost[basis[below]] = -1.0
                cost[basis[above]] = 1.0
            else:
                cost = cost_real

            iters += 1
            if iters > max_iter:
                return "limit", x, float("nan"), None, basis, at_upper, iters
            if since_refactor >= _REFACTOR_EVERY:
                b_inv = np.linalg.inv(full[:, basis])
                recompute_basics()
                since_refactor = 0
                continue  # re-derive phase/cost from the refreshed values

            y = cost[basis] @ b_inv
            red = cost - y @ full
            movable = ~in_basis & ~fixed
            down_ok = movable & ~at_upper & (red < -tol)
            up_ok = movable & at_upper & (red > tol)
            eligible_mask = down_ok | up_ok
            if not eligible_mask.any():
                if since_refactor:  # confirm on fresh numbers before concluding
                    b_inv = np.linalg.inv(full[:, basis])
                    recompute_basics()
                    since_refactor = 0
                    continue
                if phase == "repair":
                    return "infeasible", x, float("nan"), None, basis, at_upper, iters
                break
            eligible = np.nonzero(eligible_mask)[0]
            if use_bland:
                j = int(eligible[0])
            else:
                j = int(eligible[np.argmax(np.abs(red[eligible]))])
            sigma = -1.0 if at_upper[j] else 1.0

            d = b_inv @ full[:, j]
            g = sigma * d
            # Feasibility-aware ratio test on the basics.  Falling
            # columns block at the nearest bound below their value;
            # rising columns at the nearest bound above (an infeasible
            # basic therefore blocks exactly when it lands on the bound
            # it violates, and never constrains in the worsening
            # direction).
            falling = g > block_tol
            rising = g < -block_tol
            below_lo = xb < lo_b - feas_tol
            above_hi = xb > hi_b + feas_tol
            fall_target = np.where(above_hi, hi_b, lo_b)
            rise_target = np.where(below_lo, lo_b, hi_b)
            with np.errstate(divide="ignore", invalid="ignore"):
                t_fall = np.where(falling & ~below_lo, (xb - fall_target) / g, np.inf)
                t_rise = np.where(rising & ~above_hi, (xb - rise_target) / g, np.inf)
            t_rows = np.minimum(np.nan_to_num(t_fall, nan=np.inf, posinf=np.inf),
                                np.nan_to_num(t_rise, nan=np.inf, posinf=np.inf))
            step_own = hi[j] - lo[j]
            row_min = float(t_rows.min()) if m else np.inf
            t_best = min(step_own, row_min)
            if not np.isfinite(t_best):
                if since_refactor:  # rule out a stale inverse first
                    b_inv = np.linalg.inv(full[:, basis])
                    recompute_basics()
                    since_refactor = 0
                    continue
                if phase == "optimize":
                    return "unbounded", x, float("-inf"), None, basis, at_upper, iters
                # repair cost is bounded below by zero: cannot happen
                return "limit", x, float("nan"), None, basis, at_upper, iters
            t_best = max(t_best, 0.0)

            leave_pos = -1
            if row_min <= step_own:
                cand = np.nonzero(t_rows <= t_best + 1e-12)[0]
                leave_pos = int(cand[np.argmax(np.abs(d[cand]))])
                # land exactly on the bound the ratio test targeted
                if g[leave_pos] > 0:
                    leave_value = fall_target[leave_pos]
                    leave_to_upper = bool(above_hi[leave_pos])
                else:
                    leave_value = rise_target[leave_pos]
                    leave_to_upper = not below_lo[leave_pos]
                if abs(d[leave_pos]) < pivot_tol and since_refactor:
                    # weak pivot: retry the whole step on a fresh inverse
                    b_inv = np.linalg.inv(full[:, basis])
                    recompute_basics()
                    since_refactor = 0
                    continue

            if t_best < 1e-12:
                degenerate += 1
                if degenerate > _BLAND_AFTER_DEGENERATE:
                    use_bland = True

            x[basis] -= g * t_best
            x[j] += sigma * t_best
            if leave_pos < 0:
                # bound-to-bound flip, basis unchanged
                at_upper[j] = not at_upper[j]
                x[j] = hi[j] if at_upper[j] else lo[j]
            else:
                out = basis[leave_pos]
                x[out] = leave_value
                at_upper[out] = leave_to_upper
                in_basis[out] = False
                in_basis[j] = True
                basis[leave_pos] = j
                piv = d[leave_pos]
                row = b_inv[leave_pos, :] / piv
                b_inv -= np.outer(d, row)
                b_inv[leave_pos, :] = row
                since_refactor += 1
                if abs(piv) < pivot_tol:
                    # keep the damage bounded: refresh immediately
                    b_inv = np.linalg.inv(full[:, basis])
                    recompute_basics()
                    since_refactor = 0

        b_inv = np.linalg.inv(full[:, basis])
        recompute_basics()
        since_refactor = 0

    cost = cost_real
    y = cost[basis] @ b_inv
    red = cost - y @ full
    obj = float(cost @ x)
    return "optimal", x.copy(), obj, red, basis, at_upper, iters


@dataclass(frozen=True)
class SimplexBasis:
    """Restartable simplex state: basic column indices plus the at-upper
    flags of the nonbasic columns (standard-form column space)."""

    basis: np.ndarray
    at_upper: np.ndarray


class DenseSimplexBackend:
    """Reference backend: deterministic dense simplex with exact reduced
    costs.  Intended for small models (a few hundred rows); supports
    warm starts from a previous basis after bound changes."""

    name = "reference"

    def __init__(self, max_iter: Optional[int] = None):
        self.max_iter = max_iter

    def _run(self, model: MilpModel, bound_overrides: Optional[BoundOverrides],
             start: Optional[SimplexBasis]) -> tuple[LpResult, Optional[SimplexBasis]]:
        if model.n_rows * model.n_cols > _DENSE_CELL_LIMIT:
            raise BackendError(
                f"model too large for the dense reference backend "
                f"({model.n_rows} rows x {model.n_cols} cols); use highs")
        std = _standard_form(model)
        n, m = std["n"], std["m"]
        lb, ub = _effective_bounds(model, bound_overrides)
        if np.any(lb > ub):
            return LpResult("infeasible", float("nan"), np.zeros(n), np.zeros(n),
                            diagnostics="contradictory bound overrides"), None
        lo = np.concatenate([lb, std["slack_lo"]])
        hi = np.concatenate([ub, std["slack_hi"]])
        if start is None:
            basis0 = np.arange(n, n + m)
            at_upper0 = np.zeros(n + m, dtype=bool)
        else:
            basis0, at_upper0 = start.basis, start.at_upper
        status, x, obj, red, basis, at_upper, iters = _bounded_simplex(
            std["a"], std["rhs"], std["c_full"], lo, hi, basis0, at_upper0,
            max_iter=self.max_iter)
        if status == "singular" and start is not None:
            return self._run(model, bound_overrides, None)
        if status == "optimal":
            return (LpResult("optimal", obj, x[:n], red[:n]),
                    SimplexBasis(basis, at_upper))
        if status == "infeasible":
            return LpResult("infeasible", float("nan"), np.zeros(n), np.zeros(n)), None
        if status == "unbounded":
            return LpResult("unbounded", float("-inf"), np.zeros(n), np.zeros(n)), None
        return LpResult("limit", float("nan"), np.zeros(n), np.zeros(n),
                        diagnostics=f"simplex iteration limit after {iters} pivots"), None

    def solve(self, model: MilpModel, bound_overrides: Optional[BoundOverrides] = None) -> LpResult:
        res, _ = self._run(model, bound_overrides, None)
        return res

    def solve_warm(self, model: MilpModel, bound_overrides: Optional[BoundOverrides],
                   start: Optional[SimplexBasis]) -> tuple[LpResult, Optional[SimplexBasis]]:
        """Like ``solve`` but restarting from ``start`` when given, and
        returning the optimal basis for reuse after further bound
        changes.  Enforces the same result contract as ``solve_lp``; a
        warm result failing it falls back to a cold start."""
        res, basis = self._run(model, bound_overrides, start)
        checked = _check_result(model, bound_overrides, res)
        if checked.status != res.status and start is not None:
            return self.solve_warm(model, bound_overrides, None)
        return checked, (basis if checked.status == "optimal" else None)


# ---------------------------------------------------------------------------
# HiGHS backends (scipy)
# ---------------------------------------------------------------------------

def _split_rows(model: MilpModel) -> dict:
    """Rows split for scipy: >= rows are negated into the <= block."""
    cached = model._cache.get("highs_std")
    if cached is not None:
        return cached
    a, senses, rhs = model.to_csr()
    le = senses == "<="
    ge = senses == ">="
    eq = senses == "=="
    blocks = []
    ub_rhs = []
    if le.any():
        blocks.append(a[le])
        ub_rhs.append(rhs[le])
    if ge.any():
        blocks.append(-a[ge])
        ub_rhs.append(-rhs[ge])
    std = {
        "a_ub": sp.vstack(blocks, format="csr") if blocks else None,
        "b_ub": np.concatenate(ub_rhs) if ub_rhs else None,
        "a_eq": a[eq] if eq.any() else None,
        "b_eq": rhs[eq] if eq.any() else None,
    }
    model._cache["highs_std"] = std
    return std


class HighsBackend:
    """Sparse LP backend via scipy's HiGHS wrapper; reduced costs are the
    sum of the lower- and upper-bound marginals."""

    name = "highs"

    def solve(self, model: MilpModel, bound_overrides: Optional[BoundOverrides] = None) -> LpResult:
        std = _split_rows(model)
        lb, ub = _effective_bounds(model, bound_overrides)
        if np.any(lb > ub):
            return LpResult("infeasible", float("nan"), np.zeros(model.n_cols),
                            np.zeros(model.n_cols), diagnostics="contradictory bound overrides")
        res = linprog(
            c=model.objective_vector(),
            A_ub=std["a_ub"], b_ub=std["b_ub"],
            A_eq=std["a_eq"], b_eq=std["b_eq"],
            bounds=np.column_stack([lb, ub]),
            method="highs",
        )
        n = model.n_cols
        if res.status == 0:
            reduced = np.asarray(res.lower.marginals) + np.asarray(res.upper.marginals)
            return LpResult("optimal", float(res.fun), np.asarray(res.x), reduced)
        if res.status == 2:
            return LpResult("infeasible", float("nan"), np.zeros(n), np.zeros(n))
        if res.status == 3:
            return LpResult("unbounded", float("-inf"), np.zeros(n), np.zeros(n))
        return LpResult("limit", float("nan"), np.zeros(n), np.zeros(n),
                        diagnostics=f"HiGHS status {res.status}: {res.message}")


class HighsMipSolver:
    """Integer solves via scipy's HiGHS MIP wrapper; used as the sub-MIP
    engine on models too large for the built-in branch-and-bound."""

    name = "highs"

    def __call__(self, model: MilpModel,
                 bound_overrides: Optional[BoundOverrides] = None,
                 node_limit: Optional[int] = None,
                 time_limit: Optional[float] = None) -> MipResult:
        a, senses, rhs = model.to_csr()
        lower = np.where(senses == "<=", -np.inf, rhs)
        upper = np.where(senses == ">=", np.inf, rhs)
        lb, ub = _effective_bounds(model, bound_overrides)
        if np.any(lb > ub):
            return MipResult("infeasible", None, None, diagnostics="contradictory bound overrides")
        options = {"mip_rel_gap": 0.0}
        if node_limit is not None:
            options["node_limit"] = int(node_limit)
        if time_limit is not None:
            options["time_limit"] = float(time_limit)
        res = milp(
            c=model.objective_vector(),
            constraints=LinearConstraint(a, lower, upper),
            integrality=np.ones(model.n_cols),
            bounds=Bounds(lb, ub),
            options=options,
        )
        nodes = int(getattr(res, "mip_node_count", 0) or 0)
        if res.status == 0:
            return MipResult("optimal", float(res.fun), np.asarray(res.x), nodes)
        if res.status == 1 and res.x is not None:
            return MipResult("feasible", float(res.fun), np.asarray(res.x), nodes,
                             diagnostics="budget exhausted before optimality proof")
        if res.status == 2:
            return MipResult("infeasible", None, None, nodes)
        return MipResult("no_solution", None, None, nodes,
                         diagnostics=f"HiGHS MIP status {res.status}: {res.message}")


# ---------------------------------------------------------------------------
# Contract wrapper and backend selection
# ---------------------------------------------------------------------------

def _check_result(model: MilpModel, bound_overrides: Optional[BoundOverrides],
                  res: LpResult) -> LpResult:
    if res.status != "optimal":
        return res
    if not (np.all(np.isfinite(res.primal)) and np.isfinite(res.objective)):
        return LpResult("limit", res.objective, res.primal, res.reduced_costs,
                        diagnostics="backend returned non-finite values")
    lb, ub = _effective_bounds(model, bound_overrides)
    if (np.any(res.primal < lb - LP_RESULT_TOL)
            or np.any(res.primal > ub + LP_RESULT_TOL)):
        return LpResult("limit", res.objective, res.primal, res.reduced_costs,
                        diagnostics="backend primal violates column bounds")
    recomputed = float(model.objective_vector() @ res.primal)
    if abs(recomputed - res.objective) > LP_RESULT_TOL * max(1.0, abs(recomputed)):
        return LpResult("limit", res.objective, res.primal, res.reduced_costs,
                        diagnostics="backend objective inconsistent with primal")
    return res


def solve_lp(backend: LpBackend, model: MilpModel,
             bound_overrides: Optional[BoundOverrides] = None) -> LpResult:
    """Run a backend and enforce the result contract: on ``optimal`` the
    primal must respect bounds and reproduce the objective within
    ``LP_RESULT_TOL``.  Violations come back as status ``limit``."""
    try:
        res = backend.solve(model, bound_overrides)
    except Exception as exc:  # backend failure is data, not a crash
        return LpResult("limit", float("nan"), np.zeros(model.n_cols),
                        np.zeros(model.n_cols), diagnostics=f"backend raised: {exc}")
    return _check_result(model, bound_overrides, res)


def get_lp_backend(name: Optional[str] = None, model: Optional[MilpModel] = None) -> LpBackend:
    """Resolve a backend by name, ``SITEPOWER_LP_BACKEND``, or the auto
    rule (reference simplex for small models, HiGHS above the dense cell
    limit)."""
    choice = (name or os.environ.get(BACKEND_ENV_VAR) or "auto").lower()
    if choice == "reference":
        return DenseSimplexBackend()
    if choice == "highs":
        return HighsBackend()
    if choice != "auto":
        raise ValueError(f"unknown LP backend {choice!r}")
    if model is not None and model.n_rows * model.n_cols <= _REFERENCE_CELL_LIMIT:
        return DenseSimplexBackend()
    return HighsBackend()
