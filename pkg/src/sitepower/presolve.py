"""Reduced-cost fixing and big-M tightening.

Given an optimal LP relaxation (lower bound ``lb`` plus reduced costs)
and a certified upper bound ``ub > lb``, any activation column whose
reduced cost reaches the gap can be fixed to zero while preserving at
least one optimum.  Fixings shrink the largest power some transmitters
can emit, which in turn shrinks every big-M; a second stage keeps only
the strongest potential interferers per testpoint, where the interferer
budget comes from the number of transmitters affordable under ``ub``.

Only the techniques above are implemented -- no generic presolve.
All operations are pure on immutable inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .core import Instance
from .formulation import (
    BigMTable,
    BigMTier,
    Constraint,
    MilpModel,
    RowTag,
    VarRole,
    big_m_base,
)
from .lp import LpResult

#: Slack in the fixing comparison; a column is fixed also when its
#: reduced cost equals the gap exactly.
RCF_EPSILON = 1e-9


@dataclass(frozen=True)
class RcfReport:
    """What reduced-cost fixing did and what it bought.

    ``power_caps[b]`` is the post-fixing cap on transmitter b's power in
    watts (0 when every level was fixed, meaning b can never transmit);
    the before/after statistics are filled in by the pipeline once the
    tightened model has been rebuilt.
    """

    fixed_z: frozenset[tuple[int, int]]
    affected_transmitters: frozenset[int]
    surviving_levels: dict[int, frozenset[int]]
    power_caps: np.ndarray
    lb: float
    ub: float
    gamma: Optional[int] = None
    bigm_before: float = float("nan")
    bigm_after: float = float("nan")
    nonzeros_before: int = 0
    nonzeros_after: int = 0
    fixed_x_count: int = 0
    infeasible: bool = False

    def to_text(self) -> str:
        lines = [
            "reduced-cost fixing report",
            f"  bounds            lb={self.lb:.9g} ub={self.ub:.9g} gap={self.ub - self.lb:.9g}",
            f"  fixed z columns   {len(self.fixed_z)}",
            f"  affected sites    {sorted(self.affected_transmitters)}",
            f"  implied x fixings {self.fixed_x_count}",
            f"  interferer budget {'-' if self.gamma is None else self.gamma}",
            f"  non-zeros         {self.nonzeros_before} -> {self.nonzeros_after}",
            f"  max big-M         {self.bigm_before:.6f} -> {self.bigm_after:.6f}",
        ]
        if self.infeasible:
            lines.append("  propagation proves the model infeasible")
        for b, l in sorted(self.fixed_z):
            lines.append(f"    fixed Z_{b}_{l}")
        return "\n".join(lines)


def reduced_cost_fix(model: MilpModel, lp: LpResult, lb: float, ub: float,
                     epsilon: float = RCF_EPSILON) -> RcfReport:
    """Fix to zero every activation variable whose reduced cost reaches
    ``ub - lb`` (within ``epsilon``).  Only Z columns are candidates.

    Requires ``ub > lb`` and ``lb`` equal to the LP optimum.
    """
    if not ub > lb:
        raise ValueError(f"no fixing gap: ub={ub} must exceed lb={lb}")
    if lp.status != "optimal":
        raise ValueError(f"need an optimal LP relaxation, got status {lp.status!r}")
    if abs(lp.objective - lb) > 1e-6 * max(1.0, abs(lb)):
        raise ValueError(f"lb={lb} does not match the LP objective {lp.objective}")

    gap = ub - lb
    fixed: set[tuple[int, int]] = set()
    for col, var in enumerate(model.variables):
        if var.role is not VarRole.Z:
            continue
        if var.ub <= var.lb:  # already fixed
            continue
        if lp.reduced_costs[col] >= gap - epsilon:
            fixed.add(var.key)

    affected = frozenset(b for b, _ in fixed)
    n_levels = model.n_levels
    surviving = {
        b: frozenset(l for l in range(n_levels) if (b, l) not in fixed)
        for b in affected
    }
    # Power values live on the instance, not the model; the caps are
    # resolved lazily by `resolve_power_caps`.
    caps = np.full(model.n_transmitters, np.nan)
    return RcfReport(
        fixed_z=frozenset(fixed),
        affected_transmitters=affected,
        surviving_levels=surviving,
        power_caps=caps,
        lb=float(lb),
        ub=float(ub),
    )


def resolve_power_caps(inst: Instance, report: RcfReport) -> RcfReport:
    """Fill the per-transmitter power caps from the instance's power
    values: full power when unaffected, the largest surviving level
    otherwise, zero when nothing survives."""
    caps = np.full(inst.n_transmitters, float(inst.power_values[-1]))
    for b in report.affected_transmitters:
        levels = report.surviving_levels[b]
        caps[b] = max((float(inst.power_values[l]) for l in levels), default=0.0)
    return replace(report, power_caps=caps)


def tighten_big_m_prime(inst: Instance, report: RcfReport) -> BigMTable:
    """First tightening: weight each interferer by the largest power it
    can still emit instead of the global maximum."""
    report = _with_caps(inst, report)
    delta = inst.sinr_threshold
    weighted = inst.fading * report.power_caps[None, :] * inst.scale_factor
    total = weighted.sum(axis=1)
    values = delta * inst.noise_scaled + delta * (total[:, None] - weighted)
    return BigMTable(values=values, tier=BigMTier.PRIME, power_caps=report.power_caps.copy())


def gamma_from_ub(inst: Instance, ub: float) -> int:
    """Largest number of simultaneously active transmitters affordable
    under ``ub``: every activation costs at least the cheapest level."""
    if ub < 0:
        raise ValueError("upper bound must be nonnegative")
    cheapest = float(inst.level_costs[0])
    # tiny slack so exact integer ratios are not floored down by fp noise
    return min(inst.n_transmitters, int(math.floor(ub / cheapest + 1e-9)))


def strongest_interferers(inst: Instance, report: RcfReport, t: int, gamma: int) -> frozenset[int]:
    """The ``gamma`` transmitters with the largest possible received
    power at testpoint ``t`` (cap times gain), ties to the lowest index."""
    if not 0 <= gamma <= inst.n_transmitters:
        raise ValueError(f"gamma {gamma} outside [0, {inst.n_transmitters}]")
    report = _with_caps(inst, report)
    scores = inst.fading[t] * report.power_caps * inst.scale_factor
    order = np.argsort(-scores, kind="stable")
    return frozenset(int(b) for b in order[:gamma])


def tighten_big_m_double_prime(inst: Instance, report: RcfReport, gamma: int) -> BigMTable:
    """Second tightening: per row (t, beta), only the strongest
    ``min(gamma, B-1)`` potential interferers *other than beta* are
    summed.  At most ``gamma`` transmitters can be active, and the row's
    own transmitter never interferes with itself, so the sum bounds the
    interference of every activation pattern that respects the fixings
    and the budget."""
    report = _with_caps(inst, report)
    n_b = inst.n_transmitters
    keep = min(gamma, n_b - 1)
    delta = inst.sinr_threshold
    mu = inst.noise_scaled
    values = np.empty((inst.n_testpoints, n_b))
    interferer_sets = []
    scores_all = inst.fading * report.power_caps[None, :] * inst.scale_factor
    for t in range(inst.n_testpoints):
        scores = scores_all[t]
        order = np.argsort(-scores, kind="stable")
        interferer_sets.append(frozenset(int(b) for b in order[:min(gamma, n_b)]))
        ranked = scores[order]
        prefix = np.concatenate(([0.0], np.cumsum(ranked)))
        pos = np.empty(n_b, dtype=np.int64)
        pos[order] = np.arange(n_b)
        for beta in range(n_b):
            if pos[beta] < keep + 1:
                # beta sits among the kept interferers: take one more
                # ranked entry and drop beta's own score
                total = prefix[min(keep + 1, n_b)] - scores[beta]
            else:
                total = prefix[keep]
            values[t, beta] = delta * mu + delta * total
    return BigMTable(values=values, tier=BigMTier.DOUBLE_PRIME,
                     power_caps=report.power_caps.copy(),
                     interferer_sets=tuple(interferer_sets))


def _with_caps(inst: Instance, report: RcfReport) -> RcfReport:
    if np.any(np.isnan(report.power_caps)):
        return resolve_power_caps(inst, report)
    return report


@dataclass(frozen=True)
class PropagationResult:
    fixed_cols: frozenset[int]
    infeasible: bool


def propagate_fixings(model: MilpModel, fixed_z: frozenset[tuple[int, int]],
                      coverage_target: Optional[int] = None) -> PropagationResult:
    """Implications of activation fixings: a transmitter with every level
    fixed can never serve, so all its assignment columns drop too.  When
    the surviving assignments cannot reach the coverage target the model
    is flagged globally infeasible."""
    if coverage_target is None:
        cov = [row for row in model.constraints if row.tag is RowTag.COVERAGE]
        coverage_target = int(cov[0].rhs) if cov else 0
    fixed_by_b: dict[int, set[int]] = {}
    for b, l in fixed_z:
        fixed_by_b.setdefault(b, set()).add(l)
    dead = {b for b, levels in fixed_by_b.items() if len(levels) == model.n_levels}

    cols: set[int] = {model.z_col(b, l) for b, l in fixed_z}
    for b in dead:
        for t in range(model.n_testpoints):
            cols.add(model.x_col(t, b))

    lb, ub = model.bounds_arrays()
    reachable = 0
    for t in range(model.n_testpoints):
        for b in range(model.n_transmitters):
            col = model.x_col(t, b)
            if b not in dead and col not in cols and ub[col] > lb[col]:
                reachable += 1
                break
    return PropagationResult(frozenset(cols), reachable < coverage_target)


def apply_fixings(model: MilpModel, fixed_cols: frozenset[int]) -> MilpModel:
    """New model with the given columns pinned to zero and their
    coefficients dropped from every row.  Rows left empty are kept only
    when they still constrain something (an empty violated row encodes
    infeasibility for the backends)."""
    variables = [
        replace(v, ub=0.0) if i in fixed_cols else v
        for i, v in enumerate(model.variables)
    ]
    rows: list[Constraint] = []
    for row in model.constraints:
        mask = np.array([c not in fixed_cols for c in row.cols], dtype=bool)
        if mask.all():
            rows.append(row)
            continue
        cols = row.cols[mask]
        vals = row.vals[mask]
        if cols.size == 0:
            satisfied = (
                (row.sense == "<=" and 0.0 <= row.rhs + 1e-12)
                or (row.sense == ">=" and 0.0 >= row.rhs - 1e-12)
                or (row.sense == "==" and abs(row.rhs) <= 1e-12)
            )
            if satisfied:
                continue
        rows.append(Constraint(cols=cols, vals=vals, sense=row.sense,
                               rhs=row.rhs, tag=row.tag, key=row.key))
    return MilpModel(
        variables=variables,
        constraints=rows,
        n_testpoints=model.n_testpoints,
        n_transmitters=model.n_transmitters,
        n_levels=model.n_levels,
        has_slack_vars=model.has_slack_vars,
    )


def run_rcf_pipeline(
    inst: Instance,
    model: MilpModel,
    base_table: BigMTable,
    lp: LpResult,
    ub: float,
    builder: Callable[..., MilpModel],
    use_strongest_interferers: bool = True,
) -> tuple[MilpModel, RcfReport, BigMTable]:
    """Full presolve: fix by reduced cost, tighten the big-M (both
    stages), rebuild the model with the tight table, and propagate the
    fixings into it.  Returns the reduced model, the completed report
    and the table actually used.

    The strongest-interferer stage needs a certified upper bound; it is
    skipped when ``use_strongest_interferers`` is false.
    """
    report = reduced_cost_fix(model, lp, lp.objective, ub)
    report = resolve_power_caps(inst, report)
    table = tighten_big_m_prime(inst, report)
    gamma: Optional[int] = None
    if use_strongest_interferers:
        gamma = gamma_from_ub(inst, ub)
        table = tighten_big_m_double_prime(inst, report, gamma)
    rebuilt = builder(inst, table)
    prop = propagate_fixings(rebuilt, report.fixed_z, inst.coverage_target)
    reduced = apply_fixings(rebuilt, prop.fixed_cols)
    report = replace(
        report,
        gamma=gamma,
        bigm_before=base_table.max_value,
        bigm_after=table.max_value,
        nonzeros_before=model.nnz,
        nonzeros_after=reduced.nnz,
        fixed_x_count=len(prop.fixed_cols) - len(report.fixed_z),
        infeasible=prop.infeasible,
    )
    return reduced, report, table
