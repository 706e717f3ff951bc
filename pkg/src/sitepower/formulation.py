"""Solver-agnostic sparse 0-1 models for the coverage problem.

Two builders are provided: :func:`build_natural` produces the plain
big-M model (assignment x, activation z), :func:`build_reformulated`
additionally introduces one binary slack w per (testpoint, transmitter)
that absorbs the big-M activation of the coverage row.  Both store every
coverage row as a ``<=`` row with all variable terms on the left-hand
side, so a model is a plain list of sparse rows plus a column table.

Models are immutable after build; reductions produce new models.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Optional

import numpy as np
import scipy.sparse as sp

from .core import Instance, Solution


class VarRole(enum.Enum):
    X = "X"  # assignment: testpoint t served by transmitter b
    Z = "Z"  # activation: transmitter b emits at power level l
    W = "W"  # reformulation slack per (t, b)


class RowTag(enum.Enum):
    SINR = "SINR"
    COVERAGE = "COVERAGE"
    ONE_SERVER = "ONE_SERVER"
    ONE_LEVEL = "ONE_LEVEL"
    VUB = "VUB"
    W_DEF = "W_DEF"


class BigMTier(enum.Enum):
    BASE = "M"
    PRIME = "M'"
    DOUBLE_PRIME = "M''"


#: Branch-priority metadata assigning w above x above z.
PRIORITY_W_FIRST: dict[VarRole, int] = {VarRole.W: 2, VarRole.X: 1, VarRole.Z: 0}


@dataclass(frozen=True)
class Variable:
    name: str
    role: VarRole
    key: tuple[int, int]
    lb: float = 0.0
    ub: float = 1.0
    objective: float = 0.0
    priority: int = 0
    is_integer: bool = True


@dataclass(frozen=True)
class Constraint:
    """One sparse row: ``sum(vals[k] * x[cols[k]]) sense rhs``."""

    cols: np.ndarray
    vals: np.ndarray
    sense: str  # one of "<=", ">=", "=="
    rhs: float
    tag: RowTag
    key: Optional[tuple] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "cols", np.asarray(self.cols, dtype=np.int64))
        object.__setattr__(self, "vals", np.asarray(self.vals, dtype=np.float64))
        if self.cols.shape != self.vals.shape:
            raise ValueError("coefficient triplet arrays must align")
        if self.sense not in ("<=", ">=", "=="):
            raise ValueError(f"unknown row sense {self.sense!r}")

    @property
    def nnz(self) -> int:
        return int(self.cols.size)


@dataclass
class MilpModel:
    """Sparse 0-1 minimization model with role/key metadata per column."""

    variables: list[Variable]
    constraints: list[Constraint]
    n_testpoints: int
    n_transmitters: int
    n_levels: int
    has_slack_vars: bool
    direction: str = "min"
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    # -- column index layout: all X, then Z, then W --------------------
    @property
    def n_cols(self) -> int:
        return len(self.variables)

    @property
    def n_rows(self) -> int:
        return len(self.constraints)

    def x_col(self, t: int, b: int) -> int:
        return t * self.n_transmitters + b

    def z_col(self, b: int, l: int) -> int:
        return self.n_testpoints * self.n_transmitters + b * self.n_levels + l

    def w_col(self, t: int, b: int) -> int:
        if not self.has_slack_vars:
            raise ValueError("model has no slack (w) variables")
        return (self.n_testpoints * self.n_transmitters
                + self.n_transmitters * self.n_levels
                + t * self.n_transmitters + b)

    @property
    def nnz(self) -> int:
        return sum(row.nnz for row in self.constraints)

    def objective_vector(self) -> np.ndarray:
        if "obj" not in self._cache:
            obj = np.array([v.objective for v in self.variables], dtype=np.float64)
            obj.setflags(write=False)
            self._cache["obj"] = obj
        return self._cache["obj"]

    def bounds_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        if "bounds" not in self._cache:
            lb = np.array([v.lb for v in self.variables], dtype=np.float64)
            ub = np.array([v.ub for v in self.variables], dtype=np.float64)
            lb.setflags(write=False)
            ub.setflags(write=False)
            self._cache["bounds"] = (lb, ub)
        return self._cache["bounds"]

    def to_csr(self) -> tuple[sp.csr_matrix, np.ndarray, np.ndarray]:
        """Assemble (A, senses, rhs); senses use '<=', '>=', '=='."""
        if "csr" not in self._cache:
            indptr = np.zeros(len(self.constraints) + 1, dtype=np.int64)
            for i, row in enumerate(self.constraints):
                indptr[i + 1] = indptr[i] + row.nnz
            indices = np.concatenate([row.cols for row in self.constraints]) if self.constraints else np.zeros(0, dtype=np.int64)
            data = np.concatenate([row.vals for row in self.constraints]) if self.constraints else np.zeros(0)
            a = sp.csr_matrix((data, indices, indptr), shape=(self.n_rows, self.n_cols))
            senses = np.array([row.sense for row in self.constraints])
            rhs = np.array([row.rhs for row in self.constraints], dtype=np.float64)
            self._cache["csr"] = (a, senses, rhs)
        return self._cache["csr"]


@dataclass(frozen=True)
class BigMTable:
    """Per-(testpoint, transmitter) deactivation constants.

    ``power_caps[b]`` is the largest power (watts, unscaled) transmitter
    ``b`` may still emit; ``interferer_sets`` records, for the
    strongest-interferer tier, which transmitters were ranked into the
    per-testpoint set.
    """

    values: np.ndarray
    tier: BigMTier
    power_caps: np.ndarray
    interferer_sets: Optional[tuple[frozenset[int], ...]] = None

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=np.float64)
        caps = np.asarray(self.power_caps, dtype=np.float64)
        if np.any(vals <= 0.0):
            raise ValueError("big-M entries must be strictly positive")
        vals.setflags(write=False)
        caps.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "power_caps", caps)

    @property
    def max_value(self) -> float:
        return float(self.values.max())


def big_m_base(inst: Instance) -> BigMTable:
    """Smallest generic deactivation constant: threshold * noise plus
    threshold * the worst-case total interference at full power."""
    delta = inst.sinr_threshold
    p_max = float(inst.power_values[-1])
    row_sums = inst.fading.sum(axis=1)
    interference = (row_sums[:, None] - inst.fading) * p_max * inst.scale_factor
    values = delta * inst.noise_scaled + delta * interference
    caps = np.full(inst.n_transmitters, p_max)
    return BigMTable(values=values, tier=BigMTier.BASE, power_caps=caps)


def _check_shapes(inst: Instance, big_m: BigMTable) -> None:
    if big_m.values.shape != (inst.n_testpoints, inst.n_transmitters):
        raise ValueError(
            f"big-M table shape {big_m.values.shape} does not match instance "
            f"({inst.n_testpoints}, {inst.n_transmitters})"
        )


def _variables(inst: Instance, with_slack: bool,
               priority_classes: Optional[Mapping[VarRole, int]]) -> list[Variable]:
    pr = dict(priority_classes or {})
    t_range = range(inst.n_testpoints)
    b_range = range(inst.n_transmitters)
    l_range = range(inst.n_levels)
    variables = [
        Variable(f"X_{t}_{b}", VarRole.X, (t, b), priority=pr.get(VarRole.X, 0))
        for t in t_range for b in b_range
    ]
    variables += [
        Variable(f"Z_{b}_{l}", VarRole.Z, (b, l),
                 objective=float(inst.level_costs[l]),
                 priority=pr.get(VarRole.Z, 0))
        for b in b_range for l in l_range
    ]
    if with_slack:
        variables += [
            Variable(f"W_{t}_{b}", VarRole.W, (t, b), priority=pr.get(VarRole.W, 0))
            for t in t_range for b in b_range
        ]
    return variables


def _common_rows(model: MilpModel, inst: Instance) -> list[Constraint]:
    rows = []
    t_b = inst.n_testpoints * inst.n_transmitters
    rows.append(Constraint(
        cols=np.arange(t_b), vals=np.ones(t_b), sense=">=",
        rhs=float(inst.coverage_target), tag=RowTag.COVERAGE))
    for t in range(inst.n_testpoints):
        cols = np.arange(t * inst.n_transmitters, (t + 1) * inst.n_transmitters)
        rows.append(Constraint(cols=cols, vals=np.ones(cols.size), sense="<=",
                               rhs=1.0, tag=RowTag.ONE_SERVER, key=(t,)))
    for b in range(inst.n_transmitters):
        cols = np.array([model.z_col(b, l) for l in range(inst.n_levels)])
        rows.append(Constraint(cols=cols, vals=np.ones(cols.size), sense="<=",
                               rhs=1.0, tag=RowTag.ONE_LEVEL, key=(b,)))
    for t in range(inst.n_testpoints):
        for b in range(inst.n_transmitters):
            cols = np.concatenate(([model.x_col(t, b)],
                                   [model.z_col(b, l) for l in range(inst.n_levels)]))
            vals = np.concatenate(([1.0], -np.ones(inst.n_levels)))
            rows.append(Constraint(cols=cols, vals=vals, sense="<=", rhs=0.0,
                                   tag=RowTag.VUB, key=(t, b)))
    return rows


def _sinr_z_coefficients(inst: Instance, t: int, beta: int) -> np.ndarray:
    """Left-hand-side z coefficients of the coverage row for (t, beta),
    flattened transmitter-major: +threshold * received for interferers,
    -received for the serving transmitter."""
    coeff = inst.sinr_threshold * inst.received[t].copy()
    coeff[beta, :] = -inst.received[t, beta, :]
    return coeff.reshape(-1)


def build_natural(inst: Instance, big_m: BigMTable,
                  priority_classes: Optional[Mapping[VarRole, int]] = None) -> MilpModel:
    """Big-M model: per (t, beta) the row

        -serving + threshold*interference + M[t,beta]*x[t,beta] <= M[t,beta] - threshold*noise

    which enforces the threshold when x = 1 and is redundant when x = 0,
    plus coverage, one-server, one-level and variable-upper-bound rows.
    """
    _check_shapes(inst, big_m)
    model = MilpModel(
        variables=_variables(inst, with_slack=False, priority_classes=priority_classes),
        constraints=[],
        n_testpoints=inst.n_testpoints,
        n_transmitters=inst.n_transmitters,
        n_levels=inst.n_levels,
        has_slack_vars=False,
    )
    delta_mu = inst.sinr_threshold * inst.noise_scaled
    z_cols = np.arange(model.z_col(0, 0), model.z_col(0, 0) + inst.n_transmitters * inst.n_levels)
    rows: list[Constraint] = []
    for t in range(inst.n_testpoints):
        for beta in range(inst.n_transmitters):
            m = float(big_m.values[t, beta])
            cols = np.concatenate(([model.x_col(t, beta)], z_cols))
            vals = np.concatenate(([m], _sinr_z_coefficients(inst, t, beta)))
            rows.append(Constraint(cols=cols, vals=vals, sense="<=",
                                   rhs=m - delta_mu, tag=RowTag.SINR, key=(t, beta)))
    rows.extend(_common_rows(model, inst))
    model.constraints = rows
    return model


def build_reformulated(inst: Instance, big_m: BigMTable,
                       priority_classes: Optional[Mapping[VarRole, int]] = None) -> MilpModel:
    """Slack model: each big-M coverage row becomes

        -serving + threshold*interference - M[t,beta]*w[t,beta] <= -threshold*noise

    and one row ``w[t,b] + x[t,b] <= 1`` per pair forces the slack off
    wherever an assignment is made.  Slack columns carry zero cost."""
    _check_shapes(inst, big_m)
    model = MilpModel(
        variables=_variables(inst, with_slack=True, priority_classes=priority_classes),
        constraints=[],
        n_testpoints=inst.n_testpoints,
        n_transmitters=inst.n_transmitters,
        n_levels=inst.n_levels,
        has_slack_vars=True,
    )
    delta_mu = inst.sinr_threshold * inst.noise_scaled
    z_cols = np.arange(model.z_col(0, 0), model.z_col(0, 0) + inst.n_transmitters * inst.n_levels)
    rows: list[Constraint] = []
    for t in range(inst.n_testpoints):
        for beta in range(inst.n_transmitters):
            m = float(big_m.values[t, beta])
            cols = np.concatenate((z_cols, [model.w_col(t, beta)]))
            vals = np.concatenate((_sinr_z_coefficients(inst, t, beta), [-m]))
            rows.append(Constraint(cols=cols, vals=vals, sense="<=",
                                   rhs=-delta_mu, tag=RowTag.SINR, key=(t, beta)))
    rows.extend(_common_rows(model, inst))
    for t in range(inst.n_testpoints):
        for b in range(inst.n_transmitters):
            rows.append(Constraint(
                cols=np.array([model.x_col(t, b), model.w_col(t, b)]),
                vals=np.array([1.0, 1.0]), sense="<=", rhs=1.0,
                tag=RowTag.W_DEF, key=(t, b)))
    model.constraints = rows
    return model


def extend_solution(sol: Solution) -> Solution:
    """Attach the canonical slack table ``slack = 1 - x``: zero exactly on
    assigned pairs.  For a solution feasible in the natural model the
    result is feasible in the reformulated model at the same cost."""
    n_t, n_b = len(sol.server), len(sol.level)
    slack = np.ones((n_t, n_b), dtype=np.int8)
    for t, b in enumerate(sol.server):
        if b is not None:
            slack[t, b] = 0
    return Solution(server=sol.server, level=sol.level, slack=slack)


def project_solution(sol: Solution) -> Solution:
    """Drop the slack table; a feasible reformulated solution projects to
    a feasible natural solution with the same cost."""
    return Solution(server=sol.server, level=sol.level, slack=None)


def encode_point(model: MilpModel, sol: Solution) -> np.ndarray:
    """Column-space 0/1 vector for a solution (slack from the table when
    present, else the canonical complement of the assignment)."""
    point = np.zeros(model.n_cols)
    for t, b in enumerate(sol.server):
        if b is not None:
            point[model.x_col(t, b)] = 1.0
    for b, lev in enumerate(sol.level):
        if lev is not None:
            point[model.z_col(b, lev)] = 1.0
    if model.has_slack_vars:
        slack = sol.slack if sol.slack is not None else extend_solution(sol).slack
        for t in range(model.n_testpoints):
            for b in range(model.n_transmitters):
                point[model.w_col(t, b)] = float(slack[t, b])
    return point


def solution_from_point(model: MilpModel, point: np.ndarray, tol: float = 1e-6) -> Solution:
    """Decode a (near-)integral column vector into a Solution."""
    point = np.asarray(point, dtype=np.float64)
    if point.shape != (model.n_cols,):
        raise ValueError(f"point has {point.shape}, model expects ({model.n_cols},)")
    server: list[Optional[int]] = [None] * model.n_testpoints
    for t in range(model.n_testpoints):
        for b in range(model.n_transmitters):
            if point[model.x_col(t, b)] > 0.5:
                if server[t] is not None:
                    raise ValueError(f"testpoint {t} assigned to two transmitters")
                server[t] = b
    level: list[Optional[int]] = [None] * model.n_transmitters
    for b in range(model.n_transmitters):
        for l in range(model.n_levels):
            if point[model.z_col(b, l)] > 0.5:
                if level[b] is not None:
                    raise ValueError(f"transmitter {b} active at two power levels")
                level[b] = l
    slack = None
    if model.has_slack_vars:
        slack = np.zeros((model.n_testpoints, model.n_transmitters), dtype=np.int8)
        for t in range(model.n_testpoints):
            for b in range(model.n_transmitters):
                slack[t, b] = 1 if point[model.w_col(t, b)] > 0.5 else 0
    frac = np.abs(point - np.round(point))
    if np.any(frac > tol):
        raise ValueError("point is not integral within tolerance")
    return Solution(server=tuple(server), level=tuple(level), slack=slack)


def point_violations(model: MilpModel, point: np.ndarray, tol: float = 1e-9) -> list[int]:
    """Indices of rows the point violates beyond ``tol`` (bounds included
    as pseudo-row -1)."""
    point = np.asarray(point, dtype=np.float64)
    a, senses, rhs = model.to_csr()
    activity = a @ point
    bad: list[int] = []
    lb, ub = model.bounds_arrays()
    if np.any(point < lb - tol) or np.any(point > ub + tol):
        bad.append(-1)
    for i in range(model.n_rows):
        v = activity[i] - rhs[i]
        if senses[i] == "<=" and v > tol:
            bad.append(i)
        elif senses[i] == ">=" and v < -tol:
            bad.append(i)
        elif senses[i] == "==" and abs(v) > tol:
            bad.append(i)
    return bad
