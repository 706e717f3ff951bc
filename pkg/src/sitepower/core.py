"""Physical problem data and SINR/feasibility/objective semantics.

Everything in this module is independent of any MILP formulation: an
:class:`Instance` describes the network (channel gains, discrete power
levels, costs, noise, threshold, coverage target) and a
:class:`Solution` describes an assignment of testpoints to transmitters
plus a power level per activated transmitter.

Instances and solutions are immutable after construction and all
operations here are pure, so they are safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

# Absolute tolerance for threshold comparisons on (scaled) received-power
# magnitudes.  Coverage is decided in cross-multiplied form to avoid the
# error amplification of dividing quantities that span many decades.
SINR_ABS_TOL = 1e-9


class InstanceDataError(ValueError):
    """Instance data violates a structural invariant."""


def _as_float_array(values, name: str, ndim: int) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    if arr.ndim != ndim:
        raise InstanceDataError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InstanceDataError(f"{name} contains non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Instance:
    """A site-and-power-assignment problem.

    ``fading[t, b]`` is the channel gain from transmitter ``b`` to
    testpoint ``t`` (row-major by testpoint: the interference sum walks
    one row).  ``scale_factor`` multiplies every received power and the
    noise wherever they enter a formula; ratios of received powers are
    unaffected by it.
    """

    n_transmitters: int
    n_testpoints: int
    power_values: np.ndarray
    level_costs: np.ndarray
    fading: np.ndarray
    noise: float
    sinr_threshold: float
    coverage_target: int
    scale_factor: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "power_values", _as_float_array(self.power_values, "power_values", 1))
        object.__setattr__(self, "level_costs", _as_float_array(self.level_costs, "level_costs", 1))
        object.__setattr__(self, "fading", _as_float_array(self.fading, "fading", 2))

        if self.n_transmitters < 1:
            raise InstanceDataError("need at least one transmitter")
        if self.n_testpoints < 1:
            raise InstanceDataError("need at least one testpoint")
        if self.fading.shape != (self.n_testpoints, self.n_transmitters):
            raise InstanceDataError(
                f"fading shape {self.fading.shape} does not match "
                f"(testpoints, transmitters) = ({self.n_testpoints}, {self.n_transmitters})"
            )
        if self.power_values.size == 0:
            raise InstanceDataError("need at least one power level")
        if self.power_values[0] <= 0.0:
            raise InstanceDataError("lowest power value must be strictly positive")
        if np.any(np.diff(self.power_values) <= 0.0):
            raise InstanceDataError("power values must be strictly increasing")
        if self.level_costs.shape != self.power_values.shape:
            raise InstanceDataError("need exactly one cost per power level")
        if np.any(self.level_costs <= 0.0):
            raise InstanceDataError("level costs must be positive")
        if np.any(np.diff(self.level_costs) < 0.0):
            raise InstanceDataError("level costs must be nondecreasing in the level index")
        if np.any(self.fading <= 0.0):
            raise InstanceDataError("every fading coefficient must be strictly positive")
        if not self.noise > 0.0:
            raise InstanceDataError("noise must be strictly positive")
        if not self.sinr_threshold > 0.0:
            raise InstanceDataError("SINR threshold must be strictly positive")
        if not 0 <= int(self.coverage_target) <= self.n_testpoints:
            raise InstanceDataError(
                f"coverage target {self.coverage_target} outside [0, {self.n_testpoints}]"
            )
        if not self.scale_factor > 0.0:
            raise InstanceDataError("scale factor must be strictly positive")

    @property
    def n_levels(self) -> int:
        return int(self.power_values.size)

    @property
    def noise_scaled(self) -> float:
        """Noise power after applying the instance scale factor."""
        return float(self.noise * self.scale_factor)

    @cached_property
    def received(self) -> np.ndarray:
        """Scaled received power per (testpoint, transmitter, level)."""
        rp = self.fading[:, :, None] * self.power_values[None, None, :] * self.scale_factor
        rp.setflags(write=False)
        return rp


@dataclass(frozen=True, eq=False)
class Solution:
    """An assignment encoded so the one-server and one-level rules hold
    by construction.

    ``server[t]`` is the transmitter serving testpoint ``t`` (``None``
    for unserved), ``level[b]`` the 0-based power level of transmitter
    ``b`` (``None`` when off).  ``slack`` is the optional per-(t, b)
    binary table used by the reformulated model; when present, entry
    (t, b) must be 0 whenever ``server[t] == b``.
    """

    server: tuple[Optional[int], ...]
    level: tuple[Optional[int], ...]
    slack: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "server", tuple(self.server))
        object.__setattr__(self, "level", tuple(self.level))
        if self.slack is not None:
            arr = np.array(self.slack, dtype=np.int8)
            if arr.shape != (len(self.server), len(self.level)):
                raise ValueError(
                    f"slack shape {arr.shape} does not match (testpoints, transmitters)"
                )
            arr.setflags(write=False)
            object.__setattr__(self, "slack", arr)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Solution):
            return NotImplemented
        if self.server != other.server or self.level != other.level:
            return False
        if (self.slack is None) != (other.slack is None):
            return False
        return self.slack is None or bool(np.array_equal(self.slack, other.slack))

    def active_transmitters(self) -> list[int]:
        return [b for b, lev in enumerate(self.level) if lev is not None]

    def served_count(self) -> int:
        return sum(1 for s in self.server if s is not None)


@dataclass(frozen=True)
class Violation:
    kind: str
    testpoint: Optional[int]
    transmitter: Optional[int]
    message: str


@dataclass(frozen=True)
class FeasibilityReport:
    """Outcome of :func:`verify_solution`; infeasibility is data, not an
    error.  An empty violation list means the solution is feasible."""

    violations: tuple[Violation, ...]
    served_count: int
    coverage_target: int

    @property
    def feasible(self) -> bool:
        return not self.violations

    def to_text(self) -> str:
        lines = [f"served {self.served_count} of required {self.coverage_target}"]
        if self.feasible:
            lines.append("feasible")
        else:
            lines.extend(f"violation[{v.kind}] {v.message}" for v in self.violations)
        return "\n".join(lines)


def _check_indices(inst: Instance, t: Optional[int] = None, b: Optional[int] = None,
                   level: Optional[int] = None) -> None:
    if t is not None and not 0 <= t < inst.n_testpoints:
        raise IndexError(f"testpoint index {t} out of range [0, {inst.n_testpoints})")
    if b is not None and not 0 <= b < inst.n_transmitters:
        raise IndexError(f"transmitter index {b} out of range [0, {inst.n_transmitters})")
    if level is not None and not 0 <= level < inst.n_levels:
        raise IndexError(f"power level index {level} out of range [0, {inst.n_levels})")


def received_power(inst: Instance, t: int, b: int, level: int) -> float:
    """Scaled power received at testpoint ``t`` from transmitter ``b``
    emitting at power level ``level``."""
    _check_indices(inst, t=t, b=b, level=level)
    return float(inst.fading[t, b] * inst.power_values[level] * inst.scale_factor)


def _interference(inst: Instance, levels: Sequence[Optional[int]], t: int, beta: int) -> float:
    total = 0.0
    for b, lev in enumerate(levels):
        if b != beta and lev is not None:
            total += inst.received[t, b, lev]
    return total


def sinr(inst: Instance, levels: Sequence[Optional[int]], t: int, beta: int) -> float:
    """Ratio of the serving power from ``beta`` to the interfering
    powers plus noise, under the activation ``levels``.

    Raises ValueError when ``beta`` is inactive (no serving power).
    """
    _check_indices(inst, t=t, b=beta)
    if len(levels) != inst.n_transmitters:
        raise ValueError("activation must give one (optional) level per transmitter")
    lev = levels[beta]
    if lev is None:
        raise ValueError(f"no serving power: transmitter {beta} is inactive")
    _check_indices(inst, level=lev)
    return float(inst.received[t, beta, lev] / (inst.noise_scaled + _interference(inst, levels, t, beta)))


def is_served(inst: Instance, levels: Sequence[Optional[int]], t: int, beta: int) -> bool:
    """Threshold test in cross-multiplied form: serving power must reach
    threshold * (noise + interference) within ``SINR_ABS_TOL``."""
    _check_indices(inst, t=t, b=beta)
    lev = levels[beta]
    if lev is None:
        return False
    serving = inst.received[t, beta, lev]
    need = inst.sinr_threshold * (inst.noise_scaled + _interference(inst, levels, t, beta))
    return bool(serving >= need - SINR_ABS_TOL)


def verify_solution(inst: Instance, sol: Solution) -> FeasibilityReport:
    """Check a solution against the coverage semantics and report every
    violated condition.

    Checks, in order: each assigned testpoint is served above threshold
    by an *active* server, the number of assigned testpoints reaches the
    coverage target, and (when a slack table is present) slack is zero
    wherever an assignment exists.
    """
    if len(sol.server) != inst.n_testpoints or len(sol.level) != inst.n_transmitters:
        raise ValueError("solution dimensions do not match the instance")
    violations: list[Violation] = []
    served = 0
    for t, b in enumerate(sol.server):
        if b is None:
            continue
        _check_indices(inst, b=b)
        served += 1
        if sol.level[b] is None:
            violations.append(Violation(
                "inactive_server", t, b,
                f"testpoint {t} assigned to inactive transmitter {b}"))
        elif not is_served(inst, sol.level, t, b):
            ratio = sinr(inst, sol.level, t, b)
            violations.append(Violation(
                "sinr_below_threshold", t, b,
                f"SINR {ratio:.6g} at testpoint {t} from transmitter {b} "
                f"below threshold {inst.sinr_threshold:.6g}"))
    if served < inst.coverage_target:
        violations.append(Violation(
            "coverage_shortfall", None, None,
            f"coverage {served} < {inst.coverage_target}"))
    if sol.slack is not None:
        for t, b in enumerate(sol.server):
            if b is not None and sol.slack[t, b] != 0:
                violations.append(Violation(
                    "slack_inconsistent", t, b,
                    f"slack[{t}][{b}] must be 0 where testpoint {t} is served by {b}"))
    return FeasibilityReport(tuple(violations), served, int(inst.coverage_target))


def objective(inst: Instance, sol: Solution) -> float:
    """Total activation cost: the level cost of every active transmitter."""
    total = 0.0
    for b, lev in enumerate(sol.level):
        if lev is not None:
            _check_indices(inst, level=lev)
            total += float(inst.level_costs[lev])
    return total
