"""Exhaustive reference solver for small instances.

Every activation pattern (each transmitter off or at one of the L
levels) is enumerated.  For a fixed activation the interference seen at
a testpoint does not depend on any assignment, so each testpoint can be
checked independently: it is served when some active transmitter
reaches the threshold, and it is assigned to the feasible transmitter
of maximal SINR (ties to the lowest index).  A pattern is feasible when
the served count reaches the coverage target; the cheapest feasible
pattern wins, ties broken by the lexicographically smallest level
tuple with "off" ordered before every level.

Transparency over speed: no pruning of any kind.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import SINR_ABS_TOL, Instance, Solution

DEFAULT_PATTERN_CAP = 2_000_000
_CHUNK = 8192


@dataclass(frozen=True)
class OracleResult:
    objective: Optional[float]  # None when no pattern is feasible
    solution: Optional[Solution]
    optimal_count: int
    enumerated: int
    optimal_levels: tuple[tuple[int, ...], ...] = ()
    # level tuples use -1 for "off"; 0-based level indices otherwise

    @property
    def feasible(self) -> bool:
        return self.objective is not None


def _assignment_for(inst: Instance, levels: np.ndarray) -> Solution:
    """Best server per testpoint under one activation (levels, -1=off)."""
    active = np.nonzero(levels >= 0)[0]
    recv = np.zeros((inst.n_testpoints, inst.n_transmitters))
    for b in active:
        recv[:, b] = inst.received[:, b, levels[b]]
    total = recv.sum(axis=1)
    mu = inst.noise_scaled
    server: list[Optional[int]] = [None] * inst.n_testpoints
    for t in range(inst.n_testpoints):
        best_b, best_ratio = None, -1.0
        for b in active:
            interference = total[t] - recv[t, b]
            if recv[t, b] >= inst.sinr_threshold * (mu + interference) - SINR_ABS_TOL:
                ratio = recv[t, b] / (mu + interference)
                if ratio > best_ratio:
                    best_b, best_ratio = int(b), ratio
        server[t] = best_b
    level_tuple = tuple(int(l) if l >= 0 else None for l in levels)
    return Solution(server=tuple(server), level=level_tuple)


def served_counts(inst: Instance, level_block: np.ndarray) -> np.ndarray:
    """Vectorized served-testpoint count for a block of activation
    patterns (shape (n_patterns, B), -1 = off)."""
    n_pat = level_block.shape[0]
    recv = np.zeros((n_pat, inst.n_testpoints, inst.n_transmitters))
    for b in range(inst.n_transmitters):
        lev = level_block[:, b]
        on = lev >= 0
        if on.any():
            recv[on, :, b] = inst.received[:, b, :][:, lev[on]].T
    total = recv.sum(axis=2)
    mu = inst.noise_scaled
    need = inst.sinr_threshold * (mu + total[:, :, None] - recv) - SINR_ABS_TOL
    ok = (recv >= need) & (level_block[:, None, :] >= 0)
    return ok.any(axis=2).sum(axis=1)


def brute_force(inst: Instance, cap: int = DEFAULT_PATTERN_CAP) -> OracleResult:
    """Enumerate all (L+1)^B activation patterns and return the cheapest
    feasible one.  Refuses instances whose pattern count exceeds ``cap``."""
    n_patterns = (inst.n_levels + 1) ** inst.n_transmitters
    if n_patterns > cap:
        raise ValueError(
            f"{n_patterns} activation patterns exceed the cap {cap}; "
            "the exhaustive oracle is meant for small instances")

    level_cost = np.concatenate(([0.0], inst.level_costs))  # index lev+1
    best_obj: Optional[float] = None
    best_pattern: Optional[np.ndarray] = None
    optimal: list[tuple[int, ...]] = []

    pattern_iter = itertools.product(range(-1, inst.n_levels), repeat=inst.n_transmitters)
    enumerated = 0
    while True:
        block = np.array(list(itertools.islice(pattern_iter, _CHUNK)), dtype=np.int64)
        if block.size == 0:
            break
        enumerated += block.shape[0]
        counts = served_counts(inst, block)
        costs = level_cost[block + 1].sum(axis=1)
        feas = counts >= inst.coverage_target
        for idx in np.nonzero(feas)[0]:
            cost = float(costs[idx])
            if best_obj is None or cost < best_obj - 1e-12:
                best_obj = cost
                best_pattern = block[idx].copy()
                optimal = [tuple(int(v) for v in block[idx])]
            elif abs(cost - best_obj) <= 1e-12:
                optimal.append(tuple(int(v) for v in block[idx]))

    if best_obj is None:
        return OracleResult(None, None, 0, enumerated)
    solution = _assignment_for(inst, best_pattern)
    return OracleResult(best_obj, solution, len(optimal), enumerated, tuple(optimal))
