"""Shared instance builders and enumeration utilities for the tests."""

from __future__ import annotations

import itertools
from typing import Optional

import numpy as np

from sitepower.core import Instance, Solution
from sitepower.formulation import MilpModel, RowTag


def ex1(alpha: int = 2) -> Instance:
    """Two transmitters, two testpoints, one 10 W level, unit costs."""
    return Instance(
        n_transmitters=2,
        n_testpoints=2,
        power_values=[10.0],
        level_costs=[1.0],
        fading=[[2.0, 0.5], [0.5, 2.0]],
        noise=1.0,
        sinr_threshold=1.0,
        coverage_target=alpha,
    )


def ex2() -> Instance:
    """One testpoint, two transmitters, two levels {10, 20} W."""
    return Instance(
        n_transmitters=2,
        n_testpoints=1,
        power_values=[10.0, 20.0],
        level_costs=[1.0, 2.0],
        fading=[[2.0, 0.5]],
        noise=1.0,
        sinr_threshold=1.0,
        coverage_target=1,
    )


def suite_instance(seed: int) -> Instance:
    """One member of the seeded random equivalence suite:
    |B| <= 4, |T| <= 10, |L| <= 2, alpha cycling {0, ceil(T/2), T}."""
    rng = np.random.default_rng(seed)
    n_b = int(rng.integers(2, 5))
    n_t = int(rng.integers(3, 11))
    n_l = int(rng.integers(1, 3))
    powers = np.cumprod(rng.uniform(1.4, 2.2, n_l)) * rng.uniform(1.0, 4.0)
    costs = np.cumsum(rng.uniform(0.5, 2.0, n_l))
    fading = rng.uniform(0.2, 5.0, (n_t, n_b))
    delta = float(rng.uniform(0.6, 1.6))
    mu = float(rng.uniform(0.2, 1.0))
    alpha = [0, (n_t + 1) // 2, n_t][seed % 3]
    return Instance(n_b, n_t, powers, costs, fading, mu, delta, alpha)


def tiny_instance(seed: int) -> Instance:
    """Small enough for full (x, z) space enumeration: |B| <= 3, |T| <= 4."""
    rng = np.random.default_rng(10_000 + seed)
    n_b = int(rng.integers(2, 4))
    n_t = int(rng.integers(2, 5))
    n_l = int(rng.integers(1, 3))
    powers = np.cumprod(rng.uniform(1.4, 2.2, n_l)) * rng.uniform(1.0, 4.0)
    costs = np.cumsum(rng.uniform(0.5, 2.0, n_l))
    fading = rng.uniform(0.2, 5.0, (n_t, n_b))
    delta = float(rng.uniform(0.6, 1.6))
    mu = float(rng.uniform(0.2, 1.0))
    alpha = [0, (n_t + 1) // 2, n_t][seed % 3]
    return Instance(n_b, n_t, powers, costs, fading, mu, delta, alpha)


def all_level_patterns(inst: Instance):
    """Every activation (one entry per transmitter, -1 = off)."""
    return itertools.product(range(-1, inst.n_levels), repeat=inst.n_transmitters)


def levels_to_tuple(levels) -> tuple[Optional[int], ...]:
    return tuple(None if l < 0 else int(l) for l in levels)


def all_xz_points(inst: Instance, model: MilpModel) -> np.ndarray:
    """Matrix of every structured 0-1 (x, z) point in model coordinates:
    per testpoint one server choice (or none) and per transmitter one
    level (or off).  Slack columns, if any, are left at zero."""
    servers = list(itertools.product(range(-1, inst.n_transmitters),
                                     repeat=inst.n_testpoints))
    levels = list(all_level_patterns(inst))
    points = np.zeros((len(servers) * len(levels), model.n_cols))
    k = 0
    for lev in levels:
        z_cols = [model.z_col(b, l) for b, l in enumerate(lev) if l >= 0]
        for srv in servers:
            row = points[k]
            for b_col in z_cols:
                row[b_col] = 1.0
            for t, b in enumerate(srv):
                if b >= 0:
                    row[model.x_col(t, b)] = 1.0
            k += 1
    return points


def natural_feasible_mask(model: MilpModel, points: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Row-by-row feasibility of many points against a natural model."""
    a, senses, rhs = model.to_csr()
    activity = a @ points.T  # (rows, npoints)
    ok = np.ones(points.shape[0], dtype=bool)
    for i in range(model.n_rows):
        if senses[i] == "<=":
            ok &= activity[i] <= rhs[i] + tol
        elif senses[i] == ">=":
            ok &= activity[i] >= rhs[i] - tol
        else:
            ok &= np.abs(activity[i] - rhs[i]) <= tol
    return ok


def reformulated_feasible_mask(model: MilpModel, points: np.ndarray,
                               tol: float = 1e-9) -> np.ndarray:
    """Existence of a 0-1 slack completion for many (x, z) points against
    a reformulated model, decided per (t, b) by trying both slack values
    on the model's own rows (they are separable: each w column appears in
    exactly one SINR row and one W_DEF row)."""
    a, senses, rhs = model.to_csr()
    activity = a @ points.T  # w columns are zero in the points
    ok = np.ones(points.shape[0], dtype=bool)
    sinr_rows = {row.key: i for i, row in enumerate(model.constraints)
                 if row.tag is RowTag.SINR}
    for i, row in enumerate(model.constraints):
        if row.tag is RowTag.SINR or row.tag is RowTag.W_DEF:
            continue
        if senses[i] == "<=":
            ok &= activity[i] <= rhs[i] + tol
        elif senses[i] == ">=":
            ok &= activity[i] >= rhs[i] - tol
        else:
            ok &= np.abs(activity[i] - rhs[i]) <= tol
    for t in range(model.n_testpoints):
        for b in range(model.n_transmitters):
            i = sinr_rows[(t, b)]
            m_coeff = -float(row_coefficient(model, i, model.w_col(t, b)))
            act0 = activity[i]
            x_val = points[:, model.x_col(t, b)]
            w0_ok = act0 <= rhs[i] + tol
            w1_ok = (act0 - m_coeff <= rhs[i] + tol) & (x_val < 0.5)
            ok &= w0_ok | w1_ok
    return ok


def row_coefficient(model: MilpModel, row_index: int, col: int) -> float:
    row = model.constraints[row_index]
    hits = row.vals[row.cols == col]
    return float(hits[0]) if hits.size else 0.0


def sinr_rhs_value(inst: Instance, levels, t: int, beta: int) -> float:
    """Right-hand side of the slack coverage row for one activation:
    threshold*interference - serving + threshold*noise (all scaled)."""
    delta = inst.sinr_threshold
    serving = 0.0
    interference = 0.0
    for b, lev in enumerate(levels):
        if lev is None or lev < 0:
            continue
        power = inst.received[t, b, lev]
        if b == beta:
            serving = power
        else:
            interference += power
    return delta * interference - serving + delta * inst.noise_scaled
