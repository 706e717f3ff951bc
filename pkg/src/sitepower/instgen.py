"""Deterministic synthetic instances with realistic coefficient spread.

Transmitters and testpoints are placed uniformly at random in a square;
channel gains follow an inverse-power pathloss ``K / max(d, d_min)^eta``.
The reference gain ``K`` is calibrated per instance so the largest
scaled received power lands just under ``peak_received``, reproducing
the huge-but-bounded coefficient range that makes these models
numerically interesting.  Generation is a pure function of the seed.

The defaults mirror common LTE planning data: three power levels
{20, 40, 80} W with costs (1, 2, 4), thermal-noise-sized mu, received
powers scaled by 1e-10.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .core import Instance


@dataclass(frozen=True)
class GenParams:
    n_transmitters: int = 30
    n_testpoints: int = 500
    area_side: float = 3000.0  # meters
    pathloss_exponent: float = 3.0
    min_distance: float = 10.0  # clamp; avoids coincident-point blowups
    reference_gain: Optional[float] = None  # None: calibrate to peak_received
    seed: int = 0
    sinr_threshold: float = 0.178
    coverage_fraction: float = 0.95
    power_values: tuple[float, ...] = (20.0, 40.0, 80.0)
    level_costs: tuple[float, ...] = (1.0, 2.0, 4.0)
    noise: float = 7.998e-14  # watts
    scale_factor: float = 1e-10
    peak_received: float = 9.9e4  # max scaled a*P after calibration

    def __post_init__(self) -> None:
        if not 2.0 <= self.pathloss_exponent <= 4.0:
            raise ValueError("pathloss exponent must lie in [2, 4]")
        if self.n_transmitters < 1 or self.n_testpoints < 1:
            raise ValueError("need at least one transmitter and one testpoint")
        if not 0.0 <= self.coverage_fraction <= 1.0:
            raise ValueError("coverage fraction must lie in [0, 1]")
        if self.area_side <= 0 or self.min_distance <= 0:
            raise ValueError("geometry lengths must be positive")


def pathloss_gain(distance: np.ndarray, exponent: float, reference_gain: float,
                  min_distance: float) -> np.ndarray:
    """Inverse-power channel gain with a near-field distance clamp."""
    return reference_gain / np.maximum(distance, min_distance) ** exponent


def generate(params: GenParams) -> Instance:
    """Sample an instance; byte-identical results for identical params."""
    rng = np.random.default_rng(params.seed)
    tx = rng.uniform(0.0, params.area_side, size=(params.n_transmitters, 2))
    tp = rng.uniform(0.0, params.area_side, size=(params.n_testpoints, 2))
    dist = np.linalg.norm(tp[:, None, :] - tx[None, :, :], axis=2)

    raw = pathloss_gain(dist, params.pathloss_exponent, 1.0, params.min_distance)
    if params.reference_gain is not None:
        k = params.reference_gain
    else:
        p_max = max(params.power_values)
        k = params.peak_received / (raw.max() * p_max * params.scale_factor)
    fading = k * raw

    alpha = int(round(params.coverage_fraction * params.n_testpoints))
    return Instance(
        n_transmitters=params.n_transmitters,
        n_testpoints=params.n_testpoints,
        power_values=np.array(params.power_values),
        level_costs=np.array(params.level_costs),
        fading=fading,
        noise=params.noise,
        sinr_threshold=params.sinr_threshold,
        coverage_target=alpha,
        scale_factor=params.scale_factor,
    )


def scale(inst: Instance, factor: float) -> Instance:
    """Multiply every received power and the noise by ``factor``;
    thresholds and costs stay put, so every SINR is unchanged."""
    if not factor > 0:
        raise ValueError("scale factor must be positive")
    return replace(inst, scale_factor=inst.scale_factor * factor)
