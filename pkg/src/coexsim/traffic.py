"""Offered-load accounting and the coupled cell-utilization fixed point."""

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

SQRT3 = math.sqrt(3.0)


@dataclass(frozen=True)
class OfferedLoad:
    """Area traffic densities and the downlink:uplink split."""

    urllc_arrival_per_s_m2: float = 5.0
    embb_mbps_per_km2: float = 100.0
    dl_ul_ratio: float = 1.0  # DL share = r / (1 + r)

    def __post_init__(self):
        if self.urllc_arrival_per_s_m2 < 0 or self.embb_mbps_per_km2 < 0:
            raise ValueError("traffic densities must be non-negative")
        if self.dl_ul_ratio <= 0:
            raise ValueError("DL:UL ratio must be positive")

    @property
    def dl_share(self) -> float:
        return self.dl_ul_ratio / (1.0 + self.dl_ul_ratio)


def hex_sector_area_m2(isd_m: float) -> float:
    """Area served by one sector cell of a tri-sectored hexagonal site."""
    return isd_m**2 * SQRT3 / 2.0 / 3.0


def urllc_offered_bps(
    arrival_per_s_m2: float, floor_area_m2: float, payload_bits: int
) -> float:
    """Factory-wide offered traffic, both directions combined."""
    return arrival_per_s_m2 * floor_area_m2 * payload_bits


def embb_offered_bps_per_cell(embb_mbps_per_km2: float, isd_m: float) -> float:
    """Offered traffic per macro sector cell, both directions combined."""
    return embb_mbps_per_km2 * 1e6 * hex_sector_area_m2(isd_m) / 1e6


@dataclass
class LoadCouplingResult:
    utilization: np.ndarray  # flattened per (cell, direction), in [0, 1]
    iterations: int
    converged: bool


def solve_load_coupling(
    offered_bps: np.ndarray,
    capacity_fn: Callable[[np.ndarray], np.ndarray],
    initial_utilization: np.ndarray | float = 0.0,
    tol: float = 1e-3,
    max_iterations: int = 100,
    damping: float = 0.5,
) -> LoadCouplingResult:
    """Fixed point of u = min(1, offered / capacity(u)).

    capacity_fn maps the current utilization vector to the serveable rate of
    each entry (mean user rate times the direction's slot fraction) at that
    interference level. The iteration is damped to suppress oscillation and
    flags non-convergence instead of raising.
    """
    offered = np.asarray(offered_bps, dtype=float)
    if np.any(~np.isfinite(offered)) or np.any(offered < 0):
        raise ValueError("offered loads must be finite and non-negative")
    u = np.broadcast_to(np.asarray(initial_utilization, dtype=float), offered.shape)
    u = np.clip(u.astype(float).copy(), 0.0, 1.0)
    converged = False
    iterations = 0
    for iterations in range(1, max_iterations + 1):
        cap = np.asarray(capacity_fn(u), dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            target = np.where(
                offered == 0.0, 0.0, np.where(cap > 0.0, offered / cap, 1.0)
            )
        target = np.clip(target, 0.0, 1.0)
        u_next = (1.0 - damping) * u + damping * target
        delta = float(np.max(np.abs(u_next - u))) if u.size else 0.0
        u = u_next
        if delta < tol:
            converged = True
            break
    return LoadCouplingResult(u, iterations, converged)
