"""Service availability, capacity bisection, eMBB rate regions and
relative-to-baseline comparisons."""

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

#: availability counted as "full" when within this of 100 percent
FULL_AVAILABILITY_EPS = 1e-9


@dataclass(frozen=True)
class AvailabilityResult:
    n_samples: int
    successes: int
    direction: str = ""

    @property
    def availability_pct(self) -> float:
        return 100.0 * self.successes / self.n_samples

    @property
    def ci95_halfwidth_pct(self) -> float:
        """Binomial normal-approximation 95 percent half-width, in points."""
        p = self.successes / self.n_samples
        return 100.0 * 1.96 * math.sqrt(p * (1.0 - p) / self.n_samples)

    @property
    def is_full(self) -> bool:
        return self.availability_pct >= 100.0 - FULL_AVAILABILITY_EPS


def service_availability(indicators, direction: str = "") -> AvailabilityResult:
    """Share of locations whose QoS indicator is 1."""
    x = np.asarray(list(indicators), dtype=float)
    if x.size == 0:
        raise ValueError("availability needs at least one sample")
    if np.any((x != 0.0) & (x != 1.0)):
        raise ValueError("indicators must be 0 or 1")
    return AvailabilityResult(int(x.size), int(np.sum(x)), direction)


@dataclass
class CapacityResult:
    capacity: float  # packet arrival rate, packets/s/m2
    bracket: tuple[float, float]
    evaluations: int  # midpoint evaluations of the bisection
    flags: tuple[str, ...] = ()
    direction: str = ""
    observations: list[tuple[float, float]] = field(default_factory=list)


def system_capacity(
    evaluator: Callable[[float], float],
    lo: float,
    hi: float,
    tol: float,
    direction: str = "",
) -> CapacityResult:
    """Largest arrival rate (within tol) still giving full availability.

    The evaluator maps an arrival rate to an availability percentage and is
    assumed non-increasing; observed increases beyond noise are flagged but
    do not abort. Bisection keeps availability(lo) full and availability(hi)
    not full, so it needs at most ceil(log2((hi-lo)/tol)) midpoint calls.
    """
    if not lo < hi:
        raise ValueError("need lo < hi")
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    flags: list[str] = []
    observations: list[tuple[float, float]] = []

    def full(avail: float) -> bool:
        return avail >= 100.0 - FULL_AVAILABILITY_EPS

    a_lo = evaluator(lo)
    observations.append((lo, a_lo))
    if not full(a_lo):
        flags.append("infeasible_at_lower_bracket")
        return CapacityResult(0.0, (lo, lo), 0, tuple(flags), direction, observations)
    a_hi = evaluator(hi)
    observations.append((hi, a_hi))
    if full(a_hi):
        flags.append("unsaturated")
        return CapacityResult(hi, (lo, hi), 0, tuple(flags), direction, observations)

    evaluations = 0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        a_mid = evaluator(mid)
        evaluations += 1
        observations.append((mid, a_mid))
        if full(a_mid):
            lo = mid
        else:
            hi = mid
    for (r1, a1) in observations:
        for (r2, a2) in observations:
            if r1 < r2 and a2 > a1 + FULL_AVAILABILITY_EPS:
                flags.append("non_monotone_availability")
                break
        else:
            continue
        break
    return CapacityResult(lo, (lo, hi), evaluations, tuple(flags), direction, observations)


def polygon_region_mask(layout, xy, margin_m: float = 15.0) -> np.ndarray:
    """Outdoor points within margin_m of the factory walls (inclusive)."""
    xy = np.atleast_2d(np.asarray(xy, dtype=float))
    dist = layout.factory.distance_to_wall(xy[:, 0], xy[:, 1])
    return (dist > 0.0) & (dist <= margin_m)


def mean_rate_bps(rates) -> float:
    """Arithmetic mean rate over users of a region."""
    r = np.asarray(rates, dtype=float)
    if r.size == 0:
        raise ValueError("rate region is empty")
    return float(np.mean(r))


def relative_metric_pct(value: float, baseline: float) -> float:
    """Percent change of value against a positive baseline."""
    if baseline <= 0:
        raise ValueError("baseline must be positive")
    return 100.0 * (value - baseline) / baseline
