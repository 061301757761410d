"""Link adaptation: the 9-entry MCS set, Shannon-gap SINR thresholds,
SINR-to-rate mapping and the per-location QoS indicator."""

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

MODULATION_BITS = {"qpsk": 2, "16qam": 4, "64qam": 6}

#: (modulation, code rate) pairs of the URLLC MCS set.
MCS_SET = (
    ("qpsk", Fraction(1, 20)),
    ("qpsk", Fraction(1, 10)),
    ("qpsk", Fraction(1, 5)),
    ("qpsk", Fraction(1, 3)),
    ("16qam", Fraction(1, 3)),
    ("16qam", Fraction(1, 2)),
    ("16qam", Fraction(2, 3)),
    ("64qam", Fraction(2, 3)),
    ("64qam", Fraction(3, 4)),
)


@dataclass(frozen=True)
class McsEntry:
    modulation: str
    code_rate: Fraction
    spectral_efficiency: float  # bits/s/Hz
    sinr_threshold_db: float


@dataclass(frozen=True)
class QosRequirement:
    """Packet service target: payload within one TTI at the reliability level."""

    payload_bits: int = 256
    latency_budget_us: float = 1000.0
    reliability: float = 0.99999
    tti_us: float = 143.0
    symbols_per_tti: int = 4
    scs_khz: float = 30.0

    def __post_init__(self):
        if self.payload_bits < 0:
            raise ValueError("payload must be non-negative")
        if not 0.0 < self.reliability < 1.0:
            raise ValueError("reliability must be in (0, 1)")
        if self.tti_us <= 0:
            raise ValueError("TTI must be positive")


def mcs_sinr_threshold_db(spectral_efficiency: float, shannon_gap_db: float) -> float:
    """SINR at which the gapped Shannon rate reaches the entry's efficiency."""
    gap_lin = 10.0 ** (shannon_gap_db / 10.0)
    return 10.0 * math.log10(gap_lin * (2.0**spectral_efficiency - 1.0))


def build_mcs_table(shannon_gap_db: float = 3.0) -> tuple[McsEntry, ...]:
    """MCS table sorted by strictly increasing spectral efficiency."""
    entries = []
    for modulation, rate in MCS_SET:
        se = MODULATION_BITS[modulation] * float(rate)
        entries.append(
            McsEntry(modulation, rate, se, mcs_sinr_threshold_db(se, shannon_gap_db))
        )
    entries.sort(key=lambda e: e.spectral_efficiency)
    for a, b in zip(entries, entries[1:]):
        if b.spectral_efficiency <= a.spectral_efficiency:
            raise ValueError("MCS spectral efficiencies must be strictly increasing")
    return tuple(entries)


def required_rate_bps(q: QosRequirement) -> float:
    """Rate needed to move the payload within one TTI."""
    return q.payload_bits / (q.tti_us * 1e-6)


def select_mcs(sinr_db: float, table: tuple[McsEntry, ...]) -> McsEntry | None:
    """Highest entry whose threshold is met; None below the lowest (outage)."""
    chosen = None
    for entry in table:
        if sinr_db >= entry.sinr_threshold_db:
            chosen = entry
        else:
            break
    return chosen


def achievable_se(sinr_db, table: tuple[McsEntry, ...]):
    """Vectorized spectral efficiency lookup, 0 in outage."""
    thresholds = np.array([e.sinr_threshold_db for e in table])
    ses = np.concatenate(([0.0], [e.spectral_efficiency for e in table]))
    idx = np.searchsorted(thresholds, np.asarray(sinr_db, dtype=float), side="right")
    out = ses[idx]
    return float(out) if np.isscalar(sinr_db) else out


def achievable_rate_bps(
    sinr_db: float,
    bandwidth_hz: float,
    overhead: float,
    table: tuple[McsEntry, ...],
) -> float:
    """Selected-MCS rate over the bandwidth after control/reference overhead."""
    if bandwidth_hz <= 0:
        raise ValueError("bandwidth must be positive")
    if not 0.0 <= overhead < 1.0:
        raise ValueError("overhead must be in [0, 1)")
    entry = select_mcs(sinr_db, table)
    if entry is None:
        return 0.0
    return entry.spectral_efficiency * bandwidth_hz * (1.0 - overhead)


def qos_indicator(dl_ok: bool, ul_ok: bool, load_ok: bool, latency_ok: bool) -> int:
    """1 iff the location satisfies rate (both directions), load and latency."""
    return int(dl_ok and ul_ok and load_ok and latency_ok)
