"""Link-budget arithmetic: noise, uplink power control, ACLR/ACS combining,
per-scenario adjacent-channel isolation and SINR aggregation."""

import math
from dataclasses import dataclass, field
from enum import Enum

from .propagation import PathlossBreakdown
from .tdd import InterferenceScenario

THERMAL_NOISE_DBM_PER_HZ = -174.0


def db_to_lin(x_db: float) -> float:
    if x_db == -math.inf:
        return 0.0
    return 10.0 ** (x_db / 10.0)


def lin_to_db(x_lin: float) -> float:
    if x_lin <= 0.0:
        return -math.inf
    return 10.0 * math.log10(x_lin)


def noise_power_dbm(bandwidth_hz: float, noise_figure_db: float) -> float:
    """Thermal noise power over the bandwidth plus the receiver noise figure."""
    if bandwidth_hz <= 0:
        raise ValueError("bandwidth must be positive")
    return THERMAL_NOISE_DBM_PER_HZ + 10.0 * math.log10(bandwidth_hz) + noise_figure_db


@dataclass(frozen=True)
class PowerControlParams:
    """Open-loop fractional uplink power control, P = min(Pmax, P0 + alpha*PL)."""

    alpha: float
    target_snr_db: float
    p_max_dbm: float
    p0_dbm: float

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must be in [0, 1]")
        if not math.isfinite(self.p_max_dbm):
            raise ValueError("p_max must be finite")

    @classmethod
    def from_noise(
        cls, alpha: float, target_snr_db: float, p_max_dbm: float, noise_dbm: float
    ) -> "PowerControlParams":
        """P0 anchored at full-bandwidth receiver noise plus the SNR target."""
        return cls(alpha, target_snr_db, p_max_dbm, noise_dbm + target_snr_db)


def uplink_tx_power_dbm(pl_total_db: float, pc: PowerControlParams) -> float:
    """Fractional path-loss compensation, capped at the UE maximum power."""
    if pl_total_db < 0:
        raise ValueError("path loss must be non-negative")
    return min(pc.p_max_dbm, pc.p0_dbm + pc.alpha * pl_total_db)


@dataclass(frozen=True)
class AcirParams:
    """ACLR (transmitter leakage) and ACS (receiver selectivity), dB."""

    aclr_bs_db: float = 45.0
    acs_bs_db: float = 45.0
    aclr_ue_db: float = 30.0
    acs_ue_db: float = 30.0

    def __post_init__(self):
        for v in (self.aclr_bs_db, self.acs_bs_db, self.aclr_ue_db, self.acs_ue_db):
            if v <= 0:
                raise ValueError("ACLR/ACS values must be positive")


def combine_acir_db(aclr_db: float, acs_db: float) -> float:
    """Power-domain combination of transmitter leakage and receiver selectivity."""
    return -10.0 * math.log10(10.0 ** (-aclr_db / 10.0) + 10.0 ** (-acs_db / 10.0))


def scenario_acir_db(scenario: InterferenceScenario, p: AcirParams) -> float:
    """ACIR applicable to one inter-network interference scenario.

    The transmitter side contributes its ACLR, the receiver side its ACS:
    BS->UE uses (ACLR_BS, ACS_UE), BS->BS (ACLR_BS, ACS_BS), and so on.
    """
    mapping = {
        InterferenceScenario.DL_TO_DL: (p.aclr_bs_db, p.acs_ue_db),
        InterferenceScenario.DL_TO_UL: (p.aclr_bs_db, p.acs_bs_db),
        InterferenceScenario.UL_TO_UL: (p.aclr_ue_db, p.acs_bs_db),
        InterferenceScenario.UL_TO_DL: (p.aclr_ue_db, p.acs_ue_db),
    }
    aclr, acs = mapping[scenario]
    return combine_acir_db(aclr, acs)


@dataclass(frozen=True)
class LinkBudget:
    """One directed link; rx power follows exactly from the components."""

    tx_power_dbm: float
    pathloss: PathlossBreakdown
    tx_gain_db: float = 0.0
    rx_gain_db: float = 0.0
    acir_db: float = 0.0  # 0 for co-channel links
    extra_isolation_db: float = 0.0

    @property
    def rx_power_dbm(self) -> float:
        return (
            self.tx_power_dbm
            + self.tx_gain_db
            + self.rx_gain_db
            - self.pathloss.total_db
            - self.acir_db
            - self.extra_isolation_db
        )


class SinrMode(Enum):
    MEAN = "mean"  # interferer powers weighted by their activity
    WORST_CASE = "worst_case"  # every interferer with activity > 0 at full power


def sinr_db(
    victim: LinkBudget,
    interferers: list[tuple[LinkBudget, float]],
    noise_dbm: float,
    mode: SinrMode = SinrMode.MEAN,
) -> float:
    """Linear-domain S / (N + sum I) over the given interferer set."""
    s = db_to_lin(victim.rx_power_dbm)
    if not math.isfinite(victim.rx_power_dbm) and victim.rx_power_dbm > 0:
        raise ValueError("victim rx power must be finite")
    n = db_to_lin(noise_dbm)
    i_total = 0.0
    for link, activity in interferers:
        if not 0.0 <= activity <= 1.0:
            raise ValueError("interferer activity must be in [0, 1]")
        p = db_to_lin(link.rx_power_dbm)
        if mode is SinrMode.MEAN:
            i_total += activity * p
        elif mode is SinrMode.WORST_CASE:
            if activity > 0.0:
                i_total += p
        else:
            raise ValueError(f"unknown SINR mode {mode!r}")
    return lin_to_db(s / (n + i_total))
