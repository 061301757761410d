"""Sector antenna model: 3GPP parabolic element pattern plus an ideal
array-gain term for the serving beam, reused at full gain toward victims
(worst-case cross-link coupling) unless a beam-mismatch backoff is set."""

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np


class GainRole(Enum):
    SERVING = "serving"
    INTERFERING = "interfering"


@dataclass(frozen=True)
class ArrayConfig:
    """BS antenna panel, V x H x (Vs x Hs x Ps) element counts.

    The total radiating element count is the product of all five factors;
    ideal beamforming gain is 10*log10(total).
    """

    v: int
    h: int
    vs: int = 1
    hs: int = 1
    ps: int = 2
    max_element_gain_dbi: float = 8.0
    downtilt_deg: float = 0.0
    azimuth_deg: float = 0.0
    # element pattern shape (TR 38.901 Table 7.3-1 defaults)
    az_3db_deg: float = 65.0
    el_3db_deg: float = 65.0
    sla_db: float = 30.0
    front_back_db: float = 30.0

    def __post_init__(self):
        if self.total_elements < 1:
            raise ValueError("antenna array needs at least one element")

    @property
    def total_elements(self) -> int:
        return self.v * self.h * self.vs * self.hs * self.ps

    @property
    def array_gain_db(self) -> float:
        return 10.0 * math.log10(self.total_elements)


def _wrap_deg(a):
    """Wrap angles to (-180, 180]."""
    return -((-np.asarray(a, dtype=float) + 180.0) % 360.0 - 180.0)


def element_gain_dbi(az_offset_deg, el_offset_deg, cfg: ArrayConfig):
    """Single-element gain at the given offsets from boresight.

    G = Gmax - min(A_az + A_el, A_max) with A = min(12*(angle/3dB)^2, SLA).
    Accepts scalars or numpy arrays.
    """
    az = _wrap_deg(az_offset_deg)
    el = np.asarray(el_offset_deg, dtype=float)
    a_h = np.minimum(12.0 * (az / cfg.az_3db_deg) ** 2, cfg.front_back_db)
    a_v = np.minimum(12.0 * (el / cfg.el_3db_deg) ** 2, cfg.sla_db)
    att = np.minimum(a_h + a_v, cfg.front_back_db)
    g = cfg.max_element_gain_dbi - att
    return float(g) if np.isscalar(az_offset_deg) and np.isscalar(el_offset_deg) else g


def bs_gain_db(cfg: ArrayConfig, az_deg, el_deg):
    """Element-plus-array gain of a BS panel toward direction (az, el).

    az is measured CCW from +x in the horizontal plane, el positive above
    the horizon; the boresight sits at (cfg.azimuth_deg, -cfg.downtilt_deg).
    """
    az_off = _wrap_deg(np.asarray(az_deg, dtype=float) - cfg.azimuth_deg)
    el_off = np.asarray(el_deg, dtype=float) + cfg.downtilt_deg
    return element_gain_dbi(az_off, el_off, cfg) + cfg.array_gain_db


@dataclass(frozen=True)
class LinkGeometry:
    """Departure/arrival angles of a link, degrees."""

    az_from_tx: float
    el_from_tx: float
    az_from_rx: float
    el_from_rx: float


def link_antenna_gain_db(
    tx_cfg: ArrayConfig | None,
    rx_cfg: ArrayConfig | None,
    geometry: LinkGeometry,
    role: GainRole,
    interf_beam_backoff_db: float = 0.0,
) -> float:
    """Total antenna gain of a link; None config means an isotropic UE (0 dBi).

    Serving links get the full beamformed gain on each BS end. Interfering
    links keep the full gain for BS-to-BS coupling (worst case) and are
    reduced by the configured beam-mismatch backoff otherwise.
    """
    g = 0.0
    if tx_cfg is not None:
        g += float(bs_gain_db(tx_cfg, geometry.az_from_tx, geometry.el_from_tx))
    if rx_cfg is not None:
        g += float(bs_gain_db(rx_cfg, geometry.az_from_rx, geometry.el_from_rx))
    # the backoff models beam mismatch of a single BS panel; BS-to-BS keeps
    # the worst-case full gain and UE-to-UE links have no beam to back off
    if role is GainRole.INTERFERING and (tx_cfg is None) != (rx_cfg is None):
        g -= interf_beam_backoff_db
    return g
