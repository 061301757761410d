"""Large-scale propagation: TR 38.901 UMa / UMi / InH-Open-Office path loss,
LOS probability, lognormal shadow fading, angular wall penetration loss,
indoor loss, and their composition per link class.

Link-class rules:
  macro BS <-> outdoor UE            UMa
  factory BS <-> indoor UE           InH Open Office
  macro BS <-> anything indoor       UMa + wall + D*d_in
  outdoor UE <-> anything indoor     UMi + wall + D*d_in
  macro BS <-> factory BS            UMa + wall + D*d_in (base model switchable)
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .geometry import NetworkLayout, wall_entry, wrapped_displacement
from .rng import pair_draws

logger = logging.getLogger(__name__)

SPEED_OF_LIGHT = 3.0e8  # m/s, as used in the TR 38.901 breakpoint formulas
_ENV_HEIGHT_M = 1.0  # effective environment height h_E (valid for h_UT <= 13 m)


class PropagationModel(Enum):
    UMA = "uma"
    UMI = "umi"
    INH_OPEN_OFFICE = "inh_open_office"


#: (d_min, d_max) validity of each model; UMa/UMi bound d_2D, InH bounds d_3D.
_VALIDITY = {
    PropagationModel.UMA: (10.0, 5000.0),
    PropagationModel.UMI: (10.0, 5000.0),
    PropagationModel.INH_OPEN_OFFICE: (1.0, 150.0),
}

_SHADOW_SIGMA_DB = {
    (PropagationModel.UMA, True): 4.0,
    (PropagationModel.UMA, False): 6.0,
    (PropagationModel.UMI, True): 4.0,
    (PropagationModel.UMI, False): 7.82,
    (PropagationModel.INH_OPEN_OFFICE, True): 3.0,
    (PropagationModel.INH_OPEN_OFFICE, False): 8.03,
}

_warned_clamps: set[tuple[PropagationModel, str]] = set()


@dataclass(frozen=True)
class PathlossBreakdown:
    """Per-link large-scale loss, decomposed; total is the exact sum."""

    model: PropagationModel
    los: bool
    basic_pl_db: float
    shadow_db: float
    wall_db: float
    indoor_db: float

    @property
    def total_db(self) -> float:
        return self.basic_pl_db + self.shadow_db + self.wall_db + self.indoor_db


def shadow_sigma_db(model: PropagationModel, los: bool) -> float:
    return _SHADOW_SIGMA_DB[(model, los)]


def _clamp_distance(model: PropagationModel, d, clamp: bool):
    lo, hi = _VALIDITY[model]
    d = np.asarray(d, dtype=float)
    below = d < lo
    above = d > hi
    if not clamp and (np.any(below) or np.any(above)):
        raise ValueError(f"distance outside {model.value} validity [{lo}, {hi}] m")
    for mask, tag in ((below, "min"), (above, "max")):
        if np.any(mask) and (model, tag) not in _warned_clamps:
            _warned_clamps.add((model, tag))
            logger.warning(
                "clamping %s distances to the model %s of %s m",
                model.value,
                "minimum" if tag == "min" else "maximum",
                lo if tag == "min" else hi,
            )
    return np.clip(d, lo, hi)


def _breakpoint_m(h_bs_m: float, h_ut_m: float, fc_ghz: float) -> float:
    h_bs_eff = max(h_bs_m - _ENV_HEIGHT_M, 0.05)
    h_ut_eff = max(h_ut_m - _ENV_HEIGHT_M, 0.05)
    return 4.0 * h_bs_eff * h_ut_eff * fc_ghz * 1e9 / SPEED_OF_LIGHT


def basic_pathloss_db(
    model: PropagationModel,
    d2d_m,
    h_bs_m: float,
    h_ut_m: float,
    fc_ghz: float,
    los,
    clamp: bool = True,
):
    """TR 38.901 Table 7.4.1-1 path loss; scalar or vectorized over distance.

    Out-of-range distances are clamped to the model validity limits with a
    one-shot warning (clamp=False rejects them instead).
    """
    if fc_ghz <= 0:
        raise ValueError("carrier frequency must be positive")
    scalar = np.isscalar(d2d_m) and np.isscalar(los)
    d2d = np.asarray(d2d_m, dtype=float)
    if np.any(d2d < 0):
        raise ValueError("distance must be non-negative")
    los_mask = np.asarray(los, dtype=bool)
    dh = h_bs_m - h_ut_m
    lf = 20.0 * math.log10(fc_ghz)

    if model is PropagationModel.INH_OPEN_OFFICE:
        d3d = _clamp_distance(model, np.hypot(d2d, dh), clamp)
        ld = np.log10(d3d)
        pl_los = 32.4 + 17.3 * ld + lf
        pl_nlos = np.maximum(pl_los, 17.30 + 38.3 * ld + 24.9 * math.log10(fc_ghz))
    else:
        d2d = _clamp_distance(model, d2d, clamp)
        d3d = np.hypot(d2d, dh)
        ld = np.log10(d3d)
        d_bp = _breakpoint_m(h_bs_m, h_ut_m, fc_ghz)
        if model is PropagationModel.UMA:
            pl1 = 28.0 + 22.0 * ld + lf
            pl2 = 28.0 + 40.0 * ld + lf - 9.0 * math.log10(d_bp**2 + dh**2)
            pl_los = np.where(d2d <= d_bp, pl1, pl2)
            pl_nlos = np.maximum(
                pl_los, 13.54 + 39.08 * ld + lf - 0.6 * (h_ut_m - 1.5)
            )
        elif model is PropagationModel.UMI:
            pl1 = 32.4 + 21.0 * ld + lf
            pl2 = 32.4 + 40.0 * ld + lf - 9.5 * math.log10(d_bp**2 + dh**2)
            pl_los = np.where(d2d <= d_bp, pl1, pl2)
            pl_nlos = np.maximum(
                pl_los, 22.4 + 35.3 * ld + 21.3 * math.log10(fc_ghz) - 0.3 * (h_ut_m - 1.5)
            )
        else:
            raise ValueError(f"unknown model {model!r}")

    pl = np.where(los_mask, pl_los, pl_nlos)
    return float(pl) if scalar else pl


def los_probability(model: PropagationModel, d2d_m, h_ut_m: float = 1.5):
    """TR 38.901 Table 7.4.2-1 LOS probability; scalar or vectorized."""
    scalar = np.isscalar(d2d_m)
    d = np.asarray(d2d_m, dtype=float)
    if np.any(d < 0):
        raise ValueError("distance must be non-negative")
    with np.errstate(divide="ignore", invalid="ignore"):
        if model is PropagationModel.UMA:
            if h_ut_m <= 13.0:
                c_prime = 0.0
            elif h_ut_m <= 23.0:
                c_prime = ((h_ut_m - 13.0) / 10.0) ** 1.5
            else:
                raise ValueError("UMa LOS probability needs h_ut <= 23 m")
            base = 18.0 / d + np.exp(-d / 63.0) * (1.0 - 18.0 / d)
            boost = 1.0 + c_prime * 1.25 * (d / 100.0) ** 3 * np.exp(-d / 150.0)
            p = np.where(d <= 18.0, 1.0, base * boost)
        elif model is PropagationModel.UMI:
            base = 18.0 / d + np.exp(-d / 36.0) * (1.0 - 18.0 / d)
            p = np.where(d <= 18.0, 1.0, base)
        elif model is PropagationModel.INH_OPEN_OFFICE:
            p = np.where(
                d <= 5.0,
                1.0,
                np.where(
                    d <= 49.0,
                    np.exp(-(d - 5.0) / 70.8),
                    np.exp(-(d - 49.0) / 211.7) * 0.54,
                ),
            )
        else:
            raise ValueError(f"unknown model {model!r}")
    p = np.clip(np.nan_to_num(p, nan=1.0), 0.0, 1.0)
    return float(p) if scalar else p


def wall_penetration_loss_db(
    incident_angle_deg, perp_loss_db: float, angular_coeff_db: float = 20.0
):
    """Wall loss with the quadratic-cosine angular term.

    L(theta) = L_perp + A * (1 - cos(theta))^2, equal to the perpendicular
    loss at normal incidence and growing monotonically toward grazing.
    """
    angle = np.asarray(incident_angle_deg, dtype=float)
    if np.any((angle < 0.0) | (angle >= 90.0)):
        raise ValueError("incident angle must be in [0, 90)")
    if perp_loss_db < 0:
        raise ValueError("perpendicular wall loss must be non-negative")
    loss = perp_loss_db + angular_coeff_db * (1.0 - np.cos(np.radians(angle))) ** 2
    return float(loss) if np.isscalar(incident_angle_deg) else loss


@dataclass(frozen=True)
class PropagationNode:
    """Endpoint descriptor used for link classification."""

    node_id: str
    x: float
    y: float
    height_m: float
    indoor: bool
    is_bs: bool

    @property
    def xy(self) -> np.ndarray:
        return np.array([self.x, self.y])


@dataclass(frozen=True)
class PropagationParams:
    fc_ghz: float = 3.5
    wall_perp_loss_db: float = 13.0  # math.inf models full isolation
    wall_angular_coeff_db: float = 20.0
    indoor_loss_db_per_m: float = 0.5
    macro_factory_bs_model: str = "uma"  # base model of the macro<->factory BS link
    clamp_distances: bool = True


def link_class(
    a_indoor: bool,
    a_is_bs: bool,
    b_indoor: bool,
    b_is_bs: bool,
    macro_factory_bs_model: str = "uma",
) -> tuple[PropagationModel, bool]:
    """(base model, crosses wall) for an endpoint pair.

    A BS is a macro BS iff outdoor and a factory BS iff indoor; UEs are
    eMBB iff outdoor and URLLC iff indoor.
    """
    if a_indoor and b_indoor:
        return PropagationModel.INH_OPEN_OFFICE, False
    if not a_indoor and not b_indoor:
        if a_is_bs or b_is_bs:
            return PropagationModel.UMA, False
        return PropagationModel.UMI, False
    # exactly one indoor endpoint
    out_is_bs = a_is_bs if not a_indoor else b_is_bs
    in_is_bs = a_is_bs if a_indoor else b_is_bs
    if out_is_bs:
        if in_is_bs:
            model = PropagationModel(macro_factory_bs_model)
        else:
            model = PropagationModel.UMA
        return model, True
    return PropagationModel.UMI, True


def _bs_ut_heights(
    a_h: float, a_indoor: bool, a_is_bs: bool, b_h: float, b_indoor: bool, b_is_bs: bool
) -> tuple[float, float]:
    """Order-free assignment of the model's (h_BS, h_UT) roles."""
    score_a = (a_is_bs, not a_indoor, a_h)
    score_b = (b_is_bs, not b_indoor, b_h)
    if score_a >= score_b:
        return a_h, b_h
    return b_h, a_h


@dataclass
class LinkArrays:
    """Vectorized link results from one source node to many destinations."""

    model: PropagationModel
    crosses_wall: bool
    los: np.ndarray  # bool (n,)
    basic_db: np.ndarray
    shadow_db: np.ndarray
    wall_db: np.ndarray
    indoor_db: np.ndarray
    total_db: np.ndarray
    d2d_m: np.ndarray
    az_from_src_deg: np.ndarray
    el_from_src_deg: np.ndarray
    az_from_dst_deg: np.ndarray
    el_from_dst_deg: np.ndarray


def composite_pathloss_array(
    layout: NetworkLayout,
    src: PropagationNode,
    dst_xy,
    dst_h,
    dst_indoor: bool,
    dst_is_bs: bool,
    dst_ids: list[str],
    params: PropagationParams,
    drop_seed: int,
) -> LinkArrays:
    """Composite large-scale loss from one node to an array of nodes.

    Wrap-around translates the outdoor endpoint so the factory keeps its
    true frame; LOS state and shadow fading are drawn once per unordered
    node pair from the drop seed, so swapped endpoints see identical loss.
    """
    dst_xy = np.atleast_2d(np.asarray(dst_xy, dtype=float))
    n = len(dst_xy)
    model, crosses_wall = link_class(
        src.indoor, src.is_bs, dst_indoor, dst_is_bs, params.macro_factory_bs_model
    )
    if n == 0:
        empty = np.empty(0)
        return LinkArrays(
            model, crosses_wall, np.empty(0, dtype=bool), *([empty] * 10)
        )
    dst_hv = np.broadcast_to(np.asarray(dst_h, dtype=float), (n,)).astype(float)

    disp = wrapped_displacement(layout, src.xy, dst_xy)
    disp = np.atleast_2d(disp)
    d2d = np.hypot(disp[:, 0], disp[:, 1])
    dh = dst_hv - src.height_m

    h_bs, h_ut = _bs_ut_heights(
        src.height_m, src.indoor, src.is_bs, float(dst_hv[0]), dst_indoor, dst_is_bs
    )

    p_los = los_probability(model, d2d, h_ut if h_ut <= 23.0 else 1.5)
    u = np.empty(n)
    z = np.empty(n)
    for k in range(n):
        u[k], z[k] = pair_draws(drop_seed, src.node_id, dst_ids[k])
    los = u < p_los

    basic = basic_pathloss_db(
        model, d2d, h_bs, h_ut, params.fc_ghz, los, clamp=params.clamp_distances
    )
    sigma = np.where(
        los, shadow_sigma_db(model, True), shadow_sigma_db(model, False)
    )
    shadow = z * sigma

    if crosses_wall:
        if src.indoor:
            out_xy, out_h = src.xy + disp, dst_hv
            in_xy, in_h = np.broadcast_to(src.xy, (n, 2)), src.height_m
        else:
            out_xy, out_h = dst_xy - disp, src.height_m
            in_xy, in_h = dst_xy, dst_hv
        angle, d_in = wall_entry(
            layout.factory.rect, layout.factory.height_m, out_xy, out_h, in_xy, in_h
        )
        wall = wall_penetration_loss_db(
            angle, params.wall_perp_loss_db, params.wall_angular_coeff_db
        )
        wall = np.broadcast_to(np.asarray(wall, dtype=float), (n,))
        indoor = params.indoor_loss_db_per_m * d_in
    else:
        wall = np.zeros(n)
        indoor = np.zeros(n)

    with np.errstate(invalid="ignore"):
        az_src = np.degrees(np.arctan2(disp[:, 1], disp[:, 0]))
        el_src = np.degrees(np.arctan2(dh, d2d))
        az_dst = np.degrees(np.arctan2(-disp[:, 1], -disp[:, 0]))
        el_dst = np.degrees(np.arctan2(-dh, d2d))

    return LinkArrays(
        model=model,
        crosses_wall=crosses_wall,
        los=los,
        basic_db=np.asarray(basic, dtype=float),
        shadow_db=shadow,
        wall_db=np.asarray(wall, dtype=float),
        indoor_db=indoor,
        total_db=np.asarray(basic, dtype=float) + shadow + wall + indoor,
        d2d_m=d2d,
        az_from_src_deg=az_src,
        el_from_src_deg=el_src,
        az_from_dst_deg=az_dst,
        el_from_dst_deg=el_dst,
    )


def composite_pathloss(
    layout: NetworkLayout,
    node_a: PropagationNode,
    node_b: PropagationNode,
    params: PropagationParams,
    drop_seed: int,
) -> PathlossBreakdown:
    """Composite loss between two nodes (see composite_pathloss_array)."""
    arrays = composite_pathloss_array(
        layout,
        node_a,
        node_b.xy,
        node_b.height_m,
        node_b.indoor,
        node_b.is_bs,
        [node_b.node_id],
        params,
        drop_seed,
    )
    return PathlossBreakdown(
        model=arrays.model,
        los=bool(arrays.los[0]),
        basic_pl_db=float(arrays.basic_db[0]),
        shadow_db=float(arrays.shadow_db[0]),
        wall_db=float(arrays.wall_db[0]),
        indoor_db=float(arrays.indoor_db[0]),
    )
