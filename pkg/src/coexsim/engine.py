"""Drop orchestration: layout, user drops, association, load coupling,
per-sample SINRs, campaign aggregation, isolation sweeps and persistence.

Every drop is a pure function of (config, drop_index); campaigns reduce
drops in index order, so serial and parallel runs are bit-identical.
"""

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import __version__, antenna, linkadapt, metrics, propagation, radio, tdd, traffic
from .antenna import ArrayConfig
from .config import ScenarioConfig
from .geometry import (
    FactoryPlacement,
    NetworkLayout,
    build_layout,
    sample_factory_points,
    sample_outdoor_points,
    wrapped_displacement,
)
from .propagation import PropagationNode, PropagationParams, composite_pathloss_array
from .rng import stable_hash64
from .tdd import InterferenceScenario, MixMode

N_MACRO_CELLS = 21
N_FACTORY_CELLS = 3


class CampaignError(Exception):
    """Campaign-level failure; maps to CLI exit code 3."""


# ---------------------------------------------------------------------------
# cells and layout plumbing


@dataclass(frozen=True)
class _Cell:
    index: int
    network: str  # "embb" | "urllc"
    xy: np.ndarray
    height_m: float
    power_dbm: float
    array: ArrayConfig
    node: PropagationNode


def layout_from_config(config: ScenarioConfig) -> NetworkLayout:
    return build_layout(
        isd_m=config.isd_m,
        placement=FactoryPlacement(config.placement),
        near_bs_offset_m=config.near_bs_offset_m,
        macro_bs_height_m=config.macro_bs_height_m,
        macro_sector_azimuths_deg=config.macro_sector_azimuths_deg,
        factory_width_m=config.factory_width_m,
        factory_depth_m=config.factory_depth_m,
        factory_height_m=config.factory_height_m,
        factory_bs_height_m=config.factory_bs_height_m,
        factory_sector_azimuths_deg=config.factory_sector_azimuths_deg,
        factory_downtilt_deg=config.factory_downtilt_deg,
        bounds_m=config.bounds_m,
    )


def _build_cells(
    config: ScenarioConfig, layout: NetworkLayout
) -> tuple[list[_Cell], list[_Cell]]:
    macro = []
    for s_idx, site in enumerate(layout.sites):
        for k, az in enumerate(site.sector_azimuths_deg):
            v, h, vs, hs, ps = config.macro_array
            cfg = ArrayConfig(
                v, h, vs, hs, ps,
                max_element_gain_dbi=config.max_element_gain_dbi,
                downtilt_deg=config.macro_downtilt_deg,
                azimuth_deg=az,
            )
            node = PropagationNode(
                f"mbs:{s_idx}:{k}", site.x, site.y, site.height_m, False, True
            )
            macro.append(
                _Cell(len(macro), "embb", site.xy, site.height_m,
                      config.macro_bs_power_dbm, cfg, node)
            )
    factory = []
    f = layout.factory
    cx, cy = f.center
    for k, az in enumerate(f.bs_sector_azimuths_deg):
        v, h, vs, hs, ps = config.factory_array
        cfg = ArrayConfig(
            v, h, vs, hs, ps,
            max_element_gain_dbi=config.max_element_gain_dbi,
            downtilt_deg=f.bs_downtilt_deg,
            azimuth_deg=az,
        )
        node = PropagationNode(f"fbs:{k}", cx, cy, f.bs_height_m, True, True)
        factory.append(
            _Cell(len(factory), "urllc", f.center, f.bs_height_m,
                  config.factory_bs_power_dbm, cfg, node)
        )
    return macro, factory


def _prop_params(config: ScenarioConfig) -> PropagationParams:
    return PropagationParams(
        fc_ghz=config.carrier_ghz,
        wall_perp_loss_db=config.wall_loss_db,
        wall_angular_coeff_db=config.wall_angular_coeff_db,
        indoor_loss_db_per_m=config.indoor_loss_db_per_m,
        macro_factory_bs_model=config.macro_factory_bs_model,
        clamp_distances=config.clamp_distances,
    )


def _bs_to_points(
    layout, cells, points_xy, points_h, points_indoor, point_ids, params, drop_seed
):
    """Pathloss and BS-side gain from each cell's BS to every point."""
    k, n = len(cells), len(points_xy)
    pl = np.empty((k, n))
    gain = np.empty((k, n))
    for c, cell in enumerate(cells):
        arr = composite_pathloss_array(
            layout, cell.node, points_xy, points_h, points_indoor, False,
            point_ids, params, drop_seed,
        )
        pl[c] = arr.total_db
        gain[c] = antenna.bs_gain_db(cell.array, arr.az_from_src_deg, arr.el_from_src_deg)
    return pl, gain


def _ue_to_points(layout, ue_node, points_xy, points_h, points_indoor,
                  point_ids, params, drop_seed):
    """Pathloss from a single UE to many points (UE-to-UE class links)."""
    arr = composite_pathloss_array(
        layout, ue_node, points_xy, points_h, points_indoor, False,
        point_ids, params, drop_seed,
    )
    return arr.total_db


def _group_mean_max(p_lin, groups, n_groups):
    """Column-group mean and max of a (k, n) linear power table."""
    k = p_lin.shape[0]
    mean = np.zeros((k, n_groups))
    mx = np.zeros((k, n_groups))
    for g in range(n_groups):
        mask = groups == g
        if np.any(mask):
            mean[:, g] = np.mean(p_lin[:, mask], axis=1)
            mx[:, g] = np.max(p_lin[:, mask], axis=1)
    return mean, mx


def _db_to_lin(x):
    with np.errstate(over="ignore"):
        return np.power(10.0, np.asarray(x, dtype=float) / 10.0)


# ---------------------------------------------------------------------------
# drop context


@dataclass
class DropContext:
    """Everything about one drop that is independent of load and isolation."""

    config: ScenarioConfig
    drop_index: int
    drop_seed: int
    layout: NetworkLayout
    n_samples: int
    n_embb: int
    sample_xy: np.ndarray
    embb_xy: np.ndarray
    assoc_u_dl: np.ndarray  # (n,) DL serving factory sector per sample
    assoc_u_ul: np.ndarray  # (n,) UL serving factory sector per sample
    assoc_e_dl: np.ndarray  # (m,) DL serving macro cell per eMBB user
    assoc_e_ul: np.ndarray  # (m,) UL serving macro cell per eMBB user
    counts_fac_dl: np.ndarray
    counts_fac_ul: np.ndarray
    counts_mac_dl: np.ndarray
    # serving linear powers and noise
    s_dl_u: np.ndarray
    s_ul_u: np.ndarray
    s_dl_e: np.ndarray
    s_ul_e: np.ndarray
    noise_ue_lin: float
    noise_bs_lin: float
    # interference tables, linear mW at activity 1, co-channel
    m_fac_dl: np.ndarray  # (n, 3) other factory sectors -> sample, serving zeroed
    m_mbs_dl: np.ndarray  # (n, 21) macro BS -> sample
    m_mue_dl: np.ndarray  # (n, 21) macro rep UE -> sample
    m_fac_ul: np.ndarray  # (3, 3) cell-mean URLLC UE -> factory BS, diag zeroed
    m_fac_ul_max: np.ndarray
    m_mbs_ul: np.ndarray  # (3, 21) macro BS -> factory BS
    m_mue_ul: np.ndarray  # (3, 21) cell-mean eMBB UE -> factory BS
    m_mue_ul_max: np.ndarray
    e_mbs_dl: np.ndarray  # (m, 21) macro BS -> eMBB user, serving zeroed
    e_fbs_dl: np.ndarray  # (m, 3) factory BS -> eMBB user
    e_fue_dl: np.ndarray  # (m, 3) URLLC rep UE -> eMBB user
    e_mue_ul: np.ndarray  # (21, 21) cell-mean eMBB UE -> macro BS, diag zeroed
    e_fbs_ul: np.ndarray  # (21, 3) factory BS -> macro BS
    e_fue_ul: np.ndarray  # (21, 3) cell-mean URLLC UE -> macro BS
    # conditional scenario probabilities, P(aggressor dir | victim dir)
    cond_u: dict
    cond_e: dict
    # per-scenario ACIR (dB), zero for co-channel
    acir_db: dict
    # direction slot fractions
    f_mac: tuple[float, float]
    f_fac: tuple[float, float]
    latency_ok: tuple[bool, bool]  # (dl, ul) for the factory pattern
    # load bookkeeping
    offered_mac_dl: np.ndarray
    offered_mac_ul: np.ndarray
    required_rate_bps: float
    mcs_thresholds: np.ndarray
    mcs_ses: np.ndarray
    polygon_mask: np.ndarray
    closest_cell: int
    resample_attempts: int
    flags: tuple[str, ...] = ()


def build_drop_context(config: ScenarioConfig, drop_index: int) -> DropContext:
    cfg = config
    drop_seed = stable_hash64(cfg.master_seed, "drop", drop_index)
    layout = layout_from_config(cfg)
    params = _prop_params(cfg)
    macro_cells, factory_cells = _build_cells(cfg, layout)
    flags: list[str] = []

    n = cfg.urllc_floor_samples
    m = cfg.embb_users
    rng_floor = np.random.default_rng(stable_hash64(drop_seed, "floor"))
    sample_xy = sample_factory_points(layout, n, rng_floor)
    sample_ids = [f"uu:{i}" for i in range(n)]

    # eMBB users, redrawn until the factory polygon region is populated
    attempts = 0
    embb_xy = None
    for attempt in range(cfg.embb_resample_cap):
        rng_embb = np.random.default_rng(stable_hash64(drop_seed, "embb", attempt))
        cand = sample_outdoor_points(layout, m, rng_embb)
        attempts = attempt + 1
        if np.any(metrics.polygon_region_mask(layout, cand)):
            embb_xy = cand
            break
        embb_xy = cand
    if not np.any(metrics.polygon_region_mask(layout, embb_xy)):
        flags.append("empty_polygon_region")
    embb_ids = [f"eu:{j}" for j in range(m)]

    ue_h = cfg.ue_height_m
    pl_fu, g_fu = _bs_to_points(
        layout, factory_cells, sample_xy, ue_h, True, sample_ids, params, drop_seed
    )
    pl_mu, g_mu = _bs_to_points(
        layout, macro_cells, sample_xy, ue_h, True, sample_ids, params, drop_seed
    )
    pl_me, g_me = _bs_to_points(
        layout, macro_cells, embb_xy, ue_h, False, embb_ids, params, drop_seed
    )
    pl_fe, g_fe = _bs_to_points(
        layout, factory_cells, embb_xy, ue_h, False, embb_ids, params, drop_seed
    )

    # association by strongest received power including antenna gain, per
    # link direction: DL ranks the BS-to-UE rx power, UL the power-controlled
    # UE-to-BS rx power (the fractional PC makes the two rankings differ)
    noise_bs_dbm = radio.noise_power_dbm(cfg.bandwidth_hz, cfg.bs_noise_figure_db)
    noise_ue_dbm = radio.noise_power_dbm(cfg.bandwidth_hz, cfg.ue_noise_figure_db)
    pc = radio.PowerControlParams.from_noise(
        cfg.pc_alpha, cfg.pc_target_snr_db, cfg.ue_power_dbm, noise_bs_dbm
    )

    def _assoc(pl, gain, bs_power_dbm):
        rx_dl = bs_power_dbm + gain - pl + cfg.ue_antenna_gain_dbi
        p_cand = np.minimum(pc.p_max_dbm, pc.p0_dbm + pc.alpha * pl)
        rx_ul = p_cand - pl + gain
        return np.argmax(rx_dl, axis=0), np.argmax(rx_ul, axis=0), rx_dl

    assoc_u_dl, assoc_u_ul, rx_fu = _assoc(pl_fu, g_fu, cfg.factory_bs_power_dbm)
    assoc_e_dl, assoc_e_ul, rx_me = _assoc(pl_me, g_me, cfg.macro_bs_power_dbm)
    counts_fac_dl = np.bincount(assoc_u_dl, minlength=N_FACTORY_CELLS).astype(float)
    counts_fac_ul = np.bincount(assoc_u_ul, minlength=N_FACTORY_CELLS).astype(float)
    counts_mac_dl = np.bincount(assoc_e_dl, minlength=N_MACRO_CELLS).astype(float)

    idx_n = np.arange(n)
    idx_m = np.arange(m)
    p_tx_u = np.minimum(pc.p_max_dbm, pc.p0_dbm + pc.alpha * pl_fu[assoc_u_ul, idx_n])
    p_tx_e = np.minimum(pc.p_max_dbm, pc.p0_dbm + pc.alpha * pl_me[assoc_e_ul, idx_m])

    s_dl_u = _db_to_lin(rx_fu[assoc_u_dl, idx_n])
    s_ul_u = _db_to_lin(p_tx_u - pl_fu[assoc_u_ul, idx_n] + g_fu[assoc_u_ul, idx_n])
    s_dl_e = _db_to_lin(rx_me[assoc_e_dl, idx_m])
    s_ul_e = _db_to_lin(p_tx_e - pl_me[assoc_e_ul, idx_m] + g_me[assoc_e_ul, idx_m])

    backoff = cfg.interf_beam_backoff_db

    # URLLC DL victims
    m_fac_dl = _db_to_lin(cfg.factory_bs_power_dbm + g_fu - backoff - pl_fu).T
    m_fac_dl[idx_n, assoc_u_dl] = 0.0
    m_mbs_dl = _db_to_lin(cfg.macro_bs_power_dbm + g_mu - backoff - pl_mu).T

    # URLLC UL victims (the 3 factory sector BSs)
    p_ul_at_f = _db_to_lin(p_tx_u[None, :] - pl_fu + g_fu - backoff)
    m_fac_ul, m_fac_ul_max = _group_mean_max(p_ul_at_f, assoc_u_ul, N_FACTORY_CELLS)
    np.fill_diagonal(m_fac_ul, 0.0)
    np.fill_diagonal(m_fac_ul_max, 0.0)
    p_eue_at_f = _db_to_lin(p_tx_e[None, :] - pl_fe + g_fe - backoff)
    m_mue_ul, m_mue_ul_max = _group_mean_max(p_eue_at_f, assoc_e_ul, N_MACRO_CELLS)

    # macro BS <-> factory BS coupling (both ends beamformed, no backoff)
    fbs_xy = np.array([c.xy for c in factory_cells])
    fbs_ids = [c.node.node_id for c in factory_cells]
    pl_bb = np.empty((N_MACRO_CELLS, N_FACTORY_CELLS))
    g_bb = np.empty((N_MACRO_CELLS, N_FACTORY_CELLS))
    for b, cell in enumerate(macro_cells):
        arr = composite_pathloss_array(
            layout, cell.node, fbs_xy, factory_cells[0].height_m, True, True,
            fbs_ids, params, drop_seed,
        )
        g_mac_side = antenna.bs_gain_db(
            cell.array, arr.az_from_src_deg, arr.el_from_src_deg
        )
        g_fac_side = np.array(
            [
                float(antenna.bs_gain_db(
                    factory_cells[k].array,
                    arr.az_from_dst_deg[k],
                    arr.el_from_dst_deg[k],
                ))
                for k in range(N_FACTORY_CELLS)
            ]
        )
        pl_bb[b] = arr.total_db
        g_bb[b] = g_mac_side + g_fac_side
    m_mbs_ul = _db_to_lin(cfg.macro_bs_power_dbm + g_bb - pl_bb).T  # (3, 21)
    e_fbs_ul = _db_to_lin(cfg.factory_bs_power_dbm + g_bb - pl_bb)  # (21, 3)

    # representative scheduled UEs for the UE-to-UE coupling
    rng_sched = np.random.default_rng(stable_hash64(drop_seed, "sched"))
    m_mue_dl = np.zeros((n, N_MACRO_CELLS))
    for c in range(N_MACRO_CELLS):
        users = np.flatnonzero(assoc_e_ul == c)
        if users.size == 0:
            continue
        j = int(rng_sched.choice(users))
        rep = PropagationNode(embb_ids[j], embb_xy[j, 0], embb_xy[j, 1], ue_h, False, False)
        pl_rep = _ue_to_points(
            layout, rep, sample_xy, ue_h, True, sample_ids, params, drop_seed
        )
        m_mue_dl[:, c] = _db_to_lin(p_tx_e[j] - pl_rep)
    e_fue_dl = np.zeros((m, N_FACTORY_CELLS))
    for f in range(N_FACTORY_CELLS):
        users = np.flatnonzero(assoc_u_ul == f)
        if users.size == 0:
            continue
        i = int(rng_sched.choice(users))
        rep = PropagationNode(sample_ids[i], sample_xy[i, 0], sample_xy[i, 1], ue_h, True, False)
        pl_rep = _ue_to_points(
            layout, rep, embb_xy, ue_h, False, embb_ids, params, drop_seed
        )
        e_fue_dl[:, f] = _db_to_lin(p_tx_u[i] - pl_rep)

    # eMBB victims
    e_mbs_dl = _db_to_lin(cfg.macro_bs_power_dbm + g_me - backoff - pl_me).T
    e_mbs_dl[idx_m, assoc_e_dl] = 0.0
    e_fbs_dl = _db_to_lin(cfg.factory_bs_power_dbm + g_fe - backoff - pl_fe).T
    p_eue_at_m = _db_to_lin(p_tx_e[None, :] - pl_me + g_me - backoff)
    e_mue_ul, _ = _group_mean_max(p_eue_at_m, assoc_e_ul, N_MACRO_CELLS)
    np.fill_diagonal(e_mue_ul, 0.0)
    p_uue_at_m = _db_to_lin(p_tx_u[None, :] - pl_mu + g_mu - backoff)
    e_fue_ul, _ = _group_mean_max(p_uue_at_m, assoc_u_ul, N_FACTORY_CELLS)

    # scenario mixes and conditional activity factors
    macro_pat = tdd.parse_pattern(cfg.macro_tdd_pattern, cfg.tti_us)
    fac_pat = tdd.parse_pattern(cfg.factory_tdd_pattern, cfg.tti_us)
    mode = MixMode.ALIGNED if cfg.sync_mode == "synchronized" else MixMode.MARGINAL
    mix_u = tdd.scenario_probabilities(macro_pat, fac_pat, mode)
    mix_e = tdd.scenario_probabilities(fac_pat, macro_pat, mode)
    f_mac = tuple(float(x) for x in tdd.direction_fractions(macro_pat))
    f_fac = tuple(float(x) for x in tdd.direction_fractions(fac_pat))

    def conditionals(mix, f_victim):
        cond = {}
        for agg, vic in (("D", "D"), ("D", "U"), ("U", "D"), ("U", "U")):
            fv = f_victim[0] if vic == "D" else f_victim[1]
            p = mix[tdd.classify_scenario(agg, vic)]
            cond[(agg, vic)] = float(p / fv) if fv > 0 else 0.0
        return cond

    cond_u = conditionals(mix_u, f_fac)
    cond_e = conditionals(mix_e, f_mac)

    if cfg.deployment == "adjacent_channel" and not cfg.force_zero_acir:
        acir_params = radio.AcirParams(
            cfg.aclr_bs_db, cfg.acs_bs_db, cfg.aclr_ue_db, cfg.acs_ue_db
        )
        acir_db = {s: radio.scenario_acir_db(s, acir_params) for s in InterferenceScenario}
    else:
        acir_db = {s: 0.0 for s in InterferenceScenario}

    lat_dl = tdd.latency_feasibility(
        fac_pat, "D", cfg.tti_us, cfg.processing_delay_us, cfg.latency_budget_us
    )[0]
    lat_ul = tdd.latency_feasibility(
        fac_pat, "U", cfg.tti_us, cfg.processing_delay_us, cfg.latency_budget_us
    )[0]

    embb_cell_bps = traffic.embb_offered_bps_per_cell(
        cfg.embb_offered_mbps_km2, cfg.isd_m
    )
    offered_mac_dl = np.full(N_MACRO_CELLS, embb_cell_bps * cfg.dl_share)
    offered_mac_ul = np.full(N_MACRO_CELLS, embb_cell_bps * (1.0 - cfg.dl_share))

    table = linkadapt.build_mcs_table(cfg.shannon_gap_db)
    qos = linkadapt.QosRequirement(
        payload_bits=cfg.payload_bits,
        latency_budget_us=cfg.latency_budget_us,
        reliability=cfg.reliability_target,
        tti_us=cfg.tti_us,
        symbols_per_tti=cfg.symbols_per_tti,
        scs_khz=cfg.scs_khz,
    )

    polygon_mask = metrics.polygon_region_mask(layout, embb_xy)

    # closest macro sector to the factory: nearest site, boresight tie-break
    fcenter = layout.factory.center
    dists = np.array(
        [np.linalg.norm(wrapped_displacement(layout, c.xy, fcenter)) for c in macro_cells]
    )
    near = dists <= dists.min() + 1e-9
    gains_toward = np.full(N_MACRO_CELLS, -np.inf)
    for c in np.flatnonzero(near):
        cell = macro_cells[c]
        disp = wrapped_displacement(layout, cell.xy, fcenter)
        az = math.degrees(math.atan2(disp[1], disp[0]))
        el = math.degrees(
            math.atan2(ue_h - cell.height_m, float(np.linalg.norm(disp)))
        )
        gains_toward[c] = float(antenna.bs_gain_db(cell.array, az, el))
    closest_cell = int(np.argmax(gains_toward))

    return DropContext(
        config=cfg,
        drop_index=drop_index,
        drop_seed=drop_seed,
        layout=layout,
        n_samples=n,
        n_embb=m,
        sample_xy=sample_xy,
        embb_xy=embb_xy,
        assoc_u_dl=assoc_u_dl,
        assoc_u_ul=assoc_u_ul,
        assoc_e_dl=assoc_e_dl,
        assoc_e_ul=assoc_e_ul,
        counts_fac_dl=counts_fac_dl,
        counts_fac_ul=counts_fac_ul,
        counts_mac_dl=counts_mac_dl,
        s_dl_u=s_dl_u,
        s_ul_u=s_ul_u,
        s_dl_e=s_dl_e,
        s_ul_e=s_ul_e,
        noise_ue_lin=radio.db_to_lin(noise_ue_dbm),
        noise_bs_lin=radio.db_to_lin(noise_bs_dbm),
        m_fac_dl=m_fac_dl,
        m_mbs_dl=m_mbs_dl,
        m_mue_dl=m_mue_dl,
        m_fac_ul=m_fac_ul,
        m_fac_ul_max=m_fac_ul_max,
        m_mbs_ul=m_mbs_ul,
        m_mue_ul=m_mue_ul,
        m_mue_ul_max=m_mue_ul_max,
        e_mbs_dl=e_mbs_dl,
        e_fbs_dl=e_fbs_dl,
        e_fue_dl=e_fue_dl,
        e_mue_ul=e_mue_ul,
        e_fbs_ul=e_fbs_ul,
        e_fue_ul=e_fue_ul,
        cond_u=cond_u,
        cond_e=cond_e,
        acir_db=acir_db,
        f_mac=f_mac,
        f_fac=f_fac,
        latency_ok=(lat_dl, lat_ul),
        offered_mac_dl=offered_mac_dl,
        offered_mac_ul=offered_mac_ul,
        required_rate_bps=linkadapt.required_rate_bps(qos),
        mcs_thresholds=np.array([e.sinr_threshold_db for e in table]),
        mcs_ses=np.concatenate(([0.0], [e.spectral_efficiency for e in table])),
        polygon_mask=polygon_mask,
        closest_cell=closest_cell,
        resample_attempts=attempts,
        flags=tuple(flags),
    )


# ---------------------------------------------------------------------------
# drop evaluation


@dataclass
class DropResult:
    drop_index: int
    drop_seed: int
    x_dl: np.ndarray
    x_ul: np.ndarray
    x_combined: np.ndarray
    availability_dl_pct: float
    availability_ul_pct: float
    availability_combined_pct: float
    u_mac_dl: np.ndarray
    u_mac_ul: np.ndarray
    u_fac_dl: np.ndarray
    u_fac_ul: np.ndarray
    load_converged: bool
    embb_dl_rate_polygon_bps: float
    embb_ul_rate_closest_bps: float
    polygon_users: int
    closest_sector_users: int
    resample_attempts: int
    flags: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "drop_index": self.drop_index,
            "drop_seed": self.drop_seed,
            "x_dl": self.x_dl.astype(int).tolist(),
            "x_ul": self.x_ul.astype(int).tolist(),
            "x_combined": self.x_combined.astype(int).tolist(),
            "availability_dl_pct": self.availability_dl_pct,
            "availability_ul_pct": self.availability_ul_pct,
            "availability_combined_pct": self.availability_combined_pct,
            "u_mac_dl": self.u_mac_dl.tolist(),
            "u_mac_ul": self.u_mac_ul.tolist(),
            "u_fac_dl": self.u_fac_dl.tolist(),
            "u_fac_ul": self.u_fac_ul.tolist(),
            "load_converged": self.load_converged,
            "embb_dl_rate_polygon_bps": self.embb_dl_rate_polygon_bps,
            "embb_ul_rate_closest_bps": self.embb_ul_rate_closest_bps,
            "polygon_users": self.polygon_users,
            "closest_sector_users": self.closest_sector_users,
            "resample_attempts": self.resample_attempts,
            "flags": list(self.flags),
        }


def _se_lookup(ctx: DropContext, sinr_db):
    idx = np.searchsorted(ctx.mcs_thresholds, sinr_db, side="right")
    return ctx.mcs_ses[idx]


class _Evaluator:
    """SINR, rate and utilization machinery for one drop at given knobs."""

    def __init__(self, ctx: DropContext, urllc_rate, extra_isolation_db):
        self.ctx = ctx
        cfg = ctx.config
        self.rate = cfg.urllc_arrival_per_s_m2 if urllc_rate is None else urllc_rate
        delta = (
            cfg.extra_isolation_db if extra_isolation_db is None else extra_isolation_db
        )
        self.iso = {
            s: float(_db_to_lin(-(ctx.acir_db[s] + delta)))
            for s in InterferenceScenario
        }
        floor_area = cfg.factory_width_m * cfg.factory_depth_m
        total = traffic.urllc_offered_bps(self.rate, floor_area, cfg.payload_bits)
        n = float(ctx.n_samples)
        self.offered_fac_dl = total * cfg.dl_share * ctx.counts_fac_dl / n
        self.offered_fac_ul = total * (1.0 - cfg.dl_share) * ctx.counts_fac_ul / n
        self.offered = np.concatenate(
            [ctx.offered_mac_dl, ctx.offered_mac_ul, self.offered_fac_dl, self.offered_fac_ul]
        )
        self.rate_scale = cfg.bandwidth_hz * (1.0 - cfg.overhead_fraction)

    def _split(self, u):
        return (
            u[0:N_MACRO_CELLS],
            u[N_MACRO_CELLS : 2 * N_MACRO_CELLS],
            u[2 * N_MACRO_CELLS : 2 * N_MACRO_CELLS + N_FACTORY_CELLS],
            u[2 * N_MACRO_CELLS + N_FACTORY_CELLS :],
        )

    def sinrs_mean(self, u):
        """Activity-weighted SINRs of all victim groups, dB."""
        ctx = self.ctx
        u_mac_dl, u_mac_ul, u_fac_dl, u_fac_ul = self._split(u)
        iso, cu, ce = self.iso, ctx.cond_u, ctx.cond_e
        S = InterferenceScenario

        i_dl_u = (
            ctx.m_fac_dl @ u_fac_dl
            + ctx.m_mbs_dl @ (cu[("D", "D")] * iso[S.DL_TO_DL] * u_mac_dl)
            + ctx.m_mue_dl @ (cu[("U", "D")] * iso[S.UL_TO_DL] * u_mac_ul)
        )
        i_ul_f = (
            ctx.m_fac_ul @ u_fac_ul
            + ctx.m_mbs_ul @ (cu[("D", "U")] * iso[S.DL_TO_UL] * u_mac_dl)
            + ctx.m_mue_ul @ (cu[("U", "U")] * iso[S.UL_TO_UL] * u_mac_ul)
        )
        i_dl_e = (
            ctx.e_mbs_dl @ u_mac_dl
            + ctx.e_fbs_dl @ (ce[("D", "D")] * iso[S.DL_TO_DL] * u_fac_dl)
            + ctx.e_fue_dl @ (ce[("U", "D")] * iso[S.UL_TO_DL] * u_fac_ul)
        )
        i_ul_b = (
            ctx.e_mue_ul @ u_mac_ul
            + ctx.e_fbs_ul @ (ce[("D", "U")] * iso[S.DL_TO_UL] * u_fac_dl)
            + ctx.e_fue_ul @ (ce[("U", "U")] * iso[S.UL_TO_UL] * u_fac_ul)
        )
        with np.errstate(divide="ignore"):
            sinr_dl_u = 10.0 * np.log10(ctx.s_dl_u / (ctx.noise_ue_lin + i_dl_u))
            sinr_ul_u = 10.0 * np.log10(
                ctx.s_ul_u / (ctx.noise_bs_lin + i_ul_f[ctx.assoc_u_ul])
            )
            sinr_dl_e = 10.0 * np.log10(ctx.s_dl_e / (ctx.noise_ue_lin + i_dl_e))
            sinr_ul_e = 10.0 * np.log10(
                ctx.s_ul_e / (ctx.noise_bs_lin + i_ul_b[ctx.assoc_e_ul])
            )
        return sinr_dl_u, sinr_ul_u, sinr_dl_e, sinr_ul_e

    def sinrs_urllc_worst_case(self, u):
        """URLLC SINRs with every potential interferer on at full power."""
        ctx = self.ctx
        u_mac_dl, u_mac_ul, u_fac_dl, u_fac_ul = self._split(u)
        iso, cu = self.iso, ctx.cond_u
        S = InterferenceScenario

        def on(cond, u_vec):
            return (cond * u_vec > 0.0).astype(float)

        i_dl_u = (
            ctx.m_fac_dl @ on(1.0, u_fac_dl)
            + ctx.m_mbs_dl @ (on(cu[("D", "D")], u_mac_dl) * iso[S.DL_TO_DL])
            + ctx.m_mue_dl @ (on(cu[("U", "D")], u_mac_ul) * iso[S.UL_TO_DL])
        )
        i_ul_f = (
            ctx.m_fac_ul_max @ on(1.0, u_fac_ul)
            + ctx.m_mbs_ul @ (on(cu[("D", "U")], u_mac_dl) * iso[S.DL_TO_UL])
            + ctx.m_mue_ul_max @ (on(cu[("U", "U")], u_mac_ul) * iso[S.UL_TO_UL])
        )
        with np.errstate(divide="ignore"):
            sinr_dl_u = 10.0 * np.log10(ctx.s_dl_u / (ctx.noise_ue_lin + i_dl_u))
            sinr_ul_u = 10.0 * np.log10(
                ctx.s_ul_u / (ctx.noise_bs_lin + i_ul_f[ctx.assoc_u_ul])
            )
        return sinr_dl_u, sinr_ul_u

    def _cell_mean_rates(self, rates, groups, n_groups):
        means = np.zeros(n_groups)
        filled = np.zeros(n_groups, dtype=bool)
        for g in range(n_groups):
            mask = groups == g
            if np.any(mask):
                means[g] = float(np.mean(rates[mask]))
                filled[g] = True
        if np.any(~filled):
            fallback = float(np.mean(means[filled])) if np.any(filled) else 0.0
            means[~filled] = fallback
        return means

    def capacity_fn(self, u):
        """Serveable bits/s of every (cell, direction) at utilization u."""
        ctx = self.ctx
        sinr_dl_u, sinr_ul_u, sinr_dl_e, sinr_ul_e = self.sinrs_mean(u)
        r_dl_u = _se_lookup(ctx, sinr_dl_u) * self.rate_scale
        r_ul_u = _se_lookup(ctx, sinr_ul_u) * self.rate_scale
        r_dl_e = _se_lookup(ctx, sinr_dl_e) * self.rate_scale
        r_ul_e = _se_lookup(ctx, sinr_ul_e) * self.rate_scale
        cap_mac_dl = (
            self._cell_mean_rates(r_dl_e, ctx.assoc_e_dl, N_MACRO_CELLS) * ctx.f_mac[0]
        )
        cap_mac_ul = (
            self._cell_mean_rates(r_ul_e, ctx.assoc_e_ul, N_MACRO_CELLS) * ctx.f_mac[1]
        )
        cap_fac_dl = (
            self._cell_mean_rates(r_dl_u, ctx.assoc_u_dl, N_FACTORY_CELLS) * ctx.f_fac[0]
        )
        cap_fac_ul = (
            self._cell_mean_rates(r_ul_u, ctx.assoc_u_ul, N_FACTORY_CELLS) * ctx.f_fac[1]
        )
        return np.concatenate([cap_mac_dl, cap_mac_ul, cap_fac_dl, cap_fac_ul])

    def solve(self) -> traffic.LoadCouplingResult:
        return traffic.solve_load_coupling(self.offered, self.capacity_fn)


def evaluate_drop(
    ctx: DropContext,
    urllc_rate: float | None = None,
    extra_isolation_db: float | None = None,
) -> DropResult:
    cfg = ctx.config
    ev = _Evaluator(ctx, urllc_rate, extra_isolation_db)
    coupling = ev.solve()
    u = coupling.utilization
    u_mac_dl, u_mac_ul, u_fac_dl, u_fac_ul = ev._split(u)
    flags = list(ctx.flags)
    if not coupling.converged:
        flags.append("load_coupling_not_converged")

    # URLLC QoS indicators
    if cfg.urllc_reliability_mode == "worst_case":
        sinr_dl_u, sinr_ul_u = ev.sinrs_urllc_worst_case(u)
        _, _, sinr_dl_e, sinr_ul_e = ev.sinrs_mean(u)
    else:
        sinr_dl_u, sinr_ul_u, sinr_dl_e, sinr_ul_e = ev.sinrs_mean(u)

    rate_dl_u = _se_lookup(ctx, sinr_dl_u) * ev.rate_scale
    rate_ul_u = _se_lookup(ctx, sinr_ul_u) * ev.rate_scale
    dl_rate_ok = rate_dl_u >= ctx.required_rate_bps
    ul_rate_ok = rate_ul_u >= ctx.required_rate_bps
    load_dl_ok = u_fac_dl[ctx.assoc_u_dl] < 1.0
    load_ul_ok = u_fac_ul[ctx.assoc_u_ul] < 1.0
    lat_dl, lat_ul = ctx.latency_ok

    x_dl = dl_rate_ok & load_dl_ok & lat_dl
    x_ul = ul_rate_ok & load_ul_ok & lat_ul
    x_combined = x_dl & x_ul

    # eMBB rate statistics, always activity-weighted, time-shared per pattern
    rate_dl_e = _se_lookup(ctx, sinr_dl_e) * ev.rate_scale * ctx.f_mac[0]
    rate_ul_e = _se_lookup(ctx, sinr_ul_e) * ev.rate_scale * ctx.f_mac[1]
    poly = ctx.polygon_mask
    if np.any(poly):
        embb_dl_rate = float(np.mean(rate_dl_e[poly]))
    else:
        embb_dl_rate = math.nan
    closest_users = ctx.assoc_e_ul == ctx.closest_cell
    if np.any(closest_users):
        embb_ul_rate = float(np.mean(rate_ul_e[closest_users]))
    else:
        embb_ul_rate = math.nan
        flags.append("empty_closest_sector")

    return DropResult(
        drop_index=ctx.drop_index,
        drop_seed=ctx.drop_seed,
        x_dl=x_dl,
        x_ul=x_ul,
        x_combined=x_combined,
        availability_dl_pct=100.0 * float(np.mean(x_dl)),
        availability_ul_pct=100.0 * float(np.mean(x_ul)),
        availability_combined_pct=100.0 * float(np.mean(x_combined)),
        u_mac_dl=u_mac_dl.copy(),
        u_mac_ul=u_mac_ul.copy(),
        u_fac_dl=u_fac_dl.copy(),
        u_fac_ul=u_fac_ul.copy(),
        load_converged=coupling.converged,
        embb_dl_rate_polygon_bps=embb_dl_rate,
        embb_ul_rate_closest_bps=embb_ul_rate,
        polygon_users=int(np.sum(poly)),
        closest_sector_users=int(np.sum(closest_users)),
        resample_attempts=ctx.resample_attempts,
        flags=tuple(flags),
    )


def run_drop(config: ScenarioConfig, drop_index: int) -> DropResult:
    """Deterministic pipeline for one drop of the configured scenario."""
    return evaluate_drop(build_drop_context(config, drop_index))


# ---------------------------------------------------------------------------
# campaigns


@dataclass(frozen=True)
class MetricRow:
    direction: str
    metric: str
    value: float
    ci95: float


@dataclass
class CampaignResult:
    config: dict
    config_hash: str
    rows: list[MetricRow]
    drops: int
    flags: tuple[str, ...]
    per_drop: dict

    @property
    def scenario_id(self) -> str:
        return self.config_hash[:12]

    def row(self, direction: str, metric: str) -> MetricRow:
        for r in self.rows:
            if r.direction == direction and r.metric == metric:
                return r
        raise KeyError((direction, metric))


def _drop_task(args) -> tuple[int, DropResult | None, str | None]:
    config_dict, drop_index = args
    try:
        cfg = ScenarioConfig.from_dict(config_dict)
        return drop_index, run_drop(cfg, drop_index), None
    except Exception as exc:  # surfaced with the drop index attached
        return drop_index, None, f"drop {drop_index}: {exc}"


def _map_tasks(worker, tasks, threads: int):
    if threads == 1 or len(tasks) == 1:
        return [worker(t) for t in tasks]
    workers = threads if threads > 0 else (os.cpu_count() or 1)
    workers = min(workers, len(tasks))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(worker, tasks))


def _mean_ci(values: np.ndarray) -> tuple[float, float]:
    """Mean and 95 percent CI half-width from per-drop variation."""
    v = values[~np.isnan(values)]
    if v.size == 0:
        return math.nan, math.nan
    mean = float(np.mean(v))
    if v.size < 2:
        return mean, math.nan
    t_crit = float(stats.t.ppf(0.975, v.size - 1))
    return mean, t_crit * float(np.std(v, ddof=1)) / math.sqrt(v.size)


def run_campaign(config: ScenarioConfig) -> CampaignResult:
    """Run all drops, reduce in index order, aggregate with per-drop CIs."""
    if config.drops < 1:
        raise CampaignError("campaign needs at least one drop")
    tasks = [(config.to_dict(), i) for i in range(config.drops)]
    outcomes = _map_tasks(_drop_task, tasks, config.threads)
    outcomes.sort(key=lambda o: o[0])

    errors = [msg for _, _, msg in outcomes if msg is not None]
    if len(errors) > 0.01 * config.drops:
        raise CampaignError("; ".join(errors[:5]))
    results = [r for _, r, _ in outcomes if r is not None]
    if not results:
        raise CampaignError("all drops failed: " + "; ".join(errors[:5]))

    flags: list[str] = sorted({f for r in results for f in r.flags})
    if errors:
        flags.append("drop_errors_within_budget")

    per_drop = {
        "drop_index": [r.drop_index for r in results],
        "availability_dl_pct": [r.availability_dl_pct for r in results],
        "availability_ul_pct": [r.availability_ul_pct for r in results],
        "availability_combined_pct": [r.availability_combined_pct for r in results],
        "embb_dl_rate_polygon_bps": [r.embb_dl_rate_polygon_bps for r in results],
        "embb_ul_rate_closest_bps": [r.embb_ul_rate_closest_bps for r in results],
    }

    def agg(direction, metric, values):
        mean, ci = _mean_ci(np.asarray(values, dtype=float))
        return MetricRow(direction, metric, mean, ci)

    rows = [
        agg("dl", "urllc_availability_pct", per_drop["availability_dl_pct"]),
        agg("ul", "urllc_availability_pct", per_drop["availability_ul_pct"]),
        agg("both", "urllc_availability_pct", per_drop["availability_combined_pct"]),
        agg("dl", "embb_rate_polygon_bps", per_drop["embb_dl_rate_polygon_bps"]),
        agg("ul", "embb_rate_closest_sector_bps", per_drop["embb_ul_rate_closest_bps"]),
        agg("dl", "macro_utilization", [float(np.mean(r.u_mac_dl)) for r in results]),
        agg("ul", "macro_utilization", [float(np.mean(r.u_mac_ul)) for r in results]),
        agg("dl", "factory_utilization", [float(np.mean(r.u_fac_dl)) for r in results]),
        agg("ul", "factory_utilization", [float(np.mean(r.u_fac_ul)) for r in results]),
    ]
    return CampaignResult(
        config=config.to_dict(),
        config_hash=config.config_hash(),
        rows=rows,
        drops=len(results),
        flags=tuple(flags),
        per_drop=per_drop,
    )


# ---------------------------------------------------------------------------
# capacity and isolation sweeps


def _build_ctx_task(args) -> DropContext:
    config_dict, drop_index = args
    return build_drop_context(ScenarioConfig.from_dict(config_dict), drop_index)


def build_contexts(config: ScenarioConfig) -> list[DropContext]:
    tasks = [(config.to_dict(), i) for i in range(config.drops)]
    return _map_tasks(_build_ctx_task, tasks, config.threads)


def pooled_availability(
    ctxs: list[DropContext],
    direction: str,
    urllc_rate: float,
    extra_isolation_db: float,
) -> float:
    """Strict pooled availability over every sample of every drop."""
    ok = 0
    total = 0
    for ctx in ctxs:
        res = evaluate_drop(ctx, urllc_rate, extra_isolation_db)
        x = res.x_dl if direction == "dl" else res.x_ul
        ok += int(np.sum(x))
        total += x.size
    return 100.0 * ok / total


def capacity_at_isolation(
    config: ScenarioConfig,
    ctxs: list[DropContext],
    direction: str,
    extra_isolation_db: float,
) -> metrics.CapacityResult:
    """Capacity bisection under common random numbers (shared contexts)."""
    full_threshold = (
        100.0 if config.capacity_strict else 100.0 * config.capacity_quantile
    )

    def evaluator(rate: float) -> float:
        avail = pooled_availability(ctxs, direction, rate, extra_isolation_db)
        # the quantile alternative treats near-full availability as full
        if not config.capacity_strict and avail >= full_threshold:
            return 100.0
        return avail

    return metrics.system_capacity(
        evaluator,
        config.capacity_lo_rate,
        config.capacity_hi_rate,
        config.capacity_tol_rate,
        direction=direction,
    )


@dataclass(frozen=True)
class SweepPoint:
    direction: str
    isolation_db: float
    capacity: float
    relative_capacity: float
    flags: tuple[str, ...]


@dataclass
class SweepResult:
    config: dict
    config_hash: str
    points: list[SweepPoint]
    full_isolation_capacity: dict

    def curve(self, direction: str) -> list[SweepPoint]:
        return [p for p in self.points if p.direction == direction]


def sweep_isolation(
    config: ScenarioConfig, grid_db: tuple | None = None
) -> SweepResult:
    """Relative capacity per direction over the extra-isolation grid.

    The same drop contexts back every grid point and the full-isolation
    reference (common random numbers), so the curves are exact orderings.
    """
    grid = tuple(config.isolation_grid_db if grid_db is None else grid_db)
    if list(grid) != sorted(grid):
        raise CampaignError("isolation grid must be sorted ascending")
    ctxs = build_contexts(config)
    points = []
    full_caps = {}
    for direction in ("dl", "ul"):
        full = capacity_at_isolation(config, ctxs, direction, math.inf)
        full_caps[direction] = full.capacity
        for iso in grid:
            cap = capacity_at_isolation(config, ctxs, direction, iso)
            rel = cap.capacity / full.capacity if full.capacity > 0 else math.nan
            flags = cap.flags
            if full.capacity <= 0:
                flags = flags + ("full_isolation_capacity_zero",)
            points.append(SweepPoint(direction, iso, cap.capacity, rel, flags))
    return SweepResult(
        config=config.to_dict(),
        config_hash=config.config_hash(),
        points=points,
        full_isolation_capacity=full_caps,
    )


# ---------------------------------------------------------------------------
# persistence


def _fmt(v: float) -> str:
    if isinstance(v, float) and math.isnan(v):
        return "nan"
    return f"{v:.9g}"


def write_campaign_csv(result: CampaignResult, path: str) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(
            [
                "scenario_id", "sync_mode", "deployment", "placement",
                "direction", "metric", "value", "ci95", "drops", "seed",
            ]
        )
        for r in result.rows:
            w.writerow(
                [
                    result.scenario_id,
                    result.config["sync_mode"],
                    result.config["deployment"],
                    result.config["placement"],
                    r.direction,
                    r.metric,
                    _fmt(r.value),
                    _fmt(r.ci95),
                    result.drops,
                    result.config["master_seed"],
                ]
            )


def provenance_block(config_dict: dict, config_hash: str) -> dict:
    return {
        "config_hash": config_hash,
        "master_seed": config_dict["master_seed"],
        "code_version": __version__,
    }


def write_campaign_json(result: CampaignResult, path: str) -> None:
    payload = {
        "provenance": provenance_block(result.config, result.config_hash),
        "config": result.config,
        "rows": [
            {
                "direction": r.direction,
                "metric": r.metric,
                "value": r.value,
                "ci95": r.ci95,
            }
            for r in result.rows
        ],
        "drops": result.drops,
        "flags": list(result.flags),
        "per_drop": result.per_drop,
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")


def write_sweep_csv(result: SweepResult, path: str) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(
            [
                "scenario_id", "sync_mode", "deployment", "placement",
                "direction", "metric", "isolation_db", "value", "drops", "seed",
            ]
        )
        for p in result.points:
            for metric, value in (
                ("capacity_per_s_m2", p.capacity),
                ("relative_capacity", p.relative_capacity),
            ):
                w.writerow(
                    [
                        result.config_hash[:12],
                        result.config["sync_mode"],
                        result.config["deployment"],
                        result.config["placement"],
                        p.direction,
                        metric,
                        _fmt(p.isolation_db),
                        _fmt(value),
                        result.config["drops"],
                        result.config["master_seed"],
                    ]
                )
