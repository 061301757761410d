"""Scenario configuration: every simulation parameter in one flat record,
with JSON round-tripping, strict unknown-key rejection and validation."""

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field, fields

from . import tdd


class ConfigError(Exception):
    """Invalid configuration; maps to CLI exit code 2."""


def _resolve_inf(value):
    if isinstance(value, str) and value.lower() in ("inf", "infinity"):
        return math.inf
    return value


@dataclass
class ScenarioConfig:
    # carrier
    carrier_ghz: float = 3.5
    bandwidth_mhz: float = 50.0
    deployment: str = "co_channel"  # co_channel | adjacent_channel
    sync_mode: str = "unsynchronized"  # synchronized | unsynchronized
    macro_tdd_pattern: str = ""  # resolved from sync_mode when empty
    factory_tdd_pattern: str = "DUDU"
    # URLLC service target
    tti_us: float = 143.0
    symbols_per_tti: int = 4
    scs_khz: float = 30.0
    payload_bytes: int = 32
    latency_budget_us: float = 1000.0
    reliability_target: float = 0.99999
    processing_delay_us: float = 300.0
    # layout
    isd_m: float = 500.0
    n_macro_sites: int = 7
    macro_bs_height_m: float = 25.0
    macro_sector_azimuths_deg: tuple = (0.0, 120.0, 240.0)
    macro_downtilt_deg: float = 10.0
    factory_width_m: float = 100.0
    factory_depth_m: float = 100.0
    factory_height_m: float = 10.0
    factory_bs_height_m: float = 10.0
    factory_sector_azimuths_deg: tuple = (0.0, 120.0, 240.0)
    factory_downtilt_deg: float = 10.0
    placement: str = "center"  # cell_edge | center | near_bs
    near_bs_offset_m: float = 30.0
    ue_height_m: float = 1.5
    bounds_m: float = 1500.0
    # radio
    macro_bs_power_dbm: float = 50.0
    factory_bs_power_dbm: float = 27.0
    ue_power_dbm: float = 23.0
    bs_noise_figure_db: float = 5.0
    ue_noise_figure_db: float = 9.0
    ue_antenna_gain_dbi: float = 0.0
    macro_array: tuple = (8, 8, 1, 1, 2)  # V, H, Vs, Hs, Ps
    factory_array: tuple = (2, 4, 2, 1, 2)
    max_element_gain_dbi: float = 8.0
    pc_alpha: float = 0.8
    pc_target_snr_db: float = 10.0
    interf_beam_backoff_db: float = 0.0
    # propagation
    wall_loss_db: float = 13.0  # perpendicular penetration; inf = full isolation
    wall_angular_coeff_db: float = 20.0
    indoor_loss_db_per_m: float = 0.5
    macro_factory_bs_model: str = "uma"  # base model of the macro<->factory BS link
    clamp_distances: bool = True
    # adjacent channel
    aclr_bs_db: float = 45.0
    acs_bs_db: float = 45.0
    aclr_ue_db: float = 30.0
    acs_ue_db: float = 30.0
    extra_isolation_db: float = 0.0
    force_zero_acir: bool = False  # diagnostic: adjacent-channel path, ACIR 0
    # link adaptation
    shannon_gap_db: float = 3.0
    overhead_fraction: float = 0.2
    # traffic
    urllc_arrival_per_s_m2: float = 5.0
    embb_offered_mbps_km2: float = 100.0
    dl_ul_ratio: float = 1.0
    urllc_reliability_mode: str = "mean"  # mean | worst_case
    # campaign
    drops: int = 50
    urllc_floor_samples: int = 2000
    embb_users: int = 1000
    embb_resample_cap: int = 50
    master_seed: int = 1
    threads: int = 0  # 0 = auto
    # capacity search
    capacity_strict: bool = True
    capacity_quantile: float = 0.999  # used when capacity_strict is false
    capacity_lo_rate: float = 0.0
    capacity_hi_rate: float = 200.0
    capacity_tol_rate: float = 1.0
    isolation_grid_db: tuple = (0.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 80.0, 100.0)

    def __post_init__(self):
        self.wall_loss_db = _resolve_inf(self.wall_loss_db)
        for name in (
            "macro_sector_azimuths_deg",
            "factory_sector_azimuths_deg",
            "macro_array",
            "factory_array",
            "isolation_grid_db",
        ):
            setattr(self, name, tuple(getattr(self, name)))
        if not self.macro_tdd_pattern:
            self.macro_tdd_pattern = (
                "DUDU" if self.sync_mode == "synchronized" else "DDDU"
            )

    # -- construction / serialization -------------------------------------

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            cfg = cls(**data)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        cfg.validate()
        return cfg

    @classmethod
    def from_json(cls, path: str) -> "ScenarioConfig":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed config JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = list(v)
            elif isinstance(v, float) and math.isinf(v):
                v = "inf"
            out[f.name] = v
        return out

    def to_json(self, path: str) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def config_hash(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()

    def replace(self, **changes) -> "ScenarioConfig":
        cfg = dataclasses.replace(self, **changes)
        cfg.validate()
        return cfg

    def apply_overrides(self, overrides: dict) -> "ScenarioConfig":
        """Apply --set key=value overrides; keys are the field names."""
        known = {f.name for f in fields(self)}
        bad = set(overrides) - known
        if bad:
            raise ConfigError(f"unknown override keys: {sorted(bad)}")
        return self.replace(**overrides)

    # -- validation --------------------------------------------------------

    def validate(self) -> None:
        checks = [
            (self.carrier_ghz > 0, "carrier frequency must be positive"),
            (self.bandwidth_mhz > 0, "bandwidth must be positive"),
            (self.isd_m > 0, "inter-site distance must be positive"),
            (self.n_macro_sites == 7, "layout supports exactly 7 macro sites"),
            (self.tti_us > 0, "TTI must be positive"),
            (self.payload_bytes > 0, "payload must be positive"),
            (0 < self.reliability_target < 1, "reliability must be in (0, 1)"),
            (0 <= self.pc_alpha <= 1, "power-control alpha must be in [0, 1]"),
            (0 <= self.overhead_fraction < 1, "overhead must be in [0, 1)"),
            (self.shannon_gap_db >= 0, "Shannon gap must be non-negative"),
            (self.wall_loss_db >= 0, "wall loss must be non-negative"),
            (self.indoor_loss_db_per_m >= 0, "indoor loss must be non-negative"),
            (self.urllc_arrival_per_s_m2 >= 0, "URLLC arrival rate must be >= 0"),
            (self.embb_offered_mbps_km2 >= 0, "eMBB offered load must be >= 0"),
            (self.dl_ul_ratio > 0, "DL:UL ratio must be positive"),
            (self.drops >= 1, "need at least one drop"),
            (self.urllc_floor_samples >= 1, "need at least one floor sample"),
            (self.embb_users >= 1, "need at least one eMBB user"),
            (self.threads >= 0, "threads must be non-negative"),
            (self.near_bs_offset_m >= 0, "near-BS offset must be non-negative"),
            (
                self.capacity_lo_rate < self.capacity_hi_rate,
                "capacity bracket must have lo < hi",
            ),
            (self.capacity_tol_rate > 0, "capacity tolerance must be positive"),
            (0 < self.capacity_quantile <= 1, "capacity quantile must be in (0, 1]"),
            (
                self.factory_width_m * self.factory_depth_m
                <= self.isd_m**2 * math.sqrt(3.0) / 2.0,
                "factory footprint exceeds the per-site cell area",
            ),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)
        for name, allowed in (
            ("deployment", ("co_channel", "adjacent_channel")),
            ("sync_mode", ("synchronized", "unsynchronized")),
            ("placement", ("cell_edge", "center", "near_bs")),
            ("urllc_reliability_mode", ("mean", "worst_case")),
            ("macro_factory_bs_model", ("uma", "umi")),
        ):
            if getattr(self, name) not in allowed:
                raise ConfigError(f"{name} must be one of {allowed}")
        for name in ("macro_array", "factory_array"):
            arr = getattr(self, name)
            if len(arr) != 5 or any(int(v) != v or v < 1 for v in arr):
                raise ConfigError(f"{name} must be 5 positive element counts")
        for name in ("macro_tdd_pattern", "factory_tdd_pattern"):
            try:
                tdd.parse_pattern(getattr(self, name))
            except ValueError as exc:
                raise ConfigError(f"{name}: {exc}") from exc
        if self.sync_mode == "synchronized" and (
            self.macro_tdd_pattern.upper() != self.factory_tdd_pattern.upper()
        ):
            raise ConfigError("synchronized deployments need equal TDD patterns")
        if not (
            tuple(sorted(self.isolation_grid_db)) == tuple(self.isolation_grid_db)
        ):
            raise ConfigError("isolation grid must be sorted ascending")

    # -- derived quantities --------------------------------------------------

    @property
    def bandwidth_hz(self) -> float:
        return self.bandwidth_mhz * 1e6

    @property
    def payload_bits(self) -> int:
        return self.payload_bytes * 8

    @property
    def full_isolation(self) -> bool:
        return math.isinf(self.wall_loss_db)

    @property
    def dl_share(self) -> float:
        return self.dl_ul_ratio / (1.0 + self.dl_ul_ratio)
