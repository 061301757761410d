"""Deterministic system-level simulator for the coexistence of a wide-area
eMBB macro network and a local indoor URLLC factory network under
synchronized or unsynchronized TDD."""

__version__ = "0.1.0"

from .config import ScenarioConfig, ConfigError
from .engine import run_drop, run_campaign, sweep_isolation, CampaignError

__all__ = [
    "ScenarioConfig",
    "ConfigError",
    "run_drop",
    "run_campaign",
    "sweep_isolation",
    "CampaignError",
    "__version__",
]
