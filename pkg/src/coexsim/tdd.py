"""TDD pattern algebra: slot directions, cross-network interference scenario
probabilities and per-pattern latency feasibility."""

import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction


class InterferenceScenario(Enum):
    """The four aggressor-direction / victim-direction combinations."""

    DL_TO_DL = "dl_to_dl"  # BS -> UE
    DL_TO_UL = "dl_to_ul"  # BS -> BS
    UL_TO_UL = "ul_to_ul"  # UE -> BS
    UL_TO_DL = "ul_to_dl"  # UE -> UE


#: Row order used when printing scenario tables.
SCENARIO_ORDER = (
    InterferenceScenario.DL_TO_DL,
    InterferenceScenario.DL_TO_UL,
    InterferenceScenario.UL_TO_UL,
    InterferenceScenario.UL_TO_DL,
)


class MixMode(Enum):
    ALIGNED = "aligned"  # slot-by-slot pairing at offset 0
    MARGINAL = "marginal"  # outer product of direction fractions


@dataclass(frozen=True)
class TddPattern:
    """Repeating downlink/uplink slot sequence, e.g. DDDU."""

    slots: tuple[str, ...]
    slot_duration_us: float = 143.0

    def __post_init__(self):
        if not self.slots:
            raise ValueError("TDD pattern must contain at least one slot")
        bad = set(self.slots) - {"D", "U"}
        if bad:
            raise ValueError(f"TDD pattern slots must be D or U, got {sorted(bad)}")
        if self.slot_duration_us <= 0:
            raise ValueError("slot duration must be positive")

    def __str__(self):
        return "".join(self.slots)

    def __len__(self):
        return len(self.slots)


def parse_pattern(text: str, slot_duration_us: float = 143.0) -> TddPattern:
    """Parse a pattern string such as "DDDU" (case-insensitive)."""
    if not text:
        raise ValueError("empty TDD pattern")
    return TddPattern(tuple(text.upper()), slot_duration_us)


def direction_fractions(pattern: TddPattern) -> tuple[Fraction, Fraction]:
    """(downlink fraction, uplink fraction) of the pattern, exact."""
    n_d = sum(1 for s in pattern.slots if s == "D")
    f_d = Fraction(n_d, len(pattern))
    return f_d, 1 - f_d


def classify_scenario(aggressor_dir: str, victim_dir: str) -> InterferenceScenario:
    table = {
        ("D", "D"): InterferenceScenario.DL_TO_DL,
        ("D", "U"): InterferenceScenario.DL_TO_UL,
        ("U", "U"): InterferenceScenario.UL_TO_UL,
        ("U", "D"): InterferenceScenario.UL_TO_DL,
    }
    return table[(aggressor_dir, victim_dir)]


@dataclass(frozen=True)
class ScenarioMix:
    """Probability of each inter-network interference scenario (exact)."""

    probabilities: dict[InterferenceScenario, Fraction] = field(default_factory=dict)

    def __post_init__(self):
        for s in InterferenceScenario:
            self.probabilities.setdefault(s, Fraction(0))
        total = sum(self.probabilities.values())
        if total != 1:
            raise ValueError(f"scenario probabilities sum to {total}, expected 1")

    def __getitem__(self, scenario: InterferenceScenario) -> Fraction:
        return self.probabilities[scenario]

    def as_floats(self) -> dict[InterferenceScenario, float]:
        return {s: float(p) for s, p in self.probabilities.items()}


def scenario_probabilities(
    aggressor: TddPattern, victim: TddPattern, mode: MixMode
) -> ScenarioMix:
    """Joint direction probabilities over the aggressor/victim slot grid.

    ALIGNED pairs slots at offset zero over the lcm-extended cycle
    (synchronized slot borders); MARGINAL treats the two patterns as
    independent, i.e. the outer product of the direction fractions.
    """
    probs: dict[InterferenceScenario, Fraction] = {
        s: Fraction(0) for s in InterferenceScenario
    }
    if mode is MixMode.ALIGNED:
        cycle = math.lcm(len(aggressor), len(victim))
        for i in range(cycle):
            s = classify_scenario(
                aggressor.slots[i % len(aggressor)], victim.slots[i % len(victim)]
            )
            probs[s] += Fraction(1, cycle)
    elif mode is MixMode.MARGINAL:
        fa_d, fa_u = direction_fractions(aggressor)
        fv_d, fv_u = direction_fractions(victim)
        for (da, fa) in (("D", fa_d), ("U", fa_u)):
            for (dv, fv) in (("D", fv_d), ("U", fv_u)):
                probs[classify_scenario(da, dv)] += fa * fv
    else:
        raise ValueError(f"unknown mix mode {mode!r}")
    return ScenarioMix(probs)


def latency_feasibility(
    pattern: TddPattern,
    direction: str,
    tti_us: float,
    processing_us: float,
    budget_us: float,
) -> tuple[bool, float]:
    """Worst-case one-shot delay for a packet of the given direction.

    A packet arriving at an arbitrary instant waits for the start of the
    next slot of its direction, then occupies one TTI plus processing.
    Returns (feasible, worst_case_delay_us); a pattern without any slot of
    the direction is infeasible with infinite delay.
    """
    if direction not in ("D", "U"):
        raise ValueError("direction must be 'D' or 'U'")
    starts = [i for i, s in enumerate(pattern.slots) if s == direction]
    if not starts:
        return False, math.inf
    n = len(pattern)
    # worst wait is the largest cyclic gap between consecutive slot starts
    gaps = [
        (starts[(k + 1) % len(starts)] - starts[k]) % n or n
        for k in range(len(starts))
    ]
    worst_wait = max(gaps) * pattern.slot_duration_us
    delay = worst_wait + tti_us + processing_us
    return delay <= budget_us, delay
