"""Time-of-use tariff and the load-driven rolling price."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import SLOTS_PER_DAY, LoadProfile, PriceSignal, check_slot, slot_to_clock

VALLEY, PEAK, LEVEL = "valley", "peak", "level"

# clock-hour periods, half open [start, end)
TOU_PERIODS = {
    VALLEY: ((0, 8),),
    PEAK: ((8, 12), (17, 21)),
    LEVEL: ((12, 17), (21, 24)),
}


def tou_tier(slot: int) -> str:
    hour = slot_to_clock(check_slot(slot))
    for tier, spans in TOU_PERIODS.items():
        if any(lo <= hour < hi for lo, hi in spans):
            return tier
    raise AssertionError(f"slot {slot} not covered by any TOU period")


TIERS = tuple(tou_tier(j) for j in range(SLOTS_PER_DAY))
VALLEY_SLOTS = tuple(j for j, t in enumerate(TIERS) if t == VALLEY)


@dataclass(frozen=True)
class TouTariff:
    valley: float = 0.365
    peak: float = 0.869
    level: float = 0.687

    def __post_init__(self) -> None:
        if min(self.valley, self.peak, self.level) < 0:
            raise ValueError("TOU prices must be non-negative")

    def price(self, slot: int) -> float:
        return getattr(self, tou_tier(slot))

    def signal(self) -> PriceSignal:
        return PriceSignal([getattr(self, t) for t in TIERS])


def tou_price(slot: int, tariff: TouTariff = TouTariff()) -> float:
    return tariff.price(slot)


@dataclass(frozen=True)
class RollingParams:
    a: float = 0.542
    b: float = 0.0
    p_mtf: float = 5087.25

    def __post_init__(self) -> None:
        if self.a < 0:
            raise ValueError("rolling slope a must be non-negative")
        if not self.p_mtf > 0:
            raise ValueError("p_mtf must be positive")


def rolling_price(load: float, params: RollingParams) -> float:
    if load < 0:
        raise ValueError("load must be non-negative")
    return params.a * load / params.p_mtf + params.b


def price_signal(loads: LoadProfile, params: RollingParams) -> PriceSignal:
    return PriceSignal(params.a * np.asarray(loads.loads) / params.p_mtf + params.b)
