"""Time grid, domain records and per-EV slot arithmetic shared by every regime."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

SLOTS_PER_DAY = 96
SLOT_HOURS = 0.25
ORIGIN_HOUR = 12.0


@dataclass(frozen=True)
class TimeGrid:
    slots_per_day: int = SLOTS_PER_DAY
    slot_length: float = SLOT_HOURS
    origin: float = ORIGIN_HOUR

    def clock_to_slot(self, hour: float) -> int:
        if not math.isfinite(hour) or not 0.0 <= hour < 24.0:
            raise ValueError(f"clock hour must be in [0, 24), got {hour!r}")
        offset = (hour - self.origin) % 24.0
        # guard against offset == 24 - tiny from fp wrap
        return min(int(offset // self.slot_length), self.slots_per_day - 1)

    def slot_to_clock(self, slot: int) -> float:
        check_slot(slot, self.slots_per_day)
        return (self.origin + slot * self.slot_length) % 24.0


GRID = TimeGrid()


def check_slot(slot: int, n: int = SLOTS_PER_DAY) -> int:
    if not 0 <= slot < n:
        raise ValueError(f"slot index must be in [0, {n - 1}], got {slot!r}")
    return int(slot)


def clock_to_slot(hour: float) -> int:
    """Map a clock time in hours to its slot on the noon-origin grid.

    >>> clock_to_slot(12.0), clock_to_slot(12.25), clock_to_slot(11.75)
    (0, 1, 95)
    """
    return GRID.clock_to_slot(hour)


def slot_to_clock(slot: int) -> float:
    return GRID.slot_to_clock(slot)


def _fraction(name: str, value: float) -> None:
    if not (math.isfinite(value) and 0.0 <= value <= 1.0):
        raise ValueError(f"{name} must be a fraction in [0, 1], got {value!r}")


@dataclass(frozen=True)
class EvRequest:
    id: str
    plug_in_slot: int
    plug_off_slot: int
    start_soc: float
    expected_soc: float
    battery_capacity: float = 32.0
    rated_power: float = 7.0
    efficiency: float = 0.9
    daily_km: float = 0.0
    pre_trip_soc: float = 1.0
    flags: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        check_slot(self.plug_in_slot)
        check_slot(self.plug_off_slot)
        if self.plug_off_slot <= self.plug_in_slot:
            raise ValueError(
                f"EV {self.id}: plug_off_slot {self.plug_off_slot} must exceed "
                f"plug_in_slot {self.plug_in_slot}"
            )
        _fraction("start_soc", self.start_soc)
        _fraction("expected_soc", self.expected_soc)
        _fraction("pre_trip_soc", self.pre_trip_soc)
        if not 0.0 < self.efficiency <= 1.0:
            raise ValueError(f"efficiency must be in (0, 1], got {self.efficiency!r}")
        if not self.battery_capacity > 0:
            raise ValueError("battery_capacity must be positive")
        if not self.rated_power > 0:
            raise ValueError("rated_power must be positive")

    @property
    def slot_energy(self) -> float:
        """kWh stored per full charging slot."""
        return self.rated_power * self.efficiency * SLOT_HOURS


@dataclass(frozen=True, eq=False)
class ChargingSchedule:
    """On/off charging plan of one EV.

    ``mask`` marks full-power slots. Uncoordinated charging may end with one
    partially used slot, stored as ``partial_slot`` with ``final_partial_fraction``
    of rated power; optimized regimes never set it.
    """

    ev_id: str
    mask: np.ndarray
    final_partial_fraction: float = 0.0
    partial_slot: int = -1

    def __post_init__(self) -> None:
        mask = np.asarray(self.mask, dtype=bool)
        if mask.shape != (SLOTS_PER_DAY,):
            raise ValueError(f"mask must have length {SLOTS_PER_DAY}")
        mask.setflags(write=False)
        object.__setattr__(self, "mask", mask)
        if not 0.0 <= self.final_partial_fraction < 1.0:
            raise ValueError("final_partial_fraction must be in [0, 1)")
        if self.final_partial_fraction > 0.0:
            check_slot(self.partial_slot)
            if mask[self.partial_slot]:
                raise ValueError("partial slot cannot also be a full slot")

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, ChargingSchedule)
            and self.ev_id == other.ev_id
            and np.array_equal(self.mask, other.mask)
            and self.power_fractions().tolist() == other.power_fractions().tolist()
        )

    __hash__ = None

    @classmethod
    def from_slots(cls, ev_id: str, slots: Sequence[int]) -> "ChargingSchedule":
        mask = np.zeros(SLOTS_PER_DAY, dtype=bool)
        mask[list(slots)] = True
        return cls(ev_id, mask)

    @property
    def slots(self) -> list[int]:
        return [int(j) for j in np.flatnonzero(self.mask)]

    @property
    def n_slots(self) -> int:
        return int(self.mask.sum())

    def power_fractions(self) -> np.ndarray:
        """Per-slot share of rated power (1 for full slots, fraction for the partial one)."""
        out = self.mask.astype(float)
        if self.final_partial_fraction > 0.0:
            out[self.partial_slot] = self.final_partial_fraction
        return out


def _profile_array(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.shape != (SLOTS_PER_DAY,):
        raise ValueError(f"{name} needs exactly {SLOTS_PER_DAY} values, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    if np.any(arr < 0):
        raise ValueError(f"{name} contains negative values")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class LoadProfile:
    """96 per-slot total loads in kW."""

    loads: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "loads", _profile_array(self.loads, "load profile"))

    def __eq__(self, other) -> bool:
        return isinstance(other, LoadProfile) and np.array_equal(self.loads, other.loads)

    __hash__ = None

    @classmethod
    def zeros(cls) -> "LoadProfile":
        return cls(np.zeros(SLOTS_PER_DAY))

    def __len__(self) -> int:
        return SLOTS_PER_DAY

    def __getitem__(self, j):
        return self.loads[j]

    @property
    def peak(self) -> float:
        return float(self.loads.max())

    @property
    def valley(self) -> float:
        return float(self.loads.min())


@dataclass(frozen=True, eq=False)
class PriceSignal:
    """96 per-slot prices in Yuan/kWh."""

    prices: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "prices", _profile_array(self.prices, "price signal"))

    def __eq__(self, other) -> bool:
        return isinstance(other, PriceSignal) and np.array_equal(self.prices, other.prices)

    __hash__ = None

    def __len__(self) -> int:
        return SLOTS_PER_DAY

    def __getitem__(self, j):
        return self.prices[j]


def charging_window(req: EvRequest) -> range:
    """Slots an EV may charge in: from the slot after plug-in through plug-off."""
    return range(req.plug_in_slot + 1, max(req.plug_off_slot, req.plug_in_slot) + 1)


def required_slots(req: EvRequest) -> tuple[int, int]:
    """Full-slot counts (k_min, k_max) reaching the expected SOC without passing full.

    When quantization leaves ``k_max < k_min`` the request wins and ``k_max`` is
    raised to ``k_min``; the overshoot is at most one slot of energy.
    """
    e = req.slot_energy
    need = max(0.0, req.expected_soc - req.start_soc) * req.battery_capacity
    room = (1.0 - req.start_soc) * req.battery_capacity
    k_min = math.ceil(need / e - 1e-9) if need > 0 else 0
    k_max = math.floor(room / e + 1e-9)
    return k_min, max(k_min, k_max)


@dataclass(frozen=True)
class SlotBounds:
    k_min: int
    k_max: int
    window: range
    shortfall: int = 0  # slots of k_min that do not fit in the window


def ev_bounds(req: EvRequest) -> SlotBounds:
    """``required_slots`` clamped to the charging window."""
    window = charging_window(req)
    k_min, k_max = required_slots(req)
    n = len(window)
    shortfall = max(0, k_min - n)
    return SlotBounds(min(k_min, n), min(k_max, n), window, shortfall)


def requested_energy(req: EvRequest) -> float:
    """kWh needed to reach the expected SOC."""
    return max(0.0, req.expected_soc - req.start_soc) * req.battery_capacity
