"""The five charging regimes, each simulated over one 96-slot day.

All regimes process EVs in arrival batches: EVs plugging in during slot ``t``
are scheduled at the end of ``t`` and may charge from ``t + 1`` on.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .core import (
    SLOT_HOURS,
    SLOTS_PER_DAY,
    ChargingSchedule,
    EvRequest,
    LoadProfile,
    PriceSignal,
    charging_window,
    ev_bounds,
    requested_energy,
)
from .gridmodel import (
    IncentiveTerms,
    capacity_violations,
    incentive_payment,
    max_loading_capacity,
    peak_valley,
)
from .pricing import RollingParams, TouTariff, price_signal
from .solver import (
    AssignmentInstance,
    EvDemand,
    InfeasibleInstance,
    refine_peak_valley,
    slot_capacities,
    solve_max_value,
)

P_MTF = max_loading_capacity()
DEFAULT_CHARGING_PRICE = 1.0

UNCOORDINATED = "uncoordinated"
CENTRALIZED = "centralized"
CENTRALIZED_INCENTIVE = "centralized_incentive"
DECENTRALIZED_TOU = "decentralized_tou"
DECENTRALIZED_ROLLING = "decentralized_rolling"
REGIMES = (
    UNCOORDINATED,
    CENTRALIZED,
    CENTRALIZED_INCENTIVE,
    DECENTRALIZED_TOU,
    DECENTRALIZED_ROLLING,
)


@dataclass
class DayResult:
    regime: str
    schedules: list[ChargingSchedule]
    base_load: LoadProfile
    final_load: LoadProfile
    revenue: float
    incentive: float = 0.0
    user_cost: float = 0.0
    unmet_energy_kwh: float = 0.0
    capacity_violations: list[tuple[int, float]] = field(default_factory=list)
    infeasible_batches: list[int] = field(default_factory=list)
    # price each EV was billed at, per slot
    billed: dict[str, np.ndarray] = field(default_factory=dict, repr=False)

    @property
    def total_benefit(self) -> float:
        return self.revenue + self.incentive

    @property
    def peak_valley_final(self) -> float:
        return peak_valley(self.final_load)

    @property
    def peak(self) -> float:
        return self.final_load.peak


def revenue(
    schedules: Sequence[ChargingSchedule],
    prices: PriceSignal | np.ndarray | Mapping[str, np.ndarray],
    c: float,
    rated_kw: float | Mapping[str, float] = 7.0,
) -> float:
    """Aggregator margin: sum over charged slots of P_r * dt * (c - price)."""
    total = 0.0
    for s in schedules:
        p = prices[s.ev_id] if isinstance(prices, Mapping) else getattr(prices, "prices", prices)
        kw = rated_kw[s.ev_id] if isinstance(rated_kw, Mapping) else rated_kw
        total += kw * SLOT_HOURS * float(np.dot(s.power_fractions(), c - np.asarray(p)))
    return total


def _user_cost(schedules, billed, fleet) -> float:
    rated = {ev.id: ev.rated_power for ev in fleet}
    return sum(
        rated[s.ev_id] * SLOT_HOURS * float(np.dot(s.power_fractions(), billed[s.ev_id]))
        for s in schedules
    )


def _unmet(fleet: Sequence[EvRequest], schedules: Sequence[ChargingSchedule]) -> float:
    total = 0.0
    for ev, s in zip(fleet, schedules):
        delivered = float(s.power_fractions().sum()) * ev.slot_energy
        total += max(0.0, requested_energy(ev) - delivered)
    # sub-microwatt-hour residue is float noise, not unmet demand
    return total if total > 1e-9 else 0.0


def _batches(fleet: Sequence[EvRequest]) -> dict[int, list[int]]:
    by_slot: dict[int, list[int]] = defaultdict(list)
    for i, ev in enumerate(fleet):
        by_slot[ev.plug_in_slot].append(i)
    return by_slot


def _finish(regime, fleet, schedules, base, loads, rev, billed, p_mtf, **kw) -> DayResult:
    final = LoadProfile(np.maximum(loads, 0.0))
    return DayResult(
        regime=regime,
        schedules=schedules,
        base_load=base,
        final_load=final,
        revenue=rev,
        user_cost=_user_cost(schedules, billed, fleet),
        unmet_energy_kwh=_unmet(fleet, schedules),
        capacity_violations=capacity_violations(final, p_mtf),
        billed=billed,
        **kw,
    )


def run_uncoordinated(
    fleet: Sequence[EvRequest],
    base: LoadProfile,
    tariff: TouTariff = TouTariff(),
    c: float = DEFAULT_CHARGING_PRICE,
    p_mtf: float = P_MTF,
) -> DayResult:
    """Charge at full power from the slot after plug-in until the battery is full.

    The last slot may be partial. The transformer limit is not enforced, only
    reported.
    """
    prices = tariff.signal().prices
    loads = np.array(base.loads, dtype=float)
    schedules, billed = [], {}
    for ev in fleet:
        window = charging_window(ev)
        need = (1.0 - ev.start_soc) * ev.battery_capacity
        ratio = need / ev.slot_energy
        n_full = min(int(math.floor(ratio + 1e-12)), len(window))
        frac = ratio - n_full if n_full < len(window) else 0.0
        mask = np.zeros(SLOTS_PER_DAY, dtype=bool)
        mask[window.start : window.start + n_full] = True
        if frac > 1e-12:
            sched = ChargingSchedule(ev.id, mask, frac, window.start + n_full)
        else:
            sched = ChargingSchedule(ev.id, mask)
        loads += ev.rated_power * sched.power_fractions()
        schedules.append(sched)
        billed[ev.id] = prices
    rated = {ev.id: ev.rated_power for ev in fleet}
    rev = revenue(schedules, billed, c, rated)
    return _finish(UNCOORDINATED, fleet, schedules, base, loads, rev, billed, p_mtf)


def _uniform_power(fleet: Sequence[EvRequest]) -> float:
    powers = {ev.rated_power for ev in fleet}
    if len(powers) > 1:
        raise ValueError("centralized scheduling needs one rated power across the fleet")
    return powers.pop() if powers else 7.0


def _fallback_batch(bounds, caps) -> list[list[int]]:
    """Serve minimum demand in earliest slots with spare capacity, EV by EV."""
    caps = caps.copy()
    chosen = []
    for b in bounds:
        got = []
        for j in b.window:
            if len(got) == b.k_min:
                break
            if caps[j] > 0:
                caps[j] -= 1
                got.append(j)
        chosen.append(got)
    return chosen


def run_centralized(
    fleet: Sequence[EvRequest],
    base: LoadProfile,
    tariff: TouTariff = TouTariff(),
    c: float = DEFAULT_CHARGING_PRICE,
    with_incentive: bool = False,
    terms: IncentiveTerms | None = None,
    p_mtf: float = P_MTF,
) -> DayResult:
    """Aggregator maximizes its margin batch by batch under the transformer limit.

    With ``with_incentive`` each batch's value-optimal plan is flattened
    (lowest peak, then highest valley) before committing, and the day closes
    with the peak-valley reward computed from ``terms``.
    """
    unit = _uniform_power(fleet)
    prices = tariff.signal().prices
    slot_value = unit * SLOT_HOURS * (c - prices)
    loads = np.array(base.loads, dtype=float)
    schedules: list[ChargingSchedule | None] = [None] * len(fleet)
    infeasible: list[int] = []
    rev = 0.0
    for t, idx in sorted(_batches(fleet).items()):
        bounds = [ev_bounds(fleet[i]) for i in idx]
        demands = tuple(
            EvDemand(tuple(b.window), b.k_min, b.k_max, fleet[i].id) for i, b in zip(idx, bounds)
        )
        caps = slot_capacities(loads, p_mtf, unit)
        inst = AssignmentInstance(demands, slot_value, caps, loads.copy(), unit)
        try:
            assignment, value = solve_max_value(inst)
            if with_incentive:
                assignment = refine_peak_valley(inst, assignment, value)
            chosen = assignment.chosen
        except InfeasibleInstance:
            infeasible.append(t)
            chosen = _fallback_batch(bounds, caps)
        for i, slots in zip(idx, chosen):
            sched = ChargingSchedule.from_slots(fleet[i].id, slots)
            schedules[i] = sched
            loads[list(slots)] += unit
            rev += float(slot_value[list(slots)].sum())
    billed = {ev.id: prices for ev in fleet}
    incentive = 0.0
    final_pv = float(loads.max() - loads.min())
    if with_incentive:
        if terms is None:
            terms = IncentiveTerms(0.1, peak_valley(base))
        incentive = incentive_payment(terms, final_pv)
    regime = CENTRALIZED_INCENTIVE if with_incentive else CENTRALIZED
    return _finish(
        regime, fleet, schedules, base, loads, rev, billed, p_mtf,
        incentive=incentive, infeasible_batches=infeasible,
    )


def cheapest_slots(window: range, prices: np.ndarray, k: int) -> list[int]:
    """The ``k`` lowest-price slots of ``window``, earlier slot first on ties."""
    if k <= 0:
        return []
    ranked = sorted(window, key=lambda j: (prices[j], j))
    return sorted(ranked[:k])


def run_decentralized_tou(
    fleet: Sequence[EvRequest],
    base: LoadProfile,
    tariff: TouTariff = TouTariff(),
    c: float = DEFAULT_CHARGING_PRICE,
    p_mtf: float = P_MTF,
) -> DayResult:
    """Every EV buys just its minimum energy in the cheapest TOU slots it can reach."""
    prices = tariff.signal().prices
    loads = np.array(base.loads, dtype=float)
    schedules, billed = [], {}
    for ev in fleet:
        b = ev_bounds(ev)
        sched = ChargingSchedule.from_slots(ev.id, cheapest_slots(b.window, prices, b.k_min))
        loads += ev.rated_power * sched.mask
        schedules.append(sched)
        billed[ev.id] = prices
    rated = {ev.id: ev.rated_power for ev in fleet}
    rev = revenue(schedules, billed, c, rated)
    return _finish(DECENTRALIZED_TOU, fleet, schedules, base, loads, rev, billed, p_mtf)


def run_decentralized_rolling(
    fleet: Sequence[EvRequest],
    base: LoadProfile,
    params: RollingParams = RollingParams(),
    c: float = DEFAULT_CHARGING_PRICE,
    p_mtf: float = P_MTF,
) -> DayResult:
    """Rolling-update price protocol.

    EVs arriving in slot ``t`` optimize against the price announced after
    ``t - 1``; their plans are then added to the committed load, and the price
    is recomputed for the next slot's arrivals. EVs of one batch share a
    signal and do not see each other's plans.
    """
    loads = np.array(base.loads, dtype=float)
    schedules: list[ChargingSchedule | None] = [None] * len(fleet)
    billed: dict[str, np.ndarray] = {}
    for t, idx in sorted(_batches(fleet).items()):
        signal = price_signal(LoadProfile(loads), params).prices
        added = np.zeros(SLOTS_PER_DAY)
        for i in idx:
            ev = fleet[i]
            b = ev_bounds(ev)
            sched = ChargingSchedule.from_slots(ev.id, cheapest_slots(b.window, signal, b.k_min))
            schedules[i] = sched
            billed[ev.id] = signal
            added += ev.rated_power * sched.mask
        loads += added
    rated = {ev.id: ev.rated_power for ev in fleet}
    rev = revenue(schedules, billed, c, rated)
    return _finish(DECENTRALIZED_ROLLING, fleet, schedules, base, loads, rev, billed, p_mtf)
