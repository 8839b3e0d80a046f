"""Seeded Monte Carlo synthesis of the EV population.

Plug-in and plug-out clock times follow a normal law truncated to +-12 h around
its mean and wrapped onto the (0, 24] clock; daily distance is lognormal. Each
EV draws from its own stream spawned from ``(seed, ev_index)`` so a fleet is
reproducible no matter in which order, or in how many workers, it is built.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable

import numpy as np

from .core import EvRequest, clock_to_slot, ev_bounds

MAX_RESAMPLES = 100
FORCED_WINDOW_SLOTS = 8

FLEET_CSV_HEADER = (
    "id",
    "plug_in_slot",
    "plug_off_slot",
    "start_soc",
    "expected_soc",
    "battery_kwh",
    "rated_kw",
    "efficiency",
)


@dataclass(frozen=True)
class FleetParams:
    mu_s: float = 17.47
    sigma_s: float = 3.41
    mu_e: float = 8.92
    sigma_e: float = 3.24
    mu_m: float = 2.98
    sigma_m: float = 1.14
    expected_soc: float = 0.90
    e_100: float = 15.0  # kWh per 100 km
    pre_trip_soc: float = 1.0
    battery_capacity: float = 32.0
    rated_power: float = 7.0
    efficiency: float = 0.9

    def __post_init__(self) -> None:
        for name in ("sigma_s", "sigma_e", "sigma_m"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 < self.expected_soc <= 1.0:
            raise ValueError("expected_soc must be in (0, 1]")


def rng_stream(seed: int, stream_id: int) -> np.random.Generator:
    """Independent generator for one EV index under a run seed."""
    ss = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=(int(stream_id),))
    return np.random.default_rng(ss)


def _wrapped_clock(rng: np.random.Generator, mu: float, sigma: float, size=None):
    # normal truncated to (mu - 12, mu + 12], then folded onto the (0, 24] clock
    n = 1 if size is None else int(np.prod(size))
    out = np.empty(n)
    filled = 0
    while filled < n:
        draw = rng.normal(mu, sigma, size=n - filled)
        keep = draw[(draw > mu - 12.0) & (draw <= mu + 12.0)]
        out[filled : filled + keep.size] = keep
        filled += keep.size
    h = np.mod(out, 24.0)
    h[h == 0.0] = 24.0
    if size is None:
        return float(h[0])
    return h.reshape(size)


def sample_plug_in(rng: np.random.Generator, params: FleetParams = FleetParams(), size=None):
    """Plug-in clock hour(s) in (0, 24]."""
    return _wrapped_clock(rng, params.mu_s, params.sigma_s, size)


def sample_plug_out(rng: np.random.Generator, params: FleetParams = FleetParams(), size=None):
    """Plug-out clock hour(s) in (0, 24]."""
    return _wrapped_clock(rng, params.mu_e, params.sigma_e, size)


def sample_daily_km(rng: np.random.Generator, params: FleetParams = FleetParams(), size=None):
    km = np.exp(rng.normal(params.mu_m, params.sigma_m, size=size))
    return float(km) if size is None else km


def start_soc(pre_trip_soc: float, km: float, params: FleetParams = FleetParams()) -> float:
    """SOC on arrival after driving ``km`` from ``pre_trip_soc``; floored at empty."""
    if not (math.isfinite(pre_trip_soc) and math.isfinite(km)):
        raise ValueError("start_soc inputs must be finite")
    if not 0.0 <= pre_trip_soc <= 1.0 or km < 0:
        raise ValueError("pre_trip_soc must be in [0, 1] and km non-negative")
    return max(0.0, pre_trip_soc - km * params.e_100 / (100.0 * params.battery_capacity))


def _hour_to_slot(hour: float) -> int:
    return clock_to_slot(0.0 if hour >= 24.0 else hour)


def make_ev(index: int, seed: int, params: FleetParams = FleetParams()) -> EvRequest:
    """Draw EV number ``index`` from its own stream."""
    rng = rng_stream(seed, index)
    flags: list[str] = []
    for _ in range(MAX_RESAMPLES):
        plug_in = _hour_to_slot(sample_plug_in(rng, params))
        plug_off = _hour_to_slot(sample_plug_out(rng, params))
        if plug_off > plug_in + 1:
            break
    else:
        plug_in = min(plug_in, 95 - FORCED_WINDOW_SLOTS)
        plug_off = plug_in + FORCED_WINDOW_SLOTS
        flags.append("forced_window")
    km = sample_daily_km(rng, params)
    ev = EvRequest(
        id=f"ev{index:05d}",
        plug_in_slot=plug_in,
        plug_off_slot=plug_off,
        start_soc=start_soc(params.pre_trip_soc, km, params),
        expected_soc=params.expected_soc,
        battery_capacity=params.battery_capacity,
        rated_power=params.rated_power,
        efficiency=params.efficiency,
        daily_km=km,
        pre_trip_soc=params.pre_trip_soc,
    )
    if ev_bounds(ev).shortfall:
        flags.append("unmet_demand")
    return replace(ev, flags=tuple(flags)) if flags else ev


def generate_fleet(n: int, seed: int, params: FleetParams = FleetParams()) -> list[EvRequest]:
    if n < 0:
        raise ValueError("fleet size must be non-negative")
    return [make_ev(i, seed, params) for i in range(n)]


def write_fleet_csv(fleet: Iterable[EvRequest], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FLEET_CSV_HEADER)
        for ev in fleet:
            w.writerow(
                [
                    ev.id,
                    ev.plug_in_slot,
                    ev.plug_off_slot,
                    f"{ev.start_soc:.6f}",
                    f"{ev.expected_soc:.6f}",
                    f"{ev.battery_capacity:.6f}",
                    f"{ev.rated_power:.6f}",
                    f"{ev.efficiency:.6f}",
                ]
            )


class FleetDataError(ValueError):
    """A fleet file is missing or malformed."""


def read_fleet_csv(path) -> list[EvRequest]:
    path = Path(path)
    try:
        fh = path.open(newline="")
    except OSError as exc:
        raise FleetDataError(f"{path}: cannot open fleet file ({exc.strerror})") from None
    with fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != FLEET_CSV_HEADER:
            raise FleetDataError(f"{path}: expected header {','.join(FLEET_CSV_HEADER)}")
        fleet = []
        for lineno, row in enumerate(reader, start=2):
            try:
                fleet.append(
                    EvRequest(
                        id=row["id"],
                        plug_in_slot=int(row["plug_in_slot"]),
                        plug_off_slot=int(row["plug_off_slot"]),
                        start_soc=float(row["start_soc"]),
                        expected_soc=float(row["expected_soc"]),
                        battery_capacity=float(row["battery_kwh"]),
                        rated_power=float(row["rated_kw"]),
                        efficiency=float(row["efficiency"]),
                    )
                )
            except (TypeError, ValueError) as exc:
                raise FleetDataError(f"{path}:{lineno}: {exc}") from None
    if len({ev.id for ev in fleet}) != len(fleet):
        raise FleetDataError(f"{path}: duplicate EV ids")
    return fleet
