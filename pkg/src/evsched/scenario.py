"""One simulated day per seed: fleet, base load, regimes, report and CSVs.

Every number written to ``report.json`` is derived from the load curves after
they are rounded to the 6 decimals used in ``loads.csv``, so the report can be
recomputed from the CSV.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .config import ScenarioConfig
from .core import EvRequest, LoadProfile
from .fleet import FleetDataError, FleetParams, generate_fleet, read_fleet_csv, write_fleet_csv
from .gridmodel import (
    BaseLoadError,
    IncentiveTerms,
    capacity_violations,
    incentive_payment,
    load_base_csv,
    max_loading_capacity,
    synthetic_base_load,
)
from .pricing import VALLEY_SLOTS
from .schedulers import (
    CENTRALIZED,
    CENTRALIZED_INCENTIVE,
    DECENTRALIZED_ROLLING,
    DECENTRALIZED_TOU,
    UNCOORDINATED,
    DayResult,
    run_centralized,
    run_decentralized_rolling,
    run_decentralized_tou,
    run_uncoordinated,
)

DECIMALS = 6
SUMMARY_COLUMNS = (
    "regime",
    "revenue",
    "incentive",
    "total_benefit",
    "user_cost",
    "peak_kw",
    "peak_slot",
    "valley_kw",
    "valley_slot",
    "peak_valley_kw",
    "violations",
    "max_violation_kw",
    "unmet_energy_kwh",
    "charging_slots",
    "valley_share",
    "infeasible_batches",
)


class ScenarioDataError(ValueError):
    """Input data (base load, fleet) cannot be used."""


def _r(x: float) -> float:
    # adding 0.0 turns -0.0 into 0.0
    return round(float(x), DECIMALS) + 0.0


@dataclass(frozen=True)
class RegimeSummary:
    regime: str
    revenue: float
    incentive: float
    total_benefit: float
    user_cost: float
    peak_kw: float
    peak_slot: int
    valley_kw: float
    valley_slot: int
    peak_valley_kw: float
    violations: int
    max_violation_kw: float
    unmet_energy_kwh: float
    charging_slots: int
    valley_share: float
    infeasible_batches: int

    def row(self) -> list:
        return [getattr(self, c) for c in SUMMARY_COLUMNS]


@dataclass
class RunReport:
    config: dict
    seed: int
    fleet_size: int
    p_mtf: float
    beta: float
    base: dict
    loads: dict[str, np.ndarray]
    regimes: dict[str, RegimeSummary]
    fleet: list[EvRequest] = field(default_factory=list, repr=False)
    results: dict[str, DayResult] = field(default_factory=dict, repr=False)

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "seed": self.seed,
            "fleet_size": self.fleet_size,
            "p_mtf_kw": self.p_mtf,
            "beta": self.beta,
            "base": self.base,
            "regimes": {k: asdict(v) for k, v in self.regimes.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def table(self) -> str:
        head = f"{'regime':<24}{'revenue':>12}{'incentive':>11}{'benefit':>12}{'p-v kW':>11}{'peak kW':>11}{'viol':>6}{'unmet kWh':>11}"
        lines = [head]
        for s in self.regimes.values():
            lines.append(
                f"{s.regime:<24}{s.revenue:>12.2f}{s.incentive:>11.2f}{s.total_benefit:>12.2f}"
                f"{s.peak_valley_kw:>11.1f}{s.peak_kw:>11.1f}{s.violations:>6}{s.unmet_energy_kwh:>11.2f}"
            )
        return "\n".join(lines)


def _profile_metrics(loads: np.ndarray) -> dict:
    peak_slot, valley_slot = int(np.argmax(loads)), int(np.argmin(loads))
    return {
        "peak_kw": _r(loads[peak_slot]),
        "peak_slot": peak_slot,
        "valley_kw": _r(loads[valley_slot]),
        "valley_slot": valley_slot,
        "peak_valley_kw": _r(loads[peak_slot] - loads[valley_slot]),
    }


def _charging_slots(result: DayResult) -> tuple[int, float]:
    valley = set(VALLEY_SLOTS)
    n = in_valley = 0
    for s in result.schedules:
        for j in s.slots:
            n += 1
            in_valley += j in valley
        if s.final_partial_fraction > 0.0:
            n += 1
            in_valley += s.partial_slot in valley
    return n, (in_valley / n if n else 0.0)


def _summarize(result: DayResult, loads: np.ndarray, p_mtf: float, incentive: float) -> RegimeSummary:
    m = _profile_metrics(loads)
    over = capacity_violations(LoadProfile(loads), p_mtf, tol=10.0**-DECIMALS)
    n_slots, share = _charging_slots(result)
    revenue = _r(result.revenue)
    incentive = _r(incentive)
    return RegimeSummary(
        regime=result.regime,
        revenue=revenue,
        incentive=incentive,
        total_benefit=_r(revenue + incentive),
        user_cost=_r(result.user_cost),
        violations=len(over),
        max_violation_kw=_r(max((v for _, v in over), default=0.0)),
        unmet_energy_kwh=_r(result.unmet_energy_kwh),
        charging_slots=n_slots,
        valley_share=_r(share),
        infeasible_batches=len(result.infeasible_batches),
        **m,
    )


def _base_load(config: ScenarioConfig) -> LoadProfile:
    if config.base_load_source == "synthetic":
        return synthetic_base_load()
    try:
        return load_base_csv(config.base_load_source)
    except BaseLoadError as exc:
        raise ScenarioDataError(str(exc)) from None


def _fleet(config: ScenarioConfig) -> list[EvRequest]:
    if config.fleet == "generate":
        params = FleetParams(expected_soc=config.expected_soc, pre_trip_soc=config.pre_trip_soc)
        return generate_fleet(config.fleet_size, config.seed, params)
    try:
        return read_fleet_csv(config.fleet)
    except FleetDataError as exc:
        raise ScenarioDataError(str(exc)) from None


def run_scenario(config: ScenarioConfig, out_dir=None) -> RunReport:
    """Simulate the configured regimes on one shared fleet; write outputs if ``out_dir``."""
    base = _base_load(config)
    fleet = _fleet(config)
    tariff = config.tariff()
    p_mtf = max_loading_capacity(config.transformer())
    c = config.charging_price_c
    base_loads = np.round(base.loads, DECIMALS)
    base_pv = float(base_loads.max() - base_loads.min())

    wanted = config.regimes
    need_plain = CENTRALIZED in wanted or (
        CENTRALIZED_INCENTIVE in wanted and config.incentive_reference == "no_incentive_schedule"
    )
    results: dict[str, DayResult] = {}
    try:
        if UNCOORDINATED in wanted:
            results[UNCOORDINATED] = run_uncoordinated(fleet, base, tariff, c, p_mtf)
        plain = run_centralized(fleet, base, tariff, c, p_mtf=p_mtf) if need_plain else None
        if CENTRALIZED in wanted:
            results[CENTRALIZED] = plain
        if CENTRALIZED_INCENTIVE in wanted:
            if plain is not None and config.incentive_reference == "no_incentive_schedule":
                ref_pv = float(np.ptp(np.round(plain.final_load.loads, DECIMALS)))
            else:
                ref_pv = base_pv
            terms = IncentiveTerms(config.alpha, ref_pv)
            results[CENTRALIZED_INCENTIVE] = run_centralized(
                fleet, base, tariff, c, with_incentive=True, terms=terms, p_mtf=p_mtf
            )
        if DECENTRALIZED_TOU in wanted:
            results[DECENTRALIZED_TOU] = run_decentralized_tou(fleet, base, tariff, c, p_mtf)
        if DECENTRALIZED_ROLLING in wanted:
            results[DECENTRALIZED_ROLLING] = run_decentralized_rolling(
                fleet, base, config.rolling(), c, p_mtf
            )
    except ValueError as exc:
        # e.g. an imported fleet mixing rated powers under central control
        raise ScenarioDataError(str(exc)) from None

    loads = {"base": base_loads}
    summaries = {}
    for name in wanted:
        res = results[name]
        curve = np.round(res.final_load.loads, DECIMALS)
        loads[name] = curve
        incentive = 0.0
        if name == CENTRALIZED_INCENTIVE:
            # recomputed from rounded curves so the report matches the CSV
            final_pv = float(curve.max() - curve.min())
            incentive = incentive_payment(terms, final_pv)
        summaries[name] = _summarize(res, curve, p_mtf, incentive)

    base_metrics = _profile_metrics(base_loads)
    base_metrics["violations"] = len(capacity_violations(LoadProfile(base_loads), p_mtf, 1e-6))
    report = RunReport(
        config=config.echo(),
        seed=config.seed,
        fleet_size=len(fleet),
        p_mtf=_r(p_mtf),
        beta=config.beta_value(base_pv),
        base=base_metrics,
        loads=loads,
        regimes=summaries,
        fleet=fleet,
        results=results,
    )
    if out_dir is not None:
        write_outputs(report, out_dir)
    return report


def emit_load_csv(report: RunReport, path) -> None:
    """``slot,base_kw,<regime>_kw,...``: 96 rows, 6 fixed decimals."""
    names = list(report.loads)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["slot"] + [f"{n}_kw" for n in names])
        for j in range(len(report.loads["base"])):
            w.writerow([j] + [f"{report.loads[n][j]:.{DECIMALS}f}" for n in names])


def read_load_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    head, body = rows[0], rows[1:]
    cols = np.array([[float(x) for x in r[1:]] for r in body])
    return {h[: -len("_kw")]: cols[:, i] for i, h in enumerate(head[1:])}


def _fmt(v) -> str:
    return f"{v:.{DECIMALS}f}" if isinstance(v, float) else str(v)


def write_summary_csv(reports: Sequence[RunReport], path, with_seed: bool = False) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow((["seed"] if with_seed else []) + list(SUMMARY_COLUMNS))
        for rep in reports:
            for s in rep.regimes.values():
                w.writerow(([rep.seed] if with_seed else []) + [_fmt(v) for v in s.row()])


def write_outputs(report: RunReport, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(report.to_json())
    emit_load_csv(report, out / "loads.csv")
    write_summary_csv([report], out / "comparison.csv")
    write_fleet_csv(report.fleet, out / "fleet.csv")


def _run_seed(args) -> RunReport:
    config, out_dir = args
    rep = run_scenario(config, out_dir)
    # drop bulky in-memory results before crossing the process boundary
    rep.results = {}
    return rep


def run_seeds(config: ScenarioConfig, out_dir=None) -> list[RunReport]:
    """Replicate the scenario for seeds ``seed .. seed + seeds - 1``.

    A single seed writes straight into ``out_dir``. Several seeds each get a
    ``seed_<n>`` directory, and ``summary.csv`` in ``out_dir`` lists every
    regime of every seed in seed order.
    """
    if config.seeds == 1:
        return [run_scenario(config, out_dir)]
    seeds = [config.seed + k for k in range(config.seeds)]
    jobs = [
        (replace(config, seed=s, seeds=1), None if out_dir is None else Path(out_dir) / f"seed_{s}")
        for s in seeds
    ]
    if config.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(config.jobs, len(jobs))) as pool:
            reports = list(pool.map(_run_seed, jobs))
    else:
        reports = [run_scenario(c, d) for c, d in jobs]
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        write_summary_csv(reports, Path(out_dir) / "summary.csv", with_seed=True)
    return reports


def seed_statistics(reports: Sequence[RunReport], column: str) -> dict[str, tuple[float, float]]:
    """Mean and sample standard deviation of one summary column, per regime."""
    out = {}
    for name in reports[0].regimes if reports else ():
        xs = [float(getattr(r.regimes[name], column)) for r in reports]
        mean = sum(xs) / len(xs)
        sd = math.sqrt(sum((x - mean) ** 2 for x in xs) / (len(xs) - 1)) if len(xs) > 1 else 0.0
        out[name] = (mean, sd)
    return out
