"""Scenario configuration: a flat ``key = value`` file plus CLI overrides.

Every key has a flag of the same name with ``.`` and ``_`` turned into ``-``
(``rolling.a`` -> ``--rolling-a``). A few keys have a short alias that works
both in files and as a flag: ``evs`` for ``fleet_size``, ``charging_price``
for ``charging_price_c`` and ``base_load`` for ``base_load_source``. Dotted
spellings (``tou.peak``) and underscore spellings (``tou_peak``) are
interchangeable. Example file::

    # 150 EVs, every regime
    evs = 150
    seed = 7
    regime = all
    tou.peak = 0.869
    incentive.reference = base
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from pathlib import Path

from .gridmodel import TransformerSpec, max_loading_capacity
from .pricing import RollingParams, TouTariff
from .schedulers import REGIMES


class ConfigError(ValueError):
    pass


INCENTIVE_REFERENCES = ("base", "no_incentive_schedule")


@dataclass(frozen=True)
class ScenarioConfig:
    fleet_size: int = 300
    seed: int = 1
    seeds: int = 1
    regime: str = "all"
    charging_price_c: float = 1.0
    alpha: float = 0.1
    beta: str = "auto"
    rolling_a: float = 0.542
    rolling_b: float = 0.0
    tou_valley: float = 0.365
    tou_peak: float = 0.869
    tou_level: float = 0.687
    transformer_kva: float = 6300.0
    power_factor: float = 0.85
    energy_efficiency: float = 0.95
    base_load_source: str = "synthetic"
    fleet: str = "generate"
    incentive_reference: str = "base"
    expected_soc: float = 0.90
    pre_trip_soc: float = 1.0
    out_dir: str = "out"
    jobs: int = 1

    def __post_init__(self) -> None:
        if self.fleet_size < 0:
            raise ConfigError("fleet_size must be >= 0")
        if self.seeds < 1:
            raise ConfigError("seeds must be >= 1")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if self.regime != "all" and self.regime not in REGIMES:
            raise ConfigError(f"regime must be 'all' or one of {', '.join(REGIMES)}")
        if self.alpha < 0:
            raise ConfigError("alpha must be >= 0")
        if self.rolling_a < 0:
            raise ConfigError("rolling.a must be >= 0")
        if self.beta != "auto":
            try:
                b = float(self.beta)
            except ValueError:
                raise ConfigError("beta must be a number or 'auto'") from None
            if not (math.isfinite(b) and b >= 0):
                raise ConfigError("beta must be finite and >= 0")
        if self.incentive_reference not in INCENTIVE_REFERENCES:
            raise ConfigError(f"incentive.reference must be one of {INCENTIVE_REFERENCES}")
        for name in ("charging_price_c", "tou_valley", "tou_peak", "tou_level"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ConfigError(f"{key_of(name)} must be finite and >= 0")
        try:
            self.transformer()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if not 0 < self.expected_soc <= 1 or not 0 <= self.pre_trip_soc <= 1:
            raise ConfigError("expected_soc must be in (0, 1] and pre_trip_soc in [0, 1]")

    @property
    def regimes(self) -> tuple[str, ...]:
        return REGIMES if self.regime == "all" else (self.regime,)

    def tariff(self) -> TouTariff:
        return TouTariff(self.tou_valley, self.tou_peak, self.tou_level)

    def transformer(self) -> TransformerSpec:
        return TransformerSpec(self.transformer_kva, self.power_factor, self.energy_efficiency)

    def rolling(self) -> RollingParams:
        return RollingParams(self.rolling_a, self.rolling_b, max_loading_capacity(self.transformer()))

    def beta_value(self, base_pv: float) -> float:
        """Weight of the peak-valley term; ``auto`` picks 1e-5 / base peak-valley."""
        if self.beta == "auto":
            return 1e-5 / base_pv if base_pv > 0 else 0.0
        return float(self.beta)

    def echo(self) -> dict:
        """Settings that shape the results (output location and parallelism excluded)."""
        return {
            key_of(f.name): getattr(self, f.name)
            for f in fields(self)
            if f.name not in ("out_dir", "jobs")
        }


_DOTTED = {"rolling", "tou", "incentive"}
ALIASES = {"evs": "fleet_size", "charging_price": "charging_price_c", "base_load": "base_load_source"}
_FIELDS = {f.name: f for f in fields(ScenarioConfig)}


def key_of(field_name: str) -> str:
    """Preferred config-file key of a field (``rolling_a`` -> ``rolling.a``)."""
    head, _, rest = field_name.partition("_")
    return f"{head}.{rest}" if head in _DOTTED and rest else field_name


def field_of(key: str) -> str:
    """Field name behind a config key or alias; raises ConfigError if unknown."""
    name = ALIASES.get(key, key.replace(".", "_"))
    if name not in _FIELDS:
        raise ConfigError(f"unknown config key {key!r}")
    return name


def flags_of(field_name: str) -> list[str]:
    """Every CLI spelling of a field, canonical first."""
    names = [key_of(field_name)] + [a for a, f in ALIASES.items() if f == field_name]
    return ["--" + n.replace(".", "-").replace("_", "-") for n in names]


def coerce(key: str, raw: str):
    f = _FIELDS[field_of(key)]
    kind = f.type if isinstance(f.type, str) else f.type.__name__
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            value = float(raw)
            if not math.isfinite(value):
                raise ValueError
            return value
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {kind}") from None
    return raw.strip()


def parse_config_text(text: str, source: str = "<config>") -> dict:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key = key.strip()
        try:
            values[field_of(key)] = coerce(key, value.strip())
        except ConfigError as exc:
            raise ConfigError(f"{source}:{lineno}: {exc}") from None
    return values


def load_config(path=None, overrides: dict | None = None) -> ScenarioConfig:
    values = {}
    if path is not None:
        p = Path(path)
        try:
            text = p.read_text()
        except OSError as exc:
            raise ConfigError(f"{p}: cannot read config ({exc.strerror})") from None
        values.update(parse_config_text(text, str(p)))
    values.update(overrides or {})
    try:
        return ScenarioConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
