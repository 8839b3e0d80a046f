import math

import numpy as np
import pytest
from scipy import stats

from evsched.core import ev_bounds
from evsched.fleet import (
    FleetDataError,
    FleetParams,
    generate_fleet,
    make_ev,
    read_fleet_csv,
    rng_stream,
    sample_daily_km,
    sample_plug_in,
    sample_plug_out,
    start_soc,
    write_fleet_csv,
)
from oracles import circular_mean_hours, plug_in_density, plug_out_density, quadrature_cdf

N = 100_000
P = FleetParams()


@pytest.fixture(scope="module")
def draws():
    rng = rng_stream(12345, 0)
    return (
        sample_plug_in(rng, P, N),
        sample_plug_out(rng, P, N),
        sample_daily_km(rng, P, N),
    )


def test_plug_in_distribution(draws):
    x = draws[0]
    assert np.all((x > 0) & (x <= 24))
    assert abs(circular_mean_hours(x) - 17.47) < 0.15
    ks = stats.kstest(x, quadrature_cdf(plug_in_density, P.mu_s - 12)).statistic
    assert ks < 0.01


def test_plug_out_distribution(draws):
    x = draws[1]
    assert np.all((x > 0) & (x <= 24))
    assert abs(circular_mean_hours(x) - 8.92) < 0.15
    ks = stats.kstest(x, quadrature_cdf(plug_out_density, P.mu_e + 12)).statistic
    assert ks < 0.01


def test_daily_km_distribution(draws):
    km = draws[2]
    assert np.all(km > 0)
    assert abs(np.median(km) - math.exp(2.98)) < 0.5
    ks = stats.kstest(km, stats.lognorm(s=P.sigma_m, scale=math.exp(P.mu_m)).cdf).statistic
    assert ks < 0.01


def test_degenerate_spreads():
    tight = FleetParams(sigma_s=1e-9, sigma_e=1e-9, sigma_m=1e-12)
    rng = rng_stream(1, 0)
    assert np.allclose(sample_plug_in(rng, tight, 100), 17.47)
    assert np.allclose(sample_plug_out(rng, tight, 100), 8.92)
    assert np.allclose(sample_daily_km(rng, tight, 100), math.exp(2.98))


@pytest.mark.parametrize(
    "pre,km,expected",
    [(1.0, 0.0, 1.0), (1.0, 64.0, 0.70), (1.0, 500.0, 0.0), (0.5, 32.0, 0.35)],
)
def test_start_soc(pre, km, expected):
    assert start_soc(pre, km, P) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("pre,km", [(1.1, 0.0), (0.5, -1.0), (math.nan, 0.0)])
def test_start_soc_rejects_bad_input(pre, km):
    with pytest.raises(ValueError):
        start_soc(pre, km, P)


def test_generate_fleet_is_deterministic_and_order_free():
    assert generate_fleet(0, 3) == []
    a, b = generate_fleet(300, 3), generate_fleet(300, 3)
    assert a == b
    # any single EV can be rebuilt from its own stream
    for i in (0, 17, 299):
        assert make_ev(i, 3) == a[i]
    assert generate_fleet(300, 4) != a


def test_fleet_windows_mostly_valid():
    fleet = generate_fleet(10_000, 11)
    forced = sum("forced_window" in ev.flags for ev in fleet)
    assert forced / len(fleet) <= 0.01
    for ev in fleet:
        assert ev.plug_off_slot > ev.plug_in_slot + 1
        assert ("unmet_demand" in ev.flags) == (ev_bounds(ev).shortfall > 0)


def test_fleet_csv_round_trip(tmp_path):
    fleet = generate_fleet(25, 5)
    path = tmp_path / "fleet.csv"
    write_fleet_csv(fleet, path)
    back = read_fleet_csv(path)
    assert [e.id for e in back] == [e.id for e in fleet]
    for x, y in zip(fleet, back):
        assert (x.plug_in_slot, x.plug_off_slot) == (y.plug_in_slot, y.plug_off_slot)
        assert y.start_soc == pytest.approx(x.start_soc, abs=1e-6)


def test_fleet_csv_errors(tmp_path):
    with pytest.raises(FleetDataError):
        read_fleet_csv(tmp_path / "missing.csv")
    bad = tmp_path / "bad.csv"
    bad.write_text("id,slot\n")
    with pytest.raises(FleetDataError):
        read_fleet_csv(bad)
    write_fleet_csv(generate_fleet(2, 1), bad)
    text = bad.read_text().splitlines()
    bad.write_text("\n".join(text[:2] + [text[1]]) + "\n")
    with pytest.raises(FleetDataError, match="duplicate"):
        read_fleet_csv(bad)
