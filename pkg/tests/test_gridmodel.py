import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from evsched.core import ChargingSchedule, LoadProfile, slot_to_clock
from evsched.gridmodel import (
    BaseLoadError,
    IncentiveTerms,
    TransformerSpec,
    accumulate_load,
    capacity_violations,
    incentive_payment,
    load_base_csv,
    max_loading_capacity,
    peak_valley,
    schedule_power,
    synthetic_base_load,
    write_base_csv,
)


@pytest.mark.parametrize(
    "spec,expected",
    [((6300, 0.85, 0.95), 5087.25), ((1000, 1.0, 1.0), 1000.0), ((6300, 0.85, 1.0), 5355.0)],
)
def test_max_loading_capacity(spec, expected):
    assert max_loading_capacity(TransformerSpec(*spec)) == pytest.approx(expected, abs=1e-9)


def test_default_capacity_displays_as_5087():
    assert round(max_loading_capacity()) == 5087


@pytest.mark.parametrize("spec", [(0, 0.85, 0.95), (6300, 1.2, 0.95), (6300, 0.85, 0.0)])
def test_transformer_spec_invariants(spec):
    with pytest.raises(ValueError):
        TransformerSpec(*spec)


def test_accumulate_load_examples():
    zero = LoadProfile.zeros()
    assert accumulate_load(zero, [], 7.0) is zero
    one = accumulate_load(zero, [ChargingSchedule.from_slots("a", [50])], 7.0).loads
    assert one[50] == 7.0 and one.sum() == 7.0
    two = accumulate_load(
        zero, [ChargingSchedule.from_slots("a", [50]), ChargingSchedule.from_slots("b", [50])], 7.0
    )
    assert two.loads[50] == 14.0


def test_accumulate_includes_partial_slot():
    mask = np.zeros(96, dtype=bool)
    mask[3] = True
    s = ChargingSchedule("a", mask, 0.25, 4)
    loads = accumulate_load(LoadProfile.zeros(), [s], {"a": 8.0}).loads
    assert loads[3] == 8.0 and loads[4] == 2.0


slot_sets = st.lists(st.lists(st.integers(0, 95), max_size=10, unique=True), max_size=6)


@given(slot_sets, slot_sets)
def test_accumulation_is_batch_order_free_and_incremental(b1, b2):
    base = LoadProfile(np.linspace(100, 400, 96))
    s1 = [ChargingSchedule.from_slots(f"a{i}", s) for i, s in enumerate(b1)]
    s2 = [ChargingSchedule.from_slots(f"b{i}", s) for i, s in enumerate(b2)]
    ab = accumulate_load(accumulate_load(base, s1, 7.0), s2, 7.0).loads
    ba = accumulate_load(accumulate_load(base, s2, 7.0), s1, 7.0).loads
    scratch = base.loads + 7.0 * sum((s.mask.astype(float) for s in s1 + s2), np.zeros(96))
    assert np.allclose(ab, ba) and np.allclose(ab, scratch)
    assert np.all(ab >= base.loads)
    assert peak_valley(ab) >= 0


def test_peak_valley_examples():
    assert peak_valley(LoadProfile(np.full(96, 3.0))) == 0.0
    x = np.full(96, 3000.0)
    x[10], x[60] = 5000.0, 2584.0
    assert peak_valley(LoadProfile(x)) == 2416.0
    y = np.full(96, 100.0)
    y[7] += 100
    assert peak_valley(y) == 100.0


@pytest.mark.parametrize("final,pay", [(2416.0, 0.0), (3000.0, 0.0), (1576.8, 83.92)])
def test_incentive_payment(final, pay):
    assert incentive_payment(IncentiveTerms(0.1, 2416.0), final) == pytest.approx(pay, abs=1e-9)


def test_incentive_against_schedule_reference():
    # reward measured against an earlier schedule's spread: 0.1 x 437.9
    assert incentive_payment(IncentiveTerms(0.1, 2014.7), 2014.7 - 437.9) == pytest.approx(43.79)


@given(st.floats(0, 5), st.floats(0, 5000), st.floats(0, 5000), st.floats(0, 5000))
def test_incentive_nonincreasing(alpha, base, f1, f2):
    t = IncentiveTerms(alpha, base)
    lo, hi = sorted((f1, f2))
    assert incentive_payment(t, hi) <= incentive_payment(t, lo)
    if hi >= base:
        assert incentive_payment(t, hi) == 0.0 or hi == base


def test_incentive_terms_invariants():
    with pytest.raises(ValueError):
        IncentiveTerms(-0.1, 10.0)
    with pytest.raises(ValueError):
        incentive_payment(IncentiveTerms(0.1, 10.0), -1.0)


def test_capacity_violations():
    x = np.full(96, 5000.0)
    x[5] = 5100.0
    assert capacity_violations(LoadProfile(x), 5087.25) == [(5, pytest.approx(12.75))]


def test_synthetic_base_load_calibration():
    base = synthetic_base_load().loads
    assert peak_valley(base) == pytest.approx(2416.0, abs=1.0)
    assert base[48:80].max() == pytest.approx(3803.7, abs=1.0)
    assert base.max() < 5087
    peak_hour = slot_to_clock(int(np.argmax(base)))
    assert 17.0 <= peak_hour < 21.0
    # smooth: no slot-to-slot jump above 150 kW
    assert np.abs(np.diff(np.append(base, base[0]))).max() < 150
    assert synthetic_base_load() == synthetic_base_load()


def _write(path, rows, header="slot,load_kw"):
    path.write_text(header + "\n" + "".join(f"{j},{v}\n" for j, v in rows))
    return path


def test_base_csv_round_trip(tmp_path):
    base = synthetic_base_load()
    write_base_csv(base, tmp_path / "b.csv")
    back = load_base_csv(tmp_path / "b.csv")
    assert np.allclose(back.loads, base.loads, atol=1e-6)


@pytest.mark.parametrize(
    "rows,header,match",
    [
        ([(j, 1.0) for j in range(95)], "slot,load_kw", "expected 96"),
        ([(j, -1.0 if j == 3 else 1.0) for j in range(96)], "slot,load_kw", ">= 0"),
        ([(j, 1.0) for j in range(95)] + [(3, 1.0)], "slot,load_kw", "duplicate"),
        ([(j, 1.0) for j in range(95)] + [(96, 1.0)], "slot,load_kw", "out of range"),
        ([(j, "x" if j == 2 else 1.0) for j in range(96)], "slot,load_kw", "unparsable"),
        ([(j, 1.0) for j in range(96)], "slot,kw", "header"),
        ([(j, "nan") for j in range(96)], "slot,load_kw", "finite"),
    ],
)
def test_base_csv_errors(tmp_path, rows, header, match):
    path = _write(tmp_path / "b.csv", rows, header)
    with pytest.raises(BaseLoadError, match=match):
        load_base_csv(path)


def test_base_csv_missing(tmp_path):
    with pytest.raises(BaseLoadError, match="cannot open"):
        load_base_csv(tmp_path / "nope.csv")


def test_schedule_power_mapping():
    s = [ChargingSchedule.from_slots("a", [1]), ChargingSchedule.from_slots("b", [1, 2])]
    p = schedule_power(s, {"a": 3.3, "b": 7.0})
    assert p[1] == pytest.approx(10.3) and p[2] == 7.0
