import json

import numpy as np
import pytest

from evsched.cli import main
from evsched.config import ConfigError, ScenarioConfig, flags_of, load_config, parse_config_text
from evsched.gridmodel import synthetic_base_load, write_base_csv
from evsched.scenario import emit_load_csv, read_load_csv, run_scenario
from evsched.schedulers import REGIMES


def run_cli(tmp_path, *args, name="out"):
    out = tmp_path / name
    code = main([*args, "--out-dir", str(out), "--quiet"])
    return code, out


def test_config_file_and_overrides(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\nevs = 12\nrolling.a = 0.3\ntou_peak = 0.9\nincentive.reference = no_incentive_schedule\n")
    c = load_config(cfg, {"seed": 9})
    assert (c.fleet_size, c.rolling_a, c.tou_peak, c.seed) == (12, 0.3, 0.9, 9)
    assert c.incentive_reference == "no_incentive_schedule"
    assert load_config(cfg, {"fleet_size": 3}).fleet_size == 3


def test_every_key_has_a_flag():
    assert flags_of("fleet_size") == ["--fleet-size", "--evs"]
    assert flags_of("rolling_a") == ["--rolling-a"]
    assert flags_of("base_load_source") == ["--base-load-source", "--base-load"]
    assert flags_of("charging_price_c") == ["--charging-price-c", "--charging-price"]


@pytest.mark.parametrize(
    "text",
    ["evs 3", "colour = red", "evs = many", "alpha = nan"],
)
def test_config_parse_errors(text):
    with pytest.raises(ConfigError):
        parse_config_text(text)


@pytest.mark.parametrize(
    "kw",
    [
        dict(fleet_size=-1),
        dict(rolling_a=-0.5),
        dict(alpha=-1.0),
        dict(regime="psychic"),
        dict(beta="lots"),
        dict(incentive_reference="neighbour"),
        dict(power_factor=1.5),
        dict(seeds=0),
    ],
)
def test_config_invariants(kw):
    with pytest.raises(ConfigError):
        ScenarioConfig(**kw)


def test_beta_auto():
    assert ScenarioConfig().beta_value(2416.0) == pytest.approx(1e-5 / 2416.0)
    assert ScenarioConfig(beta="0.5").beta_value(2416.0) == 0.5


def test_cli_single_run_outputs(tmp_path):
    code, out = run_cli(tmp_path, "--evs", "30", "--seed", "4", "--regime", "all")
    assert code == 0
    assert sorted(p.name for p in out.iterdir()) == ["comparison.csv", "fleet.csv", "loads.csv", "report.json"]
    header = (out / "loads.csv").read_text().splitlines()[0].split(",")
    assert header == ["slot", "base_kw"] + [f"{r}_kw" for r in REGIMES]
    assert len((out / "loads.csv").read_text().splitlines()) == 97


def test_report_recomputes_from_csv(tmp_path):
    code, out = run_cli(
        tmp_path, "--evs", "60", "--seed", "2", "--incentive-reference", "no_incentive_schedule"
    )
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    curves = read_load_csv(out / "loads.csv")
    base = curves["base"]
    assert report["base"]["peak_valley_kw"] == pytest.approx(np.ptp(base), abs=1e-6)
    for name, summary in report["regimes"].items():
        x = curves[name]
        assert summary["peak_kw"] == pytest.approx(x.max(), abs=1e-6)
        assert summary["valley_kw"] == pytest.approx(x.min(), abs=1e-6)
        assert summary["peak_valley_kw"] == pytest.approx(np.ptp(x), abs=1e-6)
        assert summary["violations"] == int(np.sum(x > report["p_mtf_kw"] + 1e-6))
        assert summary["total_benefit"] == pytest.approx(summary["revenue"] + summary["incentive"], abs=1e-6)
    reduction = np.ptp(curves["centralized"]) - np.ptp(curves["centralized_incentive"])
    assert report["regimes"]["centralized_incentive"]["incentive"] == pytest.approx(
        0.1 * max(reduction, 0.0), abs=1e-6
    )


def test_identical_runs_are_byte_identical(tmp_path):
    args = ["--evs", "300", "--regime", "decentralized_rolling", "--seed", "7"]
    _, a = run_cli(tmp_path, *args, name="a")
    _, b = run_cli(tmp_path, *args, name="b")
    for f in ("loads.csv", "report.json", "comparison.csv", "fleet.csv"):
        assert (a / f).read_bytes() == (b / f).read_bytes()


def test_empty_fleet_report_equals_base(tmp_path):
    rep = run_scenario(ScenarioConfig(fleet_size=0, regime="all"))
    for s in rep.regimes.values():
        assert s.peak_valley_kw == rep.base["peak_valley_kw"]
        assert s.revenue == 0.0 and s.charging_slots == 0


def test_base_only_csv_has_two_columns(tmp_path):
    rep = run_scenario(ScenarioConfig(fleet_size=0, regime="uncoordinated"))
    rep.loads = {"base": rep.loads["base"]}
    emit_load_csv(rep, tmp_path / "l.csv")
    lines = (tmp_path / "l.csv").read_text().splitlines()
    assert lines[0] == "slot,base_kw" and len(lines) == 97


def test_multi_seed_layout_and_parallel_agreement(tmp_path):
    code, seq = run_cli(tmp_path, "--evs", "20", "--seed", "5", "--seeds", "3", name="seq")
    assert code == 0
    code, par = run_cli(tmp_path, "--evs", "20", "--seed", "5", "--seeds", "3", "--jobs", "2", name="par")
    assert code == 0
    assert sorted(p.name for p in seq.iterdir()) == ["seed_5", "seed_6", "seed_7", "summary.csv"]
    assert (seq / "summary.csv").read_bytes() == (par / "summary.csv").read_bytes()
    rows = (seq / "summary.csv").read_text().splitlines()[1:]
    assert [r.split(",")[0] for r in rows] == [s for s in ("5", "6", "7") for _ in REGIMES]
    assert (seq / "seed_6" / "loads.csv").read_bytes() == (par / "seed_6" / "loads.csv").read_bytes()


def test_fleet_file_reproduces_run(tmp_path):
    _, a = run_cli(tmp_path, "--evs", "25", "--seed", "3", "--regime", "centralized", name="a")
    _, b = run_cli(tmp_path, "--fleet", str(a / "fleet.csv"), "--regime", "centralized", name="b")
    x, y = read_load_csv(a / "loads.csv"), read_load_csv(b / "loads.csv")
    assert np.allclose(x["centralized"], y["centralized"], atol=1e-6)


def test_external_base_load(tmp_path):
    base = tmp_path / "base.csv"
    write_base_csv(synthetic_base_load(), base)
    code, out = run_cli(tmp_path, "--evs", "10", "--base-load", str(base))
    assert code == 0


@pytest.mark.parametrize(
    "args",
    [["--evs", "-3"], ["--bogus", "1"], ["--alpha", "x"], ["--regime", "magic"], ["--beta", "-1"]],
)
def test_config_errors_exit_1(tmp_path, args, capsys):
    code, _ = run_cli(tmp_path, *args)
    assert code == 1
    err = capsys.readouterr().err.strip()
    assert err.startswith("evsched: config error") and "\n" not in err


def test_missing_config_file_exits_1(tmp_path):
    assert run_cli(tmp_path, "--config", str(tmp_path / "none.cfg"))[0] == 1


def test_bad_base_load_exits_2(tmp_path, capsys):
    short = tmp_path / "short.csv"
    short.write_text("slot,load_kw\n" + "".join(f"{j},100\n" for j in range(95)))
    code, _ = run_cli(tmp_path, "--base-load", str(short))
    assert code == 2
    err = capsys.readouterr().err.strip()
    assert "expected 96 rows" in err and "\n" not in err
    assert run_cli(tmp_path, "--base-load", str(tmp_path / "nope.csv"))[0] == 2
    assert run_cli(tmp_path, "--fleet", str(tmp_path / "nope.csv"))[0] == 2


def test_table_printed(tmp_path, capsys):
    assert main(["--evs", "10", "--out-dir", str(tmp_path / "o")]) == 0
    out = capsys.readouterr().out
    assert all(r in out for r in REGIMES)
