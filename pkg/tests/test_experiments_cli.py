import json
import math

import numpy as np
import pytest

from glacia.cli import EXIT_CONFIG, EXIT_FAIL, EXIT_OK, main
from glacia.config import config_from_dict, load_config
from glacia.exceptions import ConfigError
from glacia.experiments import (
    SWEEP_COLUMNS,
    NuBelowCriticalWarning,
    SweepSpec,
    csv_text,
    read_csv,
    reproduce_report,
    rise_fraction,
    run_sweep,
    run_timeseries,
    sweep_csv,
)
from glacia.reduced_model import critical_point


@pytest.fixture(scope="module")
def small_sweep(rp):
    spec = SweepSpec(1.0, 100.0, 3, "log")
    return spec, run_sweep(spec, rp, workers=1)


def test_sweep_rows_in_grid_order(small_sweep):
    spec, rows = small_sweep
    assert [r.nu for r in rows] == pytest.approx(list(spec.grid()))
    assert all(r.converged and not r.error for r in rows)
    assert rows[1].period_measured == pytest.approx(3.95179, rel=1e-4)


def test_serial_equals_parallel(rp, small_sweep):
    spec, serial = small_sweep
    parallel = run_sweep(spec, rp, workers=3)
    assert sweep_csv(parallel) == sweep_csv(serial)


def test_csv_round_trip_is_byte_identical(small_sweep, tmp_path):
    text = sweep_csv(small_sweep[1])
    path = tmp_path / "sweep.csv"
    path.write_text(text, encoding="utf-8")
    header, rows = read_csv(path)
    assert header == SWEEP_COLUMNS
    assert csv_text(header, rows) == text


def test_two_points_without_measurement(rp):
    rows = run_sweep(SweepSpec(10.0, 1e4, 2, measure=False), rp, workers=1)
    assert len(rows) == 2
    assert all(r.period_measured is None and r.period_asymptotic is not None for r in rows)


def test_sweep_spec_invariants():
    with pytest.raises(ConfigError):
        SweepSpec(10.0, 1.0)
    with pytest.raises(ConfigError):
        SweepSpec(1.0, 10.0, points=1)


def test_sweep_below_hopf_warns(rp):
    nu_c = critical_point(rp).nu_c
    with pytest.warns(NuBelowCriticalWarning):
        rows = run_sweep(SweepSpec(0.5 * nu_c, nu_c * 0.6, 2, measure=True, asymptotic=False), rp, workers=1)
    assert all(r.error for r in rows)


def test_rise_fraction_slow_growth(rp):
    ts = run_timeseries(rp.with_nu(10.0), 40.0, samples=8001)
    frac = rise_fraction(ts.data[:, 0], ts.data[:, 2])
    assert frac > 0.6


def test_rise_fraction_needs_cycle():
    with pytest.raises(ValueError):
        rise_fraction([0, 1, 2], [0, 1, 2])


def test_timeseries_zero_duration(rp):
    ts = run_timeseries(rp, 0.0)
    assert ts.data.shape == (1, 3)
    assert ts.header == ["t", "x", "y"]


def test_timeseries_dimensional(calibrated_cfg, rp):
    ts = run_timeseries(rp, 1.0, samples=3, dimensional=True, scales=calibrated_cfg.scales, xi_sum=calibrated_cfg.xi_sum)
    assert ts.header == ["t_years", "T_kelvin", "L_meters"]
    assert ts.data[-1, 0] == pytest.approx(30344, rel=1e-3)
    assert np.all((ts.data[:, 1] > 200) & (ts.data[:, 1] < 320))


def test_timeseries_full_model(calibrated_cfg):
    full = calibrated_cfg.full_params().with_mu(50.0)
    ts = run_timeseries(full, 5.0, samples=11, initial_state=(1.39, 0.08))
    assert ts.header == ["tau", "theta", "lambda"]
    assert np.all(ts.data[:, 2] > 0)
    with pytest.raises(ValueError):
        run_timeseries(full, 1.0)


def test_config_rejects_unknown_keys():
    with pytest.raises(ConfigError):
        config_from_dict({"feedbak": {}})
    with pytest.raises(ConfigError):
        load_config("no-such-config")


@pytest.fixture(scope="module")
def quick_report():
    return reproduce_report("paper-reduced", include_sweep=False)


def test_report_schema(quick_report):
    assert set(quick_report) == {"config", "criteria", "all_pass"}
    for c in quick_report["criteria"]:
        assert {"id", "name", "target", "computed", "tolerance", "verdict", "detail", "seconds"} <= set(c)
        assert c["verdict"] in ("pass", "fail", "not applicable")
    json.dumps(quick_report, default=float)
    ids = [c["id"] for c in quick_report["criteria"]]
    assert "4" not in ids and "1" in ids


# -- command line ------------------------------------------------------------------------


def test_cli_reduce_json(capsys):
    assert main(["reduce"]) == EXIT_OK
    data = json.loads(capsys.readouterr().out)
    assert data["b"] == pytest.approx(0.0225)


def test_cli_assumptions_exit_codes(capsys):
    assert main(["assumptions"]) == EXIT_OK
    assert main(["assumptions", "--nu", "0.05"]) == EXIT_FAIL
    capsys.readouterr()


def test_cli_config_error(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"feedback": {"delta_xi": -1.0}}))
    assert main(["reduce", "--config", str(bad)]) == EXIT_CONFIG
    assert main(["simulate", "--t-span", "-1"]) == EXIT_CONFIG
    assert "config error" in capsys.readouterr().err


def test_cli_period_dimensional(capsys):
    assert main(["period", "--json", "--dimensional"]) == EXIT_OK
    data = json.loads(capsys.readouterr().out)
    assert data["leading"] == pytest.approx(3.6012264861, rel=1e-9)
    assert 81e3 <= data["dimensional_years"]["t_minus"] <= 110e3


def test_cli_simulate_writes_csv(tmp_path):
    out = tmp_path / "ts.csv"
    assert main(["simulate", "--t-span", "2", "--samples", "5", "--output", str(out)]) == EXIT_OK
    header, rows = read_csv(out)
    assert header == ["t", "x", "y"] and len(rows) == 5


def test_cli_analyze_nullclines(tmp_path, capsys):
    out = tmp_path / "nc.csv"
    assert main(["analyze", "--json", "--nullclines", str(out), "--nullcline-points", "11"]) == EXIT_OK
    data = json.loads(capsys.readouterr().out)
    assert len(data["critical_points"]) == 3
    header, rows = read_csv(out)
    assert header == ["theta", "h", "k_plus", "k_minus"] and len(rows) == 11


def test_cli_sweep_no_measure(capsys):
    assert main(["sweep", "--nu-min", "100", "--nu-max", "1000", "--points", "2", "--no-measure"]) == EXIT_OK
    out = capsys.readouterr().out.splitlines()
    assert out[0].split(",") == SWEEP_COLUMNS
    assert len(out) == 3
    assert math.isfinite(float(out[1].split(",")[2]))
