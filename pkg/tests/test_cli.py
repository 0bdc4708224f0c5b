import json
import os
import time

import numpy as np
import pytest

from schwinger_qke.cli import (
    EXIT_CONFIG,
    EXIT_NUMERICAL,
    EXIT_OK,
    EXIT_PARTIAL,
    SweepSpec,
    main,
    parse_config,
)
from schwinger_qke.config import PulseConfig, PulseModel
from schwinger_qke.errors import ConfigError, ParseError, UnknownKey

FIG1 = """\
E0_over_Ec = 0.2
omega_over_m = 0.02
sigma = 5
k_E = 0.25
k_omega = 10
"""

CHEAP = ["--set", "model=single", "--set", "E0_over_Ec=0.1", "--set", "omega_over_m=2.5"]


@pytest.fixture
def fig1_file(tmp_path):
    path = tmp_path / "fig1.cfg"
    path.write_text(FIG1)
    return path


def read_csv(path):
    lines = path.read_text().splitlines()
    return lines[0].split(","), np.array([[float(x) for x in line.split(",")] for line in lines[1:]])


def test_minimal_file(fig1_file):
    run = parse_config(fig1_file)
    assert run.pulse == PulseConfig(PulseModel.BIFREQ_GAUSS, 0.2, 0.02, 5.0, 0.25, 10.0, 0.0)
    assert run.sweep is None


def test_json_file(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"model": "am", "E0_over_Ec": 0.2, "sigma": 50, "omega_over_m": 1.0,
                                "sweep_axis": "k_E", "sweep_points": [0.0, 0.25]}))
    run = parse_config(path)
    assert run.pulse.model is PulseModel.AM_GAUSS
    assert run.sweep.points == (0.0, 0.25)


def test_unknown_key_names_nearest(fig1_file):
    with pytest.raises(UnknownKey, match="k_E"):
        parse_config(fig1_file, ["kappa_E=0.1"])


def test_override_precedence(tmp_path):
    path = tmp_path / "c.cfg"
    path.write_text(FIG1.replace("k_E = 0.25", "k_E = 0.1"))
    assert parse_config(path, ["k_E=0.25"]).pulse.kE == 0.25


def test_parse_error_has_line(tmp_path):
    path = tmp_path / "c.cfg"
    path.write_text("sigma = 5\n# fine\nomega_over_m 0.02\n")
    with pytest.raises(ParseError, match=":3:"):
        parse_config(path)
    path.write_text("sigma = five\n")
    with pytest.raises(ParseError, match="sigma"):
        parse_config(path)


def test_out_of_range_is_config_error():
    with pytest.raises(ConfigError):
        parse_config(None, ["k_E=2"])


def test_sweep_spec_validation():
    base = PulseConfig()
    with pytest.raises(ConfigError):
        SweepSpec(base, "k_E", ())
    with pytest.raises(ConfigError):
        SweepSpec(base, "k_E", (0.1, 0.3, 0.2))
    with pytest.raises(ConfigError):
        SweepSpec(base, "sigma", (1.0,))
    run = parse_config(None, ["sweep_range=log:1e-3:1e-1:3"])
    assert run.sweep.points == pytest.approx((1e-3, 1e-2, 1e-1))


def test_field_command(tmp_path, fig1_file):
    out = tmp_path / "field.csv"
    assert main(["field", "--config", str(fig1_file), "--t-min", "-10", "--t-max", "10",
                 "--samples", "21", "--out", str(out)]) == EXIT_OK
    header, data = read_csv(out)
    assert header == ["t [1/m]", "E [E_c]", "eA [m]"]
    assert data.shape == (21, 3)
    assert data[10, 1] == pytest.approx(0.25)
    assert data[10, 2] == pytest.approx(0.0, abs=1e-15)
    assert json.loads((tmp_path / "field.csv.manifest.json").read_text())["command"] == "field"

    assert main(["field", "--config", str(fig1_file), "--t-min", "2", "--t-max", "4",
                 "--samples", "1", "--out", str(out)]) == EXIT_OK
    _, data = read_csv(out)
    assert data.shape == (1, 3) and data[0, 0] == 3.0


def test_csv_format(tmp_path, fig1_file):
    out = tmp_path / "field.csv"
    main(["field", "--config", str(fig1_file), "--samples", "3", "--out", str(out)])
    raw = out.read_bytes()
    assert b"\r" not in raw
    mantissa = raw.splitlines()[1].split(b",")[1].split(b"e")[0]
    assert len(mantissa.replace(b"-", b"").replace(b".", b"")) >= 12


def test_mode_command(tmp_path):
    out = tmp_path / "mode.csv"
    assert main(["mode", *CHEAP, "--set", "E0_over_Ec=0", "--out", str(out)]) == EXIT_OK
    _, data = read_csv(out)
    assert np.all(data[:, 1] == 0.0)

    assert main(["mode", *CHEAP, "--stride", "50", "--out", str(out)]) == EXIT_OK
    _, data = read_csv(out)
    f = data[:, 1]
    assert abs(f[-1] - f[-2]) / f[-1] < 1e-3
    manifest = json.loads((tmp_path / "mode.csv.manifest.json").read_text())
    assert manifest["summary"]["f_final"] == f[-1]


def test_exit_codes(tmp_path):
    out = str(tmp_path / "x.csv")
    assert main(["mode", "--set", "sigma=-1", "--out", out]) == EXIT_CONFIG
    assert main(["mode", "--set", "kappa_E=1", "--out", out]) == EXIT_CONFIG
    assert main(["mode", *CHEAP, "--set", "drift_limit=1e-18", "--set", "rel_tol=1e-5", "--out", out]) == EXIT_NUMERICAL


def test_grid_command_is_deterministic(tmp_path):
    args = ["grid", *CHEAP, "--grid-npar", "5", "--grid-nperp", "3", "--grid-box", "1"]
    a, b, c = tmp_path / "a.csv", tmp_path / "b.csv", tmp_path / "c.csv"
    assert main([*args, "--out", str(a)]) == EXIT_OK
    assert main([*args, "--out", str(b)]) == EXIT_OK
    assert main([*args, "--workers", "3", "--out", str(c)]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes() == c.read_bytes()
    header, data = read_csv(a)
    assert header == ["p_par [m]", "p_perp [m]", "f [1]"]
    assert data.shape == (15, 3)
    assert list(data[:3, 0]) == [-1.0, -1.0, -1.0]
    assert list(data[:3, 1]) == [0.0, 1.5, 3.0]


def test_grid_field_free_and_slices(tmp_path):
    out = tmp_path / "g.csv"
    assert main(["grid", *CHEAP, "--set", "E0_over_Ec=0", "--grid-npar", "5", "--grid-nperp", "3",
                 "--out", str(out)]) == EXIT_OK
    _, data = read_csv(out)
    assert np.all(data[:, 2] == 0.0)
    assert main(["grid", *CHEAP, "--slice", "pperp", "--grid-nperp", "4", "--out", str(out)]) == EXIT_OK
    _, data = read_csv(out)
    assert data.shape == (4, 3) and np.all(data[:, 0] == 0.0)


def test_sweep_command(tmp_path):
    out = tmp_path / "s.csv"
    common = [*CHEAP, "--set", "model=bifreq", "--set", "omega_over_m=0.5", "--set", "sigma=3",
              "--grid-npar", "5", "--grid-nperp", "3", "--grid-box", "1"]
    assert main(["sweep", *common, "--set", "sweep_points=0", "--out", str(out)]) == EXIT_OK
    header, _ = read_csv_with_flags(out)
    assert header[:5] == ["k_E [1]", "n [m^3]", "N [1]", "r [1]", "net_eff [1]"]
    rows = read_csv_with_flags(out)[1]
    assert float(rows[0][3]) == 1.0

    assert main(["sweep", *common, "--set", "sweep_points=0.2,0.1,0", "--out", str(out)]) == EXIT_OK
    rows = read_csv_with_flags(out)[1]
    assert [float(r[0]) for r in rows] == [0.0, 0.1, 0.2]
    assert float(rows[2][1]) > float(rows[1][1]) > float(rows[0][1])

    assert main(["sweep", *common, "--set", "sweep_points=0.1", "--set", "drift_limit=1e-18",
                 "--set", "rel_tol=1e-5", "--out", str(out)]) == EXIT_PARTIAL
    assert "failed@" in read_csv_with_flags(out)[1][0][-1]


def read_csv_with_flags(path):
    lines = path.read_text().splitlines()
    return lines[0].split(","), [line.split(",") for line in lines[1:]]


@pytest.mark.slow
@pytest.mark.skipif((os.cpu_count() or 1) < 8, reason="parallel speedup needs at least 8 cores")
def test_parallel_speedup(tmp_path):
    args = ["grid", *CHEAP, "--grid-npar", "100", "--grid-nperp", "100", "--grid-box", "2"]
    start = time.perf_counter()
    assert main([*args, "--workers", "1", "--out", str(tmp_path / "one.csv")]) == EXIT_OK
    serial = time.perf_counter() - start
    start = time.perf_counter()
    assert main([*args, "--workers", "8", "--out", str(tmp_path / "eight.csv")]) == EXIT_OK
    parallel = time.perf_counter() - start
    assert parallel <= 0.3 * serial
    assert (tmp_path / "one.csv").read_bytes() == (tmp_path / "eight.csv").read_bytes()
