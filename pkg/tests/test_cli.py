import csv
import json
import subprocess
import sys

import jsonschema
import numpy as np
import pytest

from sobolev_escape.cli import EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, EXIT_VERIFICATION, ConfigError, run
from sobolev_escape.cli.config import load_schema, resolve_config
from sobolev_escape.cli.output import dumps, plain

H_STAR = "x1^2/(2*h0)"
LIGHT_FLOW = {"n_samples": 2000, "n_orbits": 80, "n_plot_orbits": 3, "orbit_tau": 5.0}
LIGHT_ESCAPE = {"n_samples": 500, "interval": False}


def launch(tmp_path, command, cfg, *extra, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    out = tmp_path / f"out_{command}"
    code = run([command, str(path), "--out-dir", str(out), "--quiet", *extra])
    return code, out


def read_csv(path):
    with path.open() as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


# --- configuration ---------------------------------------------------------------------------


def test_schema_is_valid_draft_2020_12():
    jsonschema.Draft202012Validator.check_schema(load_schema())


def test_defaults_fill_missing_sections():
    cfg = resolve_config({"h": H_STAR, "e0": 0.5}, "escape")
    assert cfg["seed"] == 0 and cfg["escape"]["eps"] == 0.05 and cfg["flow"]["tube_radius"] == 0.1
    assert cfg["tolerances"]["integration"] == 1e-10


@pytest.mark.parametrize("raw, command, match", [
    ({"h": H_STAR}, "flow", "e0"),
    ({"e0": 0.5}, "escape", "h"),
    ({"h": H_STAR, "e0": 0.5, "bogus": 1}, "flow", "bogus"),
    ({"h": H_STAR, "e0": "half"}, "flow", "e0"),
    ({"h": H_STAR, "e0": 0.5, "command": "qsim"}, "flow", "qsim"),
    ({"qsim": {"N": 10}}, "qsim", "s_list"),
    ({"h": H_STAR, "e0": 0.5, "escape": {"eps": 0.5}}, "escape", "eps"),
])
def test_invalid_configs_are_rejected(raw, command, match):
    with pytest.raises(ConfigError, match=match):
        resolve_config(raw, command)


def test_missing_field_exits_4(tmp_path, capsys):
    code, _ = launch(tmp_path, "flow", {"h": H_STAR})
    assert code == EXIT_CONFIG
    assert "e0" in capsys.readouterr().err


def test_missing_file_and_bad_json_exit_4(tmp_path):
    assert run(["flow", str(tmp_path / "nope.json")]) == EXIT_CONFIG
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(["flow", str(bad)]) == EXIT_CONFIG


def test_bad_thread_env_exits_4(tmp_path, monkeypatch):
    monkeypatch.setenv("ESCAPE_THREADS", "many")
    code, _ = launch(tmp_path, "average", {"average": {"v": "0"}})
    assert code == EXIT_CONFIG


# --- serialization ------------------------------------------------------------------------------


def test_plain_handles_numpy_and_non_finite():
    obj = {"a": np.float64(0.1), "b": np.array([1, 2]), "c": float("nan"), "d": -np.inf, "e": np.bool_(True)}
    assert json.loads(dumps(obj)) == {"a": 0.1, "b": [1, 2], "c": "nan", "d": "-inf", "e": True}


def test_floats_round_trip_through_json():
    rng = np.random.default_rng(0)
    x = rng.normal(size=100) * 10.0 ** rng.integers(-12, 12, 100)
    assert np.array_equal(np.array(json.loads(dumps(x))), x)
    assert plain(x)[0] == float(x[0])


# --- commands -------------------------------------------------------------------------------------


def test_flow_command(tmp_path):
    code, out = launch(tmp_path, "flow", {"h": H_STAR, "e0": 0.5, "flow": LIGHT_FLOW})
    assert code == EXIT_OK
    report = json.loads((out / "report.json").read_text())
    limits = json.loads((out / "limit_sets.json").read_text())
    assert report["results"]["n_components"] == 2 and report["results"]["simple_structure"] is True
    assert limits["verdict"] == "true" and len(limits["components"]) == 2
    header, rows = read_csv(out / "orbits.csv")
    assert header == ["orbit_id", "tau", "x1", "x2", "xi1", "xi2"]
    assert set(rows[:, 0]) == {0, 1, 2}
    assert np.allclose(np.linalg.norm(rows[:, 2:], axis=1), 1, atol=1e-10)
    dat = np.loadtxt(out / "phase_portrait.dat")
    assert dat.shape[1] == 9
    meta = json.loads((out / "run_meta.json").read_text())
    assert meta["wall_clock_s"] > 0 and "version" in meta


def test_flow_empty_level_exits_3(tmp_path, capsys):
    code, _ = launch(tmp_path, "flow", {"h": H_STAR, "e0": 1.5, "flow": LIGHT_FLOW})
    assert code == EXIT_NUMERICAL
    assert "empty energy surface" in capsys.readouterr().err


def test_escape_constant_symbol_exits_3(tmp_path, capsys):
    code, _ = launch(tmp_path, "escape", {"h": "0.5", "e0": 0.5, "flow": LIGHT_FLOW, "escape": LIGHT_ESCAPE})
    assert code == EXIT_NUMERICAL
    assert "critical value everywhere" in capsys.readouterr().err


def test_escape_unsatisfiable_delta_exits_2(tmp_path):
    cfg = {"h": H_STAR, "e0": 0.5, "flow": LIGHT_FLOW, "escape": {**LIGHT_ESCAPE, "delta": 10.0}}
    code, out = launch(tmp_path, "escape", cfg)
    assert code == EXIT_VERIFICATION
    cert = json.loads((out / "escape_certificate.json").read_text())
    assert cert["passed"] is False and cert["threshold"] == 5.0


@pytest.mark.slow
def test_escape_command_certifies_hstar(tmp_path):
    cfg = {"h": H_STAR, "e0": 0.5, "flow": LIGHT_FLOW,
           "escape": {"n_samples": 1000, "interval_samples": 200, "interval_refine": 2}}
    code, out = launch(tmp_path, "escape", cfg)
    assert code == EXIT_OK
    cert = json.loads((out / "escape_certificate.json").read_text())
    for key in ("delta_hat", "min_bracket", "worst_point", "interval", "sample_counts", "tolerances"):
        assert key in cert
    assert cert["min_bracket"] >= cert["delta_hat"] / 2 > 0
    assert cert["interval"][0] <= 0.3 and cert["interval"][1] >= 0.7


def test_qsim_small_truncation_flags_short_window(tmp_path):
    cfg = {"qsim": {"N": 10, "s_list": [0.5, 1.0], "t_max": 40.0, "n_times": 81}}
    code, out = launch(tmp_path, "qsim", cfg)
    assert code == EXIT_OK
    growth = json.loads((out / "growth.json").read_text())
    assert growth["window_too_short"] is True
    header, rows = read_csv(out / "norms.csv")
    assert header == ["t", "norm_0.5", "norm_1.0", "leak"]
    assert rows.shape == (81, 4)


def test_qsim_zero_exponent_has_flat_norm(tmp_path):
    cfg = {"qsim": {"N": 60, "s_list": [0.0], "t_max": 30.0, "n_times": 121}}
    code, out = launch(tmp_path, "qsim", cfg)
    assert code == EXIT_OK
    growth = json.loads((out / "growth.json").read_text())
    assert abs(growth["slopes"]["0.0"]) <= 0.02
    _, rows = read_csv(out / "norms.csv")
    assert np.allclose(rows[:, 1], 1.0, atol=1e-9)


def test_qsim_floquet_mode_matches_effective(tmp_path):
    base = {"N": 24, "s_list": [1.0], "t_max": 4.0, "n_times": 9,
            "initial": {"type": "coherent", "z": [1.0, 0.0, -1.0, 0.0]}, "time_origin": 0.0}
    code_a, out_a = launch(tmp_path, "qsim", {"qsim": base}, name="a.json")
    (tmp_path / "eff").mkdir()
    (out_a / "norms.csv").rename(tmp_path / "eff" / "norms.csv")
    code_b, out_b = launch(tmp_path, "qsim", {"qsim": {**base, "mode": "floquet", "dt": 0.05}}, name="b.json")
    assert code_a == code_b == EXIT_OK
    _, eff = read_csv(tmp_path / "eff" / "norms.csv")
    _, flo = read_csv(out_b / "norms.csv")
    assert np.allclose(eff[:, 0], flo[:, 0])
    assert np.allclose(eff[:, 1], flo[:, 1], rtol=1e-6)


def test_average_command_closed_form(tmp_path):
    code, out = launch(tmp_path, "average", {"average": {"v": H_STAR, "grid": {"n": 50}}})
    assert code == EXIT_OK
    header, rows = read_csv(out / "average.csv")
    assert header == ["x1", "x2", "xi1", "xi2", "average"]
    x1, x2, xi1, xi2, avg = rows.T
    assert np.allclose(avg, (x1**2 + xi1**2) / (2 * (x1**2 + x2**2 + xi1**2 + xi2**2)), atol=1e-10)


def test_average_zero_and_seminorm(tmp_path):
    code, out = launch(tmp_path, "average", {"average": {"v": "0", "grid": {"points": [[1, 2, 3, 4]]},
                                                         "seminorm": {"j": 1, "n_samples": 64}}})
    assert code == EXIT_OK
    _, rows = read_csv(out / "average.csv")
    assert np.all(rows[:, 4] == 0)
    assert json.loads((out / "report.json").read_text())["results"]["seminorm"]["value"] == 0.0


def test_average_parse_error_exits_4(tmp_path, capsys):
    code, _ = launch(tmp_path, "average", {"average": {"v": "x1^(0.5)"}})
    assert code == EXIT_CONFIG
    assert "byte offset" in capsys.readouterr().err


def test_report_echoes_config_and_reparses(tmp_path):
    code, out = launch(tmp_path, "average", {"average": {"v": "x1*xi1", "grid": {"n": 4}}, "seed": 3})
    report = json.loads((out / "report.json").read_text())
    assert report["config"]["seed"] == 3 and report["config"]["average"]["v"] == "x1*xi1"
    assert "output_dir" not in report["config"]
    assert dumps(report) == (out / "report.json").read_text()


def test_seed_flag_overrides_config(tmp_path):
    code, out = launch(tmp_path, "average", {"average": {"v": "x1", "grid": {"n": 4}}, "seed": 3}, "--seed", "9")
    assert json.loads((out / "report.json").read_text())["config"]["seed"] == 9


def test_module_entry_point(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"average": {"v": "x2", "grid": {"n": 3}}}))
    res = subprocess.run([sys.executable, "-m", "sobolev_escape", "average", str(path), "--out-dir",
                          str(tmp_path / "o"), "--threads", "1"], capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    assert "average: ok" in res.stdout
    assert json.loads((tmp_path / "o" / "run_meta.json").read_text())["threads"] == 1
