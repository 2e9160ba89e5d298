"""Config parsing and command-line contract tests: key validation, RBL_ env
overrides, exit codes, artifact formats, and rerun determinism."""

import os
import subprocess
import sys

import numpy as np
import pytest

from rieszlab.analytic import (
    bubble_integrals,
    pin_bubble,
    sharp_constant,
    sigma_const,
)
from rieszlab.cli import main
from rieszlab.config import (
    ConfigError,
    load_config,
    parse_config_text,
    reference_config_names,
    resolve_config_path,
)

MINI_CONFIG = """
# coarse growing-kernel experiment, fast enough for unit tests
domain = interval
bounds = -1, 1
n = 1
alpha = 2.0
q_schedule = 0.60, 0.62, 0.64
resolution = 64

tol_residual = 1e-9
max_iter = 50000

fit_window = 8.0
probe_distances = 0.3, 0.5
bump_width = 0.25
boundary_t0 = 0.45
boundary_aperture = 0.5

interior_delta = 0.2
constraint_dev_max = 0.2
fit_rms_max = 0.2
sigma_ratio_band = 0.5
envelope_spread_max = 10.0
monotone_fraction_min = 0.9
monotone_rel_tol = 0.02
mu_power_final_min = 0.3
dirac_band = 0.9
"""


def write_mini(tmp_path, extra="", drop=()):
    lines = [ln for ln in MINI_CONFIG.splitlines()
             if not any(ln.strip().startswith(key) for key in drop)]
    text = "\n".join(lines) + "\n" + extra
    path = tmp_path / "mini.cfg"
    path.write_text(text)
    return path


# ---------------------------------------------------------------------------
# config parsing
# ---------------------------------------------------------------------------

def test_parse_minimal_config():
    cfg = parse_config_text(MINI_CONFIG, env={})
    assert cfg.domain_kind == "interval"
    assert cfg.bounds == (-1.0, 1.0)
    assert cfg.q_schedule == (0.60, 0.62, 0.64)
    assert cfg.resolution == 64
    assert cfg.warm_start is True           # default
    assert cfg.make_domain().volume == 2.0


def test_missing_required_keys_named():
    with pytest.raises(ConfigError, match="alpha"):
        parse_config_text("domain = interval\nbounds = 0, 1\nn = 1\n"
                          "q_schedule = 0.6\nresolution = 16\n", env={})


def test_unknown_and_duplicate_keys_rejected():
    with pytest.raises(ConfigError, match="unknown key 'alhpa'"):
        parse_config_text(MINI_CONFIG + "\nalhpa = 2\n", env={})
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config_text(MINI_CONFIG + "\nalpha = 2.0\n", env={})


def test_malformed_line_and_value():
    with pytest.raises(ConfigError, match="key = value"):
        parse_config_text("domain interval\n", env={})
    with pytest.raises(ConfigError, match="resolution"):
        parse_config_text(MINI_CONFIG.replace("resolution = 64", "resolution = many"),
                          env={})


def test_env_override():
    cfg = parse_config_text(MINI_CONFIG, env={"RBL_RESOLUTION": "128"})
    assert cfg.resolution == 128
    cfg2 = parse_config_text(MINI_CONFIG, env={"RBL_WARM_START": "false"})
    assert cfg2.warm_start is False


def test_schedule_validation():
    bad = MINI_CONFIG.replace("q_schedule = 0.60, 0.62, 0.64",
                              "q_schedule = 0.64, 0.62, 0.60")
    with pytest.raises(ConfigError, match="monotonic"):
        parse_config_text(bad, env={})
    out_of_range = MINI_CONFIG.replace("q_schedule = 0.60, 0.62, 0.64",
                                       "q_schedule = 0.60, 0.70")
    with pytest.raises(ConfigError, match="q_schedule"):
        parse_config_text(out_of_range, env={})
    empty = MINI_CONFIG.replace("q_schedule = 0.60, 0.62, 0.64", "q_schedule = ")
    with pytest.raises(ConfigError, match="q_schedule"):
        parse_config_text(empty, env={})


def test_domain_bounds_validation():
    with pytest.raises(ConfigError, match="2 values"):
        parse_config_text(MINI_CONFIG.replace("bounds = -1, 1", "bounds = -1, 1, 2"),
                          env={})
    mismatched = MINI_CONFIG.replace("n = 1", "n = 2")
    with pytest.raises(ConfigError, match="dimension"):
        parse_config_text(mismatched, env={})


def test_reference_configs_load():
    for name in reference_config_names():
        cfg = load_config(resolve_config_path(name), env={})
        assert cfg.resolution >= 8
    with pytest.raises(ConfigError, match="neither"):
        resolve_config_path("nonexistent_config")


# ---------------------------------------------------------------------------
# constants command
# ---------------------------------------------------------------------------

def _run_main(argv, capsys):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_constants_output_recomputable(capsys):
    code, out, _ = _run_main(["constants", "--n", "1", "--alpha", "2"], capsys)
    assert code == 0
    table = dict(line.split("=") for line in out.strip().splitlines())
    assert table["q_crit"] == "0.666667"
    assert table["sigma"] == "1.414214"
    assert table["xi_sharp"] == "0.202642"
    assert table["c2"] == "0.5"
    # every printed number matches the library value to the printed precision
    prof = pin_bubble(1, 2.0)
    full, reduced = bubble_integrals(prof)
    expected = {
        "q_crit": 2.0 / 3.0, "p_crit": -2.0, "sigma": sigma_const(1, 2.0),
        "xi_sharp": sharp_constant(1, 2.0), "c1": prof.c1, "c2": prof.c2,
        "bubble_full_integral": full, "bubble_reduced_integral": reduced,
    }
    for key, value in expected.items():
        assert float(table[key]) == pytest.approx(value, abs=5e-7)


def test_constants_second_parameter_set(capsys):
    code, out, _ = _run_main(["constants", "--n", "2", "--alpha", "1.5"], capsys)
    assert code == 0
    table = dict(line.split("=") for line in out.strip().splitlines())
    assert table["q_crit"] == "1.142857"
    assert table["p_crit"] == "8"


def test_constants_rejects_critical_alpha(capsys):
    code, _, err = _run_main(["constants", "--n", "1", "--alpha", "1"], capsys)
    assert code == 2
    assert "alpha" in err


# ---------------------------------------------------------------------------
# solve command
# ---------------------------------------------------------------------------

def test_solve_command(tmp_path, capsys):
    cfg = write_mini(tmp_path)
    single = cfg.read_text().replace("q_schedule = 0.60, 0.62, 0.64",
                                     "q_schedule = 0.60")
    cfg.write_text(single)
    out_dir = tmp_path / "out"
    code, _, _ = _run_main(["solve", "--config", str(cfg), "--out", str(out_dir)],
                           capsys)
    assert code == 0
    csv = (out_dir / "solution.csv").read_text().splitlines()
    assert csv[0] == "index,x1,f,u"
    assert len(csv) == 65
    meta = dict(line.split("=", 1)
                for line in (out_dir / "solution.csv.meta").read_text().splitlines())
    assert float(meta["residual"]) <= 1e-9
    # u column is the (q-1) power of the f column
    row = csv[1].split(",")
    assert float(row[3]) == pytest.approx(float(row[2]) ** (0.6 - 1.0), rel=1e-12)


def test_solve_rejects_multi_entry_schedule(tmp_path, capsys):
    cfg = write_mini(tmp_path)
    code, _, err = _run_main(["solve", "--config", str(cfg)], capsys)
    assert code == 2
    assert "single-entry" in err


def test_solve_non_convergence_exit_code(tmp_path, capsys):
    cfg = write_mini(tmp_path, drop=("max_iter",),
                     extra="max_iter = 2\n")
    single = cfg.read_text().replace("q_schedule = 0.60, 0.62, 0.64",
                                     "q_schedule = 0.60")
    cfg.write_text(single)
    code, _, err = _run_main(["solve", "--config", str(cfg),
                              "--out", str(tmp_path / "o")], capsys)
    assert code == 3
    assert "non-converged" in err


def test_missing_config_key_exit_code(tmp_path, capsys):
    cfg = write_mini(tmp_path, drop=("alpha",))
    code, _, err = _run_main(["sweep", "--config", str(cfg)], capsys)
    assert code == 2
    assert "alpha" in err


def test_unwritable_output_exit_code(tmp_path, capsys):
    cfg = write_mini(tmp_path)
    blocker = tmp_path / "blocker"
    blocker.write_text("a plain file")
    code, _, err = _run_main(["sweep", "--config", str(cfg),
                              "--out", str(blocker / "sub")], capsys)
    assert code == 4


# ---------------------------------------------------------------------------
# sweep command
# ---------------------------------------------------------------------------

def test_sweep_rows_and_determinism(tmp_path, capsys):
    cfg = write_mini(tmp_path)
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    code_a, _, _ = _run_main(["sweep", "--config", str(cfg), "--out", str(out_a)],
                             capsys)
    code_b, _, _ = _run_main(["sweep", "--config", str(cfg), "--out", str(out_b)],
                             capsys)
    assert code_a == 0 and code_b == 0
    bytes_a = (out_a / "sweep.csv").read_bytes()
    assert bytes_a == (out_b / "sweep.csv").read_bytes()
    assert len(bytes_a.decode().splitlines()) >= 4       # header + >= 3 rows


def test_sweep_requires_three_entries(tmp_path, capsys):
    cfg = write_mini(tmp_path)
    two = cfg.read_text().replace("q_schedule = 0.60, 0.62, 0.64",
                                  "q_schedule = 0.60, 0.62")
    cfg.write_text(two)
    code, _, err = _run_main(["sweep", "--config", str(cfg)], capsys)
    assert code == 2
    assert "length >= 3" in err


def test_sweep_parallel_matches_sequential(tmp_path, capsys):
    cfg = write_mini(tmp_path, extra="warm_start = false\n")
    out_a, out_b = tmp_path / "seq", tmp_path / "par"
    code_a, _, _ = _run_main(["sweep", "--config", str(cfg), "--out", str(out_a),
                              "--threads", "1"], capsys)
    code_b, _, _ = _run_main(["sweep", "--config", str(cfg), "--out", str(out_b),
                              "--threads", "3"], capsys)
    assert code_a == 0 and code_b == 0
    assert (out_a / "sweep.csv").read_bytes() == (out_b / "sweep.csv").read_bytes()


# ---------------------------------------------------------------------------
# verify command
# ---------------------------------------------------------------------------

def test_verify_pass_and_report(tmp_path, capsys):
    cfg = write_mini(tmp_path)
    out = tmp_path / "v"
    code, stdout, _ = _run_main(["verify", "--config", str(cfg), "--out", str(out)],
                                capsys)
    assert code == 0
    report = (out / "report.txt").read_text()
    assert "ALL PASS" in report
    assert stdout.strip().splitlines()[0].startswith("PASS ")
    for name in ("interior_localization", "bubble_fit", "product_limit_ratios",
                 "dirac_mass", "envelope_constants", "boundary_monotonicity",
                 "mu_power_limit"):
        assert name in report


def test_verify_impossible_tolerance_fails(tmp_path, capsys):
    cfg = write_mini(tmp_path, drop=("sigma_ratio_band",),
                     extra="sigma_ratio_band = 0.0\n")
    code, stdout, _ = _run_main(["verify", "--config", str(cfg),
                                 "--out", str(tmp_path / "vf")], capsys)
    assert code == 1
    fail_lines = [ln for ln in stdout.splitlines() if ln.startswith("FAIL")]
    assert any("product_limit_ratios" in ln and "measured=" in ln for ln in fail_lines)


def test_verify_requires_three_entries(tmp_path, capsys):
    cfg = write_mini(tmp_path)
    one = cfg.read_text().replace("q_schedule = 0.60, 0.62, 0.64", "q_schedule = 0.60")
    cfg.write_text(one)
    code, _, _ = _run_main(["verify", "--config", str(cfg)], capsys)
    assert code == 2


# ---------------------------------------------------------------------------
# console entry point
# ---------------------------------------------------------------------------

def test_module_invocation_subprocess():
    result = subprocess.run(
        [sys.executable, "-m", "rieszlab", "constants", "--n", "3", "--alpha", "2"],
        capture_output=True, text=True,
        env={**os.environ, "PYTHONPATH": ""},
    )
    assert result.returncode == 0
    assert "sigma=0.488603" in result.stdout
