import csv
import subprocess
import sys

import numpy as np
import pytest

from tclsim.cli import EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, EXIT_VALIDATION, OUTPUT_ENV, cmd_validate, main
from tclsim.model import PRESETS, Regime, build_scenario, dumps_config, wavenumber_to_angular
from tclsim.observables import parse_csv


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_run_writes_one_row_per_sample(tmp_path):
    assert main(["run", "--regime", "underdamped", "--mode", "nonmarkovian", "--horizon", "2000",
                 "--out", str(tmp_path)]) == EXIT_OK
    rec = parse_csv(tmp_path / "underdamped_nonmarkovian.csv")
    assert len(rec) == 2001
    assert rec.times[-1] == 2000.0


def test_run_overdamped_markovian_monotone_m1_rise(tmp_path):
    assert main(["run", "--regime", "overdamped", "--mode", "markovian", "--svg", "--out", str(tmp_path)]) == 0
    p = parse_csv(tmp_path / "overdamped_markovian.csv").p_m1
    assert np.all(np.diff(p) >= -1e-12)
    assert p[-1] > p[0]
    assert (tmp_path / "overdamped_markovian.svg").read_text().startswith("<?xml")


def test_invalid_regime_exits_2_without_files(tmp_path):
    out = tmp_path / "out"
    with pytest.raises(SystemExit) as exc:
        main(["run", "--regime", "bogus", "--out", str(out)])
    assert exc.value.code == EXIT_CONFIG
    assert not out.exists()


@pytest.mark.parametrize("extra", [["--set", "gama=1"], ["--set", "nokey"], ["--set", "p_hot=3"],
                                   ["--horizon", "-5"]])
def test_config_errors_exit_2_without_files(tmp_path, extra, capsys):
    out = tmp_path / "out"
    assert main(["run", "--regime", "underdamped", "--out", str(out), *extra]) == EXIT_CONFIG
    assert "config error" in capsys.readouterr().err
    assert not out.exists()


def test_numerical_failure_exits_3_without_files(tmp_path):
    out = tmp_path / "out"
    code = main(["run", "--regime", "custom", "--horizon", "5", "--out", str(out), "--set", "gamma_e1m=1e12",
                 "--set", "rel_tol=1e-300", "--set", "abs_tol=1e-300"])
    assert code == EXIT_NUMERIC
    assert not out.exists()


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(OUTPUT_ENV, str(tmp_path / "env"))
    assert main(["run", "--regime", "overdamped", "--mode", "markovian", "--horizon", "20"]) == 0
    assert (tmp_path / "env" / "overdamped_markovian.csv").exists()


def test_config_file_and_flags(tmp_path):
    cfg = tmp_path / "s.toml"
    cfg.write_text(dumps_config(build_scenario("intermediate", "markovian", {"horizon_fs": 50.0})))
    assert main(["run", "--config", str(cfg), "--mode", "nonmarkovian", "--no-dephasing", "--secular",
                 "--out", str(tmp_path)]) == 0
    assert len(parse_csv(tmp_path / "intermediate_nonmarkovian.csv")) == 51
    assert main(["run", "--config", str(cfg), "--regime", "underdamped", "--out", str(tmp_path)]) == EXIT_CONFIG


def test_compare_outputs_and_verdicts(tmp_path, capsys):
    assert main(["compare", "--regime", "overdamped", "--out", str(tmp_path)]) == 0
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == ["overdamped_comparison.csv", "overdamped_markovian.csv", "overdamped_nonmarkovian.csv",
                     "overdamped_overlay.svg", "overdamped_summary.csv"]
    assert "claim_slower_m1_buildup = True" in capsys.readouterr().out
    summary = {r["metric"]: r["value"] for r in read_rows(tmp_path / "overdamped_summary.csv")}
    assert float(summary["t_half_m1_nm"]) > float(summary["t_half_m1_m"])


def test_compare_without_couplings_gives_unit_ratio(tmp_path):
    assert main(["compare", "--regime", "custom", "--horizon", "50", "--out", str(tmp_path)]) == 0
    rows = read_rows(tmp_path / "custom_comparison.csv")
    assert len(rows) == 51
    assert all(float(r["ratio"]) == 1.0 for r in rows)


def test_compare_is_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert main(["compare", "--regime", "intermediate", "--horizon", "300", "--out", str(out)]) == 0
    for f in a.iterdir():
        assert f.read_bytes() == (b / f.name).read_bytes()


def test_sweep_rejects_single_point(tmp_path):
    assert main(["sweep", "--parameter", "p_hot", "--grid", "1", "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    assert main(["sweep", "--parameter", "p_hot", "--grid", "a,b", "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    assert not (tmp_path / "o").exists()


def test_sweep_rejects_unknown_parameter(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["sweep", "--parameter", "delta", "--grid", "1,2", "--out", str(tmp_path)])
    assert exc.value.code == 2


@pytest.mark.parametrize("regime", ["overdamped", "underdamped", "intermediate"])
def test_sweep_without_interference_loses_coherence(tmp_path, regime):
    assert main(["sweep", "--regime", regime, "--parameter", "p_hot", "--grid", "0,0.5", "--set", "p_cold=0",
                 "--out", str(tmp_path)]) == 0
    rows = read_rows(tmp_path / f"{regime}_nonmarkovian_sweep_p_hot.csv")
    assert [float(r["value"]) for r in rows] == [0.0, 0.5]
    assert float(rows[0]["final_abs_c"]) < 1e-3 * 0.5
    assert set(rows[0]) == {"parameter", "value", "final_abs_c", "t_ss", "t_half_m1"}


def test_sweep_parallel_matches_serial(tmp_path):
    args = ["sweep", "--regime", "intermediate", "--parameter", "tau2_inv", "--grid", "0,41,100", "--horizon", "200"]
    assert main([*args, "--out", str(tmp_path / "s")]) == 0
    assert main([*args, "--jobs", "3", "--out", str(tmp_path / "p")]) == 0
    name = "intermediate_nonmarkovian_sweep_tau2_inv.csv"
    assert (tmp_path / "s" / name).read_bytes() == (tmp_path / "p" / name).read_bytes()


def test_rates_first_row_zero_and_markovian_constant(tmp_path):
    assert main(["rates", "--regime", "underdamped", "--horizon", "100", "--out", str(tmp_path)]) == 0
    rows = read_rows(tmp_path / "underdamped_nonmarkovian_rates.csv")
    assert all(float(v) == 0.0 for k, v in rows[0].items())
    assert main(["rates", "--regime", "underdamped", "--mode", "markovian", "--horizon", "100",
                 "--out", str(tmp_path)]) == 0
    rows = read_rows(tmp_path / "underdamped_markovian_rates.csv")
    for col in rows[0]:
        if col != "t_fs":
            assert len({r[col] for r in rows}) == 1


def test_rates_saturate_at_table_values(tmp_path):
    # slowest memory is the 1e-10 cm^-1 load channel; 5/kappa of it is ~2.7e14 fs
    assert main(["rates", "--regime", "overdamped", "--horizon", "3e14", "--sample-interval", "1e12",
                 "--out", str(tmp_path)]) == 0
    final = read_rows(tmp_path / "overdamped_nonmarkovian_rates.csv")[-1]
    table = PRESETS[Regime.OVERDAMPED]
    fields = {"e1g": "gamma_e1g", "e2g": "gamma_e2g", "e1m1": "gamma_e1m", "e2m1": "gamma_e2m",
              "m1m2": "gamma_m1m2", "m2g": "gamma_m2g"}
    for tr, key in fields.items():
        target = wavenumber_to_angular(table[key])
        assert float(final[f"gamma_{tr}"]) == pytest.approx(target, rel=1e-2)


def test_validate_passes_and_halved_convention_reports_offset(capsys):
    assert main(["validate"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "FAIL" not in out and out.count("[PASS]") == 12
    assert main(["validate", "--rate-convention", "eq3"]) == EXIT_VALIDATION
    out = capsys.readouterr().out
    assert "[FAIL] quadrature vs closed-form rate" in out
    assert "ratio = 0.5" in out and "factor offset" in out


def test_validate_names_corrupted_preset(capsys):
    bad = dict(PRESETS[Regime.UNDERDAMPED], gamma_e1m=-35.0)

    class Args:
        rate_convention = "eq10"

    assert cmd_validate(Args(), presets={Regime.UNDERDAMPED: bad}) == EXIT_VALIDATION
    out = capsys.readouterr().out
    assert "[FAIL] preset integrity [underdamped]: gamma_e1m must be >= 0" in out


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "tclsim", "run", "--regime", "custom", "--horizon", "3",
                          "--out", str(tmp_path)], capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    assert (tmp_path / "custom_nonmarkovian.csv").exists()
