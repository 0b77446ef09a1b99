import csv
import io
import json
import logging
import math
import os
import subprocess
import sys

import numpy as np
import pytest

from nomapa import cli
from nomapa.config import (
    ConfigError,
    ExperimentConfig,
    load_config,
    paper_distances,
    parse_config,
    pathloss_gain,
)
from nomapa.dpd_lab import NmseMeasurement, write_sweep_csv
from nomapa.experiments import SUMRATE_COLUMNS
from nomapa.pa_model import IDEAL, PaModel, RegressionForm

QUICK_SUMRATE = """
kind = sumrate
sigma_sweep = 2.6
bandwidth_sweep = 30e6
k_sweep = 2, 3
"""


def _write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def _read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_pathloss_reference_values():
    assert pathloss_gain(80.0, 2.4e9, 2.6, 4.11) == pytest.approx(2.8778e-10, rel=1e-4)
    assert isinstance(pathloss_gain(80.0, 2.4e9, 2.6, 4.11), float)
    g = pathloss_gain(np.array([60.0, 80.0, 120.0]), 2.4e9, 2.6, 4.11)
    assert np.all(np.diff(g) < 0)
    # doubling the distance costs 10*sigma*log10(2) dB
    ratio = pathloss_gain(160.0, 2.4e9, 2.6, 4.11) / pathloss_gain(80.0, 2.4e9, 2.6, 4.11)
    assert 10 * math.log10(ratio) == pytest.approx(-26 * math.log10(2), rel=1e-12)
    for d in (0.0, -5.0, float("nan")):
        with pytest.raises(ValueError):
            pathloss_gain(d, 2.4e9, 2.6, 4.11)


def test_default_layout():
    assert paper_distances(4) == (60.0, 80.0, 100.0, 120.0)


def test_parse_values_lists_and_comments():
    cfg = parse_config(
        """
        # a comment line
        kind = wsr
        distances = 60, 80, 100   # trailing comment
        weights = 0.2, 0.3, 0.5
        orders = 3->2->1
        rate_floors = 0, 1e6
        ideal = yes
        """.replace("        ", "")
    )
    assert cfg.kind == "wsr" and cfg.distances == (60.0, 80.0, 100.0)
    assert cfg.orders == ("3->2->1",) and cfg.rate_floors == (0.0, 1e6) and cfg.ideal
    assert cfg.decoding_orders()[0].perm == (2, 1, 0)
    np.testing.assert_allclose(cfg.user_weights(), [0.2, 0.3, 0.5])


def test_defaults_match_the_reference_scenario():
    cfg = parse_config("")
    assert cfg.kind == "sumrate" and cfg.distances == (120.0, 80.0)
    assert cfg.p_max == pytest.approx(3.981, rel=1e-3)
    assert cfg.noise_power == pytest.approx(10 ** (-20.4) * 30e6, rel=1e-12)
    assert cfg.pa_model() == PaModel(0.0032, 1.3552)
    assert [o.perm for o in cfg.decoding_orders()] == [(1, 0), (0, 1)]
    np.testing.assert_allclose(cfg.user_weights(), [0.5, 0.5])


@pytest.mark.parametrize(
    "text, field",
    [
        ("colour = red", "colour"),
        ("tau_grid = many", "tau_grid"),
        ("tau_grid = 1", "tau_grid"),
        ("distances = 100, -3", "distances"),
        ("weights = 0.5, 0.6", "weights"),
        ("weights = 1.0", "weights"),
        ("orders = 1->2->3", "orders"),
        ("orders = 1->1", "orders"),
        ("pa_a = 0.003", "pa_alpha"),
        ("pa_k2 = -30", "pa_k1"),
        ("kind = plot", "kind"),
        ("ideal = maybe", "ideal"),
        ("rate_floors = -1", "rate_floors"),
        ("bandwidth = 0", "bandwidth"),
    ],
)
def test_parse_errors_name_the_field(text, field):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.field == field
    assert field in str(info.value)


def test_overrides_win_and_none_is_ignored(tmp_path):
    path = _write(tmp_path, "a.cfg", "seed = 3\ntau_grid = 50\n")
    cfg = load_config(path, seed=9, tau_grid=None)
    assert cfg.seed == 9 and cfg.tau_grid == 50
    assert cfg.solver_settings().tau_grid == 50


def test_pa_model_sources(tmp_path):
    assert parse_config("ideal = true\npa_a = 0.1\npa_alpha = 2").pa_model() == IDEAL
    assert parse_config("pa_a = 0.002\npa_alpha = 1.4").pa_model() == PaModel(0.002, 1.4)
    m = parse_config("pa_k1 = 0.3552\npa_k2 = -35.605").pa_model()
    assert m == RegressionForm(0.3552, -35.605).to_power_law()
    sweep = [NmseMeasurement(p, -30 + 5 * math.log10(p * 1000)) for p in (0.01, 0.1, 1.0)]
    sweep += [NmseMeasurement(p, -50.0, True) for p in (0.01, 1.0)]
    write_sweep_csv(tmp_path / "s.csv", sweep)
    cfg = parse_config("sweep_file = s.csv")
    model = cfg.pa_model(str(tmp_path))
    assert model.alpha == pytest.approx(1.5, rel=1e-9)
    assert parse_config("sweep_file = s.csv\nsweep_use_dpd = 1").pa_model(str(tmp_path)).alpha == pytest.approx(1.0)
    with pytest.raises(ConfigError) as info:
        parse_config("sweep_file = missing.csv").pa_model(str(tmp_path))
    assert info.value.field == "sweep_file"


def test_scenario_units():
    cfg = ExperimentConfig()
    s = cfg.scenario(cfg.pa_model())
    assert s.p_max == (cfg.p_max, cfg.p_max)
    assert s.gains[1] == pytest.approx(2.8778e-10, rel=1e-4)
    s20 = cfg.scenario(cfg.pa_model(), bandwidth=20e6)
    assert s20.noise_power == pytest.approx(s.noise_power * 2 / 3, rel=1e-12)


# CLI ----------------------------------------------------------------------------


def _run(args, tmp_path):
    out = tmp_path / "out"
    code = cli.main([*args, "--out", str(out)])
    return code, out


def test_sumrate_cli_outputs_and_units(tmp_path):
    cfg = _write(tmp_path, "s.cfg", QUICK_SUMRATE)
    code, out = _run(["sumrate", "--config", cfg], tmp_path)
    assert code == cli.EXIT_OK
    rows = _read_csv(out / "sumrate.csv")
    assert list(rows[0]) == list(SUMRATE_COLUMNS)
    for r in rows:
        b = float(r["bandwidth_hz"])
        assert float(r["ndm_bps"]) == pytest.approx(float(r["ndm_bps_hz"]) * b, rel=1e-12)
        assert float(r["ideal_bps"]) == pytest.approx(float(r["ideal_bps_hz"]) * b, rel=1e-12)
    summary = json.loads((out / "sumrate_summary.json").read_text())
    assert summary["status"] == "ok" and summary["kind"] == "sumrate"
    base = summary["summary"]["base"][0]
    for op in (base["pc_ndm"], base["pc_ideal"]):
        np.testing.assert_allclose(10 * np.log10(np.array(op["p_w"]) * 1000), op["p_dbm"], rtol=1e-12)
        np.testing.assert_allclose(np.array(op["rates_bps_hz"]) * 30e6, op["rates_bps"], rtol=1e-12)
    assert base["pc_ndm"]["sum_rate_bps"] == pytest.approx(2.5045e8, rel=1e-3)


def test_outputs_are_byte_identical_across_runs(tmp_path):
    cfg = _write(tmp_path, "s.cfg", QUICK_SUMRATE)
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["sumrate", "--config", cfg, "--out", str(a)]) == 0
    assert cli.main(["sumrate", "--config", cfg, "--out", str(b)]) == 0
    for name in ("sumrate.csv", "sumrate_summary.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_seeded_ofdm_rows_depend_on_seed(tmp_path):
    cfg = _write(tmp_path, "o.cfg", "kind = ofdm\nsubcarriers = 1, 16, 64, 1024\n")
    assert cli.main(["ofdm", "--config", cfg, "--out", str(tmp_path / "a")]) == 0
    assert cli.main(["ofdm", "--config", cfg, "--seed", "5", "--out", str(tmp_path / "b")]) == 0
    a = _read_csv(tmp_path / "a" / "ofdm.csv")
    b = _read_csv(tmp_path / "b" / "ofdm.csv")
    flat = [r for r in a if r["channel"] == "flat"]
    assert [int(r["n_subcarriers"]) for r in flat] == [1, 16, 64, 1024]
    assert max(float(r["rel_diff"]) for r in flat) <= 1e-12
    for r in a:
        assert float(r["total_power_dbm"]) == pytest.approx(10 * math.log10(float(r["total_power_w"]) * 1000))
    fa = [r["ofdm_bps"] for r in a if r["channel"] == "rayleigh" and r["n_subcarriers"] != "1"]
    fb = [r["ofdm_bps"] for r in b if r["channel"] == "rayleigh" and r["n_subcarriers"] != "1"]
    assert fa != fb


def test_region_cli_small_grid(tmp_path):
    code, out = _run(["region", "--tau-grid", "6"], tmp_path)
    assert code == 0
    rows = _read_csv(out / "region.csv")
    traces = [r for r in rows if r["kind"] == "trace"]
    assert len(traces) == 2 * 2 * 6
    for r in traces:
        for k in ("p1", "p2"):
            w = float(r[f"{k}_w"])
            want = 10 * math.log10(w * 1000) if w > 0 else -math.inf
            assert float(r[f"{k}_dbm"]) == pytest.approx(want, abs=1e-9)
    s = json.loads((out / "region_summary.json").read_text())["summary"]
    assert s["point_G_pc_ndm"]["sum_rate_bps"] > s["point_H_pc_ideal"]["sum_rate_bps"]


def test_ideal_flag_removes_the_gain(tmp_path):
    cfg = _write(tmp_path, "s.cfg", QUICK_SUMRATE)
    code, out = _run(["sumrate", "--config", cfg, "--ideal"], tmp_path)
    assert code == 0
    for r in _read_csv(out / "sumrate.csv"):
        assert abs(float(r["gain_percent"])) < 1e-9


def test_dpd_sweep_then_fit(tmp_path):
    cfg = _write(tmp_path, "d.cfg", "kind = dpd-sweep\nn_seeds = 1\nn_symbols = 16\ndrive_powers = 1e-5, 1e-4, 1e-3\n")
    sweep_out = tmp_path / "sweep"
    assert cli.main(["dpd-sweep", "--config", cfg, "--out", str(sweep_out)]) == 0
    with open(sweep_out / "dpd_sweep.csv") as fh:
        assert fh.readline().strip() == "p_out_dBm,nmse_db,dpd_enabled,seed"
    fit_cfg = _write(tmp_path, "f.cfg", f"kind = fit\nsweep_file = {sweep_out / 'dpd_sweep.csv'}\n")
    code, out = _run(["fit", "--config", fit_cfg], tmp_path)
    assert code == 0
    summary = json.loads((out / "fit_summary.json").read_text())["summary"]
    assert summary["no_dpd"]["alpha"] > 1.0 and summary["no_dpd"]["n_points"] == 3


def test_exit_code_for_bad_config(tmp_path):
    bad = _write(tmp_path, "bad.cfg", "tau_grid = lots\n")
    assert cli.main(["sumrate", "--config", bad, "--out", str(tmp_path)]) == cli.EXIT_USAGE
    assert cli.main(["sumrate", "--config", str(tmp_path / "nope.cfg"), "--out", str(tmp_path)]) == cli.EXIT_USAGE
    fit = _write(tmp_path, "fit.cfg", "kind = fit\n")
    assert cli.main(["fit", "--config", fit, "--out", str(tmp_path)]) == cli.EXIT_USAGE
    with pytest.raises(SystemExit) as info:
        cli.main(["plot"])
    assert info.value.code == 2


def test_exit_code_for_infeasible_floors(tmp_path):
    cfg = _write(tmp_path, "s.cfg", QUICK_SUMRATE + "rate_floors = 0, 1e10\n")
    code, out = _run(["sumrate", "--config", cfg], tmp_path)
    assert code == cli.EXIT_INFEASIBLE
    summary = json.loads((out / "sumrate_summary.json").read_text())
    assert summary["status"] == "infeasible" and summary["infeasible"]
    statuses = [r["status"] for r in _read_csv(out / "sumrate.csv") if r["sweep"] == "base"]
    assert statuses[1] == "infeasible" and statuses[0] != "infeasible"


def test_exit_code_for_non_convergence(tmp_path):
    cfg = _write(tmp_path, "s.cfg", QUICK_SUMRATE + "max_outer_iters = 1\nepsilon = 1e-12\n")
    code, out = _run(["sumrate", "--config", cfg], tmp_path)
    assert code == cli.EXIT_NOT_CONVERGED
    assert json.loads((out / "sumrate_summary.json").read_text())["status"] == "not_converged"


def test_summary_json_has_no_nan(tmp_path):
    cfg = _write(tmp_path, "s.cfg", QUICK_SUMRATE + "rate_floors = 1e10\n")
    _, out = _run(["sumrate", "--config", cfg], tmp_path)
    text = (out / "sumrate_summary.json").read_text()
    json.loads(text)
    assert "NaN" not in text and "Infinity" not in text


class _Tty(io.StringIO):
    def isatty(self):
        return True


@pytest.mark.parametrize("no_color, colored", [(True, False), (False, True)])
def test_color_follows_no_color_and_tty(monkeypatch, no_color, colored):
    if no_color:
        monkeypatch.setenv("NO_COLOR", "1")
    else:
        monkeypatch.delenv("NO_COLOR", raising=False)
    stream = _Tty()
    monkeypatch.setattr(sys, "stderr", stream)
    cli._setup_logging(False)
    logging.getLogger("nomapa").warning("hello")
    assert ("\033[" in stream.getvalue()) == colored


def test_module_entry_point_runs(tmp_path):
    env = dict(os.environ, NO_COLOR="1")
    proc = subprocess.run(
        [sys.executable, "-m", "nomapa.cli", "ofdm", "--out", str(tmp_path)],
        capture_output=True, text=True, env=env, timeout=120,
    )
    assert proc.returncode == 0
    assert "\033[" not in proc.stderr
    assert (tmp_path / "ofdm.csv").exists()
