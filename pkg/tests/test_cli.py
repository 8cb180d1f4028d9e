"""Command-line interface and config loading."""
import json

import pytest
import yaml

from evareg.cli import main
from evareg.config import ConfigError, load_run_config, with_param
from evareg.fleet import load_fleet

SMALL_CONFIG = {
    "seed": 3,
    "fleet": {
        "types": [{"count": 8, "arrive": [0, 4], "depart": [9, 15]},
                  {"count": 4, "arrive": [6, 10], "depart": [17, 23]}],
        "v2g_fraction": 0.5,
    },
    "scenario": {"n_scenarios": 3, "eps_p": 2.0, "eps_ev": 1.0},
    "mpc": {"h_window": 4, "cvar_alpha": 0.2},
}


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "config.yaml"
    path.write_text(yaml.safe_dump(SMALL_CONFIG))
    return path


def test_defaults_documented_values():
    cfg = load_run_config(None)
    assert cfg.mpc.h_window == 8
    assert cfg.mpc.cvar_alpha == 0.2
    assert cfg.mpc.psi == 50.0
    assert cfg.mpc.phi == 130.0
    assert cfg.mpc.phi_prime == 40.0
    assert cfg.scenario.eps_p == 3.0
    assert cfg.scenario.eps_ev == 2.0
    assert cfg.scenario.n_scenarios == 100
    assert cfg.fleet.rho == 0.25
    assert sum(t.count for t in cfg.fleet.types) == 2000


def test_unknown_keys_rejected(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text(yaml.safe_dump({"mpc": {"h_windoww": 4}}))
    with pytest.raises(ConfigError, match="h_windoww"):
        load_run_config(path)
    path.write_text(yaml.safe_dump({"frobnicate": 1}))
    with pytest.raises(ConfigError, match="frobnicate"):
        load_run_config(path)


def test_seed_override(config_file):
    assert load_run_config(config_file).seed == 3
    assert load_run_config(config_file, seed_override=9).seed == 9


def test_with_param_routes_to_sections():
    cfg = load_run_config(None)
    assert with_param(cfg, "h_window", 4).mpc.h_window == 4
    assert with_param(cfg, "cvar_alpha", "0.5").mpc.cvar_alpha == 0.5
    assert with_param(cfg, "eps_p", 6).scenario.eps_p == 6.0
    assert with_param(cfg, "rho", 0.5).fleet.rho == 0.5
    with pytest.raises(ConfigError):
        with_param(cfg, "nope", 1)


def test_fleet_gen_writes_expected_counts(tmp_path, config_file, capsys):
    out = tmp_path / "fleet.csv"
    assert main(["fleet", "gen", "--config", str(config_file),
                 "--out", str(out)]) == 0
    evs = load_fleet(out)
    assert len(evs) == 12
    assert "12 EVs" in capsys.readouterr().out


def test_fleet_gen_seed_repeatable(tmp_path, config_file):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["fleet", "gen", "--config", str(config_file), "--seed", "7",
                 "--out", str(a)]) == 0
    assert main(["fleet", "gen", "--config", str(config_file), "--seed", "7",
                 "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_bad_config_exits_2(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text(yaml.safe_dump(
        {"fleet": {"soc_a_range": [0.5, 0.2]}}))
    assert main(["fleet", "gen", "--config", str(bad),
                 "--out", str(tmp_path / "f.csv")]) == 2


def test_run_single_strategy(tmp_path, config_file):
    out = tmp_path / "out"
    assert main(["run", "--config", str(config_file), "--strategy",
                 "immediate", "--out", str(out)]) == 0
    report = json.loads((out / "report_immediate.json").read_text())
    assert report["strategy"] == "immediate"
    assert (out / "hourly_immediate.csv").exists()


def test_run_all_emits_comparison(tmp_path, config_file):
    out = tmp_path / "out"
    assert main(["run", "--config", str(config_file), "--strategy", "all",
                 "--out", str(out)]) == 0
    lines = (out / "comparison.csv").read_text().strip().splitlines()
    assert len(lines) == 7  # header + six strategies
    for name in ("immediate", "smart-v1g", "smart-v2g", "proposed", "robust",
                 "ideal"):
        assert (out / f"report_{name}.json").exists()


def test_run_deterministic_outputs(tmp_path, config_file):
    out1, out2 = tmp_path / "r1", tmp_path / "r2"
    for out in (out1, out2):
        assert main(["run", "--config", str(config_file), "--strategy",
                     "proposed", "--out", str(out)]) == 0
    assert (out1 / "report_proposed.json").read_bytes() == \
        (out2 / "report_proposed.json").read_bytes()
    assert (out1 / "hourly_proposed.csv").read_bytes() == \
        (out2 / "hourly_proposed.csv").read_bytes()


def test_run_with_price_and_regd_files(tmp_path, config_file):
    from evareg.market import save_prices, save_regd, synth_prices, synth_regd
    prices_path = tmp_path / "prices.csv"
    regd_path = tmp_path / "regd.csv"
    save_prices(synth_prices(24, 5), prices_path)
    save_regd(synth_regd(24, 5), regd_path)
    out = tmp_path / "out"
    assert main(["run", "--config", str(config_file), "--strategy",
                 "immediate", "--out", str(out), "--prices", str(prices_path),
                 "--regd", str(regd_path)]) == 0


def test_sweep_window_widths(tmp_path, config_file):
    out = tmp_path / "sweep"
    assert main(["sweep", "--config", str(config_file), "--param", "h_window",
                 "--values", "2,4", "--out", str(out)]) == 0
    lines = (out / "sweep_h_window.csv").read_text().strip().splitlines()
    assert lines[0].startswith("h_window,")
    assert len(lines) == 3
    assert (out / "report_h_window_2.json").exists()
    assert (out / "report_h_window_4.json").exists()


def test_sweep_with_situations_emits_samples(tmp_path, config_file):
    out = tmp_path / "sweep"
    assert main(["sweep", "--config", str(config_file), "--param",
                 "cvar_alpha", "--values", "0,0.5", "--situations", "2",
                 "--out", str(out)]) == 0
    lines = (out / "samples_cvar_alpha.csv").read_text().strip().splitlines()
    assert lines[0] == "cvar_alpha,situation,daily_revenue"
    assert len(lines) == 1 + 2 * 2


def test_oracle_test_command(capsys):
    assert main(["oracle-test", "--cases", "20", "--groups", "5"]) == 0
    out = capsys.readouterr().out
    assert out.count("[PASS]") == 3


def test_unknown_strategy_usage_error(tmp_path, config_file):
    with pytest.raises(SystemExit) as exc:
        main(["run", "--config", str(config_file), "--strategy", "warp",
              "--out", str(tmp_path)])
    assert exc.value.code == 2
