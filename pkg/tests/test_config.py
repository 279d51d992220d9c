import os

import pytest

from config import (ConfigError, COMMAND_KEYS, load_run_config, parse_float_table, read_key_value_file,
                    write_key_value_file)

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def test_read_key_value_file_ignores_comments_and_blanks(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# header\n\nf_pump = 15.2e9   # pump\n  a_p=0.001\n")
    values = read_key_value_file(str(path))
    assert list(values.items()) == [("f_pump", "15.2e9"), ("a_p", "0.001")]


def test_duplicate_key_reports_line_number(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("a_p = 1e-3\n\na_p = 2e-3\n")
    with pytest.raises(ConfigError, match=":3:"):
        read_key_value_file(str(path))


def test_line_without_equals_sign_is_rejected(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("just text\n")
    with pytest.raises(ConfigError):
        read_key_value_file(str(path))


def test_defaults_are_typed():
    config = load_run_config("gain")
    assert config["n_points"] == 1121
    assert config["loading"] is True
    assert config["loss_db_per_m"] == [(2e9, 96.15), (8e9, 576.92)]
    assert set(config) == set(COMMAND_KEYS["gain"])


def test_overrides_win_over_file(tmp_path):
    path = tmp_path / "gain.cfg"
    path.write_text("a_p = 0.0005\nf_pump = 15e9\n")
    config = load_run_config("gain", str(path), {"a_p": "0"})
    assert config["a_p"] == 0.0
    assert config["f_pump"] == 15e9


def test_unknown_key_is_an_error(tmp_path):
    path = tmp_path / "gain.cfg"
    path.write_text("a_pp = 0.001\n")
    with pytest.raises(ConfigError, match="a_pp"):
        load_run_config("gain", str(path))


def test_missing_required_key():
    with pytest.raises(ConfigError, match="thru"):
        load_run_config("trl", overrides={"reflect": "r.s2p", "line": "l.s2p", "dut": "d.s2p",
                                          "line_delay_estimate": "3e-11"})


@pytest.mark.parametrize("key, value", [("n_points", "many"), ("loading", "maybe"), ("f_pump", "")])
def test_bad_values_raise_config_error(key, value):
    with pytest.raises(ConfigError):
        load_run_config("gain", overrides={key: value})


def test_config_error_is_a_value_error():
    assert issubclass(ConfigError, ValueError)


def test_parse_float_table():
    assert parse_float_table("8e9:3, 2e9:1") == [(2e9, 1.0), (8e9, 3.0)]
    assert parse_float_table("250") == [(0.0, 250.0)]
    assert parse_float_table("") == []


def test_written_file_reads_back(tmp_path):
    path = tmp_path / "out.cfg"
    write_key_value_file(str(path), {"sweep": "noise_sweep.csv", "psd_unit": "w_per_hz"}, header="generated")
    assert path.read_text().startswith("# generated\n")
    config = load_run_config("noise", str(path))
    assert config["sweep"] == "noise_sweep.csv"
    assert config["loss_table"] == ""


@pytest.mark.parametrize("command", ["gain", "gen-fixtures"])
def test_shipped_configs_match_defaults(command):
    path = os.path.join(ROOT, "configs", f"{command}.cfg")
    assert load_run_config(command, path) == load_run_config(command)
