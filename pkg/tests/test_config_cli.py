import json
import math
import subprocess
import sys

import pytest
from hypothesis import given, settings, strategies as st

from nfris import __version__
from nfris.cli import main
from nfris.config import ConfigError, default_config, parse_config, serialize


def test_defaults_are_reference_values():
    cfg = default_config()
    assert cfg["medium"]["wavelength_m"] == 0.1
    assert cfg["aperture"]["a_m"] == 2.0 and cfg["aperture"]["b_m"] == 2.0
    assert cfg["receiver"]["num_antennas"] == 128
    assert cfg.derived["e0"] == 1.0
    assert math.degrees(cfg.derived["theta_in"]) == pytest.approx(30.0)
    assert cfg.receiver().length == pytest.approx(2.0)


def test_gain_db_conversion():
    assert default_config().derived["rx_gain"] == pytest.approx(3.1623, abs=1e-4)
    cfg = parse_config("[receiver]\nrx_gain_db = 0\n")
    assert cfg.receiver().rx_gain == 1.0


def test_round_trip():
    cfg = parse_config("[medium]\nwavelength_m = 0.05\n[scan]\nsnr_db = 1, 2.5\n[run]\nseed = 99\n")
    again = parse_config(serialize(cfg))
    assert again == cfg
    assert serialize(again) == serialize(cfg)


@settings(max_examples=40, deadline=None)
@given(st.floats(1e-3, 10.0), st.floats(0.0, 89.0), st.integers(0, 2 ** 64 - 1))
def test_round_trip_property(lam, theta, seed):
    text = f"[medium]\nwavelength_m = {lam!r}\n[incident]\ntheta_in_deg = {theta!r}\n" \
           f"[run]\nseed = {seed}\n"
    cfg = parse_config(text)
    assert parse_config(serialize(cfg)) == cfg


@pytest.mark.parametrize("text, key", [
    ("[medium]\nwavelength_m = -0.1\n", "medium.wavelength_m"),
    ("[medium]\ncolour = red\n", "medium.colour"),
    ("[bogus]\nx = 1\n", "bogus"),
    ("[receiver]\ncenter_xyz_m = 0, 1\n", "receiver.center_xyz_m"),
    ("[incident]\ntheta_in_deg = 95\n", "incident.theta_in_deg"),
    ("[run]\nseed = -3\n", "run.seed"),
    ("[incident]\ne0_v_per_m = 1\ntx_power_w = 1\n", "incident.tx_power_w"),
])
def test_invalid_values_name_their_key(text, key):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.key == key
    assert key in str(info.value)


def test_digest_changes_with_seed():
    cfg = default_config()
    assert cfg.digest() != cfg.with_seed(2).digest()
    assert cfg.digest() == default_config().digest()


def test_unknown_subcommand_exits_2(capsys):
    with pytest.raises(SystemExit) as info:
        main(["no-such-command"])
    assert info.value.code == 2


def test_selftest_exits_zero(tmp_path, capsys):
    assert main(["selftest", "-o", str(tmp_path)]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["passed"] is True
    lines = (tmp_path / "selftest.csv").read_text().splitlines()
    assert lines[0].startswith(f"# nfris {__version__} config-sha256=")
    assert lines[1] == "check,residual,tolerance,pass"


def test_bad_config_reports_json_error(tmp_path, capsys):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[medium]\nwavelength_m = -1\n")
    assert main(["selftest", "-c", str(cfg), "-o", str(tmp_path)]) == 1
    err = json.loads(capsys.readouterr().err)
    assert err["key"] == "medium.wavelength_m"


SMALL = """
[aperture]
a_m = 0.6
b_m = 0.6
[receiver]
num_antennas = 8
length_m = 0.4
center_xyz_m = 0, 2, 2
[numerics]
samples_per_wavelength = 4
n_l = 8
[design]
focus_xyz_m = 0, 2, 2
[arc]
focus_xyz_m = 0, 2, 2
theta_count = 21
[field_map]
focus_xyz_m = 0, 2, 2
y_count = 5
z_count = 4
[location]
d_start_m = 2
d_stop_m = 3
d_count = 3
psi_count = 5
true_d_m = 2.5
true_psi_deg = 45
snr_db = 10
[attitude]
phi_count = 4
[scan]
center_xyz_m = 0, 2, 2
half_count = 1
spacing_m = 0.05
trials = 10
"""


@pytest.mark.parametrize("command", ["design-export", "arc-power", "field-map", "capacity",
                                     "sense-location", "sense-attitude", "sense-ml", "peb",
                                     "rmse"])
def test_commands_are_byte_deterministic(tmp_path, command, capsys):
    cfg = tmp_path / "small.ini"
    cfg.write_text(SMALL)
    outputs = []
    for run in ("a", "b"):
        out = tmp_path / run
        assert main([command, "-c", str(cfg), "-o", str(out), "--seed", "5"]) == 0
        summary = json.loads(capsys.readouterr().out)
        assert summary["seed"] == 5 and summary["runtime_s"] >= 0
        outputs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    assert outputs[0] == outputs[1]
    assert f"{command}.csv" in outputs[0] and f"{command}.json" in outputs[0]
    header = outputs[0][f"{command}.csv"].decode().splitlines()[0]
    assert f"command={command}" in header and "config-sha256=" in header


def test_seed_flag_changes_noisy_output(tmp_path, capsys):
    cfg = tmp_path / "small.ini"
    cfg.write_text(SMALL)
    for seed in ("1", "2"):
        assert main(["rmse", "-c", str(cfg), "-o", str(tmp_path / seed), "--seed", seed]) == 0
    capsys.readouterr()
    a = (tmp_path / "1" / "rmse.csv").read_text().splitlines()
    b = (tmp_path / "2" / "rmse.csv").read_text().splitlines()
    assert a[0] != b[0]
    # the noisy RMSE rows differ too, not just the config hash
    assert a[2:] != b[2:]


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "nfris", "--version"], capture_output=True,
                          text=True, check=True)
    assert __version__ in proc.stdout
