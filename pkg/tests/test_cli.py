import json

import numpy as np
import pytest

from gradrubin import __version__
from gradrubin.cli import EXIT_CONFIG, EXIT_OK, EXIT_VERIFY, config_hash, dumps, main

BASE2D = {"domain": {"type": "annulus", "L": 2.0},
          "discretization": {"K": 8, "N_r": 64},
          "output": {"prefix": "run"}}
SHELL = {"domain": {"type": "shell", "L": 2.0},
         "discretization": {"l_max": 4, "N_r": 64},
         "output": {"prefix": "sh"}}


def run(tmp_path, cfg, *cmd):
    tmp_path.mkdir(parents=True, exist_ok=True)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    out = tmp_path / "out"
    return main([*cmd, "--config", str(path), "--out", str(out)]), out


def read_csv(path):
    lines = path.read_text().splitlines()
    return lines[:3], np.loadtxt(lines[3:], delimiter=",", ndmin=2)


def test_solve2d_zero_data_returns_reference(tmp_path):
    rc, out = run(tmp_path, BASE2D, "solve2d")
    assert rc == EXIT_OK
    report = json.loads((out / "run_report.json").read_text())
    assert report["n_iterations"] == 1
    head, data = read_csv(out / "run_fields.csv")
    assert head[2] == "r,phi,B_r,B_phi,j,p"
    r, br, bphi, j = data[:, 0], data[:, 2], data[:, 3], data[:, 4]
    assert np.max(np.abs(br - 1 / r)) < 1e-10
    assert np.max(np.abs(bphi)) < 1e-10 and np.max(np.abs(j)) < 1e-10


def test_outputs_carry_provenance(tmp_path):
    rc, out = run(tmp_path, BASE2D, "solve2d")
    head, _ = read_csv(out / "run_pressure.csv")
    assert head[0] == f"# gradrubin {__version__}"
    assert head[1] == f"# config_sha256 {config_hash(BASE2D)}"
    meta = json.loads((out / "run_report.json").read_text())["meta"]
    assert meta == {"version": __version__, "config_sha256": config_hash(BASE2D),
                    "command": "solve2d"}


def test_solve2d_output_is_byte_identical(tmp_path):
    cfg = json.loads(json.dumps(BASE2D))
    cfg["boundary"] = {"f_outer": [{"k": 2, "cos": 0.005}], "g": [{"k": 1, "sin": 0.005}]}
    _, out1 = run(tmp_path / "a", cfg, "solve2d")
    _, out2 = run(tmp_path / "b", cfg, "solve2d")
    for name in ("run_report.json", "run_fields.csv", "run_pressure.csv"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


@pytest.mark.parametrize("bad", [
    {"domain": {"type": "annulus", "L": 2.0}, "extra": 1},
    {"domain": {"type": "annulus", "L": 0.5}},
    {"domain": {"type": "torus", "L": 2.0}},
    {"domain": {"type": "annulus", "L": 2.0}, "solver": {"damping": 1.5}},
])
def test_malformed_config_exits_1(tmp_path, bad, capsys):
    rc, _ = run(tmp_path, bad, "solve2d")
    assert rc == EXIT_CONFIG
    assert "error" in capsys.readouterr().err


def test_flux_imbalance_exits_1(tmp_path):
    cfg = dict(BASE2D, boundary={"f_outer": [{"k": 0, "cos": 0.1}]})
    assert run(tmp_path, cfg, "solve2d")[0] == EXIT_CONFIG
    cfg["boundary"]["balance_flux"] = True
    assert run(tmp_path, cfg, "solve2d")[0] == EXIT_OK
    shell = dict(SHELL, boundary={"f_outer_sh": [{"l": 0, "m": 0, "re": 0.1}]})
    assert run(tmp_path, shell, "shell3d")[0] == EXIT_CONFIG


def test_wrong_domain_for_command_exits_1(tmp_path):
    assert run(tmp_path, SHELL, "solve2d")[0] == EXIT_CONFIG
    assert run(tmp_path, BASE2D, "shell3d")[0] == EXIT_CONFIG


def test_shell_zero_data_gives_zero_profiles(tmp_path):
    rc, out = run(tmp_path, SHELL, "shell3d")
    assert rc == EXIT_OK
    head, data = read_csv(out / "sh_profiles.csv")
    assert head[2] == "l,m,r,br_re,br_im,b1_re,b1_im,b2_re,b2_im"
    assert np.max(np.abs(data[:, 3:])) == 0
    diag = json.loads((out / "sh_diagnostics.json").read_text())
    assert diag["l_max"] == 4


def test_shell_profiles_follow_data(tmp_path):
    cfg = dict(SHELL, boundary={"f_outer_sh": [{"l": 2, "m": 1, "re": 0.01}]})
    rc, out = run(tmp_path, cfg, "shell3d")
    assert rc == EXIT_OK
    _, data = read_csv(out / "sh_profiles.csv")
    sel = data[(data[:, 0] == 2) & (data[:, 1] == 1)]
    assert sel[-1, 3] == pytest.approx(0.01, rel=1e-8)
    assert sel[0, 3] == pytest.approx(0.0, abs=1e-12)


def test_verify_failure_exits_3(tmp_path, capsys):
    cfg = {"verify": {"k_max": 8}, "output": {"prefix": "v"}}
    rc, out = run(tmp_path, cfg, "verify", "symbol2d")
    assert rc == EXIT_VERIFY
    assert "FAIL" in capsys.readouterr().out
    assert (out / "v_report.json").exists() and (out / "v_timing.json").exists()


def test_verify_pass_and_deterministic_report(tmp_path, capsys):
    cfg = {"verify": {"K": 8, "N_r": 128}, "output": {"prefix": "v"}}
    rc1, out1 = run(tmp_path / "a", cfg, "verify", "multipliers2d")
    rc2, out2 = run(tmp_path / "b", cfg, "verify", "multipliers2d")
    assert rc1 == rc2 == EXIT_OK
    assert "PASS" in capsys.readouterr().out
    assert (out1 / "v_report.json").read_bytes() == (out2 / "v_report.json").read_bytes()


def test_threads_must_be_positive(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(BASE2D))
    assert main(["solve2d", "--config", str(path), "--threads", "0"]) == EXIT_CONFIG


def test_dumps_formatting():
    text = dumps({"b": [0.1, float("nan")], "a": True, "c": np.float64(1 / 3), "d": 3})
    assert text.index('"a"') < text.index('"b"') < text.index('"c"')
    assert "0.10000000000000001" in text and "null" in text
    assert "0.33333333333333331" in text and '"d": 3' in text
    assert dumps({}) == "{}" and dumps([]) == "[]"
