from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from heatblow.harness import ConfigError, emit_plotdata, parse_config, run_scenario
from heatblow.harness.cli import main
from heatblow.similarity import profile_f
from heatblow.solver_core import Field, write_snapshots_csv

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

BASE = """
[scenario]
kind = {kind}
output = {out}

[problem]
omega_domain = -1, 1
actuator = -0.6, 0.6
a = 0
T = 0.05
p = 2
eps0 = 0.2
K0 = 1.5
A = 20
eta0 = 0.5
grid_points = 1025
"""


def _cfg(tmp_path, kind="hermite", extra="", drop=None):
    text = BASE.format(kind=kind, out=tmp_path / kind) + extra
    if drop:
        text = "\n".join(line for line in text.splitlines() if not line.startswith(drop + " "))
    return parse_config(text)


def test_missing_p_is_named(tmp_path):
    with pytest.raises(ConfigError) as exc:
        _cfg(tmp_path, drop="p")
    assert exc.value.errors == ["problem.p: missing"]


def test_errors_listed_exhaustively(tmp_path):
    text = BASE.format(kind="nope", out=tmp_path).replace("T = 0.05", "T = soon").replace("K0 = 1.5\n", "")
    text += "colour = blue\n"
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    errs = exc.value.errors
    assert any(e.startswith("scenario.kind: unknown kind") for e in errs)
    assert any(e.startswith("problem.T:") for e in errs)
    assert "problem.K0: missing" in errs
    assert "problem.colour: unknown field" in errs


def test_shipped_configs_parse():
    for path in sorted(CONFIGS.glob("*.ini")):
        cfg = parse_config(path.read_text())
        assert cfg.kind == path.stem


def test_run_writes_manifest_and_block(tmp_path):
    out = run_scenario(_cfg(tmp_path))
    man = json.loads((out.path / "manifest.json").read_text())
    block = json.loads((out.path / "criteria.json").read_text())
    assert man["status"] == "COMPLETE"
    assert man["criteria"] == [1]
    assert block["all_pass"] and block["criteria"][0]["status"] == "PASS"
    assert (out.path / "hermite_gram.csv").is_file()


def test_csv_outputs_are_reproducible(tmp_path):
    a = run_scenario(_cfg(tmp_path / "a", "riccati"))
    b = run_scenario(_cfg(tmp_path / "b", "riccati"))
    for name in ("riccati_scalar.csv", "riccati_spectrum.csv"):
        assert (a.path / name).read_bytes() == (b.path / name).read_bytes()


def test_failed_run_is_incomplete(tmp_path):
    cfg = _cfg(tmp_path, "theorem12", "\n[params]\nb0 = 0.45, 0.55\nb1 = 0.4, 0.6\nb2 = 0.35, 0.65\n")
    with pytest.raises(ValueError):
        run_scenario(cfg)
    man = json.loads((cfg.output / "manifest.json").read_text())
    assert man["status"] == "INCOMPLETE"
    assert "actuator" in man["error"]
    assert not (cfg.output / "criteria.json").exists()


def test_plotdata_needs_a_run(tmp_path):
    with pytest.raises(FileNotFoundError):
        emit_plotdata(tmp_path)
    with pytest.raises(FileNotFoundError):
        emit_plotdata(tmp_path / "missing")
    assert main(["report", str(tmp_path)]) == 2


def test_plotdata_profile_and_rate_tables(tmp_path):
    T, dx = 0.05, 2 / 1024
    x = -1 + dx * np.arange(1025)
    snaps = [Field(np.zeros(1025), t, dx) for t in (0.0, T - 1e-2, T - 1e-3)]
    write_snapshots_csv(tmp_path / "fields.csv", snaps)
    (tmp_path / "rate.csv").write_text("p,t,max_abs_y,t_est_minus_t\n2,0.04,100,0.01\n2,0.049,1000,0.001\n")
    (tmp_path / "manifest.json").write_text(json.dumps({
        "status": "COMPLETE", "config": {"kind": "theorem21", "problem": {"omega_domain": [-1, 1]}},
        "summary": {"blowup": {"T": T, "a": 0.0, "p": 2.0, "dx": dx},
                    "estimate": {"t_est": T, "a_est": 0.0, "exponent": -1.0}}}))
    written = {p.name for p in emit_plotdata(tmp_path)}
    assert written == {"plot_profile.csv", "plot_rate.csv"}
    rows = np.genfromtxt(tmp_path / "plot_profile.csv", delimiter=",", names=True)
    np.testing.assert_allclose(rows["f_xi"], profile_f(rows["xi"], 2.0), rtol=1e-15)
    rate = np.genfromtxt(tmp_path / "plot_rate.csv", delimiter=",", names=True)
    assert np.all(rate["fitted_slope"] == -1.0) and np.all(rate["expected_slope"] == -1.0)


def test_cli_exit_codes(tmp_path, capsys):
    cfg = CONFIGS / "hermite.ini"
    assert main(["run", str(cfg), "--output", str(tmp_path / "h")]) == 0
    assert main(["report", str(tmp_path / "h")]) == 0
    out = tmp_path / "ratios.csv"
    assert main(["kernel-verify", "--theta", "1", "--m", "2", "--nz", "21", "--out", str(out)]) == 0
    assert out.read_text().splitlines()[0] == "z,ratio"
    bad = tmp_path / "bad.ini"
    bad.write_text(cfg.read_text().replace("p = 2\n", ""))
    assert main(["run", str(bad)]) == 2
    assert "problem.p: missing" in capsys.readouterr().err


def test_cli_riccati_and_localize(tmp_path):
    out = tmp_path / "spec.csv"
    assert main(["riccati", "--grid-points", "257", "--N", "4", "--M", "1e3", "--tau", "0.2", "--out", str(out)]) == 0
    assert out.read_text().splitlines()[0] == "t,ev_0,ev_1,ev_2,ev_3"
    run = tmp_path / "sim"
    assert main(["simulate", "--grid-points", "1025", "--t-end", "0.01", "--every", "0.001",
                 "--y-max", "1e30", "--out", str(run)]) == 0
    cert = tmp_path / "cert.json"
    assert main(["localize", "--grid-points", "1025", "--run", str(run), "--b0", "0.75,0.85",
                 "--b1", "0.7,0.9", "--b2", "0.65,0.95", "--out", str(cert)]) == 0
    assert json.loads(cert.read_text())["passed"]
