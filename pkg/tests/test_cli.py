import json
import os
import re

import pytest

from wfdual.analytics import BoundReport, BoundRow
from wfdual.cli import ConfigError, emit_plotdata, main, parse_config
from wfdual.model_config import rate_C

from conftest import DATA, config_path


def _write(tmp_path, text, name="c.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def _run(tmp_path, *argv, out="out"):
    out = str(tmp_path / out)
    return main(list(argv) + ["--out", out]), out


def test_minimal_config(tmp_path):
    cfg = parse_config(_write(tmp_path, "[lambda]\natom = 0.0, 1.0\n"))
    assert cfg.theta_a == cfg.theta_A == 0.0
    assert cfg.mu.is_zero() and cfg.nu.is_zero()
    assert all(b == 0 for b in cfg.selection.beta)


def test_shipped_kingman_mutation_config():
    assert rate_C(parse_config(config_path("kingman_mutation"))) == 2.0


def test_full_format(tmp_path):
    text = """
    # comment
    [lambda]
    atom = 0.0, 1.0
    atom = 0.5, 0.25   # trailing comment
    beta_density = 1.0, 2.0, 2.0
    [mu]
    beta_density = 0.5, 1.0, 3.0
    beta_side = -1
    [nu]
    atom = -0.3, 0.1
    [theta]
    theta_a = 0.2
    theta_A = 0.3
    [selection]
    kappa = 3
    beta_l = 2, 0.5
    beta_l = 3, 0.25
    p = 3, 1, 0.9
    """
    cfg = parse_config(_write(tmp_path, "\n".join(line.strip() for line in text.splitlines())))
    assert cfg.lam.atoms == ((0.0, 1.0), (0.5, 0.25)) and cfg.lam.beta == (1.0, 2.0, 2.0)
    assert cfg.mu.beta_side == -1 and cfg.nu.atoms == ((-0.3, 0.1),)
    assert (cfg.theta_a, cfg.theta_A) == (0.2, 0.3)
    assert cfg.selection.kappa == 3 and cfg.selection.beta[2:] == (0.5, 0.25)
    assert cfg.selection.p[3] == (0.0, 0.9, 2 / 3, 1.0)


@pytest.mark.parametrize("text,msg", [
    ("[lambda]\nweight = 1\n", "line 2: unknown key 'weight'"),
    ("[gamma]\n", "line 1: unknown section"),
    ("atom = 0, 1\n", "line 1: key 'atom' outside a section"),
    ("[lambda]\natom = 0\n", "line 2: atom expects 2"),
    ("[lambda]\natom = zero, 1\n", "line 2: atom expects numbers"),
    ("[theta]\ntheta_a = 1\ntheta_a = 2\n", "line 3: theta_a given twice"),
    ("[selection]\nkappa = 2\nbeta_l = 3, 1.0\n", "line 3: beta_l needs"),
    ("[lambda]\n[lambda]\n", "line 2: section [lambda] appears twice"),
    ("[lambda]\natom = 0.5, -1\n", "line 2: lambda: atom mass"),
    ("[mu]\natom = 0.0, 1\n", "line 2: mu({0}) must be 0"),
    ("[theta]\ntheta_A = -1\n", "line 2: theta_A"),
])
def test_parse_errors(tmp_path, text, msg):
    with pytest.raises(ConfigError, match=re.escape(msg)):
        parse_config(_write(tmp_path, text))


def test_bad_p0_file(tmp_path, capsys):
    with pytest.raises(ConfigError, match=r"line 8: selection: p_0 must be 0"):
        parse_config(os.path.join(DATA, "bad_p0.cfg"))
    code, _ = _run(tmp_path, "simulate", "--config", os.path.join(DATA, "bad_p0.cfg"))
    assert code == 2
    assert "p_0 must be 0" in capsys.readouterr().err


def test_usage_errors(tmp_path):
    assert _run(tmp_path, "simulate", "--config", config_path("full"), "--t-grid", "")[0] == 2
    assert _run(tmp_path, "simulate", "--config", config_path("full"), "--traj", "0")[0] == 2
    assert _run(tmp_path, "nonsense", "--config", config_path("full"))[0] == 2
    assert _run(tmp_path, "simulate", "--config", str(tmp_path / "missing.cfg"))[0] == 2
    # regime failure during a run
    assert _run(tmp_path, "siegmund", "--config", config_path("full"), "--traj", "5")[0] == 2


def test_duality_check_at_time_zero(tmp_path):
    code, out = _run(tmp_path, "duality-check", "--config", config_path("full"), "--t", "0",
                     "--traj", "20")
    assert code == 0
    lines = open(os.path.join(out, "duality.csv")).read().splitlines()
    assert lines[0] == "x,n,t,lhs,rhs,gap,se"
    assert all(float(line.split(",")[5]) == 0.0 for line in lines[1:])


def test_duality_check_siegmund(tmp_path):
    code, out = _run(tmp_path, "duality-check", "--config", config_path("coexistence"), "--dual",
                     "siegmund", "--t", "0", "--y-grid", "0.4,0.6", "--traj", "20")
    assert code == 0
    assert len(open(os.path.join(out, "duality.csv")).read().splitlines()) == 1 + 3 * 2


def test_recurrence_counterexample(tmp_path):
    code, out = _run(tmp_path, "recurrence", "--config", config_path("counterexample"), "--traj", "100",
                     "--targets", "0.5:0.2", "--window", "2", "--n-windows", "2")
    assert code == 0
    side = open(os.path.join(out, "recurrence_post_jump.csv")).read().splitlines()
    assert side[1].split(",")[2] == "0"
    head = open(os.path.join(out, "recurrence.csv")).read().splitlines()[0]
    assert head == "target,eta,window_start,window_end,frequency,n_traj"


@pytest.mark.parametrize("argv,files", [
    (["simulate", "--traj", "5", "--x-grid", "0.2,0.8", "--t-grid", "0.5"],
     ["endpoints_x0_t0.csv", "endpoints_x1_t0.csv"]),
    (["asg", "--traj", "3", "--n", "2"], ["asg_events.csv", "asg_coeffs.csv"]),
    (["scan-el1", "--traj", "20", "--n-max", "16"], ["scan_el1.csv"]),
])
def test_subcommands_write_outputs(tmp_path, argv, files):
    code, out = _run(tmp_path, *argv, "--config", config_path("full"))
    assert code == 0
    man = json.load(open(os.path.join(out, "manifest.json")))
    assert sorted(man["outputs"]) == sorted(files)
    assert man["subcommand"] == argv[0] and man["version"]


def test_siegmund_and_levy_outputs(tmp_path):
    code, out = _run(tmp_path, "siegmund", "--config", config_path("coexistence"), "--traj", "50",
                     "--t-grid", "1,2")
    assert code == 0
    lines = open(os.path.join(out, "absorption.csv")).read().splitlines()
    assert lines[0].startswith("y0,t,a,p_low") and len(lines) == 3
    code, out = _run(tmp_path, "levy", "--config", config_path("coexistence"), "--traj", "50", out="lv")
    assert code == 0 and os.path.exists(os.path.join(out, "levy.csv"))


def test_relduals_subcommand(tmp_path):
    code, out = _run(tmp_path, "relduals", "--config", config_path("relduals"), "--traj", "200",
                     "--n-list", "4", "--x-grid", "0.5", "--t-grid", "0.5")
    assert code in (0, 1)
    assert len(open(os.path.join(out, "relduals.csv")).read().splitlines()) == 2


def test_bounds_subcommand_and_plotdata(tmp_path):
    code, out = _run(tmp_path, "bounds", "--config", config_path("stationarity"), "--traj", "2000",
                     "--x-grid", "0,1", "--t-grid", "2,4,8")
    assert code == 0
    man = json.load(open(os.path.join(out, "manifest.json")))
    plot = os.path.join(out, "bounds_plot.csv")
    lines = open(plot).read().splitlines()
    assert lines[0] == "series,t,value"
    # two empirical series and one bound series, three times each
    assert len(lines) - 1 == 3 * 3
    from wfdual.cli import _sha256
    assert man["outputs"]["bounds_plot.csv"] == _sha256(plot)


def test_emit_plotdata_rows(tmp_path):
    rows = [BoundRow(0.5, t, "w1", 0.1, 0.01, 1.0, "pass") for t in (1.0, 2.0, 3.0)]
    emit_plotdata(BoundReport(rows, "bernstein", 1.0, 10.0), tmp_path / "p.csv")
    assert len((tmp_path / "p.csv").read_text().splitlines()) == 1 + 3 * 2
    with pytest.raises(ValueError):
        emit_plotdata(BoundReport([], "bernstein", 1.0, 10.0), tmp_path / "q.csv")


def test_manifest_reproducibility(tmp_path, monkeypatch):
    argv = ["simulate", "--config", config_path("full"), "--traj", "20", "--t-grid", "0.3,0.6"]
    monkeypatch.setenv("WFDUAL_SEED", "42")
    _, a = _run(tmp_path, *argv, out="a")
    _, b = _run(tmp_path, *argv, out="b")
    _, c = _run(tmp_path, *argv, "--seed", "43", out="c")
    ma, mb, mc = (json.load(open(os.path.join(d, "manifest.json"))) for d in (a, b, c))
    assert ma["seed"] == 42 and mc["seed"] == 43
    assert ma["outputs"] == mb["outputs"] and ma["config_hash"] == mb["config_hash"]
    assert ma["outputs"] != mc["outputs"]
