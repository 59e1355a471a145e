import hashlib
import subprocess
import sys

import pytest

from ebt_radial.cli import ConfigError, main, parse_config_text, serialize_config
from ebt_radial.measures import read_csv
from ebt_radial.scheme import init_masses

BASE = """\
# test config
dimension={dim}
sigma=0.04
alpha=0.5
r0=2
{step}
t_end={t_end}
init_sigma_i=0.79   # support of the initial density
init_q=13
init_rule=point
"""


def write_cfg(tmp_path, name="c.cfg", dim=3, step="dt=0.02", t_end=1.0, extra=""):
    p = tmp_path / name
    p.write_text(BASE.format(dim=dim, step=step, t_end=t_end) + extra)
    return p


def test_parse_n_or_dt():
    a = parse_config_text(BASE.format(dim=3, step="n=100", t_end=1.0))
    b = parse_config_text(BASE.format(dim=3, step="dt=0.02", t_end=1.0))
    assert a.scheme == b.scheme and a.scheme.n == 100
    for bad in ("", "n=100\ndt=0.02"):
        with pytest.raises(ConfigError):
            parse_config_text(BASE.format(dim=3, step=bad, t_end=1.0))


@pytest.mark.parametrize("text", ["dt=0.02\nfoo=1", "dt=0.02\nsigma", "dt=0.02\nsigma=abc",
                                  "dt=0.02\nmetric.ground=taxicab", "dt=0.02\ndt=0.01",
                                  "dt=0.03", "dt=0.02\nt_end=0.03", "dt=0.02\nsnapshots=20"])
def test_parse_errors(text):
    with pytest.raises(ConfigError):
        parse_config_text(text)


def test_config_roundtrip():
    cfg = parse_config_text(BASE.format(dim=2, step="n=250", t_end=3.0)
                            + "metric.ground=euclid\nsnapshots=0,1.5\nmemory_budget_bytes=1000\n")
    again = parse_config_text(serialize_config(cfg))
    assert again == cfg
    assert parse_config_text(serialize_config(again)) == cfg


def test_simulate_t0_equals_initial(tmp_path):
    cfg = write_cfg(tmp_path, t_end=0.0)
    out = tmp_path / "o"
    assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
    mu = read_csv(out / "final.csv")
    want = init_masses(parse_config_text(cfg.read_text()).scheme).measure()
    assert mu == want


def test_simulate_outputs_and_manifest(tmp_path):
    cfg = write_cfg(tmp_path, extra="snapshots=0,0.5\n")
    out = tmp_path / "o"
    assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
    names = sorted(p.name for p in out.iterdir())
    assert "final.csv" in names and "plot.gp" in names and "manifest.txt" in names
    assert sum(n.startswith("snapshot_") for n in names) == 2
    manifest = dict(line.split("=", 1) for line in (out / "manifest.txt").read_text().splitlines()
                    if line and not line.startswith("#"))
    assert manifest["config.n"] == "100" and manifest["diag.steps"] == "50"
    for name in names:
        if name == "manifest.txt":
            continue
        digest = hashlib.sha256((out / name).read_bytes()).hexdigest()
        assert manifest[f"sha256.{name}"] == digest
    # the manifest is the newest file
    newest = max(out.iterdir(), key=lambda p: p.stat().st_mtime_ns)
    assert newest.name == "manifest.txt"
    lines = (out / "final.csv").read_text().splitlines()
    assert lines[0] == "index,x,mass" and len(lines) == 101


def test_simulate_deterministic(tmp_path):
    cfg = write_cfg(tmp_path)
    for d in ("a", "b"):
        assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / d)]) == 0
    assert (tmp_path / "a/final.csv").read_bytes() == (tmp_path / "b/final.csv").read_bytes()


def test_simulate_error_codes(tmp_path):
    assert main(["simulate", "--config", str(tmp_path / "missing.cfg"), "--out", str(tmp_path)]) == 1
    bad = write_cfg(tmp_path, "bad.cfg", step="dt=0.02\nn=100")
    assert main(["simulate", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
    unstable = tmp_path / "u.cfg"
    unstable.write_text(BASE.format(dim=3, step="dt=0.02", t_end=1.0).replace("alpha=0.5", "alpha=5000"))
    assert main(["simulate", "--config", str(unstable), "--out", str(tmp_path / "o")]) == 3
    blocker = tmp_path / "file"
    blocker.write_text("")
    good = write_cfg(tmp_path, "g.cfg")
    assert main(["simulate", "--config", str(good), "--out", str(blocker / "sub")]) == 1
    assert main(["simulate"]) == 2
    assert main(["frobnicate"]) == 2


def test_convergence_cli(tmp_path, capsys):
    cfg = write_cfg(tmp_path, dim=2)
    assert main(["convergence", "--config", str(cfg), "--levels", "0.02",
                 "--out", str(tmp_path / "x")]) == 2
    assert main(["convergence", "--config", str(cfg), "--levels", "0.02,0.011",
                 "--out", str(tmp_path / "x")]) == 2
    capsys.readouterr()
    out = tmp_path / "t" / "table.csv"
    assert main(["convergence", "--config", str(cfg), "--levels", "0.04,0.02,0.01",
                 "--out", str(out), "--threads", "2"]) == 0
    printed = capsys.readouterr().out
    assert "Err(dt)" in printed
    lines = out.read_text().splitlines()
    assert lines[0] == "dt,n,err,q,err_euclid,q_euclid" and len(lines) == 3
    assert (tmp_path / "t" / "table.gp").exists() and (tmp_path / "t" / "table.manifest.txt").exists()


def test_convergence_into_directory(tmp_path):
    cfg = write_cfg(tmp_path)
    d = tmp_path / "dir"
    assert main(["convergence", "--config", str(cfg), "--levels", "0.04,0.02",
                 "--out", str(d)]) == 0
    assert (d / "convergence.csv").read_text().startswith("dt,n,err,q\n")


def test_validate(capsys):
    assert main(["validate", "reduction", "--seed", "1"]) == 0
    assert "PASS" in capsys.readouterr().out
    assert main(["validate", "nonsense"]) == 2
    assert main(["validate", "kernels", "--seed", "x"]) == 2


def test_validate_failure_exit(monkeypatch):
    from ebt_radial import cli, validation

    def broken(seed):
        rep = validation.SuiteReport("broken", seed)
        rep.checks.append(validation.CheckResult("always", 1, 1))
        return rep

    monkeypatch.setitem(cli.SUITES, "kernels", broken)
    assert main(["validate", "kernels"]) == 4


def test_console_script_module():
    res = subprocess.run([sys.executable, "-m", "ebt_radial.cli", "--version"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.strip()
