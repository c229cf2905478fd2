import csv
import json
import subprocess
import sys
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from auxinbif import SPEC_VERSION, __version__
from auxinbif.cli import main
from auxinbif.model import preset


def run(tmp_path, *argv):
    code = main([*argv, "--out", str(tmp_path)])
    manifest = json.loads((tmp_path / "manifest.json").read_text()) if (tmp_path / "manifest.json").exists() else None
    return code, manifest


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_version():
    out = subprocess.run([sys.executable, "-m", "auxinbif.cli", "--version"], capture_output=True, text=True)
    assert out.returncode == 0
    assert out.stdout.strip() == f"auxinbif {__version__} (spec {SPEC_VERSION})"


def test_trivial_m2(tmp_path, capsys):
    code, manifest = run(tmp_path, "trivial", "--preset", "M2", "--cells", "20", "--dump-matrices")
    assert code == 0
    report = json.loads((tmp_path / "trivial.json").read_text())
    assert report["a_star"] == pytest.approx(2.283882, abs=1e-6)
    assert report["stability"] == "Unstable"
    assert "a* = 2.283882" in capsys.readouterr().out
    jac = np.array(json.loads((tmp_path / "jacobian.json").read_text()))
    assert jac.shape == (40, 40)
    assert len(json.loads((tmp_path / "spectrum.json").read_text())) == 40
    assert manifest["exit_code"] == 0 and manifest["version"] == __version__
    assert {o["path"] for o in manifest["outputs"]} == {"trivial.json", "jacobian.json", "spectrum.json"}
    assert manifest["config"]["params"]["rho_iaa"] == 0.75


@pytest.mark.parametrize("extra", [["--preset", "M1", "--set", "t=0.5"], ["--preset", "M2", "--set", "omega=0"]])
def test_trivial_stable(tmp_path, extra):
    code, _ = run(tmp_path, "trivial", *extra)
    assert code == 0
    assert json.loads((tmp_path / "trivial.json").read_text())["stability"] == "Stable"


def test_params_file_and_precedence(tmp_path):
    prm = tmp_path / "p.json"
    prm.write_text(json.dumps({**preset("M1").to_dict(), "t": 0.5}))
    code, manifest = run(tmp_path, "trivial", "--params", str(prm), "--set", "t=0.7")
    assert code == 0
    assert manifest["config"]["params"]["t"] == 0.7
    assert manifest["config"]["params"]["rho_iaa"] == 1.5


@pytest.mark.parametrize(
    "argv",
    [
        ["trivial", "--set", "bogus=1"],
        ["trivial", "--set", "t=abc"],
        ["trivial", "--set", "mu_iaa=-1"],
        ["trivial", "--cells", "1"],
        ["trivial", "--params", "/nonexistent/params.json"],
        ["trivial", "--preset", "M9"],
        ["simulate", "--t-end", "-1"],
        ["simulate", "--from", "/nonexistent/state.json"],
        ["continue", "--window", "0.1:2"],
        ["continue", "--window", "5:1"],
        ["continue", "--param", "nope"],
        ["atlas", "--x", "t:0:1:3", "--y", "t:0:1:3"],
        ["atlas", "--x", "t:1:0:3", "--y", "d:0:1:3"],
    ],
)
def test_config_errors_exit_2(tmp_path, argv):
    code = main([*argv, "--out", str(tmp_path)])
    assert code == 2


def test_blow_up_exit_3(tmp_path):
    code, manifest = run(tmp_path, "simulate", "--preset", "M1", "--set", "t=200", "--set", "d=0", "--dt", "1", "--t-end", "50", "--stride", "1")
    assert code == 3
    assert manifest["errors"] and "t =" in manifest["errors"][0]
    rows = read_csv(tmp_path / "trajectory.csv")
    assert len(rows) >= 2


def test_continuation_failure_exit_4(tmp_path):
    state = tmp_path / "bad.json"
    state.write_text(json.dumps({"u": [-5.0] * 40}))
    code, manifest = run(tmp_path, "continue", "--preset", "M1", "--from", str(state), "--window", "0.1:6")
    assert code == 4
    assert manifest["errors"][0].startswith("start point")


def test_one_step_simulation(tmp_path):
    code, _ = run(tmp_path, "simulate", "--t-end", "0.01")
    assert code == 0
    rows = read_csv(tmp_path / "trajectory.csv")
    assert rows[0] == ["t"] + [f"p_{i}" for i in range(22)] + [f"a_{i}" for i in range(1, 21)]
    assert len(rows) == 3
    assert float(rows[2][0]) == pytest.approx(0.01)


def test_simulate_svg_matches_csv(tmp_path):
    code, _ = run(tmp_path, "simulate", "--preset", "M1", "--t-end", "10", "--svg")
    assert code == 0
    rows = read_csv(tmp_path / "trajectory.csv")[1:]
    root = ET.parse(tmp_path / "spacetime.svg").getroot()
    rendered = {e.get("data-row") for e in root.iter() if e.get("class") == "sample"}
    assert len(rendered) == len(rows) == 101
    final = json.loads((tmp_path / "final_state.json").read_text())
    assert np.allclose(final["a"], [float(v) for v in rows[-1][23:]], rtol=0, atol=0)


def test_manifest_hashes_reproduce(tmp_path):
    first, second = tmp_path / "a", tmp_path / "b"
    argv = ["continue", "--preset", "M1", "--set", "t=0.8", "--window", "0.5:1.2", "--svg"]
    code1, m1 = run(first, *argv)
    code2, m2 = run(second, *argv)
    assert code1 == code2 == 0
    assert m1["outputs"] == m2["outputs"]
    assert len(m1["outputs"]) == 3


def test_continue_switch_svg_matches_csv(tmp_path):
    code, manifest = run(tmp_path, "continue", "--preset", "M1", "--window", "0.1:6", "--switch", "--svg")
    assert code == 0
    files = sorted(tmp_path.glob("branch_*.csv"))
    assert len(files) >= 2
    rows = sum(len(read_csv(f)) - 1 for f in files)
    root = ET.parse(tmp_path / "branches.svg").getroot()
    lines = [e for e in root.iter() if e.get("class") == "branch"]
    vertices = sum(len(e.get("points").split()) for e in lines)
    assert vertices == rows
    assert any(e.get("stroke-dasharray") for e in lines)
    events = json.loads((tmp_path / "events.json").read_text())["events"]
    trivial_bps = [e["lambda"] for e in events if e["branch"] == 0 and e["kind"] == "BranchPoint"]
    assert min(abs(v - 0.8983) for v in trivial_bps) <= 0.01
    assert any(e["kind"] == "LimitPoint" for e in events if e["branch"] > 0)
    header = read_csv(files[0])[0]
    assert header == ["index", "lambda", "a_probe", "stable", "unstable_count", "dlambda_ds"]


def test_omega_continuation_from_state_file(tmp_path):
    sim = tmp_path / "sim"
    code, _ = run(sim, "simulate", "--preset", "M1", "--set", "t=1.5", "--t-end", "400", "--stride", "1000")
    assert code == 0
    cont = tmp_path / "cont"
    code, _ = run(cont, "continue", "--preset", "M1", "--set", "t=1.5", "--set", "omega=1", "--param", "omega",
                  "--window", "0:1", "--from", str(sim / "final_state.json"))
    assert code == 0
    events = json.loads((cont / "events.json").read_text())["events"]
    assert min(abs(e["lambda"] - 0.1424) for e in events if e["kind"] == "LimitPoint") <= 0.01


def test_tile_start(tmp_path):
    sim = tmp_path / "sim"
    run(sim, "simulate", "--preset", "M1", "--t-end", "200", "--stride", "1000")
    cont = tmp_path / "cont"
    code, manifest = run(cont, "continue", "--preset", "M1", "--from", f"tile:{sim / 'final_state.json'}:2",
                         "--relax", "50", "--window", "3.4:3.6")
    assert code == 0
    event_u = json.loads((cont / "events.json").read_text())
    rows = read_csv(cont / "branch_0.csv")
    assert len(rows) > 5
    assert manifest["config"]["start"].startswith("tile:")
    assert event_u["probe_cell"] == 6
    code = main(["continue", "--from", "tile:x.json", "--out", str(cont)])
    assert code == 2


def test_atlas_outputs(tmp_path):
    code, manifest = run(tmp_path, "atlas", "--x", "rho_iaa:0.01:3:8", "--y", "t:0.1:20:6", "--boundary-types", "--svg", "--jobs", "1")
    assert code == 0
    rows = read_csv(tmp_path / "grid.csv")
    assert len(rows) == 7 and len(rows[0]) == 9
    root = ET.parse(tmp_path / "atlas.svg").getroot()
    cells = [e for e in root.iter() if e.get("class") == "cell"]
    assert len(cells) == 48
    stable = sum(int(c) == 1 for r in rows[1:] for c in r[1:])
    assert sum(e.get("fill") == "#b0b0b0" for e in cells) == stable
    kinds = {r[2] for r in read_csv(tmp_path / "boundary.csv")[1:]}
    assert kinds <= {"BranchPoint", "Hopf", "unresolved"}


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("AUXINBIF_OUT", str(tmp_path / "env"))
    assert main(["trivial"]) == 0
    assert (tmp_path / "env" / "trivial.json").exists()
    assert (tmp_path / "env" / "manifest.json").exists()


def test_orbit_command(tmp_path):
    code, _ = run(tmp_path, "simulate", "--preset", "M3", "--set", "t=23.5", "--amplitude", "0.02", "--t-end", "1200", "--orbit")
    assert code == 0
    orbit = json.loads((tmp_path / "orbit.json").read_text())
    assert orbit["converged"] is True
    assert orbit["period"] == pytest.approx(15.195, abs=0.01)
    phase = read_csv(tmp_path / "phase.csv")
    assert phase[0] == ["t", "a_probe", "da_probe_dt"]
    assert len(phase) - 1 == len(read_csv(tmp_path / "trajectory.csv")) - 1


@pytest.mark.xfail(strict=True, reason="at t_end=600 the orbit is still settling; see decisions ledger")
def test_orbit_command_short_run(tmp_path):
    run(tmp_path, "simulate", "--preset", "M3", "--set", "t=23.5", "--amplitude", "0.02", "--t-end", "600", "--orbit")
    assert json.loads((tmp_path / "orbit.json").read_text())["converged"] is True
