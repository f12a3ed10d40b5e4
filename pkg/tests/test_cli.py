import json
import subprocess
import sys

import numpy as np
import pytest

from pmmatch.cli import grid_lines, main, read_trajectory
from pmmatch.config import ConfigError, default_config_text, parse_config
from pmmatch.mesh import MeshConfig
from pmmatch.shape import read_curve, read_vectors, write_curve

SMALL = """
[mesh]
m = 32
[time]
steps = {steps}
[source]
n_p = 40
[target]
kind = {target}
params = {params}
n_p = 40
[optimizer]
max_iters = {iters}
"""


def config(tmp_path, name="run.ini", steps=5, target="ellipse", params="1.1,0.6", iters=10,
           extra=""):
    path = tmp_path / name
    path.write_text(SMALL.format(steps=steps, target=target, params=params, iters=iters) + extra)
    return path


def read_csv(path):
    return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)


def test_default_config_parses(capsys):
    assert main(["default-config"]) == 0
    cfg = parse_config(capsys.readouterr().out)
    assert cfg.mesh.mx == 128 and cfg.norm.alpha == 0.4 and cfg.norm.power == 2
    assert cfg.kernel.power == 2 and cfg.source.n_p == 420
    assert cfg.snapshots == (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)
    assert parse_config(default_config_text()).grid.N == 20


@pytest.mark.parametrize("text,needle", [
    ("[mesh]\nsize = 3\n", "size"),
    ("[meshes]\nm = 3\n", "meshes"),
    ("[mesh]\nm = abc\n", "m"),
    ("[mesh]\nm = 4\n", "8"),
    ("[source]\nkind = star\n", "kind"),
    ("[optimizer]\nmethod = lbfgs\n", "method"),
    ("[output]\nsnapshots = 0,2\n", "snapshots"),
    ("[norm]\nalpha = nan\n", "alpha"),
])
def test_config_errors(text, needle):
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert needle in str(exc.value)


def test_unknown_key_exit_code(tmp_path, capsys):
    path = tmp_path / "bad.ini"
    path.write_text("[mesh]\nmm = 32\n")
    assert main(["match", str(path)]) == 1
    assert "mm" in capsys.readouterr().err


def test_match_source_equals_target(tmp_path):
    path = config(tmp_path, target="circle", params="0.8")
    out = tmp_path / "out"
    assert main(["match", str(path), "-o", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["final_objective"] == 0.0
    assert summary["iterations"] == 0
    assert summary["converged"] is True
    history = read_csv(out / "history.csv")
    assert history.shape == (1, 3)


def test_match_writes_outputs(tmp_path):
    path = config(tmp_path, iters=30)
    out = tmp_path / "out"
    code = main(["match", str(path), "-o", str(out)])
    assert code in (0, 3)
    summary = json.loads((out / "summary.json").read_text())
    assert summary["reduction_factor"] > 10
    assert summary["relabel_drift_max"] <= 1e-10
    assert (out / "history.csv").read_text().startswith("iter,objective,grad_norm\n")
    for t in ("0", "0.2", "0.4", "0.6", "0.8", "1"):
        assert len(read_curve(out / f"curve_t{t}.csv")) == 40
        assert read_vectors(out / f"momentum_t{t}.csv", header=("px", "py")).shape == (40, 2)
        assert read_vectors(out / f"dQ_t{t}.csv", header=("dx", "dy")).shape == (40, 2)
    cons = (out / "conservation.csv").read_text().splitlines()
    assert cons[0] == "step,hamiltonian,relabel_drift,tangential_max"
    assert len(cons) == 7
    traj = read_trajectory(out)
    assert traj.velocities.shape == (5, 32, 32, 2)


def test_nonconvergence_exit_code(tmp_path):
    path = config(tmp_path, iters=1)
    out = tmp_path / "out"
    assert main(["match", str(path), "-o", str(out)]) == 3
    summary = json.loads((out / "summary.json").read_text())
    assert summary["converged"] is False


def test_missing_curve_file(tmp_path, capsys):
    path = config(tmp_path)
    text = path.read_text().replace("[source]\n", "[source]\nfile = nowhere.csv\n")
    path.write_text(text)
    assert main(["match", str(path)]) == 1
    assert str(tmp_path / "nowhere.csv") in capsys.readouterr().err


def test_curve_file_source(tmp_path):
    from pmmatch.shape import make_shape
    write_curve(make_shape("circle", 0.8, 30), tmp_path / "src.csv")
    path = config(tmp_path, target="circle", params="0.8")
    path.write_text(path.read_text().replace("[source]\n", "[source]\nfile = src.csv\n")
                    .replace("[target]\nkind = circle\nparams = 0.8\nn_p = 40",
                             "[target]\nfile = src.csv"))
    out = tmp_path / "out"
    assert main(["match", str(path), "-o", str(out)]) == 0
    assert json.loads((out / "summary.json").read_text())["n_source"] == 30


def _momentum_file(path, P):
    path.write_text("px,py\n" + "".join(f"{x:.17g},{y:.17g}\n" for x, y in P))


def test_forward_zero_momentum(tmp_path):
    path = config(tmp_path)
    mom = tmp_path / "p.csv"
    _momentum_file(mom, np.zeros((40, 2)))
    out = tmp_path / "fwd"
    assert main(["forward", str(path), "--momentum", str(mom), "-o", str(out)]) == 0
    first = read_curve(out / "curve_t0.csv").points
    for t in ("0.2", "0.4", "0.6", "0.8", "1"):
        np.testing.assert_array_equal(read_curve(out / f"curve_t{t}.csv").points, first)

    grid = tmp_path / "grid"
    assert main(["deform-grid", str(out), "--spacing", "0.5", "-o", str(grid)]) == 0
    assert (grid / "gridlines_initial.csv").read_bytes() == (grid / "gridlines_final.csv").read_bytes()


def test_forward_random_momentum_conservation(tmp_path, rng):
    P = 0.01 * rng.standard_normal((40, 2))
    mom = tmp_path / "p.csv"
    _momentum_file(mom, P)
    drift = {}
    for steps in (20, 40):
        path = config(tmp_path, name=f"f{steps}.ini", steps=steps)
        out = tmp_path / f"fwd{steps}"
        assert main(["forward", str(path), "--momentum", str(mom), "-o", str(out)]) == 0
        cons = read_csv(out / "conservation.csv")
        assert cons.shape == (steps + 1, 4)
        assert np.max(cons[:, 2]) <= 1e-10
        H = cons[:, 1]
        drift[steps] = np.max(np.abs(H - H[0]))
    assert 1.6 <= drift[20] / drift[40] <= 2.4


def test_forward_length_mismatch(tmp_path, capsys):
    mom = tmp_path / "p.csv"
    _momentum_file(mom, np.zeros((7, 2)))
    assert main(["forward", str(config(tmp_path)), "--momentum", str(mom)]) == 1
    assert "7 rows" in capsys.readouterr().err


def test_deform_grid_errors(tmp_path, capsys):
    assert main(["deform-grid", str(tmp_path / "none")]) == 1
    mom = tmp_path / "p.csv"
    _momentum_file(mom, np.zeros((40, 2)))
    out = tmp_path / "fwd"
    main(["forward", str(config(tmp_path)), "--momentum", str(mom), "-o", str(out)])
    assert main(["deform-grid", str(out), "--spacing", "100"]) == 1
    assert "spacing" in capsys.readouterr().err


def test_grid_lines_layout():
    mesh = MeshConfig.square(16, 2.0)
    ids, pts = grid_lines(mesh, 0.5, resolution=0.25)
    assert len(np.unique(ids)) == 8
    assert pts.shape == (8 * 9, 2)
    with pytest.raises(ConfigError):
        grid_lines(mesh, 0.0)


def test_deterministic_outputs(tmp_path):
    path = config(tmp_path, iters=5)
    a, b = tmp_path / "a", tmp_path / "b"
    main(["match", str(path), "-o", str(a)])
    main(["match", str(path), "-o", str(b)])
    files = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
    assert files
    for rel in files:
        assert (a / rel).read_bytes() == (b / rel).read_bytes(), rel


def test_check_command(capsys):
    assert main(["check"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines and all(line.startswith("PASS") for line in lines)


def test_console_script(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "pmmatch.cli", "--version"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "pmmatch" in proc.stdout


@pytest.mark.slow
def test_default_config_match(tmp_path, capsys):
    main(["default-config"])
    path = tmp_path / "default.ini"
    path.write_text(capsys.readouterr().out)
    out = tmp_path / "out"
    assert main(["match", str(path), "-o", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["n_source"] == 420 and summary["mesh"]["m"] == 128
    assert summary["reduction_factor"] >= 100
    assert summary["relabel_drift_max"] <= 1e-10
