import json
import subprocess
import sys

import numpy as np
import pytest

import cgdg.operators
from cgdg.cli import PRESET_NAMES, main
from cgdg.mesh import read_mesh

SMALL = [
    "--set", "mesh.nx=4", "--set", "mesh.ny=4", "--set", "scheme.degree=1",
    "--set", "time.t_end=0.01", "--set", "diagnostics.every=1",
]


@pytest.mark.parametrize("preset", PRESET_NAMES)
def test_dry_run_prints_resolved_config(preset, capsys):
    assert main(["run", preset, "--dry-run"]) == 0
    manifest = json.loads(capsys.readouterr().out)
    assert manifest["status"] == "dry-run"
    assert manifest["config"]["preset"] == preset


def test_config_error_exit_code(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("[scheme]\ndegree = 9\n")
    assert main(["run", str(cfg)]) == 2
    assert "bad.cfg:2" in capsys.readouterr().err


def test_meshgen_writes_readable_mesh(tmp_path, capsys):
    out = tmp_path / "m.mesh"
    assert main(["meshgen", "--nx", "5", "--ny", "4", "--perturb", "0.1", "--seed", "2", "-o", str(out)]) == 0
    mesh = read_mesh(out)
    assert mesh.n_cells == 40 and mesh.periodic
    assert "40 triangles" in capsys.readouterr().out


def test_meshgen_rejects_bad_size(tmp_path):
    assert main(["meshgen", "--nx", "1", "--ny", "4", "-o", str(tmp_path / "m.mesh")]) == 2


def test_run_writes_outputs(tmp_path):
    out = tmp_path / "run"
    assert main(["run", "acoustic-explosion", "-o", str(out), *SMALL, "--set", "diagnostics.points=0.13 0.21"]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["status"] == "ok"
    for rel in manifest["outputs"]:
        assert (out / rel).exists()
    assert "residuals.csv" in manifest["outputs"] and "solution.vtk" in manifest["outputs"]
    assert (out / "solution.vtk").read_text().startswith("# vtk DataFile")
    assert manifest["maxima"]["point0_p"] <= 1e-11


def test_run_is_byte_identical(tmp_path):
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(["run", "maxwell-explosion", "-o", str(out), *SMALL]) == 0
        outs.append(out)
    a, b = outs
    for rel in json.loads((a / "manifest.json").read_text())["outputs"]:
        assert (a / rel).read_bytes() == (b / rel).read_bytes(), rel


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_run_failure_keeps_snapshot(tmp_path, capsys):
    out = tmp_path / "boom"
    code = main(["run", "acoustic-explosion", "-o", str(out), *SMALL, "--set", "time.dt=10", "--set", "time.t_end=1e6",
                 "--set", "time.integrator=euler", "--set", "time.max_steps=400"])
    assert code == 1
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["status"] == "failed" and "snapshot.npy" in manifest["outputs"]
    assert np.load(out / "snapshot.npy").ndim == 3


def test_verify_quick_passes(capsys):
    assert main(["verify", "--quick"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[-1].endswith("checks passed")
    assert not any(line.startswith("FAIL") for line in lines)


def test_verify_catches_sign_error(monkeypatch, capsys):
    """A deliberately wrong curl must make the invariant suite fail."""
    original = cgdg.operators._curl_from_grad

    def broken(g):
        if g.shape[-2] == 2:
            return g[..., 1, 0] + g[..., 0, 1]
        return original(g)

    monkeypatch.setattr(cgdg.operators, "_curl_from_grad", broken)
    assert main(["verify", "--quick"]) == 1
    out = capsys.readouterr().out
    assert any(line.startswith("FAIL") and "schwarz_curl_grad" in line for line in out.splitlines())


def test_convergence_baseline(tmp_path, capsys):
    out = tmp_path / "conv"
    code = main(["convergence", "--degrees", "1", "--meshes", "10", "20", "--steps", "0", "-o", str(out)])
    assert code == 0
    assert (out / "convergence_u_N1.csv").read_text().startswith("Nx,err_rho")
    assert main(["convergence", "--preset", "sod-circular", "-o", str(out)]) == 2


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "cgdg.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "verify" in res.stdout
