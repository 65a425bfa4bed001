import hashlib
import json
import os
import subprocess
import sys

import numpy as np

from guidedwaves import cli
from guidedwaves.bohmian import TrajectoryEnsemble
from guidedwaves.fieldsynth import FieldGrid
from guidedwaves.io_formats import (
    load_ensemble_index,
    load_wavefunction_csv,
    load_wavefunction_grid2d,
    save_ensemble,
    save_field_grid_csv,
    save_field_grid_raster,
    save_wavefunction_csv,
    save_wavefunction_grid2d,
)


def _toy_grid():
    axis0 = np.array([0.0, 1.0, 2.0])
    axis1 = np.array([-1.0, 0.0, 1.0, 2.0])
    values = (np.arange(12, dtype=float) - 4.0).reshape(3, 4) + 0.25j
    mask = np.zeros((3, 4), dtype=np.uint8)
    mask[0, 1] = 1  # cone exit
    mask[2, 3] = 2  # near singular
    mask[1, 2] = 3  # near-field fallback, still data
    values[mask == 1] = np.nan
    values[mask == 2] = np.nan
    return FieldGrid(("t", "x"), axis0, axis1, {"y": 0.0, "z": 0.0},
                     values, mask, provenance={"kind": "antisymmetric"})


def test_wavefunction_csv_roundtrip(tmp_path):
    x = np.linspace(-2.0, 2.0, 17)
    vals = np.exp(1j * x) / (1.0 + x * x)
    path = tmp_path / "psi.csv"
    save_wavefunction_csv(path, x, vals)
    x2, v2 = load_wavefunction_csv(path)
    assert np.array_equal(x2, x)
    assert np.array_equal(v2, vals)


def test_grid2d_roundtrip(tmp_path):
    rng = np.random.default_rng(5)
    vals = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
    base = tmp_path / "state"
    save_wavefunction_grid2d(base, vals, x0=-3.0, dx=0.75,
                             sidecar_extra={"label": "snapshot"})
    v2, meta = load_wavefunction_grid2d(base)
    assert np.array_equal(v2, vals)
    assert meta["origin"] == [-3.0]
    assert meta["spacing"] == 0.75
    assert meta["label"] == "snapshot"


def test_field_grid_csv_masks_both_components(tmp_path):
    grid = _toy_grid()
    path = tmp_path / "map.csv"
    save_field_grid_csv(path, grid)
    lines = path.read_text().splitlines()
    assert lines[0] == "axis1,axis2,re,im"
    assert len(lines) == 1 + grid.n_nodes
    # row-major order: node (0, 1) is the second data row
    assert lines[2].split(",")[2:] == ["nan", "nan"]
    # near-field node (1, 2) keeps its value
    row = lines[1 + 4 + 2].split(",")
    assert float(row[2]) == grid.values[1, 2].real


def test_raster_linear_and_renormalized_differ(tmp_path):
    grid = _toy_grid()
    p_lin = save_field_grid_raster(tmp_path / "lin", grid, mapping="linear")
    p_ren = save_field_grid_raster(tmp_path / "ren", grid,
                                   mapping="renormalized")
    lin = open(p_lin, "rb").read()
    ren = open(p_ren, "rb").read()
    assert lin.startswith(b"P5\n4 3\n255\n")
    assert lin[lin.index(b"255\n") + 4:] != ren[ren.index(b"255\n") + 4:]
    meta = json.loads((tmp_path / "lin.json").read_text())
    for key in ("mapping", "vmin", "vmax", "axis_names", "mask_counts",
                "provenance"):
        assert key in meta
    assert meta["mapping"] == "linear"
    assert meta["axis_names"] == ["t", "x"]


def test_raster_color_marks_masked_red(tmp_path):
    grid = _toy_grid()
    path = save_field_grid_raster(tmp_path / "img", grid, color=True)
    raw = open(path, "rb").read()
    assert raw.startswith(b"P6\n4 3\n255\n")
    pix = np.frombuffer(raw[raw.index(b"255\n") + 4:],
                        dtype=np.uint8).reshape(3, 4, 3)
    assert tuple(pix[0, 1]) == (255, 0, 0)
    assert tuple(pix[2, 3]) == (255, 0, 0)
    # unmasked pixels stay gray (equal channels)
    assert pix[1, 2, 0] == pix[1, 2, 1] == pix[1, 2, 2]


def _toy_ensemble():
    t = np.linspace(0.0, 1.0, 5)
    pos = np.vstack([t, -t, 2.0 + 0.0 * t])
    pos[2, 3:] = np.nan  # stalled after the third snapshot
    return TrajectoryEnsemble(
        t=t,
        positions=pos,
        flags=np.array([0, 0, 1], dtype=np.int8),
        stall_times=np.array([np.nan, np.nan, 0.5]),
        initial_positions=pos[:, 0].copy(),
        seed=42,
        model_fingerprint="abc123",
        config={"tol": 1e-8},
        stats={"n_steps": 10},
    )


def test_ensemble_save_and_index(tmp_path):
    ens = _toy_ensemble()
    outdir = tmp_path / "traj"
    save_ensemble(outdir, ens, axis=0)
    index = load_ensemble_index(outdir)
    assert index["n_trajectories"] == 3
    assert index["seed"] == 42
    assert index["flags"] == [0, 0, 1]
    assert index["stall_times"][2] == 0.5
    assert index["files"] == ["trajectory_0.csv", "trajectory_1.csv",
                              "trajectory_2.csv"]
    # stalled trajectory truncates at its last finite sample
    lines = (outdir / "trajectory_2.csv").read_text().splitlines()
    assert len(lines) == 1 + 3
    full = (outdir / "trajectory_0.csv").read_text().splitlines()
    assert len(full) == 1 + 5
    assert full[1].split(",")[:3] == ["0.0", "0.0", "0.0"]


def _run_cli(args, env_extra=None, cwd="/root/pkg"):
    env = dict(os.environ)
    if env_extra:
        env.update(env_extra)
    return subprocess.run(
        [sys.executable, "-m", "guidedwaves.cli", *args],
        capture_output=True, text=True, env=env, cwd=cwd,
    )


def test_cli_rest_wavelet_run_and_metadata(tmp_path):
    out = tmp_path / "run"
    proc = _run_cli(["--scenario", "rest-wavelet", "--out", str(out),
                     "--grid", "41x41"])
    assert proc.returncode == 0, proc.stderr
    for name in ("map.csv", "map.pgm", "map.json", "resolved_config.json",
                 "metadata.json", "summary.json"):
        assert (out / name).exists(), name
    echo = (out / "resolved_config.json").read_bytes()
    meta = json.loads((out / "metadata.json").read_text())
    assert meta["config_hash"] == hashlib.sha256(echo).hexdigest()
    assert meta["scenario"] == "rest-wavelet"
    resolved = json.loads(echo)
    assert resolved["grid"] == [41, 41]
    summary = json.loads((out / "summary.json").read_text())
    rel = abs(summary["peak_abs"] - summary["peak_abs_expected"])
    assert rel / summary["peak_abs_expected"] < 1e-3


def test_cli_runs_are_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        proc = _run_cli(["--scenario", "rest-wavelet", "--out", str(out),
                         "--grid", "41x41"])
        assert proc.returncode == 0, proc.stderr
    for name in ("map.csv", "map.pgm", "summary.json", "metadata.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes(), name


def test_cli_backend_fallback_agrees(tmp_path):
    a, b = tmp_path / "numba", tmp_path / "numpy"
    pa = _run_cli(["--scenario", "rest-wavelet", "--out", str(a),
                   "--grid", "41x41"])
    pb = _run_cli(["--scenario", "rest-wavelet", "--out", str(b),
                   "--grid", "41x41"],
                  env_extra={"GUIDEDWAVES_BACKEND": "numpy"})
    assert pa.returncode == 0 and pb.returncode == 0
    assert json.loads((b / "metadata.json").read_text())["backend"] == "numpy"
    va = np.genfromtxt(a / "map.csv", delimiter=",", skip_header=1)
    vb = np.genfromtxt(b / "map.csv", delimiter=",", skip_header=1)
    both = np.isfinite(va[:, 2]) & np.isfinite(vb[:, 2])
    assert np.array_equal(np.isfinite(va[:, 2]), np.isfinite(vb[:, 2]))
    assert np.max(np.abs(va[both, 2:] - vb[both, 2:])) < 1e-12


def test_cli_rejects_unknown_config_key(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"omega_zero": 2.0}))
    proc = _run_cli(["--scenario", "rest-wavelet", "--out",
                     str(tmp_path / "o"), "--config", str(cfg)])
    assert proc.returncode == 1
    assert "omega_zero" in proc.stderr


def test_cli_rejects_bad_grid_argument(tmp_path):
    proc = _run_cli(["--scenario", "rest-wavelet", "--out",
                     str(tmp_path / "o"), "--grid", "41by41"])
    assert proc.returncode == 1


def test_cli_mask_budget_exit_code(tmp_path):
    # a worldline active only on [-1, 1] leaves most of the 8-extent map
    # outside the double cone, so the hard-masked share tops the budget
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"t_span": [-1.0, 1.0], "mask_budget": 0.05}))
    proc = _run_cli(["--scenario", "rest-wavelet", "--out",
                     str(tmp_path / "o"), "--config", str(cfg),
                     "--grid", "41x41"])
    assert proc.returncode == 3
    assert "exceeds budget" in proc.stderr


def test_cli_exit_two_on_failed_verification(tmp_path, monkeypatch):
    monkeypatch.setitem(cli.SCENARIOS, "rest-wavelet",
                        lambda cfg, outdir: None)
    code = cli.main(["--scenario", "rest-wavelet", "--out",
                     str(tmp_path / "o")])
    assert code == 2
