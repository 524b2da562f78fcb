import csv
import hashlib
import json
import math
from pathlib import Path

import numpy as np
import pytest

from stochshape.cli import main
from stochshape.diffusion import ShapeCoefficients
from stochshape.harmonics import build_grid, inverse_sht
from stochshape.mesh import icosahedron, load_mesh, save_mesh


def tree_digest(root: Path) -> dict:
    return {str(p.relative_to(root)): hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(root.rglob("*")) if p.is_file()}


def write_config(tmp_path, doc, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


def read_stats(out: Path):
    with open(out / "stats.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    return rows


# -- simulate ---------------------------------------------------------------


def test_sphere_zero_diffusion_frames_identical(tmp_path):
    cfg = write_config(tmp_path, {
        "input": "sphere", "band_limit": 4, "spectrum": {"kind": "zero"},
        "time": {"T": 1.0, "steps": 5}, "output": {"sphere_subdivisions": 1},
    })
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "out")]) == 0
    frames = sorted((tmp_path / "out").glob("frame_*.obj"))
    assert len(frames) == 6
    first = frames[0].read_bytes()
    assert all(f.read_bytes() == first for f in frames)
    radii = np.linalg.norm(load_mesh(frames[0]).vertices, axis=1)
    np.testing.assert_allclose(radii, 1.0, atol=1e-12)


def test_decaying_spectrum_run_has_bounded_h2(tmp_path):
    cfg = write_config(tmp_path, {
        "input": "sphere", "band_limit": 25, "spectrum": {"kind": "inv_quadratic"},
        "time": {"T": 1.0, "steps": 20}, "seed": 11, "output": {"format": "json"},
    })
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "out")]) == 0
    rows = read_stats(tmp_path / "out")
    assert [r["frame"] for r in rows] == [str(k) for k in range(21)]
    assert list(rows[0]) == ["frame", "t", "l2_norm", "h2_norm", "max_coeff"]
    h2 = np.array([float(r["h2_norm"]) for r in rows])
    # initial unit sphere: three coefficients sqrt(4 pi / 3) in degree 1, weight 1 + 2^2
    assert h2[0] == pytest.approx(math.sqrt(5 * 4 * math.pi), rel=1e-12)
    # E||noise||_H2^2 at t = 1 is 3 sum (2l+1)(1 + (l(l+1))^2)/(l+1)^2 = 6.5e5 (norm ~806);
    # an identity spectrum would give 3.1e8 (norm ~17550)
    assert np.all(np.isfinite(h2)) and h2.max() < 2000


def test_simulate_is_deterministic(tmp_path):
    doc = {"input": {"kind": "ellipsoid", "axes": [1, 0.8, 0.6]}, "band_limit": 8,
           "spectrum": {"kind": "bessel", "nu": 1.5}, "time": {"steps": 6}, "seed": 5,
           "output": {"sphere_subdivisions": 1}}
    cfg = write_config(tmp_path, doc)
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "a")]) == 0
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "b")]) == 0
    assert tree_digest(tmp_path / "a") == tree_digest(tmp_path / "b")
    assert main(["simulate", "--config", str(cfg), "--seed", "6", "--out", str(tmp_path / "c")]) == 0
    assert tree_digest(tmp_path / "a") != tree_digest(tmp_path / "c")


def test_manifest_reproduces_run(tmp_path):
    mesh_path = tmp_path / "ico.obj"
    save_mesh(icosahedron(), mesh_path)
    before = mesh_path.read_bytes()
    cfg = write_config(tmp_path, {
        "input": {"kind": "mesh", "path": "ico.obj"}, "band_limit": 5,
        "process": {"model": "ito", "drift": {"kind": "ou", "rate": 1.0, "mean": 0.0},
                    "diffusion": {"kind": "constant", "sigma": 0.1}},
        "time": {"steps": 4}, "seed": 3,
    })
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "a")]) == 0
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert manifest["seed"] == 3 and manifest["frames"][0] == "frame_0000.obj"
    assert manifest["input_sha256"] == hashlib.sha256(before).hexdigest()
    assert main(["simulate", "--config", str(tmp_path / "a" / "manifest.json"),
                 "--out", str(tmp_path / "b")]) == 0
    assert tree_digest(tmp_path / "a") == tree_digest(tmp_path / "b")
    assert (tmp_path / "a" / "frame_0000.obj").read_bytes() == before
    assert mesh_path.read_bytes() == before


def test_fractional_json_frames(tmp_path):
    cfg = write_config(tmp_path, {
        "input": "sphere", "band_limit": 3, "process": {"model": "fractional", "hurst": 0.7},
        "time": {"steps": 8},
    })
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o"), "--format", "json"]) == 0
    frames = sorted((tmp_path / "o").glob("frame_*.json"))
    assert len(frames) == 9
    assert ShapeCoefficients.from_json(json.loads(frames[0].read_text())).band_limit == 3


@pytest.mark.parametrize("doc", [
    {"band_limit": 4},
    {"input": "cube"},
    {"input": "sphere", "band_limit": -1},
    {"input": "sphere", "spectrum": {"kind": "bessel"}},
    {"input": "sphere", "time": {"steps": 0}},
    {"input": "sphere", "process": {"model": "fractional", "hurst": 1.5}},
    {"input": "sphere", "process": {"model": "ito"}, "scale": "linear"},
    {"input": "sphere", "frobnicate": 1},
])
def test_invalid_config_exit_2(tmp_path, doc):
    cfg = write_config(tmp_path, doc)
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert not (tmp_path / "o").exists()


def test_bad_json_and_bad_seed_exit_2(tmp_path):
    cfg = tmp_path / "broken.json"
    cfg.write_text("{not json")
    assert main(["simulate", "--config", str(cfg)]) == 2
    good = write_config(tmp_path, {"input": "sphere"})
    assert main(["simulate", "--config", str(good), "--seed", "-1"]) == 2


def test_io_errors_exit_3(tmp_path):
    assert main(["simulate", "--config", str(tmp_path / "missing.json")]) == 3
    bad = tmp_path / "bad.obj"
    bad.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 0 1 2\n")
    cfg = write_config(tmp_path, {"input": {"kind": "mesh", "path": "bad.obj"}, "band_limit": 2})
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 3


def test_numeric_blowup_exit_4(tmp_path):
    cfg = write_config(tmp_path, {
        "input": "sphere", "band_limit": 2,
        "process": {"model": "ito", "drift": {"kind": "linear", "a": 1e100}},
        "time": {"steps": 10},
    })
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 4


# -- decompose -------------------------------------------------------------------


def test_decompose_sphere_n1(tmp_path, capsys):
    assert main(["decompose", "--preset", "sphere", "-N", "1"]) == 0
    doc = json.loads(capsys.readouterr().out)
    coeffs = ShapeCoefficients.from_json(doc)
    big = np.argwhere(np.abs(coeffs.values) > 1e-12)
    assert len(big) == 3
    np.testing.assert_allclose(np.abs(coeffs.values[np.abs(coeffs.values) > 1e-12]),
                               math.sqrt(4 * math.pi / 3), atol=1e-10)


def test_decompose_negative_n_exit_2():
    assert main(["decompose", "-N", "-1"]) == 2


def test_decompose_resample_round_trip(tmp_path):
    out = tmp_path / "ell.json"
    assert main(["decompose", "--preset", "ellipsoid", "--axes", "1", "1", "1", "-N", "6",
                 "--out", str(out)]) == 0
    coeffs = ShapeCoefficients.from_json(json.loads(out.read_text()))
    grid = build_grid(6)
    theta, phi = np.meshgrid(grid.thetas, grid.phis, indexing="ij")
    expected = np.stack([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)])
    for ch in range(3):
        got = inverse_sht(coeffs.channel(ch), (theta, phi))
        np.testing.assert_allclose(got, expected[ch], atol=1e-9)


def test_decompose_mesh_fit(tmp_path, capsys):
    mesh_path = tmp_path / "ico.obj"
    save_mesh(icosahedron(), mesh_path)
    assert main(["decompose", "--mesh", str(mesh_path), "-N", "1"]) == 0
    coeffs = ShapeCoefficients.from_json(json.loads(capsys.readouterr().out))
    # vertices lie on the unit sphere, and x, y, z are degree-1 functions
    np.testing.assert_allclose(np.sort(np.abs(coeffs.values).ravel())[-3:],
                               math.sqrt(4 * math.pi / 3), atol=1e-10)


# -- spectrum-check ------------------------------------------------------------------


def spectrum_check(capsys, *args):
    assert main(["spectrum-check", "--json", *args]) == 0
    return json.loads(capsys.readouterr().out)


def test_spectrum_check_identity_trace(capsys):
    rep = spectrum_check(capsys, "--spectrum", '{"kind": "identity", "band_limit": 6}')
    assert rep["truncated_trace"] == 49


def test_spectrum_check_bessel_not_decaying(capsys, tmp_path):
    path = tmp_path / "spec.json"
    path.write_text('{"kind": "bessel", "nu": 1}')
    rep = spectrum_check(capsys, "--spectrum", str(path), "-N", "25", "--nu", "2")
    assert rep["classification"] == "terms not decaying"


def test_spectrum_check_zero(capsys):
    rep = spectrum_check(capsys, "--spectrum", '{"kind": "zero", "band_limit": 9}')
    assert rep["truncated_trace"] == 0
    assert rep["classification"] == "zero"


def test_spectrum_check_text_and_errors(capsys):
    assert main(["spectrum-check", "--spectrum", '{"kind": "inv_quadratic", "band_limit": 2}']) == 0
    assert "2.305555556" in capsys.readouterr().out
    assert main(["spectrum-check", "--spectrum", '{"kind": "bessel", "band_limit": 2}']) == 2
    assert main(["spectrum-check"]) == 2


def test_spectrum_check_from_config(capsys, tmp_path):
    cfg = write_config(tmp_path, {"input": "sphere", "spectrum": {"kind": "identity"}})
    rep = spectrum_check(capsys, "--config", str(cfg))
    assert rep["band_limit"] == 6 and rep["truncated_trace"] == 49


# -- info --------------------------------------------------------------------------------


def test_info_on_outputs(tmp_path, capsys):
    mesh_path = tmp_path / "ico.obj"
    save_mesh(icosahedron(), mesh_path)
    assert main(["info", str(mesh_path)]) == 0
    assert "faces             20" in capsys.readouterr().out
    coeff_path = tmp_path / "c.json"
    assert main(["decompose", "-N", "2", "--out", str(coeff_path)]) == 0
    assert main(["info", str(coeff_path)]) == 0
    out = capsys.readouterr().out
    assert "band limit   2" in out
    assert f"{math.sqrt(4 * math.pi):.10g}" in out  # sqrt(3 * 4 pi / 3)
    assert main(["info", str(tmp_path / "nope.obj")]) == 3


def test_thread_env(tmp_path, monkeypatch):
    cfg = write_config(tmp_path, {"input": "sphere", "band_limit": 2, "time": {"steps": 2},
                                  "output": {"format": "json"}})
    monkeypatch.setenv("SHAPE_DIFFUSION_THREADS", "1")
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    monkeypatch.setenv("SHAPE_DIFFUSION_THREADS", "zero")
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "p")]) == 2
