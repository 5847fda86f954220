import json

import numpy as np
import pytest

from thztomo.cli import main
from thztomo.dataio import read_dataset


def run(*args):
    return main(list(args))


@pytest.fixture
def tri_image(tmp_path):
    path = tmp_path / "tri.json"
    assert run("phantom", "--shape", "triangle", "--n", "41", "-o", str(path)) == 0
    return path


@pytest.fixture
def radon_data(tmp_path, tri_image):
    sino = tmp_path / "sino.json"
    assert run(
        "simulate", "--input", str(tri_image), "--model", "single-ray",
        "--angles", "60", "--offsets", "35", "-o", str(sino),
    ) == 0
    log = tmp_path / "radon.json"
    assert run("preprocess", "--input", str(sino), "--log", "-o", str(log)) == 0
    return log


def test_phantom_writes_image_and_preview(tmp_path):
    out = tmp_path / "disk.json"
    pgm = tmp_path / "disk.pgm"
    rc = run(
        "phantom", "--shape", "disk", "--radius", "0.4", "--n", "61",
        "-o", str(out), "--preview", str(pgm),
    )
    assert rc == 0
    kind, img, header = read_dataset(out)
    assert kind == "image"
    assert img.grid.n_pixels == 61
    assert header["provenance"]["flags"]["radius"] == 0.4
    raw = pgm.read_bytes()
    assert raw.startswith(b"P5\n61 61\n255\n")
    # two-valued phantom -> two gray levels
    assert set(raw.split(b"255\n", 1)[1]) == {0, 255}


def test_phantom_zero_radius_disk(tmp_path):
    out = tmp_path / "z.json"
    assert run("phantom", "--shape", "disk", "--radius", "0", "--n", "41",
               "-o", str(out)) == 0
    _, img, _ = read_dataset(out)
    assert not img.values.any()


def test_simulate_zero_phantom_gives_ones(tmp_path):
    ph = tmp_path / "z.json"
    run("phantom", "--shape", "disk", "--radius", "0", "--n", "31", "-o", str(ph))
    out = tmp_path / "s.json"
    assert run("simulate", "--input", str(ph), "--model", "full-beam",
               "--angles", "20", "--offsets", "15", "-o", str(out)) == 0
    _, sino, header = read_dataset(out)
    assert np.allclose(sino.values, 1.0, atol=1e-12)
    assert header["data_kind"] == "ratio-P"


def test_simulate_single_ray_matches_chord(tmp_path):
    ph = tmp_path / "d.json"
    run("phantom", "--shape", "disk", "--radius", "0.5", "--n", "81", "-o", str(ph))
    out = tmp_path / "s.json"
    run("simulate", "--input", str(ph), "--model", "single-ray",
        "--angles", "30", "--offsets", "41", "-o", str(out))
    _, sino, _ = read_dataset(out)
    geom = sino.geometry
    chord = 2.0 * np.sqrt(np.maximum(0.25 - geom.offsets[:, None] ** 2, 0.0))
    interior = np.abs(geom.offsets) < 0.5 - 3 * (2.0 / 81)
    expected = np.exp(-0.5 * chord)
    assert np.abs(sino.values - expected)[interior].max() < 0.05


def test_preprocess_identity_flags(tmp_path, tri_image):
    sino = tmp_path / "s.json"
    run("simulate", "--input", str(tri_image), "--model", "single-ray",
        "--angles", "20", "--offsets", "15", "-o", str(sino))
    out = tmp_path / "p.json"
    assert run("preprocess", "--input", str(sino), "-o", str(out)) == 0
    _, a, _ = read_dataset(sino)
    _, b, _ = read_dataset(out)
    assert np.array_equal(a.values, b.values)


def test_preprocess_log_constant_ratio(tmp_path):
    # P-mode ratio exp(-1) must become 2.0 after -2 ln
    ph = tmp_path / "z.json"
    run("phantom", "--shape", "disk", "--radius", "0", "--n", "21", "-o", str(ph))
    sino = tmp_path / "s.json"
    run("simulate", "--input", str(ph), "--model", "single-ray",
        "--angles", "6", "--offsets", "5", "-o", str(sino))
    # overwrite the payload with a constant exp(-1)
    header = json.loads(sino.read_text())
    n = header["payload"]["count"]
    (tmp_path / "s.bin").write_bytes(
        np.full(n, np.exp(-1.0)).astype("<f8").tobytes()
    )
    out = tmp_path / "l.json"
    assert run("preprocess", "--input", str(sino), "--log", "-o", str(out)) == 0
    _, back, header = read_dataset(out)
    assert np.allclose(back.values, 2.0, atol=1e-12)
    assert header["data_kind"] == "radon"


def test_preprocess_traces_of_pure_reference(tmp_path):
    # all traces equal to the reference -> zero sinogram after log transform
    ph = tmp_path / "z.json"
    run("phantom", "--shape", "disk", "--radius", "0", "--n", "21", "-o", str(ph))
    tr = tmp_path / "tr.json"
    assert run("simulate", "--input", str(ph), "--model", "time-domain",
               "--angles", "6", "--offsets", "5", "--oversampling", "1",
               "--fwhm", "0", "-o", str(tr)) == 0
    out = tmp_path / "l.json"
    assert run("preprocess", "--input", str(tr), "--mode", "I", "--log",
               "-o", str(out)) == 0
    _, sino, _ = read_dataset(out)
    assert np.abs(sino.values).max() < 1e-10


def test_reconstruct_fbp_and_iteration_log(tmp_path, radon_data):
    out = tmp_path / "rec.json"
    assert run("reconstruct", "--input", str(radon_data), "--method", "fbp",
               "--n", "41", "-o", str(out)) == 0
    _, img, _ = read_dataset(out)
    assert img.values.max() > 0.5

    out2 = tmp_path / "lw.json"
    csv_path = tmp_path / "lw.csv"
    assert run("reconstruct", "--input", str(radon_data), "--method", "landweber",
               "--iters", "10", "--n", "41", "-o", str(out2),
               "--log-csv", str(csv_path)) == 0
    lines = csv_path.read_text().strip().splitlines()
    assert lines[0] == "k,residual,stepsize"
    assert len(lines) == 12  # header + residuals for k = 0..10


def test_reconstruct_mode_mismatch_is_exit_2(tmp_path, tri_image):
    sino = tmp_path / "s.json"
    run("simulate", "--input", str(tri_image), "--model", "single-ray",
        "--angles", "20", "--offsets", "15", "-o", str(sino))
    out = tmp_path / "x.json"
    # linear method on ratio data
    assert run("reconstruct", "--input", str(sino), "--method", "fbp",
               "--n", "41", "-o", str(out)) == 2
    # nonlinear method on log data
    log = tmp_path / "l.json"
    run("preprocess", "--input", str(sino), "--log", "-o", str(log))
    assert run("reconstruct", "--input", str(log), "--method",
               "nonlinear-landweber", "--n", "41", "-o", str(out)) == 2


def test_usage_errors_are_exit_1(tmp_path):
    assert run("phantom", "--shape", "hexagon", "-o", "x.json") == 1
    assert run("frobnicate") == 1
    assert run("simulate", "--input", str(tmp_path / "missing.json"),
               "-o", "y.json") == 2  # unreadable dataset counts as data error


def test_info_runs(tmp_path, tri_image, capsys):
    assert run("info", str(tri_image)) == 0
    out = capsys.readouterr().out
    assert "kind: image" in out
    assert "41x41" in out


def test_verify_single_check():
    assert run("verify", "--only", "smoothness") == 0


def test_noise_recorded_in_header(tmp_path, tri_image):
    out = tmp_path / "n.json"
    run("simulate", "--input", str(tri_image), "--model", "single-ray",
        "--angles", "20", "--offsets", "15", "--noise", "0.05", "--seed", "7",
        "-o", str(out))
    _, _, header = read_dataset(out)
    assert header["noise_delta"] > 0
    assert header["provenance"]["flags"]["seed"] == 7
