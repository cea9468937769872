import json

import numpy as np
import pytest

import emscreen as es
from emscreen.cli import load_config, main, read_density

BASE_CONFIG = """
[screen]
shape = rectangle
width_wl = 1.0
height_wl = 0.5
nx = 8
ny = 4
plane_normal = 0 0 1
plane_offset_wl = 0.0

[wave]
theta = 0.3 0.2 -0.933
p = 0.8 -0.1 0.3
omega = 6.283185307179586
eps = 1.0
mu = 1.0

[directions]
kind = hemisphere
n_theta = 8
n_phi = 16
theta_max_deg = 80.0

[inverse]
image_halfwidth_wl = 1.2
image_spacing_wl = 0.125
tau_support = 0.2
patch_radius_wl = 1.0
basis_spacing_wl = 0.3
offset_range_wl = 0.3
offset_step_wl = 0.1
coarse_angle_deg = 20.0
"""


@pytest.fixture()
def config_path(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text(BASE_CONFIG)
    return p


class TestConfig:
    def test_defaults_and_overrides(self, config_path):
        cfg = load_config(config_path)
        assert cfg.nx == 8
        assert cfg.tau_full_support == 1e-3  # untouched default
        assert abs(np.linalg.norm(cfg.wave.theta) - 1) < 1e-12

    def test_unknown_key_rejected(self, tmp_path):
        p = tmp_path / "bad.cfg"
        p.write_text("[screen]\nshape = rectangle\nwidht_wl = 1.0\n")
        with pytest.raises(es.InvalidArgumentError):
            load_config(p)

    def test_unknown_section_rejected(self, tmp_path):
        p = tmp_path / "bad.cfg"
        p.write_text("[scren]\nshape = rectangle\n")
        with pytest.raises(es.InvalidArgumentError):
            load_config(p)

    def test_missing_file(self, tmp_path):
        with pytest.raises(es.InvalidArgumentError):
            load_config(tmp_path / "nope.cfg")


class TestMeshCommand:
    def test_rectangle_line_counts(self, config_path, tmp_path):
        out = tmp_path / "out"
        rc = main(["--config", str(config_path), "--out", str(out), "mesh"])
        assert rc == 0
        text = (out / "mesh.txt").read_text().splitlines()
        assert text[0] == "screenmesh 1"
        assert sum(1 for ln in text if ln.startswith("v ")) == 9 * 5
        assert sum(1 for ln in text if ln.startswith("t ")) == 2 * 8 * 4

    def test_smallest_rectangle(self, tmp_path):
        p = tmp_path / "r.cfg"
        p.write_text("[screen]\nshape = rectangle\nwidth_wl = 1.0\n"
                     "height_wl = 1.0\nnx = 1\nny = 1\n")
        out = tmp_path / "out"
        assert main(["--config", str(p), "--out", str(out), "mesh"]) == 0
        text = (out / "mesh.txt").read_text().splitlines()
        assert sum(1 for ln in text if ln.startswith("v ")) == 4
        assert sum(1 for ln in text if ln.startswith("t ")) == 2

    def test_disk_triangle_count(self, tmp_path):
        p = tmp_path / "d.cfg"
        p.write_text("[screen]\nshape = disk\nradius_wl = 1.0\nrefine = 3\n")
        out = tmp_path / "out"
        assert main(["--config", str(p), "--out", str(out), "mesh"]) == 0
        mesh = es.read_mesh(out / "mesh.txt")
        assert len(mesh.triangles) == 6 * 4 ** 3

    def test_invalid_shape_diagnostic(self, tmp_path, capsys):
        p = tmp_path / "bad.cfg"
        p.write_text("[screen]\nshape = pentagon\n")
        out = tmp_path / "out"
        rc = main(["--config", str(p), "--out", str(out), "mesh"])
        assert rc != 0
        assert "pentagon" in capsys.readouterr().err


class TestSolveCommand:
    def test_residual_and_determinism(self, config_path, tmp_path):
        out1 = tmp_path / "o1"
        out2 = tmp_path / "o2"
        assert main(["--config", str(config_path), "--out", str(out1),
                     "solve"]) == 0
        assert main(["--config", str(config_path), "--out", str(out2),
                     "solve"]) == 0
        summary = json.loads((out1 / "summary_solve.json").read_text())
        assert summary["checks"]["solve_residual"] < 1e-10
        assert (out1 / "density.txt").read_bytes() \
            == (out2 / "density.txt").read_bytes()

    def test_degenerate_wave_zero_density(self, tmp_path):
        p = tmp_path / "deg.cfg"
        p.write_text("[screen]\nshape = rectangle\nnx = 2\nny = 2\n"
                     "[wave]\ntheta = 0 0 -1\np = 0 0 -1\n")
        out = tmp_path / "out"
        assert main(["--config", str(p), "--out", str(out), "solve"]) == 0
        vals = read_density(out / "density.txt")
        assert np.all(vals == 0.0)
        summary = json.loads((out / "summary_solve.json").read_text())
        assert summary["checks"]["degenerate_incidence"] is True


class TestFarfieldCommand:
    def test_header_flag_and_count(self, config_path, tmp_path):
        out = tmp_path / "out"
        assert main(["--config", str(config_path), "--out", str(out),
                     "farfield"]) == 0
        text = (out / "farfield.txt").read_text()
        assert "impedance_check pass" in text
        ff, frame = es.load_farfield(out / "farfield.txt")
        assert len(ff.directions) == 8 * 16
        assert frame is not None

    def test_zero_density_zero_records(self, config_path, tmp_path):
        out = tmp_path / "out"
        zero = es.DensityVector(np.zeros(8 * 4 * 3 - 12, complex))
        # count interior edges of the 8 x 4 grid: 3 nx ny - nx - ny
        n = 3 * 8 * 4 - 8 - 4
        zero = es.DensityVector(np.zeros(n, complex))
        from emscreen.cli import write_density
        out.mkdir(parents=True)
        write_density(out / "zero.txt", zero)
        assert main(["--config", str(config_path), "--out", str(out),
                     "farfield", str(out / "zero.txt")]) == 0
        ff, _ = es.load_farfield(out / "farfield.txt")
        assert np.abs(ff.e_inf).max() == 0.0

    def test_consumes_solve_output(self, config_path, tmp_path):
        out = tmp_path / "out"
        assert main(["--config", str(config_path), "--out", str(out),
                     "solve"]) == 0
        assert main(["--config", str(config_path), "--out", str(out),
                     "farfield", str(out / "density.txt")]) == 0


class TestInverseCommands:
    @pytest.fixture()
    def farfield_out(self, config_path, tmp_path):
        out = tmp_path / "out"
        assert main(["--config", str(config_path), "--out", str(out),
                     "farfield"]) == 0
        return out

    def test_reconstruct(self, config_path, farfield_out):
        assert main(["--config", str(config_path), "--out", str(farfield_out),
                     "reconstruct"]) == 0
        img = es.load_support_image(farfield_out / "support.txt")
        assert img.support_mask.sum() > 0
        summary = json.loads(
            (farfield_out / "summary_reconstruct.json").read_text())
        assert summary["status"] == "ok"

    def test_planefit(self, config_path, farfield_out):
        assert main(["--config", str(config_path), "--out", str(farfield_out),
                     "planefit"]) == 0
        est = es.load_plane_estimate(farfield_out / "planefit.txt")
        ang = np.degrees(np.arccos(np.clip(est.normal @ [0, 0, 1.0], -1, 1)))
        assert ang < 5.0
        rows = es.inverse.load_plane_landscape(
            farfield_out / "planefit_landscape.txt")
        assert len(rows) > 10

    def test_reconstruct_missing_file(self, config_path, tmp_path):
        out = tmp_path / "empty"
        out.mkdir()
        rc = main(["--config", str(config_path), "--out", str(out),
                   "reconstruct"])
        assert rc == 2


class TestDemoUniqueness:
    def _write(self, tmp_path, extra=""):
        p = tmp_path / "demo.cfg"
        p.write_text("""
[screen]
shape = rectangle
width_wl = 1.0
height_wl = 0.5
nx = 6
ny = 3
refine = 2
[wave]
theta = 0.3 0.2 -0.933
p = 0.8 -0.1 0.3
[directions]
n_theta = 6
n_phi = 12
[inverse]
image_spacing_wl = 0.2
image_halfwidth_wl = 1.0
patch_radius_wl = 1.0
basis_spacing_wl = 0.34
offset_range_wl = 0.2
offset_step_wl = 0.1
coarse_angle_deg = 30.0
refine_fit = false
""" + extra)
        return p

    def test_disk_vs_rectangle_distinguishable(self, tmp_path):
        p = self._write(tmp_path)
        out = tmp_path / "out"
        rc = main(["--config", str(p), "--out", str(out), "demo-uniqueness"])
        report = json.loads((out / "demo_report.json").read_text())
        assert report["status"] == "PASS"
        assert rc == 0
        assert report["farfield_l2_difference"] \
            > 10 * report["self_convergence_error"]

    def test_same_screen_flagged_identical(self, tmp_path):
        p = self._write(tmp_path, "[demo]\nshape_b = same\n")
        out = tmp_path / "out"
        rc = main(["--config", str(p), "--out", str(out), "demo-uniqueness"])
        report = json.loads((out / "demo_report.json").read_text())
        assert report["status"] == "IDENTICAL"
        assert rc == 0

    def test_degenerate_wave_flagged(self, tmp_path):
        p = tmp_path / "deg.cfg"
        p.write_text("[screen]\nshape = rectangle\nnx = 2\nny = 2\n"
                     "[wave]\ntheta = 0 0 -1\np = 0 0 -1\n")
        out = tmp_path / "out"
        rc = main(["--config", str(p), "--out", str(out), "demo-uniqueness"])
        assert rc == 0
        report = json.loads((out / "demo_report.json").read_text())
        assert report["status"] == "DEGENERATE"


class TestInverseFileFormats:
    def test_support_image_round_trip(self, tmp_path, unit_medium):
        rng = np.random.default_rng(0)
        img = es.SupportImage(np.linspace(-1, 1, 5), np.linspace(-1, 1, 7),
                              np.abs(rng.normal(size=(5, 7))), 0.2,
                              es.PlaneFrame.xy(), unit_medium.k)
        p = tmp_path / "img.txt"
        es.save_support_image(img, p)
        img2 = es.load_support_image(p)
        assert np.array_equal(img.intensity, img2.intensity)
        assert np.array_equal(img.s1, img2.s1)
        assert img2.tau == img.tau

    def test_plane_estimate_round_trip(self, tmp_path):
        est = es.PlaneEstimate(np.array([0.0, 0.6, 0.8]), 0.31, 1e-5, 321)
        p = tmp_path / "pe.txt"
        es.save_plane_estimate(est, p)
        est2 = es.load_plane_estimate(p)
        assert np.array_equal(est.normal, est2.normal)
        assert est2.offset == est.offset
        assert est2.iterations == 321

    def test_corrupt_support_image(self, tmp_path):
        p = tmp_path / "img.txt"
        p.write_text("supportimage 1\nk 6.0\nnope\n")
        with pytest.raises(es.FileFormatError):
            es.load_support_image(p)

    def test_corrupt_plane_estimate(self, tmp_path):
        p = tmp_path / "pe.txt"
        p.write_text("planeestimate 1\nnormal 0 0\n")
        with pytest.raises(es.FileFormatError):
            es.load_plane_estimate(p)
