"""Batch command-line driver: mesh, solve, farfield, reconstruct, planefit,
and the end-to-end uniqueness demo.

Configuration is a sectioned key = value text file; all lengths are given in
wavelengths and converted internally with lambda = 2 pi / k.  Unknown keys or
sections are rejected.  Every command writes a machine-readable JSON summary
next to its outputs and exits nonzero if any stage-level check fails.
"""

from __future__ import annotations

import argparse
import configparser
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import bem, fields, geometry, inverse
from .em_core import MediumParams, PlaneWaveSpec
from .errors import DegenerateDataError, FileFormatError, InvalidArgumentError
from .geometry import PlaneFrame

_KNOWN_KEYS = {
    "screen": {"shape", "width_wl", "height_wl", "nx", "ny", "radius_wl",
               "refine", "plane_normal", "plane_offset_wl"},
    "wave": {"theta", "p", "omega", "eps", "mu"},
    "directions": {"kind", "n_theta", "n_phi", "theta_max_deg"},
    "inverse": {"image_halfwidth_wl", "image_spacing_wl", "tau_support",
                "tau_full_support", "patch_radius_wl", "basis_spacing_wl",
                "offset_range_wl", "offset_step_wl", "coarse_angle_deg",
                "refine_fit"},
    "demo": {"shape_b"},
}


@dataclass
class RunConfig:
    """Typed view of a parsed configuration file."""

    screen_shape: str = "rectangle"
    width_wl: float = 1.0
    height_wl: float = 0.5
    nx: int = 12
    ny: int = 6
    radius_wl: float = 0.5
    refine: int = 3
    plane_normal: tuple = (0.0, 0.0, 1.0)
    plane_offset_wl: float = 0.0

    theta: tuple = (0.0, 0.0, -1.0)
    p: tuple = (1.0, 0.0, 0.0)
    omega: float = 2.0 * np.pi
    eps: float = 1.0
    mu: float = 1.0

    grid_kind: str = "hemisphere"
    n_theta: int = 12
    n_phi: int = 24
    theta_max_deg: float = 84.0

    image_halfwidth_wl: float = 1.5
    image_spacing_wl: float = 0.125
    tau_support: float = 0.2
    tau_full_support: float = 1e-3
    patch_radius_wl: float = 1.5
    basis_spacing_wl: float = 0.5
    offset_range_wl: float = 0.6
    offset_step_wl: float = 0.1
    coarse_angle_deg: float = 10.0
    refine_fit: bool = True

    demo_shape_b: str = "disk"

    @property
    def medium(self) -> MediumParams:
        return MediumParams(self.eps, self.mu, self.omega)

    @property
    def wavelength(self) -> float:
        return self.medium.wavelength

    @property
    def frame(self) -> PlaneFrame:
        return PlaneFrame.from_normal(np.asarray(self.plane_normal, float),
                                      self.plane_offset_wl * self.wavelength)

    @property
    def wave(self) -> PlaneWaveSpec:
        th = np.asarray(self.theta, float)
        pv = np.asarray(self.p, float)
        return PlaneWaveSpec(th / np.linalg.norm(th), pv / np.linalg.norm(pv))

    @property
    def direction_grid(self) -> fields.DirectionGrid:
        return fields.DirectionGrid(self.grid_kind, self.n_theta, self.n_phi,
                                    np.deg2rad(self.theta_max_deg))

    def build_mesh(self, shape=None) -> geometry.ScreenMesh:
        lam = self.wavelength
        shape = shape or self.screen_shape
        if shape == "rectangle":
            return geometry.make_rectangle_screen(
                self.width_wl * lam, self.height_wl * lam, self.nx, self.ny,
                self.frame)
        if shape == "disk":
            return geometry.make_disk_screen(self.radius_wl * lam, self.refine,
                                             self.frame)
        raise InvalidArgumentError(f"unknown screen shape {shape!r}")

    def search_spec(self) -> inverse.PlaneSearchSpec:
        lam = self.wavelength
        return inverse.PlaneSearchSpec(
            patch_radius=self.patch_radius_wl * lam,
            offset_range=self.offset_range_wl * lam,
            basis_spacing=self.basis_spacing_wl * lam,
            offset_step=self.offset_step_wl * lam,
            coarse_angle_deg=self.coarse_angle_deg,
            refine=self.refine_fit)


def _parse_vector(raw: str, n: int):
    parts = raw.split()
    if len(parts) != n:
        raise InvalidArgumentError(f"expected {n} numbers, got {raw!r}")
    return tuple(float(v) for v in parts)


def load_config(path) -> RunConfig:
    cp = configparser.ConfigParser()
    read = cp.read(path)
    if not read:
        raise InvalidArgumentError(f"cannot read config file {path}")
    cfg = RunConfig()
    for section in cp.sections():
        if section not in _KNOWN_KEYS:
            raise InvalidArgumentError(f"unknown config section [{section}]")
        for key in cp[section]:
            if key not in _KNOWN_KEYS[section]:
                raise InvalidArgumentError(
                    f"unknown key {key!r} in section [{section}]")
    s = cp["screen"] if cp.has_section("screen") else {}
    g = lambda sec, key, conv, default: conv(cp[sec][key]) \
        if cp.has_section(sec) and key in cp[sec] else default
    cfg.screen_shape = g("screen", "shape", str, cfg.screen_shape)
    cfg.width_wl = g("screen", "width_wl", float, cfg.width_wl)
    cfg.height_wl = g("screen", "height_wl", float, cfg.height_wl)
    cfg.nx = g("screen", "nx", int, cfg.nx)
    cfg.ny = g("screen", "ny", int, cfg.ny)
    cfg.radius_wl = g("screen", "radius_wl", float, cfg.radius_wl)
    cfg.refine = g("screen", "refine", int, cfg.refine)
    cfg.plane_normal = g("screen", "plane_normal",
                         lambda v: _parse_vector(v, 3), cfg.plane_normal)
    cfg.plane_offset_wl = g("screen", "plane_offset_wl", float,
                            cfg.plane_offset_wl)
    cfg.theta = g("wave", "theta", lambda v: _parse_vector(v, 3), cfg.theta)
    cfg.p = g("wave", "p", lambda v: _parse_vector(v, 3), cfg.p)
    cfg.omega = g("wave", "omega", float, cfg.omega)
    cfg.eps = g("wave", "eps", float, cfg.eps)
    cfg.mu = g("wave", "mu", float, cfg.mu)
    cfg.grid_kind = g("directions", "kind", str, cfg.grid_kind)
    cfg.n_theta = g("directions", "n_theta", int, cfg.n_theta)
    cfg.n_phi = g("directions", "n_phi", int, cfg.n_phi)
    cfg.theta_max_deg = g("directions", "theta_max_deg", float,
                          cfg.theta_max_deg)
    cfg.image_halfwidth_wl = g("inverse", "image_halfwidth_wl", float,
                               cfg.image_halfwidth_wl)
    cfg.image_spacing_wl = g("inverse", "image_spacing_wl", float,
                             cfg.image_spacing_wl)
    cfg.tau_support = g("inverse", "tau_support", float, cfg.tau_support)
    cfg.tau_full_support = g("inverse", "tau_full_support", float,
                             cfg.tau_full_support)
    cfg.patch_radius_wl = g("inverse", "patch_radius_wl", float,
                            cfg.patch_radius_wl)
    cfg.basis_spacing_wl = g("inverse", "basis_spacing_wl", float,
                             cfg.basis_spacing_wl)
    cfg.offset_range_wl = g("inverse", "offset_range_wl", float,
                            cfg.offset_range_wl)
    cfg.offset_step_wl = g("inverse", "offset_step_wl", float,
                           cfg.offset_step_wl)
    cfg.coarse_angle_deg = g("inverse", "coarse_angle_deg", float,
                             cfg.coarse_angle_deg)
    cfg.refine_fit = g("inverse", "refine_fit",
                       lambda v: v.lower() in ("1", "true", "yes"),
                       cfg.refine_fit)
    cfg.demo_shape_b = g("demo", "shape_b", str, cfg.demo_shape_b)
    return cfg


def _write_summary(out: Path, command: str, status: str, checks: dict) -> None:
    payload = {"command": command, "status": status, "checks": checks}
    (out / f"summary_{command}.json").write_text(json.dumps(payload, indent=2)
                                                 + "\n")


def _solve_pipeline(cfg: RunConfig, mesh=None):
    mesh = mesh if mesh is not None else cfg.build_mesh()
    basis = mesh.basis()
    med = cfg.medium
    system = bem.assemble_system(mesh, basis, med)
    rhs = bem.assemble_rhs(mesh, basis, cfg.wave, med)
    rho = bem.solve_density(system, rhs)
    return mesh, basis, system, rhs, rho


def write_density(path, rho: bem.DensityVector) -> None:
    lines = ["density 1", f"n {len(rho.coefficients)}"]
    for z in rho.coefficients:
        lines.append(f"{geometry.frepr(z.real)} {geometry.frepr(z.imag)}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_density(path) -> np.ndarray:
    with open(path) as fh:
        raw = [ln.strip() for ln in fh if ln.strip()]
    if not raw or raw[0] != "density 1":
        raise FileFormatError("bad density header")
    n = int(raw[1].split()[1])
    if len(raw) - 2 != n:
        raise FileFormatError("density record count mismatch")
    vals = np.empty(n, complex)
    for i, ln in enumerate(raw[2:]):
        re, im = ln.split()
        vals[i] = float(re) + 1j * float(im)
    return vals


# -- commands ---------------------------------------------------------------

def cmd_mesh(cfg: RunConfig, out: Path, verbose: bool) -> int:
    mesh = cfg.build_mesh()
    geometry.write_mesh(mesh, out / "mesh.txt")
    checks = {"n_vertices": len(mesh.vertices),
              "n_triangles": len(mesh.triangles),
              "n_interior_edges": int(len(mesh.interior_edges)),
              "total_area": mesh.total_area}
    _write_summary(out, "mesh", "ok", checks)
    if verbose:
        print(f"mesh: {checks}")
    return 0


def cmd_solve(cfg: RunConfig, out: Path, verbose: bool) -> int:
    mesh, basis, system, rhs, rho = _solve_pipeline(cfg)
    geometry.write_mesh(mesh, out / "mesh.txt")
    write_density(out / "density.txt", rho)
    degenerate = cfg.wave.is_degenerate
    checks = {"n_dofs": basis.size,
              "degenerate_incidence": bool(degenerate),
              "solve_residual": rho.solve_residual,
              "symmetry_residual": system.symmetry_residual()}
    ok = rho.solve_residual < 1e-10 and checks["symmetry_residual"] < 1e-12
    _write_summary(out, "solve", "ok" if ok else "check_failed", checks)
    if verbose:
        print(f"solve: {checks}")
    return 0 if ok else 1


def cmd_farfield(cfg: RunConfig, out: Path, verbose: bool,
                 density_path=None) -> int:
    med = cfg.medium
    mesh = cfg.build_mesh()
    if density_path is None:
        _, _, _, _, rho = _solve_pipeline(cfg, mesh)
        coeff = rho.coefficients
    else:
        coeff = read_density(density_path)
    grid = cfg.direction_grid
    dirs = grid.directions(mesh.frame)
    ff = fields.far_field(mesh, coeff, med, dirs, grid=grid)
    fields.save_farfield(ff, out / "farfield.txt", frame=mesh.frame)
    checks = {"n_directions": len(dirs),
              "impedance_residual": ff.impedance_residual(),
              "transversality_residual": ff.transversality_residual()}
    ok = checks["impedance_residual"] < 1e-12
    _write_summary(out, "farfield", "ok" if ok else "check_failed", checks)
    if verbose:
        print(f"farfield: {checks}")
    return 0 if ok else 1


def cmd_reconstruct(cfg: RunConfig, out: Path, verbose: bool,
                    farfield_path=None) -> int:
    ff_path = farfield_path or (out / "farfield.txt")
    ff, frame = fields.load_farfield(ff_path)
    if frame is None:
        frame = cfg.frame
    samples = inverse.extract_fourier_data(ff, frame)
    lam = 2.0 * np.pi / ff.k
    grid = inverse.ImagingGrid(cfg.image_halfwidth_wl * lam,
                               cfg.image_spacing_wl * lam)
    img = inverse.reconstruct_support(samples, grid, cfg.tau_support,
                                      frame=frame)
    inverse.save_support_image(img, out / "support.txt")
    checks = {"n_samples": len(samples.xi),
              "n_skipped_grazing": samples.n_skipped,
              "max_intensity": float(img.intensity.max()),
              "n_supported": int(img.support_mask.sum())}
    _write_summary(out, "reconstruct", "ok", checks)
    if verbose:
        print(f"reconstruct: {checks}")
    return 0


def cmd_planefit(cfg: RunConfig, out: Path, verbose: bool,
                 farfield_path=None) -> int:
    ff_path = farfield_path or (out / "farfield.txt")
    ff, _ = fields.load_farfield(ff_path)
    est, landscape = inverse.fit_hyperplane(ff, cfg.search_spec(),
                                            return_landscape=True)
    inverse.save_plane_estimate(est, out / "planefit.txt")
    inverse.save_plane_landscape(landscape, out / "planefit_landscape.txt")
    checks = {"objective": est.objective, "iterations": est.iterations,
              "normal": list(est.normal), "offset": est.offset}
    _write_summary(out, "planefit", "ok", checks)
    if verbose:
        print(f"planefit: {checks}")
    return 0


def cmd_demo_uniqueness(cfg: RunConfig, out: Path, verbose: bool) -> int:
    med = cfg.medium
    lam = cfg.wavelength
    mesh_a = cfg.build_mesh()
    if cfg.demo_shape_b == "same":
        mesh_b = cfg.build_mesh()
    elif cfg.demo_shape_b == "disk":
        radius = np.sqrt(mesh_a.total_area / np.pi)
        mesh_b = geometry.make_disk_screen(radius, cfg.refine, cfg.frame)
    else:
        mesh_b = cfg.build_mesh(cfg.demo_shape_b)
    grid = fields.DirectionGrid("sphere", cfg.n_theta, cfg.n_phi,
                                np.deg2rad(cfg.theta_max_deg))
    dirs = grid.directions(cfg.frame)
    w = grid.solid_angle_weights()

    report: dict = {"shape_a": cfg.screen_shape, "shape_b": cfg.demo_shape_b}
    if cfg.wave.is_degenerate:
        report["status"] = "DEGENERATE"
        report["detail"] = ("incident polarization parallel to propagation: "
                            "far field vanishes, uniqueness hypothesis violated")
        (out / "demo_report.json").write_text(json.dumps(report, indent=2) + "\n")
        _write_summary(out, "demo-uniqueness", "degenerate", report)
        if verbose:
            print(f"demo-uniqueness: {report['status']}")
        return 0

    def far(mesh):
        _, _, _, _, rho = _solve_pipeline(cfg, mesh)
        return fields.far_field(mesh, rho, med, dirs, grid=grid)

    ff_a = far(mesh_a)
    ff_b = far(mesh_b)

    def l2(e):
        return float(np.sqrt((w * np.einsum("nd,nd->n", e, e.conj()).real).sum()))

    diff = l2(ff_a.e_inf - ff_b.e_inf)
    scale = l2(ff_a.e_inf)

    # self-convergence scale: same screen at double resolution
    cfg_fine = RunConfig(**{**cfg.__dict__})
    cfg_fine.nx, cfg_fine.ny = 2 * cfg.nx, 2 * cfg.ny
    cfg_fine.refine = cfg.refine + 1
    ff_a_fine = None
    mesh_fine = cfg_fine.build_mesh()
    _, _, _, _, rho_f = _solve_pipeline(cfg_fine, mesh_fine)
    ff_a_fine = fields.far_field(mesh_fine, rho_f, med, dirs, grid=grid)
    self_err = l2(ff_a.e_inf - ff_a_fine.e_inf)

    report.update({"farfield_l2_difference": diff,
                   "farfield_l2_scale": scale,
                   "self_convergence_error": self_err})
    if scale < 1e-12:
        report["status"] = "DEGENERATE"
    elif diff < 10.0 * max(self_err, 1e-300):
        report["status"] = "IDENTICAL" if diff < 3.0 * self_err else "FAIL"
    else:
        report["status"] = "PASS"

    samples = inverse.extract_fourier_data(ff_a, mesh_a.frame)
    grid_img = inverse.ImagingGrid(cfg.image_halfwidth_wl * lam,
                                   cfg.image_spacing_wl * lam)
    img = inverse.reconstruct_support(samples, grid_img, cfg.tau_support,
                                      frame=mesh_a.frame)
    inverse.save_support_image(img, out / "support.txt")
    est = inverse.fit_hyperplane(ff_a, cfg.search_spec())
    inverse.save_plane_estimate(est, out / "planefit.txt")
    report["planefit_objective"] = est.objective
    report["planefit_normal"] = list(est.normal)
    report["support_points"] = int(img.support_mask.sum())

    (out / "demo_report.json").write_text(json.dumps(report, indent=2) + "\n")
    _write_summary(out, "demo-uniqueness",
                   "ok" if report["status"] in ("PASS", "IDENTICAL") else "check_failed",
                   report)
    if verbose:
        print(f"demo-uniqueness: {report['status']} "
              f"(diff {diff:.3e}, self {self_err:.3e})")
    return 0 if report["status"] in ("PASS", "IDENTICAL") else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="emscreen",
        description="Screen-scattering solver and inverse pipeline")
    parser.add_argument("--config", required=True, help="path to config file")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker threads for assembly-scale stages")
    parser.add_argument("--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("mesh")
    sub.add_parser("solve")
    p_ff = sub.add_parser("farfield")
    p_ff.add_argument("density", nargs="?", default=None,
                      help="density file (default: solve in place)")
    p_rc = sub.add_parser("reconstruct")
    p_rc.add_argument("farfield", nargs="?", default=None)
    p_pf = sub.add_parser("planefit")
    p_pf.add_argument("farfield", nargs="?", default=None)
    sub.add_parser("demo-uniqueness")

    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "mesh":
            return cmd_mesh(cfg, out, args.verbose)
        if args.command == "solve":
            return cmd_solve(cfg, out, args.verbose)
        if args.command == "farfield":
            return cmd_farfield(cfg, out, args.verbose, args.density)
        if args.command == "reconstruct":
            return cmd_reconstruct(cfg, out, args.verbose, args.farfield)
        if args.command == "planefit":
            return cmd_planefit(cfg, out, args.verbose, args.farfield)
        if args.command == "demo-uniqueness":
            return cmd_demo_uniqueness(cfg, out, args.verbose)
        parser.error(f"unknown command {args.command}")
    except (InvalidArgumentError, FileFormatError, DegenerateDataError,
            OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
