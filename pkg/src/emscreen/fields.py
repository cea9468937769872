"""Scattered near fields, far-field patterns, and their file format.

The scattered field of a solved jump density rho is evaluated from the layer
representation

    E_sc = (i / (omega eps)) * (grad V(Div rho) + k^2 V(rho)),
    H_sc = curl V(rho),

with V the single layer of the outgoing Helmholtz kernel.  The far-field
pattern stored here is the leading coefficient of exp(ik r)/(4 pi r):

    E_inf(xhat) = -i omega mu  xhat x (xhat x a(xhat)),
    H_inf(xhat) =  i omega eps xhat x a(xhat),
    a(xhat)     = int_S exp(-ik<xhat, y>) rho(y) ds(y),

which matches the true E_sc asymptotics and satisfies the impedance identity
eps E_inf + mu xhat x H_inf = 0 exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._singular import polar_rule
from .em_core import FOUR_PI, MediumParams, PlaneWaveSpec, plane_wave_fields
from .errors import FileFormatError, InvalidArgumentError, SingularEvaluationError
from .geometry import (PlaneFrame, QuadratureRule, ScreenMesh, density_on_triangles,
                       frepr, map_rule, quadrature_rule)


@dataclass(frozen=True)
class DirectionGrid:
    """Product grid of observation directions around a frame normal.

    kind 'hemisphere' covers polar angles (0, theta_max]; kind 'sphere' adds
    the mirrored lower half.  theta_max is in radians.
    """

    kind: str
    n_theta: int
    n_phi: int
    theta_max: float

    def __post_init__(self):
        if self.kind not in ("hemisphere", "sphere"):
            raise InvalidArgumentError(f"unknown grid kind {self.kind!r}")
        if self.n_theta < 1 or self.n_phi < 1:
            raise InvalidArgumentError("grid counts must be >= 1")
        if not 0.0 < self.theta_max <= np.pi / 2:
            raise InvalidArgumentError("theta_max must lie in (0, pi/2]")

    @property
    def thetas(self) -> np.ndarray:
        return (np.arange(self.n_theta) + 0.5) * self.theta_max / self.n_theta

    @property
    def phis(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.n_phi) / self.n_phi

    def directions(self, frame: PlaneFrame) -> np.ndarray:
        th = self.thetas
        ph = self.phis
        st, ct = np.sin(th), np.cos(th)
        cp, sp = np.cos(ph), np.sin(ph)
        up = (np.multiply.outer(np.multiply.outer(st, cp), frame.t1)
              + np.multiply.outer(np.multiply.outer(st, sp), frame.t2)
              + np.multiply.outer(np.multiply.outer(ct, np.ones_like(ph)),
                                  frame.normal)).reshape(-1, 3)
        if self.kind == "hemisphere":
            return up
        down = up - 2.0 * np.multiply.outer(up @ frame.normal, frame.normal)
        return np.vstack([up, down])

    def solid_angle_weights(self) -> np.ndarray:
        dth = self.theta_max / self.n_theta
        dph = 2.0 * np.pi / self.n_phi
        w = np.repeat(np.sin(self.thetas) * dth * dph, self.n_phi)
        if self.kind == "sphere":
            w = np.concatenate([w, w])
        return w


@dataclass(frozen=True)
class FarFieldData:
    """Sampled far-field patterns with their medium and optional grid."""

    directions: np.ndarray
    e_inf: np.ndarray
    h_inf: np.ndarray
    medium: MediumParams
    grid: DirectionGrid | None = None

    def __post_init__(self):
        d = np.asarray(self.directions, float)
        if d.ndim != 2 or d.shape[1] != 3:
            raise InvalidArgumentError("directions must have shape (n, 3)")

    @property
    def k(self) -> float:
        return self.medium.k

    def impedance_residual(self) -> float:
        eps, mu = self.medium.epsilon, self.medium.mu
        comb = eps * self.e_inf + mu * np.cross(self.directions, self.h_inf)
        scale = np.linalg.norm(eps * self.e_inf, axis=1).max()
        if scale == 0.0:
            return 0.0
        return float(np.linalg.norm(comb, axis=1).max() / scale)

    def transversality_residual(self) -> float:
        scale = max(np.abs(self.e_inf).max(), np.abs(self.h_inf).max())
        if scale == 0.0:
            return 0.0
        re = np.abs(np.einsum("nd,nd->n", self.directions, self.e_inf)).max()
        rh = np.abs(np.einsum("nd,nd->n", self.directions, self.h_inf)).max()
        return float(max(re, rh) / scale)


# ---------------------------------------------------------------------------
# Field evaluation
# ---------------------------------------------------------------------------

class _DensityEval:
    """Flattened quadrature view of a density expansion over the mesh."""

    def __init__(self, mesh, basis, coefficients, quad):
        self.mesh = mesh
        alpha, beta, div = density_on_triangles(mesh, basis, coefficients)
        self.alpha, self.beta, self.div = alpha, beta, div
        pts, wts = map_rule(mesh.tri_vertices, quad)
        nt, nq, _ = pts.shape
        self.pts = pts.reshape(-1, 3)
        self.wts = wts.reshape(-1)
        self.tri_of_node = np.repeat(np.arange(nt), nq)
        self.rho = alpha[self.tri_of_node, None] * self.pts \
            + beta[self.tri_of_node]
        self.div_nodes = div[self.tri_of_node]

    def rho_at(self, tri: int, points: np.ndarray) -> np.ndarray:
        return self.alpha[tri] * points + self.beta[tri]


def _point_triangle_distance(mesh: ScreenMesh, x: np.ndarray) -> np.ndarray:
    """Distance from a point to every (planar) triangle of the mesh."""
    dn = float(mesh.frame.signed_distance(x))
    s = mesh.frame.to_plane(x)
    tri2 = mesh.frame.to_plane(mesh.tri_vertices)  # (T, 3, 2)
    d2 = np.full(len(tri2), np.inf)
    a, b, c = tri2[:, 0], tri2[:, 1], tri2[:, 2]
    det = ((b - a)[:, 0] * (c - a)[:, 1] - (b - a)[:, 1] * (c - a)[:, 0])
    r = s - a
    l1 = (r[:, 0] * (c - a)[:, 1] - r[:, 1] * (c - a)[:, 0]) / det
    l2 = ((b - a)[:, 0] * r[:, 1] - (b - a)[:, 1] * r[:, 0]) / det
    inside = (l1 >= 0) & (l2 >= 0) & (l1 + l2 <= 1)
    d2[inside] = 0.0
    for p, q in ((a, b), (b, c), (c, a)):
        e = q - p
        t = np.clip(np.einsum("td,td->t", s - p, e)
                    / np.einsum("td,td->t", e, e), 0.0, 1.0)
        proj = p + t[:, None] * e
        d2 = np.minimum(d2, np.einsum("td,td->t", s - proj, s - proj))
    return np.sqrt(d2 + dn * dn)


def scattered_fields(mesh: ScreenMesh, density, medium: MediumParams, x,
                     quad: QuadratureRule | None = None,
                     near_factor: float = 1.2):
    """Scattered (E, H) at one point (3,) or a batch (n, 3) of points.

    Triangles closer than ``near_factor`` times their diameter are integrated
    with the graded polar fan rule; the rest use the fixed triangle rule.
    Raises if an evaluation point lies on the screen.
    """
    coeff = getattr(density, "coefficients", density)
    if quad is None:
        quad = quadrature_rule(5)
    ev = _DensityEval(mesh, mesh.basis(), coeff, quad)
    pts_in = np.asarray(x, float)
    single = pts_in.ndim == 1
    pts_in = np.atleast_2d(pts_in)
    k = medium.k
    h = mesh.mesh_size
    e_out = np.zeros((len(pts_in), 3), complex)
    h_out = np.zeros((len(pts_in), 3), complex)
    if not np.any(coeff):
        return (e_out[0], h_out[0]) if single else (e_out, h_out)

    for idx, xp in enumerate(pts_in):
        dist = _point_triangle_distance(mesh, xp)
        if dist.min() <= 1e-12 * h:
            raise SingularEvaluationError(
                "field evaluation point lies on the screen surface")
        near = dist < near_factor * mesh.diameters
        far_nodes = ~near[ev.tri_of_node]

        v = np.zeros(3, complex)
        gvd = np.zeros(3, complex)
        curl = np.zeros(3, complex)
        if far_nodes.any():
            y = ev.pts[far_nodes]
            w = ev.wts[far_nodes]
            rho = ev.rho[far_nodes]
            dv = ev.div_nodes[far_nodes]
            d = xp - y
            r = np.linalg.norm(d, axis=1)
            phi = w * np.exp(1j * k * r) / (FOUR_PI * r)
            gk = (1j * k - 1.0 / r) / r * phi
            v += phi @ rho
            gvd += gk * dv @ d
            curl += np.cross(gk[:, None] * d, rho).sum(axis=0)
        dn = float(mesh.frame.signed_distance(xp))
        x0 = xp - dn * mesh.frame.normal
        for t in np.where(near)[0]:
            ypts, yw = polar_rule(mesh.tri_vertices[t], x0, dn)
            rho = ev.rho_at(t, ypts)
            d = xp - ypts
            r = np.linalg.norm(d, axis=1)
            phi = yw * np.exp(1j * k * r) / (FOUR_PI * r)
            gk = (1j * k - 1.0 / r) / r * phi
            v += phi @ rho
            gvd += ev.div[t] * (gk @ d)
            curl += np.cross(gk[:, None] * d, rho).sum(axis=0)
        e_out[idx] = (1j / (medium.omega * medium.epsilon)) * (gvd + k * k * v)
        h_out[idx] = curl
    return (e_out[0], h_out[0]) if single else (e_out, h_out)


def radiation_vector(mesh: ScreenMesh, density, medium: MediumParams,
                     directions, quad: QuadratureRule | None = None) -> np.ndarray:
    """a(xhat) = int_S exp(-ik <xhat, y>) rho(y) ds(y) for each direction."""
    coeff = getattr(density, "coefficients", density)
    if quad is None:
        quad = quadrature_rule(5)
    dirs = np.atleast_2d(np.asarray(directions, float))
    ev = _DensityEval(mesh, mesh.basis(), coeff, quad)
    phase = np.exp(-1j * medium.k * (dirs @ ev.pts.T)) * ev.wts
    return phase @ ev.rho


def far_field(mesh: ScreenMesh, density, medium: MediumParams, directions,
              quad: QuadratureRule | None = None,
              grid: DirectionGrid | None = None) -> FarFieldData:
    """Far-field patterns of a solved density at unit directions (n, 3)."""
    dirs = np.atleast_2d(np.asarray(directions, float))
    if np.abs(np.linalg.norm(dirs, axis=1) - 1.0).max() > 1e-9:
        raise InvalidArgumentError("directions must be unit vectors")
    a = radiation_vector(mesh, density, medium, dirs, quad)
    xa = np.cross(dirs, a)
    e_inf = -1j * medium.omega * medium.mu * np.cross(dirs, xa)
    h_inf = 1j * medium.omega * medium.epsilon * xa
    return FarFieldData(dirs, e_inf, h_inf, medium, grid)


def _sphere_points(n: int) -> np.ndarray:
    """Deterministic golden-spiral directions."""
    i = np.arange(n)
    z = 1.0 - (2.0 * i + 1.0) / n
    phi = i * np.pi * (3.0 - np.sqrt(5.0))
    s = np.sqrt(1.0 - z * z)
    return np.column_stack([s * np.cos(phi), s * np.sin(phi), z])


def silver_muller_residual(mesh: ScreenMesh, density, medium: MediumParams,
                           radius: float, n_samples: int = 64) -> float:
    """max over sphere samples of |xhat x E_sc - sqrt(mu/eps) H_sc| * radius.

    This combination of the outgoing pair decays like 1/radius; it is the
    radiation-condition residual scaled by the sphere radius.
    """
    if radius <= 0:
        raise InvalidArgumentError("radius must be positive")
    dirs = _sphere_points(n_samples)
    pts = radius * dirs
    e, h = scattered_fields(mesh, density, medium, pts)
    comb = np.cross(dirs, e) - np.sqrt(medium.mu / medium.epsilon) * h
    return float(radius * np.linalg.norm(comb, axis=1).max())


# ---------------------------------------------------------------------------
# Residual diagnostics used by the verification suite and the CLI
# ---------------------------------------------------------------------------

def boundary_condition_residual(mesh: ScreenMesh, density, spec: PlaneWaveSpec,
                                medium: MediumParams,
                                delta_factor: float = 1e-3) -> float:
    """Relative tangential total-field residual near the screen.

    Samples nu x (E_sc + E0) at triangle centroids offset by
    delta_factor * mesh_size along the normal, area-weighted, relative to the
    incident tangential field on the screen.
    """
    delta = delta_factor * mesh.mesh_size
    pts = mesh.centroids + delta * mesh.frame.normal
    e_sc, _ = scattered_fields(mesh, density, medium, pts)
    e0, _ = plane_wave_fields(spec, medium, pts)
    nu = mesh.frame.normal
    tot = np.cross(np.broadcast_to(nu, e_sc.shape), e_sc + e0)
    ref = np.cross(np.broadcast_to(nu, e_sc.shape), e0)
    num = np.sqrt((mesh.areas * np.einsum("td,td->t", tot, tot.conj()).real).sum())
    den = np.sqrt((mesh.areas * np.einsum("td,td->t", ref, ref.conj()).real).sum())
    if den == 0.0:
        return 0.0
    return float(num / den)


def magnetic_jump_residual(mesh: ScreenMesh, density, medium: MediumParams,
                           delta_factor: float = 1e-3,
                           triangles=None) -> float:
    """Relative mismatch of [nu x H_sc] against the density across the screen.

    Evaluates H_sc at centroid +- delta nu, forms the jump of nu x H, and
    compares with the density at the centroid (L2 over the sampled set).
    """
    coeff = getattr(density, "coefficients", density)
    alpha, beta, _ = density_on_triangles(mesh, mesh.basis(), coeff)
    if triangles is None:
        triangles = np.arange(len(mesh.triangles))
    triangles = np.asarray(triangles, int)
    delta = delta_factor * mesh.mesh_size
    nu = mesh.frame.normal
    pts_up = mesh.centroids[triangles] + delta * nu
    pts_dn = mesh.centroids[triangles] - delta * nu
    _, h_up = scattered_fields(mesh, density, medium, pts_up)
    _, h_dn = scattered_fields(mesh, density, medium, pts_dn)
    jump = np.cross(np.broadcast_to(nu, h_up.shape), h_up - h_dn)
    rho = alpha[triangles, None] * mesh.centroids[triangles] + beta[triangles]
    num = np.linalg.norm(jump - rho)
    den = np.linalg.norm(rho)
    if den == 0.0:
        return 0.0
    return float(num / den)


# ---------------------------------------------------------------------------
# Far-field file format
# ---------------------------------------------------------------------------

def save_farfield(ff: FarFieldData, path, frame: PlaneFrame | None = None) -> None:
    """Write the structured text format: header, then one record per direction
    with 15 floats (direction, re/im-interleaved E_inf, re/im-interleaved H_inf).
    """
    lines = ["farfield 1",
             f"k {frepr(ff.medium.k)}",
             f"eps {frepr(ff.medium.epsilon)}",
             f"mu {frepr(ff.medium.mu)}"]
    if ff.grid is not None:
        g = ff.grid
        lines.append(f"grid {g.kind} {g.n_theta} {g.n_phi} {frepr(g.theta_max)}")
    if frame is not None:
        n = frame.normal
        lines.append(f"frame {frepr(n[0])} {frepr(n[1])} {frepr(n[2])} "
                     f"{frepr(frame.offset)}")
    flag = "pass" if ff.impedance_residual() < 1e-12 else "fail"
    lines.append(f"impedance_check {flag}")
    lines.append(f"n {len(ff.directions)}")
    for d, e, h in zip(ff.directions, ff.e_inf, ff.h_inf):
        rec = list(d)
        for z in e:
            rec += [z.real, z.imag]
        for z in h:
            rec += [z.real, z.imag]
        lines.append(" ".join(frepr(v) for v in rec))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_farfield(path):
    """Read a far-field file; returns (FarFieldData, frame_or_None)."""
    with open(path) as fh:
        raw = [ln.strip() for ln in fh if ln.strip()]
    if not raw or raw[0] != "farfield 1":
        head = raw[0] if raw else "<empty>"
        raise FileFormatError(f"bad far-field header: {head!r}")
    meta = {}
    grid = None
    frame = None
    i = 1
    while i < len(raw):
        parts = raw[i].split()
        key = parts[0]
        if key in ("k", "eps", "mu"):
            meta[key] = float(parts[1])
        elif key == "grid":
            grid = DirectionGrid(parts[1], int(parts[2]), int(parts[3]),
                                 float(parts[4]))
        elif key == "frame":
            frame = PlaneFrame.from_normal([float(v) for v in parts[1:4]],
                                           float(parts[4]))
        elif key == "impedance_check":
            meta["impedance_check"] = parts[1]
        elif key == "n":
            meta["n"] = int(parts[1])
            i += 1
            break
        else:
            raise FileFormatError(f"unrecognized far-field header line: {raw[i]!r}")
        i += 1
    for key in ("k", "eps", "mu", "n"):
        if key not in meta:
            raise FileFormatError(f"far-field header is missing {key!r}")
    records = raw[i:]
    if len(records) != meta["n"]:
        raise FileFormatError(
            f"expected {meta['n']} far-field records, found {len(records)}")
    data = np.empty((meta["n"], 15))
    for j, ln in enumerate(records):
        vals = ln.split()
        if len(vals) != 15:
            raise FileFormatError(
                f"far-field record {j} has {len(vals)} fields, expected 15")
        data[j] = [float(v) for v in vals]
    dirs = data[:, 0:3]
    e_inf = data[:, 3:9:2] + 1j * data[:, 4:9:2]
    h_inf = data[:, 9:15:2] + 1j * data[:, 10:15:2]
    omega = meta["k"] / np.sqrt(meta["eps"] * meta["mu"])
    medium = MediumParams(meta["eps"], meta["mu"], omega)
    return FarFieldData(dirs, e_inf, h_inf, medium, grid), frame
