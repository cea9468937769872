"""Inverse stage: Fourier-data extraction, support imaging, plane recovery.

A far-field pattern of a current supported on a known plane determines the
current's 2D Fourier transform on the disc |xi'| < k: per direction, the
cross-product map w -> xhat x w is inverted algebraically, a grazing cutoff
guards the division by <xhat, normal>, and the plane offset is compensated
by a phase.  Support imaging is the thresholded band-limited inverse
transform (resolution half a wavelength); the supporting plane itself is
recovered by minimizing, over candidate planes, the least-squares misfit of
the data against far fields of tangential currents on that plane.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .errors import (DegenerateDataError, FileFormatError, InvalidArgumentError)
from .fields import FarFieldData
from .geometry import PlaneFrame, ScreenMesh, density_on_triangles, frepr, \
    map_rule, quadrature_rule

GRAZING_CUT = 0.1


@dataclass(frozen=True)
class FourierSamples:
    """Samples of the in-plane current spectrum inside the band |xi| < k."""

    xi: np.ndarray        # (n, 2) in-plane spatial frequencies
    values: np.ndarray    # (n, 2) complex spectrum in the (t1, t2) frame
    k: float
    weights: np.ndarray   # (n,) inverse-transform quadrature weights
    n_skipped: int = 0

    def __post_init__(self):
        if len(self.xi) and np.linalg.norm(self.xi, axis=1).max() >= self.k:
            raise InvalidArgumentError("Fourier samples must satisfy |xi| < k")


def invert_cross_product(directions, v, normal):
    """Solve xhat x w = v for w tangential to the plane of ``normal``.

    Exact algebra: <xhat, w> = (xhat x v).normal / <xhat, normal> and
    w = xhat <xhat, w> - xhat x v.  Requires non-grazing directions.
    """
    d = np.atleast_2d(np.asarray(directions, float))
    v = np.atleast_2d(np.asarray(v))
    cosn = d @ normal
    xv = np.cross(d, v)
    s = (xv @ normal) / cosn
    return s[:, None] * d - xv


def extract_fourier_data(ff: FarFieldData, frame: PlaneFrame,
                         grazing_cut: float = GRAZING_CUT) -> FourierSamples:
    """Recover band-limited Fourier data of the current from a far field.

    Directions with |<xhat, normal>| <= grazing_cut are skipped and counted.
    The plane offset is compensated, so the samples refer to in-plane
    coordinates of the frame chart.
    """
    k = ff.medium.k
    d = ff.directions
    cosn = d @ frame.normal
    keep = np.abs(cosn) > grazing_cut
    n_skipped = int((~keep).sum())
    d = d[keep]
    v = np.cross(d, ff.e_inf[keep]) / (1j * ff.medium.omega * ff.medium.mu)
    w = invert_cross_product(d, v, frame.normal)
    w = w * np.exp(1j * k * frame.offset * cosn[keep])[:, None]
    xi = k * np.column_stack([d @ frame.t1, d @ frame.t2])
    values = np.column_stack([w @ frame.t1, w @ frame.t2])
    weights = _band_weights(ff, keep, cosn[keep], k)
    return FourierSamples(xi, values, k, weights, n_skipped)


def _band_weights(ff: FarFieldData, keep, cosn, k) -> np.ndarray:
    """Quadrature weights for the band-limited inverse transform.

    With grid metadata the polar Jacobian k^2 sin(theta) |cos(theta)| is
    exact; without it the sampled disc area is split evenly.
    """
    if ff.grid is not None:
        g = ff.grid
        dth = g.theta_max / g.n_theta
        dph = 2.0 * np.pi / g.n_phi
        sin_t = np.sqrt(np.clip(1.0 - cosn ** 2, 0.0, 1.0))
        mult = 2.0 if g.kind == "sphere" else 1.0
        return (k * k * sin_t * np.abs(cosn) * dth * dph
                / (2.0 * np.pi) ** 2 / mult)
    n = int(keep.sum())
    disc = np.pi * (k * k) * (1.0 - GRAZING_CUT ** 2)
    return np.full(n, disc / max(n, 1) / (2.0 * np.pi) ** 2)


@dataclass(frozen=True)
class ImagingGrid:
    """Square in-plane imaging grid; spacing must resolve the band limit k."""

    half_width: float
    spacing: float

    def __post_init__(self):
        if self.half_width <= 0 or self.spacing <= 0:
            raise InvalidArgumentError("grid dimensions must be positive")

    def axes(self):
        n = int(np.floor(self.half_width / self.spacing))
        ax = self.spacing * np.arange(-n, n + 1)
        return ax, ax


@dataclass(frozen=True)
class SupportImage:
    """Band-limited reconstruction magnitude on a plane grid, with threshold."""

    s1: np.ndarray
    s2: np.ndarray
    intensity: np.ndarray  # (n1, n2) nonnegative
    tau: float
    frame: PlaneFrame
    k: float

    @property
    def threshold_value(self) -> float:
        return self.tau * float(self.intensity.max())

    @property
    def support_mask(self) -> np.ndarray:
        m = float(self.intensity.max())
        if m == 0.0:
            return np.zeros_like(self.intensity, bool)
        return self.intensity >= self.tau * m

    def support_points(self) -> np.ndarray:
        """In-plane coordinates (n, 2) of grid nodes above threshold."""
        i, j = np.where(self.support_mask)
        return np.column_stack([self.s1[i], self.s2[j]])


def reconstruct_support(fs: FourierSamples, grid: ImagingGrid, tau: float,
                        frame: PlaneFrame | None = None) -> SupportImage:
    """Thresholded band-limited inversion of the Fourier samples."""
    if len(fs.xi) == 0:
        raise InvalidArgumentError("cannot reconstruct from an empty sample set")
    if not 0.0 < tau < 1.0:
        raise InvalidArgumentError("threshold fraction must lie in (0, 1)")
    if grid.spacing > np.pi / (2.0 * fs.k):
        raise InvalidArgumentError(
            f"grid spacing {grid.spacing} exceeds the Nyquist limit "
            f"{np.pi / (2.0 * fs.k)} for band limit k={fs.k}")
    s1, s2 = grid.axes()
    pts = np.stack(np.meshgrid(s1, s2, indexing="ij"), -1).reshape(-1, 2)
    phase = np.exp(1j * (pts @ fs.xi.T)) * fs.weights
    rec = phase @ fs.values
    intensity = np.linalg.norm(rec, axis=1).reshape(len(s1), len(s2))
    return SupportImage(s1, s2, intensity, float(tau),
                        frame if frame is not None else PlaneFrame.xy(), fs.k)


# ---------------------------------------------------------------------------
# Supporting-plane recovery
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PlaneSearchSpec:
    """Search configuration for the plane fit.

    The model space per candidate plane is spanned by point currents on a
    disc patch of the plane, spaced below the half-wavelength resolution.
    """

    patch_radius: float
    offset_range: float
    basis_spacing: float
    offset_step: float
    coarse_angle_deg: float = 10.0
    refine: bool = True
    n_starts: int = 3


@dataclass(frozen=True)
class PlaneEstimate:
    normal: np.ndarray
    offset: float
    objective: float
    iterations: int


def canonical_plane(normal, offset: float):
    """Resolve the (normal, offset) ~ (-normal, -offset) plane ambiguity."""
    n = np.asarray(normal, float)
    n = n / np.linalg.norm(n)
    flip = n[2] < 0 or (n[2] == 0 and (n[0] < 0 or (n[0] == 0 and n[1] < 0)))
    if flip:
        return -n, -float(offset)
    return n, float(offset)


def _patch_points(spacing: float, radius: float) -> np.ndarray:
    n = int(np.floor(radius / spacing))
    ax = spacing * np.arange(-n, n + 1)
    g = np.stack(np.meshgrid(ax, ax, indexing="ij"), -1).reshape(-1, 2)
    return g[np.linalg.norm(g, axis=1) <= radius + 1e-12]


class _PlaneFitWorkspace:
    """Shared data for repeated objective evaluations on one far field."""

    def __init__(self, ff: FarFieldData, search: PlaneSearchSpec):
        self.k = ff.medium.k
        self.dirs = ff.directions
        self.b = ff.e_inf.reshape(-1)
        self.bnorm = np.linalg.norm(self.b)
        self.search = search
        self.grid2 = _patch_points(search.basis_spacing, search.patch_radius)

    def model_q(self, frame: PlaneFrame) -> np.ndarray:
        """Orthonormal basis (QR) of the model far fields for offset zero."""
        pts = (np.multiply.outer(self.grid2[:, 0], frame.t1)
               + np.multiply.outer(self.grid2[:, 1], frame.t2))
        phase = np.exp(-1j * self.k * (self.dirs @ pts.T))  # (ndir, npts)
        cols = []
        for t in (frame.t1, frame.t2):
            pol = np.cross(self.dirs, np.cross(self.dirs,
                                               np.broadcast_to(t, self.dirs.shape)))
            cols.append(phase[:, :, None] * pol[:, None, :])
        a = np.concatenate(cols, axis=1)  # (ndir, 2 npts, 3)
        a = a.transpose(0, 2, 1).reshape(len(self.dirs) * 3, -1)
        q, _ = np.linalg.qr(a)
        return q

    def objective_given_q(self, q, frame: PlaneFrame, offset: float) -> float:
        phase = np.exp(1j * self.k * offset * (self.dirs @ frame.normal))
        bt = (self.b.reshape(-1, 3) * phase[:, None]).reshape(-1)
        proj = q.conj().T @ bt
        res2 = max(np.linalg.norm(bt) ** 2 - np.linalg.norm(proj) ** 2, 0.0)
        return float(np.sqrt(res2) / self.bnorm)


def plane_fit_objective(ff: FarFieldData, normal, offset: float,
                        search: PlaneSearchSpec) -> float:
    """Relative misfit of the far field against currents on a candidate plane."""
    ws = _PlaneFitWorkspace(ff, search)
    n, d = canonical_plane(normal, offset)
    frame = PlaneFrame.from_normal(n, 0.0)
    return ws.objective_given_q(ws.model_q(frame), frame, d)


def fit_hyperplane(ff: FarFieldData, search: PlaneSearchSpec,
                   return_landscape: bool = False):
    """Recover the supporting plane of the current from one far field.

    Coarse grid over upper-hemisphere normals and offsets, then derivative
    free local refinement from the best starts.  The objective at each
    candidate is the least-squares residual of a linear fit (the offset only
    rephases the data, so one orthonormal model basis per normal serves all
    offsets).
    """
    if np.linalg.norm(ff.e_inf, axis=1).max() < 1e-12:
        raise DegenerateDataError(
            "far field vanishes: the uniqueness hypothesis is violated")
    ws = _PlaneFitWorkspace(ff, search)
    # coarse localization tolerates a sparser (cheaper) model basis
    lam = 2.0 * np.pi / ff.medium.k
    coarse = PlaneSearchSpec(search.patch_radius, search.offset_range,
                             max(search.basis_spacing, lam / 3.0),
                             search.offset_step, search.coarse_angle_deg,
                             search.refine, search.n_starts)
    ws_coarse = _PlaneFitWorkspace(ff, coarse)
    step = np.deg2rad(search.coarse_angle_deg)
    n_theta = max(1, int(np.floor((np.pi / 2) / step)))
    offsets = np.arange(-search.offset_range, search.offset_range + 1e-12,
                        search.offset_step)
    if len(offsets) == 0:
        offsets = np.array([0.0])

    candidates = [(0.0, 0.0)]
    for i in range(1, n_theta + 1):
        th = i * step
        if th > np.pi / 2 - 1e-9:
            break
        for j in range(int(round(2 * np.pi / step))):
            candidates.append((th, j * step))

    results = []
    landscape = []
    n_eval = 0
    for th, phv in candidates:
        normal = np.array([np.sin(th) * np.cos(phv),
                           np.sin(th) * np.sin(phv), np.cos(th)])
        ncan, _ = canonical_plane(normal, 0.0)
        frame = PlaneFrame.from_normal(ncan, 0.0)
        q = ws_coarse.model_q(frame)
        best_d, best_obj = 0.0, np.inf
        for d in offsets:
            obj = ws_coarse.objective_given_q(q, frame, float(d))
            n_eval += 1
            if obj < best_obj:
                best_d, best_obj = float(d), obj
        results.append((best_obj, normal, best_d))
        landscape.append((np.rad2deg(th), np.rad2deg(phv), best_d, best_obj))

    results.sort(key=lambda r: r[0])

    def fine_objective(normal, d):
        nc, dc = canonical_plane(normal, d)
        frame = PlaneFrame.from_normal(nc, 0.0)
        return ws.objective_given_q(ws.model_q(frame), frame, dc)

    best_obj, best_n, best_d = np.inf, results[0][1], results[0][2]
    for _, n0, d0 in results[:max(1, search.n_starts)]:
        obj = fine_objective(n0, d0)
        n_eval += 1
        if obj < best_obj:
            best_obj, best_n, best_d = obj, n0, d0

    if search.refine:
        for _, n0, d0 in results[:max(1, search.n_starts)]:
            base = PlaneFrame.from_normal(n0, 0.0)

            def obj_fn(x):
                nv = n0 + x[0] * base.t1 + x[1] * base.t2
                return fine_objective(nv / np.linalg.norm(nv), x[2])

            x0 = np.array([0.0, 0.0, d0])
            h_ang = np.deg2rad(4.0)
            h_off = max(search.offset_step / 2.0, 1e-3)
            simplex = np.array([x0,
                                x0 + [h_ang, 0, 0],
                                x0 + [0, h_ang, 0],
                                x0 + [0, 0, h_off]])
            res = minimize(obj_fn, x0, method="Nelder-Mead",
                           options=dict(initial_simplex=simplex, xatol=1e-4,
                                        fatol=1e-12, maxiter=150))
            n_eval += res.nfev
            if res.fun < best_obj:
                nv = n0 + res.x[0] * base.t1 + res.x[1] * base.t2
                nv = nv / np.linalg.norm(nv)
                best_n, best_d = canonical_plane(nv, res.x[2])
                best_obj = float(res.fun)

    ncan, dcan = canonical_plane(best_n, best_d)
    est = PlaneEstimate(ncan, dcan, best_obj, n_eval)
    if return_landscape:
        return est, landscape
    return est


def full_support_check(density, mesh: ScreenMesh, tau: float):
    """Fraction of triangles whose local rms current exceeds tau * max."""
    if not 0.0 < tau < 1.0:
        raise InvalidArgumentError("threshold fraction must lie in (0, 1)")
    coeff = getattr(density, "coefficients", density)
    alpha, beta, _ = density_on_triangles(mesh, mesh.basis(), coeff)
    rule = quadrature_rule(5)
    pts, wts = map_rule(mesh.tri_vertices, rule)
    rho = alpha[:, None, None] * pts + beta[:, None, :]
    msq = np.einsum("tq,tqd->t", wts, np.abs(rho) ** 2) / mesh.areas
    vals = np.sqrt(msq)
    vmax = vals.max()
    if vmax == 0.0:
        return 0.0, np.zeros(len(vals), bool)
    flags = vals >= tau * vmax
    return float(flags.mean()), flags


# ---------------------------------------------------------------------------
# File formats for the inverse outputs
# ---------------------------------------------------------------------------

def save_support_image(img: SupportImage, path) -> None:
    n = img.frame.normal
    ds1 = img.s1[1] - img.s1[0] if len(img.s1) > 1 else 0.0
    ds2 = img.s2[1] - img.s2[0] if len(img.s2) > 1 else 0.0
    lines = ["supportimage 1",
             f"frame {frepr(n[0])} {frepr(n[1])} {frepr(n[2])} "
             f"{frepr(img.frame.offset)}",
             f"k {frepr(img.k)}",
             f"tau {frepr(img.tau)}",
             f"grid {len(img.s1)} {len(img.s2)} {frepr(img.s1[0])} "
             f"{frepr(img.s2[0])} {frepr(ds1)} {frepr(ds2)}",
             f"n {img.intensity.size}"]
    for i, a in enumerate(img.s1):
        for j, b in enumerate(img.s2):
            lines.append(f"{frepr(a)} {frepr(b)} {frepr(img.intensity[i, j])}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_support_image(path) -> SupportImage:
    with open(path) as fh:
        raw = [ln.strip() for ln in fh if ln.strip()]
    if not raw or raw[0] != "supportimage 1":
        raise FileFormatError("bad support-image header")
    meta = {}
    i = 1
    while i < len(raw):
        parts = raw[i].split()
        if parts[0] == "frame":
            meta["frame"] = PlaneFrame.from_normal(
                [float(v) for v in parts[1:4]], float(parts[4]))
        elif parts[0] in ("k", "tau"):
            meta[parts[0]] = float(parts[1])
        elif parts[0] == "grid":
            meta["grid"] = (int(parts[1]), int(parts[2]), float(parts[3]),
                            float(parts[4]), float(parts[5]), float(parts[6]))
        elif parts[0] == "n":
            meta["n"] = int(parts[1])
            i += 1
            break
        else:
            raise FileFormatError(f"unrecognized support-image line: {raw[i]!r}")
        i += 1
    if set(meta) < {"frame", "k", "tau", "grid", "n"}:
        raise FileFormatError("support-image header incomplete")
    n1, n2, x0, y0, dx, dy = meta["grid"]
    records = raw[i:]
    if len(records) != meta["n"] or meta["n"] != n1 * n2:
        raise FileFormatError("support-image record count mismatch")
    intensity = np.empty((n1, n2))
    for r, ln in enumerate(records):
        vals = [float(v) for v in ln.split()]
        if len(vals) != 3:
            raise FileFormatError(f"support-image record {r} malformed")
        intensity[r // n2, r % n2] = vals[2]
    s1 = x0 + dx * np.arange(n1)
    s2 = y0 + dy * np.arange(n2)
    return SupportImage(s1, s2, intensity, meta["tau"], meta["frame"], meta["k"])


def save_plane_estimate(est: PlaneEstimate, path) -> None:
    n = est.normal
    lines = ["planeestimate 1",
             f"normal {frepr(n[0])} {frepr(n[1])} {frepr(n[2])}",
             f"offset {frepr(est.offset)}",
             f"objective {frepr(est.objective)}",
             f"iterations {est.iterations}"]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_plane_estimate(path) -> PlaneEstimate:
    with open(path) as fh:
        raw = [ln.strip() for ln in fh if ln.strip()]
    if not raw or raw[0] != "planeestimate 1":
        raise FileFormatError("bad plane-estimate header")
    meta = {}
    for ln in raw[1:]:
        parts = ln.split()
        meta[parts[0]] = parts[1:]
    try:
        return PlaneEstimate(np.array([float(v) for v in meta["normal"]]),
                             float(meta["offset"][0]),
                             float(meta["objective"][0]),
                             int(meta["iterations"][0]))
    except (KeyError, IndexError, ValueError) as exc:
        raise FileFormatError(f"plane-estimate file incomplete: {exc}") from exc


def save_plane_landscape(landscape, path) -> None:
    lines = ["planefitlandscape 1", f"n {len(landscape)}"]
    for th, ph, d, obj in landscape:
        lines.append(f"{frepr(th)} {frepr(ph)} {frepr(d)} {frepr(obj)}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_plane_landscape(path):
    with open(path) as fh:
        raw = [ln.strip() for ln in fh if ln.strip()]
    if not raw or raw[0] != "planefitlandscape 1":
        raise FileFormatError("bad plane-landscape header")
    if len(raw) < 2 or not raw[1].startswith("n "):
        raise FileFormatError("plane-landscape missing count")
    n = int(raw[1].split()[1])
    rows = [tuple(float(v) for v in ln.split()) for ln in raw[2:]]
    if len(rows) != n or any(len(r) != 4 for r in rows):
        raise FileFormatError("plane-landscape record mismatch")
    return rows
