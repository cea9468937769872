"""Singularity-cancelling quadrature for triangle pairs and near-field points.

Galerkin double integrals over touching triangle pairs are mapped to the unit
4-cube with transforms whose Jacobians absorb the 1/|x-y| kernel singularity:
six sectors of the relative-coordinate hexagon for a coincident pair, four
regions (each mirrored) for a shared edge, and two for a shared vertex.
Near-singular single-triangle integrals use a fan of apex sub-triangles in
polar form with radial panels graded toward the projection point.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np


def gauss01(n: int):
    """Gauss-Legendre nodes and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def _tensor4(n: int):
    g, w = gauss01(n)
    cols = np.stack(np.meshgrid(g, g, g, g, indexing="ij"), axis=-1).reshape(-1, 4)
    wts = (w[:, None, None, None] * w[None, :, None, None]
           * w[None, None, :, None] * w[None, None, None, :]).reshape(-1)
    return cols, wts


# Parameter-space rules.  Coincident and shared-vertex rules live in the
# "staircase" simplex K = {0 <= v <= u <= 1} with the physical map
# X = A0 + u (A1 - A0) + v (A2 - A1); the shared-edge rule lives in the
# standard simplex with X = P + s (Q - P) + t (V - P), where [P, Q] is the
# shared edge.  Weights integrate the plain parameter measure, so each rule
# sums to area(domain)^2 = 1/4.

@lru_cache(maxsize=None)
def coincident_rule(n: int):
    cols, w4 = _tensor4(n)
    xi, eta, sig, tau = cols.T
    base = w4 * xi * (1.0 - xi) ** 2 * sig
    one = np.ones_like(eta)
    sectors = [
        ((one, eta), (0.0 * xi, 0.0 * xi)),
        ((1.0 - eta, one), (xi * eta, 0.0 * xi)),
        ((-eta, 1.0 - eta), (xi, 0.0 * xi)),
        ((-one, -eta), (xi, xi * eta)),
        ((eta - 1.0, -one), (xi, xi)),
        ((eta, eta - 1.0), (xi * (1.0 - eta), xi * (1.0 - eta))),
    ]
    xs, ys, ws = [], [], []
    for (zu, zv), (lu, lv) in sectors:
        xu = lu + (1.0 - xi) * sig
        xv = lv + (1.0 - xi) * sig * tau
        xs.append(np.column_stack([xu, xv]))
        ys.append(np.column_stack([xu + xi * zu, xv + xi * zv]))
        ws.append(base)
    return np.vstack(xs), np.vstack(ys), np.concatenate(ws)


@lru_cache(maxsize=None)
def edge_rule(n: int):
    cols, w4 = _tensor4(n)
    rh, al, bb, sg = cols.T
    xs, ys, ws = [], [], []

    def emit(x, y, w):
        xs.append(x)
        ys.append(y)
        ws.append(w)
        # mirror region with the roles of the two triangles swapped
        xs.append(y)
        ys.append(x)
        ws.append(w)

    # region 1: |s - s'| dominant
    rho = rh / (1.0 + al)
    w = w4 * rh ** 2 * (1.0 - rh) / (1.0 + al) ** 3
    s = rho + sg * (1.0 - rh)
    emit(np.column_stack([s, rho * al]),
         np.column_stack([s - rho, rho * bb]), w)
    # region 2: t dominant
    s = rho * al + sg * (1.0 - rh)
    emit(np.column_stack([s, rho]),
         np.column_stack([s - rho * al, rho * bb]), w)
    # region 3 (t' dominant) splits along beta = 1 - alpha
    beta = 1.0 - al + al * bb
    rho = rh / (1.0 + al * bb)
    w = w4 * al * rh ** 2 * (1.0 - rh) / (1.0 + al * bb) ** 3
    s = rho * al + sg * (1.0 - rh)
    emit(np.column_stack([s, rho * beta]),
         np.column_stack([s - rho * al, rho]), w)
    beta = (1.0 - al) * bb
    rho = rh
    w = w4 * rh ** 2 * (1.0 - rh) * (1.0 - al)
    s = rho * al + sg * (1.0 - rho)
    emit(np.column_stack([s, rho * beta]),
         np.column_stack([s - rho * al, rho]), w)
    return np.vstack(xs), np.vstack(ys), np.concatenate(ws)


@lru_cache(maxsize=None)
def vertex_rule(n: int):
    cols, w4 = _tensor4(n)
    rho, wv, tau, tpr = cols.T
    w = w4 * rho ** 3 * wv
    xa = np.column_stack([rho, rho * tau])
    ya = np.column_stack([rho * wv, rho * wv * tpr])
    xb = np.column_stack([rho * wv, rho * wv * tau])
    yb = np.column_stack([rho, rho * tpr])
    return np.vstack([xa, xb]), np.vstack([ya, yb]), np.concatenate([w, w])


def map_staircase(tri: np.ndarray, uv: np.ndarray) -> np.ndarray:
    """Map K-coordinates (u, v) to the triangle (A0, A1, A2)."""
    return (tri[0]
            + np.multiply.outer(uv[:, 0], tri[1] - tri[0])
            + np.multiply.outer(uv[:, 1], tri[2] - tri[1]))


def map_edge_chart(p, q, v, st: np.ndarray) -> np.ndarray:
    """Map standard-simplex coordinates (s, t) to the triangle (P, Q, V)."""
    return (p
            + np.multiply.outer(st[:, 0], q - p)
            + np.multiply.outer(st[:, 1], v - p))


# ---------------------------------------------------------------------------
# Near-singular single-triangle rule
# ---------------------------------------------------------------------------

def polar_rule(tri: np.ndarray, x0: np.ndarray, delta: float,
               n_ang: int = 10, n_rad: int = 8, max_panels: int = 64):
    """Signed fan quadrature over a triangle around a projection point.

    ``x0`` is the in-plane projection of the evaluation point and ``delta``
    its distance to the plane; radial panels are graded so kernels varying on
    the delta scale are resolved.  The fan is signed, so x0 may lie outside
    the triangle.  Returns (points, weights); weights sum to the triangle
    area (up to sign cancellation).
    """
    normal = np.cross(tri[1] - tri[0], tri[2] - tri[0])
    normal = normal / np.linalg.norm(normal)
    ga, wa = gauss01(n_ang)
    gr, wr = gauss01(n_rad)
    pts, wts = [], []
    for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
        d1, d2 = a - x0, b - x0
        sa2 = float(np.cross(d1, d2) @ normal)
        lmax = max(np.linalg.norm(d1), np.linalg.norm(d2))
        if abs(sa2) < 1e-300 or lmax == 0.0:
            continue
        dt = abs(delta) / lmax
        if dt <= 0.0 or dt >= 0.5:
            edges = np.array([0.0, 1.0])
        else:
            seq = [0.0, dt]
            while seq[-1] < 1.0 and len(seq) < max_panels:
                seq.append(min(1.0, 2.0 * seq[-1]))
            edges = np.array(seq)
        dirs = np.multiply.outer(1.0 - ga, d1) + np.multiply.outer(ga, d2)
        for lo, hi in zip(edges[:-1], edges[1:]):
            u = lo + gr * (hi - lo)
            wu = wr * (hi - lo) * u
            y = x0 + u[:, None, None] * dirs[None, :, :]
            w = sa2 * np.multiply.outer(wu, wa)
            pts.append(y.reshape(-1, 3))
            wts.append(w.reshape(-1))
    if not pts:
        return np.zeros((0, 3)), np.zeros(0)
    return np.vstack(pts), np.concatenate(wts)


# ---------------------------------------------------------------------------
# Independent reference integrator (tests and debugging)
# ---------------------------------------------------------------------------

def boundary_graded_fan(tri: np.ndarray, n_ang: int = 12, n_rad: int = 12,
                        n_panels: int = 24):
    """Fan rule about the centroid with radial panels graded toward the rim.

    Resolves integrands with mild (e.g. log-type) boundary singularities,
    such as single-layer potentials evaluated on their own panel.
    """
    c = tri.mean(axis=0)
    normal = np.cross(tri[1] - tri[0], tri[2] - tri[0])
    normal = normal / np.linalg.norm(normal)
    ga, wa = gauss01(n_ang)
    gr, wr = gauss01(n_rad)
    edges = 1.0 - 2.0 ** (-np.arange(n_panels + 1, dtype=float))
    edges[-1] = 1.0
    pts, wts = [], []
    for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
        d1, d2 = a - c, b - c
        sa2 = float(np.cross(d1, d2) @ normal)
        dirs = np.multiply.outer(1.0 - ga, d1) + np.multiply.outer(ga, d2)
        for lo, hi in zip(edges[:-1], edges[1:]):
            u = lo + gr * (hi - lo)
            wu = wr * (hi - lo) * u
            y = c + u[:, None, None] * dirs[None, :, :]
            w = sa2 * np.multiply.outer(wu, wa)
            pts.append(y.reshape(-1, 3))
            wts.append(w.reshape(-1))
    return np.vstack(pts), np.concatenate(wts)


def static_layer_moments(tri: np.ndarray, x: np.ndarray):
    """Closed-form in-plane integrals of the static kernel over a triangle.

    For observation points x in the triangle's plane, returns
    (i0, i1) with i0 = int 1/(4 pi R) dy and i1 = int y/(4 pi R) dy,
    via the classical per-edge line integrals.  x has shape (n, 3).
    """
    x = np.atleast_2d(np.asarray(x, float))
    n = np.cross(tri[1] - tri[0], tri[2] - tri[0])
    n = n / np.linalg.norm(n)
    i0 = np.zeros(len(x))
    i1 = np.zeros((len(x), 3))
    for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
        t = b - a
        ln_e = np.linalg.norm(t)
        t = t / ln_e
        m = np.cross(t, n)  # outward conormal for CCW triangles
        sa = (a - x) @ t
        sb = sa + ln_e
        d = (a - x) @ m
        ra = np.sqrt(d * d + sa * sa)
        rb = np.sqrt(d * d + sb * sb)
        small = np.abs(d) < 1e-14 * ln_e
        dd = np.where(small, 1.0, d * d)
        # ln((sb + rb)/(sa + ra)); s + r rewritten as d^2/(r - s) for s < 0
        # to avoid catastrophic cancellation near the edge line
        num = np.where(sb >= 0, sb + rb, dd / np.maximum(rb - sb, 1e-300))
        den = np.where(sa >= 0, sa + ra, dd / np.maximum(ra - sa, 1e-300))
        line = np.where(small, 0.0, np.log(num / den))
        i0 += d * line
        rint = 0.5 * (sb * rb - sa * ra + d * d * np.where(small, 0.0, line))
        i1 += np.multiply.outer(rint, m)
    i0 /= 4.0 * np.pi
    i1 = i1 / (4.0 * np.pi) + x * i0[:, None]
    return i0, i1


def _dynamic_fan_params(tri: np.ndarray, n_ang: int, n_rad: int):
    ga, wa = gauss01(n_ang)
    gr, wr = gauss01(n_rad)
    eta = np.repeat(ga, n_rad)
    u = np.tile(gr, n_ang)
    w = np.repeat(wa, n_rad) * np.tile(wr, n_ang) * u
    return eta, u, w


def pair_moments_reference(tri_x: np.ndarray, tri_y: np.ndarray, k: float,
                           center: np.ndarray, n_outer: int = 12,
                           n_inner: int = 12, chunk: int = 2048):
    """Brute-force pair moments, independent of the mapped 4-cube rules.

    Outer integral: fan rule graded toward the triangle rim.  Inner integral:
    closed-form static part plus a polar fan for the smooth remainder
    (exp(ikR) - 1)/(4 pi R).  Returns (m00, mx, my, mxy) centered at
    ``center``.
    """
    opts, owts = boundary_graded_fan(tri_x, n_ang=n_outer, n_rad=n_outer)
    eta, u, wfan = _dynamic_fan_params(tri_y, n_inner, n_inner)
    normal = np.cross(tri_y[1] - tri_y[0], tri_y[2] - tri_y[0])
    normal = normal / np.linalg.norm(normal)
    m00 = 0.0 + 0.0j
    mx = np.zeros(3, complex)
    my = np.zeros(3, complex)
    mxy = 0.0 + 0.0j
    corners = [(tri_y[0], tri_y[1]), (tri_y[1], tri_y[2]), (tri_y[2], tri_y[0])]
    for lo in range(0, len(opts), chunk):
        x = opts[lo:lo + chunk]
        wx = owts[lo:lo + chunk]
        i0, i1 = static_layer_moments(tri_y, x)
        i0 = i0.astype(complex)
        i1 = i1.astype(complex)
        for a, b in corners:
            d1 = a - x  # (n, 3)
            d2 = b - x
            sa2 = np.einsum("nd,d->n", np.cross(d1, d2), normal)
            dirs = ((1.0 - eta)[None, :, None] * d1[:, None, :]
                    + eta[None, :, None] * d2[:, None, :])
            y = x[:, None, :] + u[None, :, None] * dirs
            r = np.linalg.norm(y - x[:, None, :], axis=2)
            ker = (sa2[:, None] * wfan[None, :]) \
                * (np.expm1(1j * k * r) / (4.0 * np.pi * r))
            i0 += ker.sum(axis=1)
            i1 += np.einsum("nm,nmd->nd", ker, y)
        xc = x - center
        yc = i1 - center[None, :] * i0[:, None]
        m00 += wx @ i0
        mx += (wx * i0) @ xc
        my += wx @ yc
        mxy += wx @ np.einsum("nd,nd->n", xc, yc)
    return m00, mx, my, mxy
