"""Galerkin assembly of the screen EFIE and the dense direct solve.

The weak form is assembled with the surface divergence moved onto the test
function, leaving only the weakly singular kernel:

    A[m, n] = int int phi(x - y) * (k^2 b_m(x).b_n(y)
                                    - Div b_m(x) Div b_n(y)) ds(y) ds(x)

with rhs[m] = i omega eps int E0(x).b_m(x) ds(x), so that A rho = rhs yields
the coefficients of the tangential magnetic-field jump and the scattered
field reproduces the conductor boundary condition.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import get_lapack_funcs, lu_factor, lu_solve

from . import _singular as sq
from .em_core import FOUR_PI, MediumParams, PlaneWaveSpec
from .errors import ConditioningError, InvalidArgumentError
from .geometry import EdgeBasisSet, QuadratureRule, ScreenMesh, map_rule, quadrature_rule


@dataclass(frozen=True)
class SystemMatrix:
    """Dense complex-symmetric Galerkin matrix over the interior-edge basis."""

    matrix: np.ndarray
    medium: MediumParams

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def symmetry_residual(self) -> float:
        a = self.matrix
        return float(np.abs(a - a.T).max() / np.abs(a).max())


@dataclass(frozen=True)
class RhsVector:
    values: np.ndarray


@dataclass(frozen=True)
class DensityVector:
    """Coefficients of the jump density over the interior-edge basis."""

    coefficients: np.ndarray
    solve_residual: float = 0.0


def _pair_kernel_moments(xpts, ypts, w, k, center):
    d = xpts - ypts
    r = np.linalg.norm(d, axis=-1)
    ker = w * np.exp(1j * k * r) / (FOUR_PI * r)
    xc = xpts - center
    yc = ypts - center
    m00 = ker.sum()
    mx = ker @ xc
    my = ker @ yc
    mxy = ker @ np.einsum("ij,ij->i", xc, yc)
    return m00, mx, my, mxy


def _scatter_pair(acc, mesh, basis, k, s, t, moments, center, both_orders):
    """Add one ordered (or, for s == t, full) pair contribution to the matrix."""
    m00, mx, my, mxy = moments
    verts = mesh.vertices
    areas = mesh.areas
    tb, ts_, tf = basis.tri_basis, basis.tri_sign, basis.tri_free
    for i in range(3):
        m = tb[s, i]
        if m < 0:
            continue
        cm = ts_[s, i] * basis.lengths[m] / (2.0 * areas[s])
        vm = verts[tf[s, i]] - center
        for j in range(3):
            n = tb[t, j]
            if n < 0:
                continue
            cn = ts_[t, j] * basis.lengths[n] / (2.0 * areas[t])
            vn = verts[tf[t, j]] - center
            val = cm * cn * (k * k * (mxy - mx @ vn - vm @ my + (vm @ vn) * m00)
                             - 4.0 * m00)
            acc[m, n] += val
            if both_orders:
                acc[n, m] += val


def _touching_pairs(mesh: ScreenMesh):
    """Map (s, t) with s < t to the list of shared vertex ids."""
    vert_tris: dict[int, list[int]] = {}
    for t, tri in enumerate(mesh.triangles):
        for v in tri:
            vert_tris.setdefault(int(v), []).append(t)
    shared: dict[tuple[int, int], list[int]] = {}
    for v, ts in vert_tris.items():
        for i in range(len(ts)):
            for j in range(i + 1, len(ts)):
                key = (min(ts[i], ts[j]), max(ts[i], ts[j]))
                shared.setdefault(key, []).append(v)
    return shared


def assemble_system(mesh: ScreenMesh, basis: EdgeBasisSet, medium: MediumParams,
                    quad: QuadratureRule | None = None, *,
                    singular_order: int | None = None,
                    block_pairs: int = 32768) -> SystemMatrix:
    """Assemble the dense EFIE Galerkin matrix.

    ``quad`` integrates non-touching triangle pairs (tensorized); touching
    pairs go through the singularity-cancelling 4-cube rules.  Their Gauss
    order defaults to a value scaled with the electrical element size, so
    wavelength-sized panels stay fully resolved.  Each unordered pair is
    integrated once and scattered to both matrix halves, so the result is
    complex-symmetric to rounding.
    """
    if basis.size == 0:
        raise InvalidArgumentError("mesh has no interior edges: empty basis")
    if quad is None:
        quad = quadrature_rule(5)
    if quad.degree < 2:
        raise InvalidArgumentError("regular-pair quadrature must have degree >= 2")
    k = medium.k
    if singular_order is None:
        singular_order = int(np.clip(np.ceil(4 + k * mesh.mesh_size), 6, 16))
    nt = len(mesh.triangles)
    tv = mesh.tri_vertices
    cent = mesh.centroids
    a = np.zeros((basis.size, basis.size), complex)

    # touching pairs through the mapped 4-cube rules
    shared = _touching_pairs(mesh)
    co_x, co_y, co_w = sq.coincident_rule(singular_order)
    ed_x, ed_y, ed_w = sq.edge_rule(singular_order)
    vx_x, vx_y, vx_w = sq.vertex_rule(singular_order)

    for s in range(nt):
        tri = tv[s]
        jac = (2.0 * mesh.areas[s]) ** 2
        xp = sq.map_staircase(tri, co_x)
        yp = sq.map_staircase(tri, co_y)
        mom = _pair_kernel_moments(xp, yp, co_w * jac, k, cent[s])
        _scatter_pair(a, mesh, basis, k, s, s, mom, cent[s], both_orders=False)

    for (s, t), verts_shared in shared.items():
        c = 0.5 * (cent[s] + cent[t])
        jac = 4.0 * mesh.areas[s] * mesh.areas[t]
        if len(verts_shared) == 2:
            va, vb = sorted(verts_shared)
            p, q = mesh.vertices[va], mesh.vertices[vb]
            free_s = mesh.vertices[[v for v in mesh.triangles[s]
                                    if v != va and v != vb][0]]
            free_t = mesh.vertices[[v for v in mesh.triangles[t]
                                    if v != va and v != vb][0]]
            xp = sq.map_edge_chart(p, q, free_s, ed_x)
            yp = sq.map_edge_chart(p, q, free_t, ed_y)
            mom = _pair_kernel_moments(xp, yp, ed_w * jac, k, c)
        elif len(verts_shared) == 1:
            v0 = verts_shared[0]
            p = mesh.vertices[v0]
            os_ = [mesh.vertices[v] for v in mesh.triangles[s] if v != v0]
            ot_ = [mesh.vertices[v] for v in mesh.triangles[t] if v != v0]
            xp = sq.map_staircase(np.array([p, os_[0], os_[1]]), vx_x)
            yp = sq.map_staircase(np.array([p, ot_[0], ot_[1]]), vx_y)
            mom = _pair_kernel_moments(xp, yp, vx_w * jac, k, c)
        else:
            raise InvalidArgumentError("two distinct triangles share three vertices")
        _scatter_pair(a, mesh, basis, k, s, t, mom, c, both_orders=True)

    # remaining (regular) pairs, blocked and vectorized
    pts, wts = map_rule(tv, quad)
    s_all, t_all = np.triu_indices(nt, k=1)
    if len(s_all):
        touch_keys = set(shared)
        keep = np.fromiter(((int(s), int(t)) not in touch_keys
                            for s, t in zip(s_all, t_all)),
                           bool, count=len(s_all))
        s_all, t_all = s_all[keep], t_all[keep]
    for lo in range(0, len(s_all), block_pairs):
        sb = s_all[lo:lo + block_pairs]
        tb_idx = t_all[lo:lo + block_pairs]
        _regular_block(a, mesh, basis, k, sb, tb_idx, pts, wts, cent)
    return SystemMatrix(a, medium)


def _regular_block(a, mesh, basis, k, sb, tb_idx, pts, wts, cent):
    xs, ys = pts[sb], pts[tb_idx]
    c = 0.5 * (cent[sb] + cent[tb_idx])
    d = xs[:, :, None, :] - ys[:, None, :, :]
    r = np.sqrt(np.einsum("pijd,pijd->pij", d, d))
    ker = (wts[sb][:, :, None] * wts[tb_idx][:, None, :]) \
        * (np.exp(1j * k * r) / (FOUR_PI * r))
    xc = xs - c[:, None, :]
    yc = ys - c[:, None, :]
    m00 = ker.sum(axis=(1, 2))
    mx = np.einsum("pij,pid->pd", ker, xc)
    my = np.einsum("pij,pjd->pd", ker, yc)
    mxy = np.einsum("pij,pij->p", ker, np.einsum("pid,pjd->pij", xc, yc))

    verts = mesh.vertices
    areas = mesh.areas
    for i in range(3):
        m = basis.tri_basis[sb, i]
        okm = m >= 0
        if not okm.any():
            continue
        for j in range(3):
            n = basis.tri_basis[tb_idx, j]
            ok = okm & (n >= 0)
            if not ok.any():
                continue
            mi, ni = m[ok], n[ok]
            cm = basis.tri_sign[sb[ok], i] * basis.lengths[mi] / (2.0 * areas[sb[ok]])
            cn = basis.tri_sign[tb_idx[ok], j] * basis.lengths[ni] \
                / (2.0 * areas[tb_idx[ok]])
            vm = verts[basis.tri_free[sb[ok], i]] - c[ok]
            vn = verts[basis.tri_free[tb_idx[ok], j]] - c[ok]
            quadm = (mxy[ok]
                     - np.einsum("pd,pd->p", mx[ok], vn)
                     - np.einsum("pd,pd->p", vm, my[ok])
                     + np.einsum("pd,pd->p", vm, vn) * m00[ok])
            val = cm * cn * (k * k * quadm - 4.0 * m00[ok])
            np.add.at(a, (mi, ni), val)
            np.add.at(a, (ni, mi), val)


def assemble_rhs(mesh: ScreenMesh, basis: EdgeBasisSet, spec: PlaneWaveSpec,
                 medium: MediumParams,
                 quad: QuadratureRule | None = None) -> RhsVector:
    """Galerkin-tested incident tangential field, scaled by i omega eps."""
    if quad is None:
        quad = quadrature_rule(5)
    amp = np.sqrt(medium.mu) * np.cross(spec.p, spec.theta)
    rhs = np.zeros(basis.size, complex)
    if np.all(amp == 0.0):
        return RhsVector(rhs)
    pts, wts = map_rule(mesh.tri_vertices, quad)
    phase = wts * np.exp(1j * medium.k * (pts @ spec.theta))
    for i in range(3):
        m = basis.tri_basis[:, i]
        ok = m >= 0
        if not ok.any():
            continue
        mi = m[ok]
        coef = basis.tri_sign[ok, i] * basis.lengths[mi] / (2.0 * mesh.areas[ok])
        proj = (pts[ok] - mesh.vertices[basis.tri_free[ok, i]][:, None, :]) @ amp
        np.add.at(rhs, mi, coef * np.einsum("tq,tq->t", phase[ok], proj))
    return RhsVector(1j * medium.omega * medium.epsilon * rhs)


def solve_density(system: SystemMatrix, rhs: RhsVector,
                  rcond_floor: float = 1e-14) -> DensityVector:
    """Direct dense solve with a reciprocal-condition guard.

    A zero right-hand side short-circuits to the zero density.
    """
    a = system.matrix
    b = np.asarray(rhs.values, complex)
    if a.shape[0] != a.shape[1] or a.shape[0] != b.shape[0]:
        raise InvalidArgumentError("system and rhs dimensions disagree")
    if not np.any(b):
        return DensityVector(np.zeros_like(b), 0.0)
    lu, piv = lu_factor(a)
    gecon = get_lapack_funcs(("gecon",), (a,))[0]
    anorm = np.linalg.norm(a, 1)
    rcond, info = gecon(lu, anorm, norm="1")
    if info != 0 or rcond < rcond_floor:
        raise ConditioningError(
            f"system matrix is numerically singular (rcond ~ {rcond:.3e})",
            condition=(np.inf if rcond == 0 else 1.0 / rcond))
    x = lu_solve((lu, piv), b)
    residual = float(np.linalg.norm(a @ x - b) / np.linalg.norm(b))
    return DensityVector(x, residual)


# ---------------------------------------------------------------------------
# Debug dumps: 16-byte header (8-byte magic + little-endian uint64 N),
# then row-major complex128 payload (N*N entries for a matrix, N for a vector)
# ---------------------------------------------------------------------------

MATRIX_MAGIC = b"EFIEMAT0"
VECTOR_MAGIC = b"EFIEVEC0"


def write_matrix_dump(path, matrix: np.ndarray) -> None:
    m = np.ascontiguousarray(matrix, dtype=np.complex128)
    n = m.shape[0]
    with open(path, "wb") as fh:
        fh.write(MATRIX_MAGIC)
        fh.write(np.array(n, dtype="<u8").tobytes())
        fh.write(m.astype("<c16").tobytes())


def write_vector_dump(path, vector: np.ndarray) -> None:
    v = np.ascontiguousarray(vector, dtype=np.complex128)
    with open(path, "wb") as fh:
        fh.write(VECTOR_MAGIC)
        fh.write(np.array(len(v), dtype="<u8").tobytes())
        fh.write(v.astype("<c16").tobytes())


def read_dump(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(8)
        n = int(np.frombuffer(fh.read(8), dtype="<u8")[0])
        payload = fh.read()
    if magic == MATRIX_MAGIC:
        return np.frombuffer(payload, dtype="<c16", count=n * n).reshape(n, n).copy()
    if magic == VECTOR_MAGIC:
        return np.frombuffer(payload, dtype="<c16", count=n).copy()
    raise InvalidArgumentError(f"unrecognized dump magic {magic!r}")
