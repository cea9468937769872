"""Triangulated planar screens, plane frames, edge bases, and triangle quadrature.

All meshes live in an affine plane described by a :class:`PlaneFrame`.  The
degrees of freedom of the solver are attached to interior mesh edges only
(:class:`EdgeBasisSet`), so every discrete surface current has vanishing
normal flux through the screen boundary.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import FileFormatError, InvalidArgumentError, MeshError

_ORTHO_TOL = 1e-12


def _unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if n == 0.0:
        raise InvalidArgumentError("cannot normalize the zero vector")
    return v / n


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


def frepr(x) -> str:
    """Shortest exact decimal form of a float (round-trips bit-exactly)."""
    return repr(float(x))


@dataclass(frozen=True)
class PlaneFrame:
    """Affine plane with a right-handed orthonormal frame (t1, t2, normal).

    Points x on the plane satisfy ``dot(normal, x) == offset``.  In-plane
    coordinates (s1, s2) refer to the chart
    ``x = offset*normal + s1*t1 + s2*t2``.
    """

    normal: np.ndarray
    offset: float
    t1: np.ndarray
    t2: np.ndarray

    def __post_init__(self):
        n = _frozen(np.asarray(self.normal, float))
        t1 = _frozen(np.asarray(self.t1, float))
        t2 = _frozen(np.asarray(self.t2, float))
        object.__setattr__(self, "normal", n)
        object.__setattr__(self, "t1", t1)
        object.__setattr__(self, "t2", t2)
        object.__setattr__(self, "offset", float(self.offset))
        g = np.array([t1, t2, n])
        if np.max(np.abs(g @ g.T - np.eye(3))) > _ORTHO_TOL:
            raise InvalidArgumentError("frame vectors are not orthonormal")
        if np.max(np.abs(np.cross(t1, t2) - n)) > _ORTHO_TOL:
            raise InvalidArgumentError("frame (t1, t2, normal) is not right-handed")

    @classmethod
    def from_normal(cls, normal, offset: float = 0.0) -> "PlaneFrame":
        """Build a frame with deterministic tangents for a given unit normal."""
        n = _unit(normal)
        axis = np.zeros(3)
        axis[int(np.argmin(np.abs(n)))] = 1.0
        t1 = _unit(np.cross(axis, n))
        t2 = np.cross(n, t1)
        return cls(n, float(offset), t1, t2)

    @classmethod
    def xy(cls, offset: float = 0.0) -> "PlaneFrame":
        """The standard z = offset plane with tangents x-hat, y-hat."""
        return cls(np.array([0.0, 0.0, 1.0]), float(offset),
                   np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0]))

    @property
    def origin(self) -> np.ndarray:
        return self.offset * self.normal

    def signed_distance(self, x) -> np.ndarray:
        return np.asarray(x, float) @ self.normal - self.offset

    def to_plane(self, x) -> np.ndarray:
        """In-plane coordinates of 3D points (last axis length 3 -> 2)."""
        rel = np.asarray(x, float) - self.origin
        return np.stack([rel @ self.t1, rel @ self.t2], axis=-1)

    def from_plane(self, s) -> np.ndarray:
        """Embed in-plane coordinates (..., 2) as 3D points."""
        s = np.asarray(s, float)
        return self.origin + np.multiply.outer(s[..., 0], self.t1) \
            + np.multiply.outer(s[..., 1], self.t2)

    def mirror(self, x) -> np.ndarray:
        """Reflect 3D points through the plane."""
        x = np.asarray(x, float)
        return x - 2.0 * np.multiply.outer(self.signed_distance(x), self.normal)


# ---------------------------------------------------------------------------
# Quadrature on the reference triangle {(u, v): u, v >= 0, u + v <= 1}
# ---------------------------------------------------------------------------

_SQ15 = np.sqrt(15.0)

# barycentric coordinates (b0, b1, b2) and weights normalized to sum 1
_RULES = {
    1: ([((1 / 3, 1 / 3, 1 / 3), 1.0)], 1),
    2: ([((2 / 3, 1 / 6, 1 / 6), 1 / 3),
         ((1 / 6, 2 / 3, 1 / 6), 1 / 3),
         ((1 / 6, 1 / 6, 2 / 3), 1 / 3)], 2),
    3: ([((1 / 3, 1 / 3, 1 / 3), -27 / 48),
         ((0.6, 0.2, 0.2), 25 / 48),
         ((0.2, 0.6, 0.2), 25 / 48),
         ((0.2, 0.2, 0.6), 25 / 48)], 3),
}


def _sym3(a: float, w: float):
    b = (1.0 - a) / 2.0
    return [((a, b, b), w), ((b, a, b), w), ((b, b, a), w)]


def _sym6(a: float, b: float, w: float):
    c = 1.0 - a - b
    return [((a, b, c), w), ((a, c, b), w), ((b, a, c), w),
            ((b, c, a), w), ((c, a, b), w), ((c, b, a), w)]

_RULES[5] = (
    [((1 / 3, 1 / 3, 1 / 3), 9 / 40)]
    + _sym3((9.0 - 2.0 * _SQ15) / 21.0, (155.0 + _SQ15) / 1200.0)
    + _sym3((9.0 + 2.0 * _SQ15) / 21.0, (155.0 - _SQ15) / 1200.0),
    5,
)

_RULES[7] = (
    [((1 / 3, 1 / 3, 1 / 3), -0.149570044467682)]
    + _sym3(0.479308067841920, 0.175615257433208)
    + _sym3(0.869739794195568, 0.053347235608838)
    + _sym6(0.048690315425316, 0.312865496004874, 0.077113760890257),
    7,
)


@dataclass(frozen=True)
class QuadratureRule:
    """Quadrature on the reference triangle; weights sum to its area 1/2."""

    points: np.ndarray   # (n, 2) reference coordinates (u, v)
    weights: np.ndarray  # (n,)
    degree: int

    def __post_init__(self):
        object.__setattr__(self, "points", _frozen(np.asarray(self.points, float)))
        object.__setattr__(self, "weights", _frozen(np.asarray(self.weights, float)))


def quadrature_rule(order: int) -> QuadratureRule:
    """Symmetric rule exact for polynomials of the given total degree.

    Supported orders: 1, 2, 3, 5, 7.
    """
    if order not in _RULES:
        raise InvalidArgumentError(
            f"unsupported quadrature order {order!r}; supported: {sorted(_RULES)}")
    entries, degree = _RULES[order]
    pts = np.array([(b[1], b[2]) for b, _ in entries])
    wts = np.array([w for _, w in entries]) * 0.5
    return QuadratureRule(pts, wts, degree)


def collapsed_rule(n: int) -> QuadratureRule:
    """Tensor Gauss-Legendre rule collapsed onto the triangle (n*n points).

    Used for high-order reference computations; exact degree grows with n.
    """
    if n < 1:
        raise InvalidArgumentError("n must be >= 1")
    x, w = np.polynomial.legendre.leggauss(n)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    u = np.repeat(x, n)
    b = np.tile(x, n)
    v = b * (1.0 - u)
    wts = np.repeat(w, n) * np.tile(w, n) * (1.0 - u)
    return QuadratureRule(np.column_stack([u, v]), wts, 2 * n - 1)


def map_rule(vertices: np.ndarray, rule: QuadratureRule):
    """Map a reference rule to physical triangles.

    vertices: (..., 3, 3) triangle corner array.  Returns (points, weights)
    with shapes (..., n, 3) and (..., n); weights include the area Jacobian.
    """
    v = np.asarray(vertices, float)
    v0, v1, v2 = v[..., 0, :], v[..., 1, :], v[..., 2, :]
    u = rule.points[:, 0]
    w = rule.points[:, 1]
    pts = (v0[..., None, :]
           + np.multiply.outer(v1 - v0, u).swapaxes(-1, -2)
           + np.multiply.outer(v2 - v0, w).swapaxes(-1, -2))
    jac = np.linalg.norm(np.cross(v1 - v0, v2 - v0), axis=-1)  # = 2 * area
    wts = rule.weights * jac[..., None]
    return pts, wts


# ---------------------------------------------------------------------------
# Screen meshes
# ---------------------------------------------------------------------------

class ScreenMesh:
    """Oriented triangulation of a planar screen.

    Immutable after construction.  Validates that all vertices lie on the
    frame's plane, triangles are consistently oriented with the frame normal,
    the mesh is edge-connected, and every edge borders one or two triangles.
    """

    def __init__(self, vertices, triangles, frame: PlaneFrame):
        self.vertices = _frozen(np.asarray(vertices, float))
        self.triangles = _frozen(np.asarray(triangles, np.int64))
        self.frame = frame
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise MeshError("vertices must have shape (n, 3)")
        if self.triangles.ndim != 2 or self.triangles.shape[1] != 3:
            raise MeshError("triangles must have shape (m, 3)")
        if self.triangles.size and (self.triangles.min() < 0
                                    or self.triangles.max() >= len(self.vertices)):
            raise MeshError("triangle indices out of range")
        self._validate()

    # -- topology ----------------------------------------------------------

    def _validate(self):
        scale = max(1.0, float(np.abs(self.vertices).max(initial=0.0)))
        off = np.abs(self.frame.signed_distance(self.vertices))
        if off.size and off.max() > 1e-12 * scale:
            raise MeshError(f"vertices off the plane by up to {off.max():.3e}")
        v = self.vertices[self.triangles]
        n = np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0])
        norms = np.linalg.norm(n, axis=1)
        if np.any(norms <= 0.0):
            raise MeshError("degenerate triangle")
        if np.any(n @ self.frame.normal < 0.99 * norms):
            raise MeshError("triangle orientation disagrees with frame normal")
        tri_count = (self.edge_triangles >= 0).sum(axis=1)
        if np.any((tri_count < 1) | (tri_count > 2)):
            raise MeshError("an edge borders zero or more than two triangles")
        if not self._edge_connected():
            raise MeshError("mesh is not edge-connected")

    @cached_property
    def _edge_data(self):
        pairs = {}
        for t, tri in enumerate(self.triangles):
            for a, b in ((0, 1), (1, 2), (2, 0)):
                key = (min(tri[a], tri[b]), max(tri[a], tri[b]))
                pairs.setdefault(key, []).append(t)
        if any(len(ts) > 2 for ts in pairs.values()):
            raise MeshError("an edge is shared by more than two triangles")
        keys = sorted(pairs)
        edges = np.array(keys, np.int64).reshape(-1, 2)
        adj = np.full((len(keys), 2), -1, np.int64)
        for i, k in enumerate(keys):
            for j, t in enumerate(pairs[k]):
                adj[i, j] = t
        return _frozen(edges), _frozen(adj)

    @property
    def edges(self) -> np.ndarray:
        """(E, 2) vertex index pairs, lexicographically sorted."""
        return self._edge_data[0]

    @property
    def edge_triangles(self) -> np.ndarray:
        """(E, 2) adjacent triangle indices, -1 marking a boundary edge slot."""
        return self._edge_data[1]

    @property
    def interior_edges(self) -> np.ndarray:
        return np.where(self.edge_triangles[:, 1] >= 0)[0]

    @property
    def boundary_edges(self) -> np.ndarray:
        return np.where(self.edge_triangles[:, 1] < 0)[0]

    def _edge_connected(self) -> bool:
        nt = len(self.triangles)
        if nt <= 1:
            return True
        adj = [[] for _ in range(nt)]
        for a, b in self.edge_triangles:
            if b >= 0:
                adj[a].append(b)
                adj[b].append(a)
        seen = np.zeros(nt, bool)
        stack = [0]
        seen[0] = True
        while stack:
            t = stack.pop()
            for s in adj[t]:
                if not seen[s]:
                    seen[s] = True
                    stack.append(s)
        return bool(seen.all())

    # -- geometry ----------------------------------------------------------

    @cached_property
    def tri_vertices(self) -> np.ndarray:
        """(T, 3, 3) corner coordinates."""
        return _frozen(self.vertices[self.triangles])

    @cached_property
    def areas(self) -> np.ndarray:
        v = self.tri_vertices
        return _frozen(0.5 * np.linalg.norm(
            np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]), axis=1))

    @cached_property
    def centroids(self) -> np.ndarray:
        return _frozen(self.tri_vertices.mean(axis=1))

    @cached_property
    def diameters(self) -> np.ndarray:
        v = self.tri_vertices
        e = np.stack([v[:, 1] - v[:, 0], v[:, 2] - v[:, 1], v[:, 0] - v[:, 2]], axis=1)
        return _frozen(np.linalg.norm(e, axis=2).max(axis=1))

    @property
    def total_area(self) -> float:
        return float(self.areas.sum())

    @property
    def mesh_size(self) -> float:
        """Largest element diameter."""
        return float(self.diameters.max())

    def basis(self) -> "EdgeBasisSet":
        return self._basis

    @cached_property
    def _basis(self) -> "EdgeBasisSet":
        return EdgeBasisSet.from_mesh(self)

    def translated(self, t) -> "ScreenMesh":
        """Rigidly translated copy (frame offset follows)."""
        t = np.asarray(t, float)
        frame = PlaneFrame(self.frame.normal,
                           self.frame.offset + float(t @ self.frame.normal),
                           self.frame.t1, self.frame.t2)
        return ScreenMesh(self.vertices + t, self.triangles, frame)

    def rotated(self, rot) -> "ScreenMesh":
        """Copy rotated about the coordinate origin by matrix ``rot``."""
        rot = np.asarray(rot, float)
        frame = PlaneFrame(rot @ self.frame.normal, self.frame.offset,
                           rot @ self.frame.t1, rot @ self.frame.t2)
        return ScreenMesh(self.vertices @ rot.T, self.triangles, frame)


@dataclass(frozen=True)
class EdgeBasisSet:
    """Lowest-order div-conforming basis attached to interior edges.

    On its two triangles the basis function of edge e is
    ``+-(length_e / (2 area)) * (y - v_free)``; its surface divergence is the
    piecewise constant ``+-length_e / area``.  Boundary edges carry no degree
    of freedom, so every represented current has zero normal flux at the
    screen boundary.
    """

    edge_index: np.ndarray     # (n,) index into mesh.edges
    edge_vertices: np.ndarray  # (n, 2)
    tri_plus: np.ndarray       # (n,)
    tri_minus: np.ndarray      # (n,)
    free_plus: np.ndarray      # (n,) vertex index opposite the edge in tri_plus
    free_minus: np.ndarray     # (n,)
    lengths: np.ndarray        # (n,)
    area_plus: np.ndarray      # (n,)
    area_minus: np.ndarray     # (n,)
    tri_basis: np.ndarray      # (T, 3) basis indices per triangle, -1 padded
    tri_sign: np.ndarray       # (T, 3) +1 / -1
    tri_free: np.ndarray       # (T, 3) free vertex index

    @property
    def size(self) -> int:
        return len(self.edge_index)

    @classmethod
    def from_mesh(cls, mesh: ScreenMesh) -> "EdgeBasisSet":
        interior = mesh.interior_edges
        ev = mesh.edges[interior]
        adj = mesh.edge_triangles[interior]
        tp, tm = adj[:, 0], adj[:, 1]

        def opposite(tris, edges):
            out = np.empty(len(tris), np.int64)
            for i, (t, e) in enumerate(zip(tris, edges)):
                tri = mesh.triangles[t]
                out[i] = tri[~np.isin(tri, e)][0]
            return out

        fp = opposite(tp, ev)
        fm = opposite(tm, ev)
        lengths = np.linalg.norm(mesh.vertices[ev[:, 0]] - mesh.vertices[ev[:, 1]], axis=1)

        nt = len(mesh.triangles)
        tri_basis = np.full((nt, 3), -1, np.int64)
        tri_sign = np.zeros((nt, 3), np.int64)
        tri_free = np.full((nt, 3), -1, np.int64)
        slot = np.zeros(nt, np.int64)
        for b in range(len(interior)):
            for t, sgn, fv in ((tp[b], 1, fp[b]), (tm[b], -1, fm[b])):
                s = slot[t]
                tri_basis[t, s] = b
                tri_sign[t, s] = sgn
                tri_free[t, s] = fv
                slot[t] += 1
        return cls(_frozen(interior), _frozen(ev), _frozen(tp), _frozen(tm),
                   _frozen(fp), _frozen(fm), _frozen(lengths),
                   _frozen(mesh.areas[tp]), _frozen(mesh.areas[tm]),
                   _frozen(tri_basis), _frozen(tri_sign), _frozen(tri_free))

    def evaluate(self, mesh: ScreenMesh, index: int, points) -> np.ndarray:
        """Basis function ``index`` at points (..., 3); zero off its support."""
        pts = np.asarray(points, float)
        out = np.zeros(pts.shape, float)
        for t, sgn, fv, area in ((self.tri_plus[index], 1.0, self.free_plus[index],
                                  self.area_plus[index]),
                                 (self.tri_minus[index], -1.0, self.free_minus[index],
                                  self.area_minus[index])):
            inside = _points_in_triangle(pts, mesh.tri_vertices[t], mesh.frame)
            coef = sgn * self.lengths[index] / (2.0 * area)
            out = np.where(inside[..., None], coef * (pts - mesh.vertices[fv]), out)
        return out

    def divergence(self, index: int, triangle: int) -> float:
        if triangle == self.tri_plus[index]:
            return float(self.lengths[index] / self.area_plus[index])
        if triangle == self.tri_minus[index]:
            return float(-self.lengths[index] / self.area_minus[index])
        return 0.0


def _points_in_triangle(pts, tri, frame, tol=1e-12):
    s = frame.to_plane(pts)
    a, b, c = frame.to_plane(tri)
    m = np.stack([b - a, c - a], axis=-1)
    lam = np.linalg.solve(m, (s - a)[..., None])[..., 0]
    return (lam[..., 0] >= -tol) & (lam[..., 1] >= -tol) & (lam.sum(-1) <= 1 + tol)


def density_on_triangles(mesh: ScreenMesh, basis: EdgeBasisSet, coefficients):
    """Per-triangle affine representation of a current expansion.

    Returns (alpha, beta, div) with alpha (T,) complex, beta (T, 3) complex,
    div (T,) complex such that the current on triangle t is
    ``alpha[t] * y + beta[t]`` and its surface divergence is ``div[t]``.
    """
    c = np.asarray(coefficients, complex)
    nt = len(mesh.triangles)
    alpha = np.zeros(nt, complex)
    beta = np.zeros((nt, 3), complex)
    div = np.zeros(nt, complex)
    for s in range(3):
        b = basis.tri_basis[:, s]
        ok = b >= 0
        if not ok.any():
            continue
        sgn = basis.tri_sign[ok, s]
        coef = c[b[ok]] * sgn * basis.lengths[b[ok]] / (2.0 * mesh.areas[ok])
        alpha[ok] += coef
        beta[ok] -= coef[:, None] * mesh.vertices[basis.tri_free[ok, s]]
        div[ok] += 2.0 * coef
    return alpha, beta, div


# ---------------------------------------------------------------------------
# Constructors
# ---------------------------------------------------------------------------

def make_rectangle_screen(a: float, b: float, nx: int, ny: int,
                          frame: PlaneFrame) -> ScreenMesh:
    """Structured triangulation of an a x b rectangle centered at the frame origin."""
    if a <= 0 or b <= 0:
        raise InvalidArgumentError("rectangle dimensions must be positive")
    if nx < 1 or ny < 1:
        raise InvalidArgumentError("subdivision counts must be >= 1")
    s1 = np.linspace(-a / 2.0, a / 2.0, nx + 1)
    s2 = np.linspace(-b / 2.0, b / 2.0, ny + 1)
    grid = np.stack(np.meshgrid(s1, s2, indexing="ij"), axis=-1).reshape(-1, 2)
    verts = frame.from_plane(grid)

    def vid(i, j):
        return i * (ny + 1) + j

    tris = []
    for i in range(nx):
        for j in range(ny):
            v00, v10 = vid(i, j), vid(i + 1, j)
            v01, v11 = vid(i, j + 1), vid(i + 1, j + 1)
            tris.append((v00, v10, v11))
            tris.append((v00, v11, v01))
    return ScreenMesh(verts, np.array(tris), frame)


def make_disk_screen(r: float, n_refine: int, frame: PlaneFrame) -> ScreenMesh:
    """Quasi-uniform disk triangulation: hexagonal fan, 4-split refinements.

    Triangle count is 6 * 4**n_refine; new boundary vertices are projected
    onto the circle, so the mesh area is that of the inscribed polygon with
    6 * 2**n_refine sides.
    """
    if r <= 0:
        raise InvalidArgumentError("disk radius must be positive")
    if n_refine < 0:
        raise InvalidArgumentError("n_refine must be >= 0")
    ang = 2.0 * np.pi * np.arange(6) / 6.0
    coords = [np.zeros(2)] + [r * np.array([np.cos(t), np.sin(t)]) for t in ang]
    tris = [(0, 1 + i, 1 + (i + 1) % 6) for i in range(6)]
    on_rim = [False] + [True] * 6

    for _ in range(n_refine):
        edge_count = {}
        for t in tris:
            for e in ((t[0], t[1]), (t[1], t[2]), (t[2], t[0])):
                key = (min(e), max(e))
                edge_count[key] = edge_count.get(key, 0) + 1
        midpoint = {}
        new_tris = []
        for t in tris:
            mids = []
            for e in ((t[0], t[1]), (t[1], t[2]), (t[2], t[0])):
                key = (min(e), max(e))
                if key not in midpoint:
                    m = 0.5 * (coords[key[0]] + coords[key[1]])
                    rim = edge_count[key] == 1 and on_rim[key[0]] and on_rim[key[1]]
                    if rim:
                        m = m * (r / np.linalg.norm(m))
                    midpoint[key] = len(coords)
                    coords.append(m)
                    on_rim.append(rim)
                mids.append(midpoint[key])
            a_, b_, c_ = t
            mab, mbc, mca = mids
            new_tris += [(a_, mab, mca), (mab, b_, mbc), (mca, mbc, c_), (mab, mbc, mca)]
        tris = new_tris
    verts = frame.from_plane(np.array(coords))
    return ScreenMesh(verts, np.array(tris), frame)


# ---------------------------------------------------------------------------
# Mesh file format: indexed triangle list with the plane frame
# ---------------------------------------------------------------------------

def write_mesh(mesh: ScreenMesh, path) -> None:
    """Write the plain-text mesh format (bit-exact round trip via repr floats)."""
    lines = ["screenmesh 1"]
    for v in mesh.vertices:
        lines.append(f"v {frepr(v[0])} {frepr(v[1])} {frepr(v[2])}")
    for t in mesh.triangles:
        lines.append(f"t {t[0]} {t[1]} {t[2]}")
    n = mesh.frame.normal
    lines.append(f"frame {frepr(n[0])} {frepr(n[1])} {frepr(n[2])} "
                 f"{frepr(mesh.frame.offset)}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_mesh(path) -> ScreenMesh:
    verts, tris, frame = [], [], None
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "screenmesh 1":
            raise FileFormatError(f"bad mesh header: {header!r}")
        for ln, raw in enumerate(fh, start=2):
            parts = raw.split()
            if not parts:
                continue
            tag, rest = parts[0], parts[1:]
            if tag == "v" and len(rest) == 3:
                verts.append([float(x) for x in rest])
            elif tag == "t" and len(rest) == 3:
                tris.append([int(x) for x in rest])
            elif tag == "frame" and len(rest) == 4:
                frame = PlaneFrame.from_normal([float(x) for x in rest[:3]],
                                               float(rest[3]))
            else:
                raise FileFormatError(f"line {ln}: unrecognized record {raw.strip()!r}")
    if frame is None:
        raise FileFormatError("mesh file has no frame record")
    return ScreenMesh(np.array(verts), np.array(tris), frame)
