import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import emscreen as es
from emscreen.geometry import collapsed_rule, density_on_triangles, map_rule


def brute_force_edge_scan(mesh):
    """Independent edge-adjacency count straight from the triangle list."""
    seen = {}
    for tri in mesh.triangles:
        for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
            key = (min(a, b), max(a, b))
            seen[key] = seen.get(key, 0) + 1
    interior = sum(1 for c in seen.values() if c == 2)
    boundary = sum(1 for c in seen.values() if c == 1)
    return interior, boundary


class TestPlaneFrame:
    def test_xy_frame_orthonormal(self):
        f = es.PlaneFrame.xy()
        g = np.array([f.t1, f.t2, f.normal])
        assert np.abs(g @ g.T - np.eye(3)).max() < 1e-12
        assert np.abs(np.cross(f.t1, f.t2) - f.normal).max() < 1e-12

    def test_from_normal_right_handed(self):
        for v in ([1, 2, 3], [0, 0, -1], [-2, 0.5, 0.1]):
            f = es.PlaneFrame.from_normal(v, 0.7)
            assert np.abs(np.cross(f.t1, f.t2) - f.normal).max() < 1e-12

    def test_plane_membership(self):
        f = es.PlaneFrame.from_normal([1, 1, 1], 2.0)
        pts = f.from_plane(np.random.default_rng(0).normal(size=(20, 2)))
        assert np.abs(pts @ f.normal - 2.0).max() < 1e-12 * 10

    def test_mirror_involution(self):
        f = es.PlaneFrame.from_normal([0.2, -0.5, 1.0], 0.3)
        x = np.random.default_rng(1).normal(size=(10, 3))
        assert np.abs(f.mirror(f.mirror(x)) - x).max() < 1e-12

    def test_rejects_skew_frame(self):
        with pytest.raises(es.InvalidArgumentError):
            es.PlaneFrame(np.array([0, 0, 1.0]), 0.0,
                          np.array([1.0, 0.1, 0]), np.array([0, 1.0, 0]))


class TestQuadrature:
    def test_order_one_is_centroid(self):
        r = es.quadrature_rule(1)
        assert np.allclose(r.points, [[1 / 3, 1 / 3]])
        assert np.allclose(r.weights, [0.5])

    @pytest.mark.parametrize("order", [1, 2, 3, 5, 7])
    def test_weights_sum_to_reference_area(self, order):
        r = es.quadrature_rule(order)
        assert abs(r.weights.sum() - 0.5) < 1e-14

    @pytest.mark.parametrize("order", [2, 3, 5, 7])
    def test_monomial_exactness(self, order):
        # int over {u,v>=0, u+v<=1} of u^a v^b = a! b! / (a+b+2)!
        from math import factorial
        r = es.quadrature_rule(order)
        for a in range(order + 1):
            for b in range(order + 1 - a):
                exact = factorial(a) * factorial(b) / factorial(a + b + 2)
                got = (r.weights * r.points[:, 0] ** a * r.points[:, 1] ** b).sum()
                assert abs(got - exact) < 1e-14, (order, a, b)

    def test_linear_monomial_value(self):
        r = es.quadrature_rule(2)
        assert abs((r.weights * r.points[:, 0]).sum() - 1 / 6) < 1e-14

    def test_unsupported_order(self):
        with pytest.raises(es.InvalidArgumentError):
            es.quadrature_rule(4)

    def test_collapsed_rule_exactness(self):
        # int u^3 v^2 = 3! 2! / 7!
        r = collapsed_rule(6)
        assert abs((r.weights * r.points[:, 0] ** 3 * r.points[:, 1] ** 2).sum()
                   - 12 / 5040) < 1e-14


class TestRectangleScreen:
    def test_smallest_grid(self):
        m = es.make_rectangle_screen(1, 1, 1, 1, es.PlaneFrame.xy())
        assert len(m.vertices) == 4
        assert len(m.triangles) == 2
        assert abs(m.total_area - 1.0) < 1e-12
        assert len(m.interior_edges) == 1

    def test_area_additivity(self):
        m = es.make_rectangle_screen(2, 1, 2, 1, es.PlaneFrame.xy())
        assert len(m.vertices) == 6
        assert len(m.triangles) == 4
        assert abs(m.total_area - 2.0) < 1e-12

    def test_interior_edge_count_against_scan(self):
        m = es.make_rectangle_screen(1, 1, 8, 8, es.PlaneFrame.xy())
        interior, boundary = brute_force_edge_scan(m)
        assert len(m.interior_edges) == interior
        assert len(m.boundary_edges) == boundary

    @given(nx=st.integers(1, 9), ny=st.integers(1, 9),
           a=st.floats(0.2, 3.0), b=st.floats(0.2, 3.0))
    @settings(max_examples=20)
    def test_structured_properties(self, nx, ny, a, b):
        m = es.make_rectangle_screen(a, b, nx, ny, es.PlaneFrame.xy())
        assert len(m.triangles) == 2 * nx * ny
        assert abs(m.total_area - a * b) < 1e-12 * a * b
        interior, boundary = brute_force_edge_scan(m)
        assert len(m.interior_edges) == interior
        assert len(m.boundary_edges) == boundary

    def test_invalid_arguments(self):
        with pytest.raises(es.InvalidArgumentError):
            es.make_rectangle_screen(-1, 1, 2, 2, es.PlaneFrame.xy())
        with pytest.raises(es.InvalidArgumentError):
            es.make_rectangle_screen(1, 1, 0, 2, es.PlaneFrame.xy())

    def test_tilted_frame(self):
        f = es.PlaneFrame.from_normal([1, 2, -1], 0.4)
        m = es.make_rectangle_screen(1.0, 0.5, 3, 2, f)
        assert np.abs(m.vertices @ f.normal - 0.4).max() < 1e-12 * 2


class TestDiskScreen:
    def test_coarse_polygon_area(self):
        m = es.make_disk_screen(1.0, 0, es.PlaneFrame.xy())
        assert abs(m.total_area - np.pi) / np.pi < 0.20

    def test_refined_area(self):
        m = es.make_disk_screen(1.0, 3, es.PlaneFrame.xy())
        assert abs(m.total_area - np.pi) / np.pi < 0.01

    def test_area_scaling(self):
        m1 = es.make_disk_screen(1.0, 3, es.PlaneFrame.xy())
        m2 = es.make_disk_screen(2.0, 3, es.PlaneFrame.xy())
        assert abs(m2.total_area - 4.0 * m1.total_area) < 1e-10

    def test_triangle_count(self):
        for n in range(4):
            m = es.make_disk_screen(1.0, n, es.PlaneFrame.xy())
            assert len(m.triangles) == 6 * 4 ** n

    def test_invalid_radius(self):
        with pytest.raises(es.InvalidArgumentError):
            es.make_disk_screen(0.0, 1, es.PlaneFrame.xy())


class TestMeshInvariants:
    @pytest.fixture(scope="class")
    @staticmethod
    def meshes():
        return [es.make_rectangle_screen(1, 0.5, 5, 3, es.PlaneFrame.xy()),
                es.make_disk_screen(0.8, 2, es.PlaneFrame.from_normal([1, 1, 1], 0.2))]

    def test_edge_multiplicity(self, meshes):
        for m in meshes:
            counts = (m.edge_triangles >= 0).sum(axis=1)
            assert set(counts.tolist()) <= {1, 2}

    def test_orientation(self, meshes):
        for m in meshes:
            v = m.tri_vertices
            n = np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0])
            assert np.all(n @ m.frame.normal > 0)

    def test_rejects_disconnected(self):
        # two disjoint squares in one vertex soup
        f = es.PlaneFrame.xy()
        a = es.make_rectangle_screen(1, 1, 1, 1, f)
        verts = np.vstack([a.vertices, a.vertices + [5.0, 0, 0]])
        tris = np.vstack([a.triangles, a.triangles + len(a.vertices)])
        with pytest.raises(es.MeshError):
            es.ScreenMesh(verts, tris, f)

    def test_rejects_off_plane_vertex(self):
        f = es.PlaneFrame.xy()
        a = es.make_rectangle_screen(1, 1, 1, 1, f)
        verts = a.vertices.copy()
        verts[0, 2] = 1e-6
        with pytest.raises(es.MeshError):
            es.ScreenMesh(verts, a.triangles, f)


class TestEdgeBasis:
    @pytest.fixture(scope="class")
    @staticmethod
    def mesh():
        return es.make_rectangle_screen(1.0, 1.0, 4, 4, es.PlaneFrame.xy())

    def test_zero_net_divergence(self, mesh):
        basis = mesh.basis()
        for b in range(basis.size):
            total = (basis.lengths[b] / basis.area_plus[b]) * basis.area_plus[b] \
                - (basis.lengths[b] / basis.area_minus[b]) * basis.area_minus[b]
            assert abs(total) < 1e-12

    def test_divergence_by_finite_differences(self, mesh):
        basis = mesh.basis()
        b = basis.size // 2
        t = int(basis.tri_plus[b])
        v = mesh.tri_vertices[t]
        c = v.mean(axis=0)
        h = 1e-6
        div_fd = 0.0
        for d in (np.array([1.0, 0, 0]), np.array([0, 1.0, 0])):
            fp = basis.evaluate(mesh, b, c + h * d)
            fm = basis.evaluate(mesh, b, c - h * d)
            div_fd += ((fp - fm) / (2 * h)) @ d
        assert abs(div_fd - basis.divergence(b, t)) < 1e-5

    def test_divergence_magnitude(self, mesh):
        basis = mesh.basis()
        for b in (0, basis.size - 1):
            tp = int(basis.tri_plus[b])
            expect = basis.lengths[b] / mesh.areas[tp]
            assert abs(basis.divergence(b, tp) - expect) < 1e-14

    def test_density_representation_matches_basis(self, mesh):
        rng = np.random.default_rng(3)
        basis = mesh.basis()
        coeff = rng.normal(size=basis.size) + 1j * rng.normal(size=basis.size)
        alpha, beta, div = density_on_triangles(mesh, basis, coeff)
        t = 7
        x = mesh.centroids[t]
        direct = sum(coeff[b] * basis.evaluate(mesh, b, x)
                     for b in basis.tri_basis[t] if b >= 0)
        assert np.abs(alpha[t] * x + beta[t] - direct).max() < 1e-12
        assert abs(div[t] - 2 * alpha[t]) < 1e-12

    def test_tangential_reconstruction(self, mesh):
        rng = np.random.default_rng(4)
        basis = mesh.basis()
        coeff = rng.normal(size=basis.size) + 1j * rng.normal(size=basis.size)
        alpha, beta, _ = density_on_triangles(mesh, basis, coeff)
        vals = alpha[:, None] * mesh.centroids + beta
        assert np.abs(vals @ mesh.frame.normal).max() < 1e-12


class TestMeshIO:
    def test_round_trip_bit_exact(self, tmp_path):
        f = es.PlaneFrame.from_normal([0.3, -1.2, 2.0], 0.37)
        m = es.make_disk_screen(0.9, 2, f)
        p1 = tmp_path / "a.txt"
        p2 = tmp_path / "b.txt"
        es.write_mesh(m, p1)
        m2 = es.read_mesh(p1)
        es.write_mesh(m2, p2)
        assert p1.read_bytes() == p2.read_bytes()
        assert np.array_equal(m.vertices, m2.vertices)
        assert np.array_equal(m.triangles, m2.triangles)

    def test_bad_header(self, tmp_path):
        p = tmp_path / "bad.txt"
        p.write_text("not a mesh\n")
        with pytest.raises(es.FileFormatError):
            es.read_mesh(p)

    def test_bad_record(self, tmp_path):
        p = tmp_path / "bad.txt"
        p.write_text("screenmesh 1\nv 0 0\n")
        with pytest.raises(es.FileFormatError):
            es.read_mesh(p)

    def test_missing_frame(self, tmp_path):
        p = tmp_path / "bad.txt"
        p.write_text("screenmesh 1\nv 0 0 0\n")
        with pytest.raises(es.FileFormatError):
            es.read_mesh(p)


def test_map_rule_areas():
    m = es.make_rectangle_screen(1.3, 0.7, 3, 2, es.PlaneFrame.xy())
    _, w = map_rule(m.tri_vertices, es.quadrature_rule(3))
    assert np.abs(w.sum(axis=1) - m.areas).max() < 1e-14
