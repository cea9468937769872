import numpy as np
import pytest

import emscreen as es
from emscreen import _singular as sq
from emscreen.geometry import collapsed_rule, map_rule


def smooth_pair_reference(tri_x, tri_y, f, n=22):
    """Plain tensor quadrature of a smooth double integral over a pair."""
    r = collapsed_rule(n)
    xp, xw = map_rule(tri_x[None], r)
    yp, yw = map_rule(tri_y[None], r)
    xp, xw, yp, yw = xp[0], xw[0], yp[0], yw[0]
    nx, ny = len(xp), len(yp)
    big_x = np.repeat(xp, ny, axis=0)
    big_y = np.tile(yp, (nx, 1))
    vals = f(big_x, big_y).reshape(nx, ny)
    return (vals * np.outer(xw, yw)).sum()


def mapped_rule_value(case, tri_x, tri_y, f, n=8):
    if case == "coincident":
        xp, yp, w = sq.coincident_rule(n)
        big_x = sq.map_staircase(tri_x, xp)
        big_y = sq.map_staircase(tri_x, yp)
    elif case == "edge":
        xp, yp, w = sq.edge_rule(n)
        big_x = sq.map_edge_chart(tri_x[0], tri_x[1], tri_x[2], xp)
        big_y = sq.map_edge_chart(tri_y[0], tri_y[1], tri_y[2], yp)
    else:
        xp, yp, w = sq.vertex_rule(n)
        big_x = sq.map_staircase(tri_x, xp)
        big_y = sq.map_staircase(tri_y, yp)
    jx = np.linalg.norm(np.cross(tri_x[1] - tri_x[0], tri_x[2] - tri_x[0]))
    jy = np.linalg.norm(np.cross(tri_y[1] - tri_y[0], tri_y[2] - tri_y[0]))
    return (w * jx * jy * f(big_x, big_y)).sum()


TRI_A = np.array([[0.0, 0.0, 0.0], [0.31, 0.02, 0.0], [0.05, 0.27, 0.0]])
TRI_EDGE_B = np.array([[0.0, 0.0, 0.0], [0.31, 0.02, 0.0], [0.2, -0.22, 0.0]])
TRI_VERT_B = np.array([[0.0, 0.0, 0.0], [-0.28, -0.06, 0.0], [-0.12, -0.3, 0.0]])


class TestPairRules:
    """The mapped 4-cube rules against two independent references."""

    def smooth_kernel(self, x, y):
        return np.exp(-((x - y) ** 2).sum(-1)) * (1 + (x * y).sum(-1)) \
            + np.sin(x[..., 0] + 2 * y[..., 1])

    @pytest.mark.parametrize("case,tx,ty", [
        ("coincident", TRI_A, TRI_A),
        ("edge", TRI_A, TRI_EDGE_B),
        ("vertex", TRI_A, TRI_VERT_B)])
    def test_smooth_kernel_equivalence(self, case, tx, ty):
        ref = smooth_pair_reference(tx, ty, self.smooth_kernel)
        got = mapped_rule_value(case, tx, ty, self.smooth_kernel, n=10)
        assert abs(got - ref) / abs(ref) < 1e-10

    @pytest.mark.parametrize("case,tx,ty", [
        ("coincident", TRI_A, TRI_A),
        ("edge", TRI_A, TRI_EDGE_B),
        ("vertex", TRI_A, TRI_VERT_B)])
    def test_singular_kernel_against_oracle(self, case, tx, ty):
        k = 2 * np.pi
        c = 0.5 * (tx.mean(axis=0) + ty.mean(axis=0))

        def kern(x, y):
            r = np.linalg.norm(x - y, axis=-1)
            return np.exp(1j * k * r) / (4 * np.pi * r)

        got = mapped_rule_value(case, tx, ty, kern, n=6)
        m00, _, _, _ = sq.pair_moments_reference(tx, ty, k, c,
                                                 n_outer=16, n_inner=16)
        assert abs(got - m00) / abs(m00) < 1e-6

    def test_weight_totals(self):
        for rule in (sq.coincident_rule(8), sq.edge_rule(8), sq.vertex_rule(8)):
            assert abs(rule[2].sum() - 0.25) < 1e-9


class TestStaticClosedForm:
    def test_matches_fan_quadrature(self):
        x = np.array([[0.12, 0.08, 0.0], [0.5, 0.5, 0.0], [-0.2, 0.1, 0.0]])
        i0, i1 = sq.static_layer_moments(TRI_A, x)
        for j in range(len(x)):
            yp, yw = sq.polar_rule(TRI_A, x[j], 0.0, n_ang=40, n_rad=40)
            r = np.linalg.norm(x[j] - yp, axis=1)
            i0_q = (yw / (4 * np.pi * r)).sum()
            i1_q = (yw / (4 * np.pi * r)) @ yp
            assert abs(i0[j] - i0_q) / i0_q < 1e-12
            assert np.abs(i1[j] - i1_q).max() / np.abs(i1_q).max() < 1e-11


@pytest.fixture(scope="module")
def unit_square_pair():
    mesh = es.make_rectangle_screen(1.0, 1.0, 1, 1, es.PlaneFrame.xy())
    return mesh, mesh.basis()


class TestAssembly:
    def test_single_edge_matrix_against_oracle(self, unit_square_pair):
        """2-triangle unit square: 1 x 1 system vs the brute-force oracle."""
        mesh, basis = unit_square_pair
        medium = es.MediumParams(1.0, 1.0, 2.0)
        a = es.assemble_system(mesh, basis, medium).matrix[0, 0]
        k = medium.k

        def entry_from_moments(s, t, mom):
            m00, mx, my, mxy = mom
            c = 0.5 * (mesh.centroids[s] + mesh.centroids[t])
            i = list(basis.tri_basis[s]).index(0)
            j = list(basis.tri_basis[t]).index(0)
            cm = basis.tri_sign[s, i] * basis.lengths[0] / (2 * mesh.areas[s])
            cn = basis.tri_sign[t, j] * basis.lengths[0] / (2 * mesh.areas[t])
            vm = mesh.vertices[basis.tri_free[s, i]] - c
            vn = mesh.vertices[basis.tri_free[t, j]] - c
            return cm * cn * (k * k * (mxy - mx @ vn - vm @ my + (vm @ vn) * m00)
                              - 4.0 * m00)

        total = 0.0
        for s in (0, 1):
            for t in (0, 1):
                c = 0.5 * (mesh.centroids[s] + mesh.centroids[t])
                mom = sq.pair_moments_reference(mesh.tri_vertices[s],
                                                mesh.tri_vertices[t], k, c,
                                                n_outer=16, n_inner=16)
                total += entry_from_moments(s, t, mom)
        assert abs(a - total) / abs(total) < 1e-6

    def test_symmetry_residual(self, unit_medium):
        mesh = es.make_rectangle_screen(1.0, 1.0, 8, 8, es.PlaneFrame.xy())
        system = es.assemble_system(mesh, mesh.basis(), unit_medium)
        assert system.symmetry_residual() < 1e-12

    def test_translation_invariance(self, unit_medium):
        mesh = es.make_rectangle_screen(1.0, 1.0, 2, 2, es.PlaneFrame.xy())
        a0 = es.assemble_system(mesh, mesh.basis(), unit_medium).matrix
        mesh_t = mesh.translated([0.5, -0.25, 1.0])
        a1 = es.assemble_system(mesh_t, mesh_t.basis(), unit_medium).matrix
        assert np.abs(a1 - a0).max() / np.abs(a0).max() < 1e-13

    def test_empty_basis_rejected(self, unit_medium):
        # a single triangle has no interior edges
        f = es.PlaneFrame.xy()
        mesh = es.ScreenMesh(np.array([[0.0, 0, 0], [1.0, 0, 0], [0.0, 1, 0]]),
                             np.array([[0, 1, 2]]), f)
        with pytest.raises(es.InvalidArgumentError):
            es.assemble_system(mesh, mesh.basis(), unit_medium)

    def test_low_order_quad_rejected(self, unit_square_pair, unit_medium):
        mesh, basis = unit_square_pair
        with pytest.raises(es.InvalidArgumentError):
            es.assemble_system(mesh, basis, unit_medium,
                               quad=es.quadrature_rule(1))


class TestRhs:
    def test_degenerate_polarization_exactly_zero(self, unit_square_pair,
                                                  unit_medium):
        mesh, basis = unit_square_pair
        spec = es.PlaneWaveSpec(np.array([0.0, 0, 1]), np.array([0.0, 0, 1]))
        rhs = es.assemble_rhs(mesh, basis, spec, unit_medium)
        assert np.all(rhs.values == 0.0)

    def test_linearity_under_amplitude(self, unit_medium, oblique_wave):
        # rhs is linear in the incident field: quadrupling mu doubles the
        # E0 amplitude (sqrt(mu)); halving omega keeps k unchanged and halves
        # the i*omega*eps prefactor, so the two effects cancel exactly
        mesh = es.make_rectangle_screen(1.0, 0.5, 3, 2, es.PlaneFrame.xy())
        basis = mesh.basis()
        r1 = es.assemble_rhs(mesh, basis, oblique_wave, unit_medium)
        doubled = es.MediumParams(unit_medium.epsilon, 4.0 * unit_medium.mu,
                                  unit_medium.omega / 2.0)
        assert abs(doubled.k - unit_medium.k) < 1e-14
        r2 = es.assemble_rhs(mesh, basis, oblique_wave, doubled)
        assert np.abs(r2.values - r1.values).max() \
            < 1e-12 * np.abs(r1.values).max()

    def test_normal_incidence_midpoint_oracle(self, unit_square_pair,
                                              unit_medium):
        # theta along the normal: the incident phase is constant on the
        # screen, so a refined midpoint rule integrates the linear basis
        # exactly
        mesh, basis = unit_square_pair
        spec = es.PlaneWaveSpec(np.array([0.0, 0, 1]), np.array([1.0, 0, 0]))
        rhs = es.assemble_rhs(mesh, basis, spec, unit_medium)

        def split4(tri):
            m01, m12, m20 = (0.5 * (tri[0] + tri[1]), 0.5 * (tri[1] + tri[2]),
                             0.5 * (tri[2] + tri[0]))
            return [np.array(t) for t in ((tri[0], m01, m20), (m01, tri[1], m12),
                                          (m20, m12, tri[2]), (m01, m12, m20))]

        amp = np.sqrt(unit_medium.mu) * np.cross(spec.p, spec.theta)
        val = 0.0 + 0.0j
        rule = es.quadrature_rule(1)  # midpoint
        for t in (int(basis.tri_plus[0]), int(basis.tri_minus[0])):
            tris = [mesh.tri_vertices[t]]
            for _ in range(4):
                tris = [s for tri in tris for s in split4(tri)]
            sgn = 1.0 if t == basis.tri_plus[0] else -1.0
            coef = sgn * basis.lengths[0] / (2 * mesh.areas[t])
            fv = mesh.vertices[basis.free_plus[0] if sgn > 0
                               else basis.free_minus[0]]
            for tri in tris:
                pts, wts = map_rule(tri[None], rule)
                phase = np.exp(1j * unit_medium.k * (pts[0] @ spec.theta))
                val += (wts[0] * phase * ((pts[0] - fv) @ amp) * coef).sum()
        val *= 1j * unit_medium.omega * unit_medium.epsilon
        assert abs(rhs.values[0] - val) / abs(val) < 1e-8


class TestSolve:
    def test_zero_rhs_gives_zero(self, unit_square_pair, unit_medium):
        mesh, basis = unit_square_pair
        system = es.assemble_system(mesh, basis, unit_medium)
        rho = es.solve_density(system, es.RhsVector(np.zeros(1, complex)))
        assert np.all(rho.coefficients == 0.0)

    def test_residual_on_16x16(self, unit_medium, oblique_wave):
        mesh = es.make_rectangle_screen(1.0, 1.0, 16, 16, es.PlaneFrame.xy())
        basis = mesh.basis()
        system = es.assemble_system(mesh, basis, unit_medium)
        rhs = es.assemble_rhs(mesh, basis, oblique_wave, unit_medium)
        rho = es.solve_density(system, rhs)
        assert rho.solve_residual < 1e-10

    def test_scaling_linearity(self, solved_rect):
        _, _, system, rhs, rho = solved_rect
        scaled = es.solve_density(system, es.RhsVector(3.7 * rhs.values))
        assert np.abs(scaled.coefficients - 3.7 * rho.coefficients).max() \
            < 1e-13 * np.abs(rho.coefficients).max()

    def test_dimension_mismatch(self, solved_rect):
        _, _, system, _, _ = solved_rect
        with pytest.raises(es.InvalidArgumentError):
            es.solve_density(system, es.RhsVector(np.zeros(3, complex)))

    def test_singular_matrix_raises(self, unit_medium):
        bad = es.SystemMatrix(np.zeros((4, 4), complex), unit_medium)
        with pytest.raises(es.ConditioningError):
            es.solve_density(bad, es.RhsVector(np.ones(4, complex)))


class TestDumps:
    def test_matrix_round_trip(self, tmp_path, solved_rect):
        _, _, system, rhs, _ = solved_rect
        pm = tmp_path / "a.bin"
        pv = tmp_path / "b.bin"
        es.write_matrix_dump(pm, system.matrix)
        es.write_vector_dump(pv, rhs.values)
        assert pm.stat().st_size == 16 + 16 * system.size ** 2
        assert pv.stat().st_size == 16 + 16 * system.size
        assert np.array_equal(es.read_dump(pm), system.matrix)
        assert np.array_equal(es.read_dump(pv), rhs.values)

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "bad.bin"
        p.write_bytes(b"NOTMAGIC" + b"\x00" * 8)
        with pytest.raises(es.InvalidArgumentError):
            es.read_dump(p)


class TestSelfConvergence:
    def test_density_cauchy_sequence(self, unit_medium, oblique_wave):
        """Discrete L2 differences of the density shrink under refinement.

        Probes sit in the screen interior: the continuum current is edge
        singular (|rho|^2 ~ 1/d near the rim, not integrable), so only
        interior sampling yields a meaningful Cauchy sequence.
        """
        from emscreen.geometry import density_on_triangles
        probes2 = np.stack(np.meshgrid(np.linspace(-0.287, 0.313, 5),
                                       np.linspace(-0.304, 0.296, 5),
                                       indexing="ij"), -1).reshape(-1, 2)
        probes = np.column_stack([probes2, np.zeros(len(probes2))])

        def density_at(n):
            mesh = es.make_rectangle_screen(1.0, 1.0, n, n, es.PlaneFrame.xy())
            basis = mesh.basis()
            system = es.assemble_system(mesh, basis, unit_medium)
            rho = es.solve_density(
                system, es.assemble_rhs(mesh, basis, oblique_wave, unit_medium))
            alpha, beta, _ = density_on_triangles(mesh, basis, rho.coefficients)
            # locate the triangle containing each probe
            vals = np.zeros((len(probes), 3), complex)
            s2 = mesh.frame.to_plane(probes)
            t2 = mesh.frame.to_plane(mesh.tri_vertices)
            for i, p in enumerate(s2):
                r = p - t2[:, 0]
                m1 = t2[:, 1] - t2[:, 0]
                m2 = t2[:, 2] - t2[:, 0]
                det = m1[:, 0] * m2[:, 1] - m1[:, 1] * m2[:, 0]
                l1 = (r[:, 0] * m2[:, 1] - r[:, 1] * m2[:, 0]) / det
                l2 = (m1[:, 0] * r[:, 1] - m1[:, 1] * r[:, 0]) / det
                inside = (l1 >= -1e-12) & (l2 >= -1e-12) & (l1 + l2 <= 1 + 1e-12)
                t = int(np.where(inside)[0][0])
                vals[i] = alpha[t] * probes[i] + beta[t]
            return vals

        v1, v2, v3 = density_at(4), density_at(8), density_at(16)
        d12 = np.linalg.norm(v2 - v1)
        d23 = np.linalg.norm(v3 - v2)
        assert d23 < d12
