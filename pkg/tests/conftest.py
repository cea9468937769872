import hypothesis
import numpy as np
import pytest

import emscreen as es

hypothesis.settings.register_profile(
    "ci", deadline=None, max_examples=25,
    suppress_health_check=[hypothesis.HealthCheck.too_slow])
hypothesis.settings.load_profile("ci")


OBLIQUE_THETA = np.array([0.3, 0.2, -0.933]) / np.linalg.norm([0.3, 0.2, -0.933])
_p = np.array([0.8, -0.1, 0.3])
_p -= (_p @ OBLIQUE_THETA) * OBLIQUE_THETA
OBLIQUE_P = _p / np.linalg.norm(_p)


@pytest.fixture(scope="session")
def unit_medium():
    """eps = mu = 1, omega = 2 pi, so k = 2 pi and the wavelength is 1."""
    return es.MediumParams(1.0, 1.0, 2.0 * np.pi)


@pytest.fixture(scope="session")
def oblique_wave():
    return es.PlaneWaveSpec(OBLIQUE_THETA, OBLIQUE_P)


@pytest.fixture(scope="session")
def solved_rect(unit_medium, oblique_wave):
    """1 x 0.5 wavelength rectangle screen, solved at 16 x 8: the workhorse."""
    mesh = es.make_rectangle_screen(1.0, 0.5, 16, 8, es.PlaneFrame.xy())
    basis = mesh.basis()
    system = es.assemble_system(mesh, basis, unit_medium)
    rhs = es.assemble_rhs(mesh, basis, oblique_wave, unit_medium)
    rho = es.solve_density(system, rhs)
    return mesh, basis, system, rhs, rho


@pytest.fixture(scope="session")
def rect_farfield(solved_rect, unit_medium):
    mesh, _, _, _, rho = solved_rect
    grid = es.DirectionGrid("sphere", 16, 32, np.deg2rad(84.0))
    dirs = grid.directions(mesh.frame)
    return es.far_field(mesh, rho, unit_medium, dirs, grid=grid)
