"""Closed-form checks of the point-dipole primitives."""

import numpy as np
import pytest

from ballchain.magnetics import (MU0, K_DIPOLE, Dipole, cylinder_moment,
                                 dipole_field, dipole_field_jacobian,
                                 dipole_pair_force, force_intensity,
                                 force_on_dipole, gf_to_newton, newton_to_gf,
                                 pair_energy, sphere_moment, superpose_field,
                                 torque_on_dipole)


def test_prefactors():
    assert K_DIPOLE == pytest.approx(1.0e-7, rel=1e-15)
    assert MU0 == pytest.approx(4.0e-7 * np.pi, rel=0, abs=0)
    assert gf_to_newton(1.0) == pytest.approx(9.80665e-3)
    assert newton_to_gf(gf_to_newton(13.7)) == pytest.approx(13.7, rel=1e-15)


def test_sphere_moment_reference_ball():
    # N52 ball, 3.175 mm: m = Br V / mu0
    m = sphere_moment(3.175e-3, 1.45)
    volume = np.pi * (3.175e-3) ** 3 / 6.0
    assert m == pytest.approx(1.45 * volume / MU0, rel=1e-15)
    assert m == pytest.approx(0.019336948893229167, rel=1e-12)


def test_cylinder_moment_reference_magnet():
    m = cylinder_moment(76.2e-3, 38.1e-3, 1.45)
    assert m == pytest.approx(200.485486125, rel=1e-9)
    with pytest.raises(ValueError):
        cylinder_moment(-1.0, 38.1e-3)


def test_field_on_axis_and_equator():
    m = 2.3
    d = 0.05
    b_axial = dipole_field(np.array([0.0, 0.0, d]), np.array([0.0, 0.0, m]))
    np.testing.assert_allclose(b_axial, [0.0, 0.0, MU0 * m / (2.0 * np.pi * d**3)],
                               rtol=1e-14, atol=1e-20)
    b_side = dipole_field(np.array([d, 0.0, 0.0]), np.array([0.0, 0.0, m]))
    np.testing.assert_allclose(b_side, [0.0, 0.0, -MU0 * m / (4.0 * np.pi * d**3)],
                               rtol=1e-14, atol=1e-20)


def test_field_is_linear_in_moment_and_broadcasts():
    rng = np.random.default_rng(42)
    r = rng.normal(size=(6, 3))
    m = rng.normal(size=3)
    b = dipole_field(r, m)
    assert b.shape == (6, 3)
    np.testing.assert_allclose(dipole_field(r, 2.5 * m), 2.5 * b, rtol=1e-13)
    np.testing.assert_allclose(b[2], dipole_field(r[2], m), rtol=1e-13)


def test_field_rejects_zero_separation():
    with pytest.raises(ValueError):
        dipole_field(np.zeros(3), np.array([0.0, 0.0, 1.0]))


def test_jacobian_symmetric_traceless_and_matches_fd():
    rng = np.random.default_rng(7)
    for _ in range(25):
        r = rng.normal(size=3)
        r *= (0.02 + 0.2 * rng.random()) / np.linalg.norm(r)
        m = rng.normal(size=3)
        J = dipole_field_jacobian(r, m)
        np.testing.assert_allclose(J, J.T, rtol=1e-12, atol=1e-18)
        assert abs(np.trace(J)) < 1e-12 * np.abs(J).max()
        h = 1e-7
        fd = np.zeros((3, 3))
        for k in range(3):
            dr = np.zeros(3)
            dr[k] = h
            fd[:, k] = (dipole_field(r + dr, m) - dipole_field(r - dr, m)) / (2 * h)
        np.testing.assert_allclose(J, fd, rtol=2e-6, atol=1e-12)


def test_pair_force_is_energy_gradient():
    rng = np.random.default_rng(11)
    for _ in range(20):
        r = rng.normal(size=3)
        r *= (0.01 + 0.1 * rng.random()) / np.linalg.norm(r)
        ma = rng.normal(size=3)
        mb = rng.normal(size=3)
        f = dipole_pair_force(r, ma, mb)
        h = 1e-8
        fd = np.zeros(3)
        for k in range(3):
            dr = np.zeros(3)
            dr[k] = h
            fd[k] = -(pair_energy(r + dr, ma, mb) - pair_energy(r - dr, ma, mb)) / (2 * h)
        np.testing.assert_allclose(f, fd, rtol=5e-6, atol=1e-10)


def test_coaxial_attraction_closed_form():
    # two aligned dipoles on a common axis attract with 3 mu0 m1 m2 / (2 pi s^4)
    m1, m2, s = 0.0193, 0.0205, 4.1e-3
    target = Dipole([0.0, 0.0, s], [0.0, 0.0, m2])
    source = Dipole([0.0, 0.0, 0.0], [0.0, 0.0, m1])
    f = force_on_dipole(target, source)
    expected = 3.0 * MU0 * m1 * m2 / (2.0 * np.pi * s**4)
    assert f[2] == pytest.approx(-expected, rel=1e-12)     # pulled toward source
    np.testing.assert_allclose(f[:2], 0.0, atol=1e-18)


def test_newtons_third_law():
    rng = np.random.default_rng(5)
    a = Dipole(rng.normal(size=3) * 0.05, rng.normal(size=3) * 0.01)
    b = Dipole(rng.normal(size=3) * 0.05 + 0.2, rng.normal(size=3) * 0.01)
    np.testing.assert_allclose(force_on_dipole(a, b), -force_on_dipole(b, a),
                               rtol=1e-12, atol=1e-20)


def test_torque_is_m_cross_b():
    d = Dipole([0.0, 0.0, 0.0], [0.0, 0.1, 0.0])
    tau = torque_on_dipole(d, np.array([0.0, 0.0, 0.02]))
    np.testing.assert_allclose(tau, [0.1 * 0.02, 0.0, 0.0], rtol=1e-15)


def test_superposition_is_sum_of_fields():
    rng = np.random.default_rng(3)
    sources = [Dipole(rng.normal(size=3) * 0.1, rng.normal(size=3)) for _ in range(4)]
    p = np.array([0.5, -0.2, 0.3])
    total = superpose_field(sources, p)
    parts = sum(dipole_field(p - s.position, s.moment) for s in sources)
    np.testing.assert_allclose(total, parts, rtol=1e-14)


def test_force_intensity_quartic_distance_law():
    m_b = sphere_moment(3.175e-3)
    m_a = cylinder_moment(76.2e-3, 38.1e-3)
    f = force_intensity(m_b, m_a, 0.1651)
    assert f == pytest.approx(3.0 * MU0 * m_b * m_a / (4.0 * np.pi * 0.1651**4),
                              rel=1e-14)
    # halving the distance scales the pull by exactly 16
    assert force_intensity(m_b, m_a, 0.1651 / 2.0) == 16.0 * f
