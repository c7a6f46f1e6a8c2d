"""Point-dipole field, force, and torque kernel.

Every permanent magnet in the system (the 3.175 mm chain balls, the
wheel-driven actuation magnets, the sizing candidates) is reduced to a
point dipole at its center.  All quantities are SI: positions in meters,
moments in A*m^2, flux density in tesla, forces in newtons.  Functions
broadcast over leading axes, so ``r`` may be a single offset ``(3,)`` or a
stack ``(..., 3)``.
"""

import numpy as np
from dataclasses import dataclass

MU0 = 4.0e-7 * np.pi          # vacuum permeability, T*m/A
K_DIPOLE = MU0 / (4.0 * np.pi)  # recurring prefactor, 1e-7 up to rounding
GRAM_FORCE = 9.80665e-3       # N per gram-force


def gf_to_newton(gf):
    """Convert gram-force to newtons."""
    return np.asarray(gf, dtype=float) * GRAM_FORCE


def newton_to_gf(n):
    """Convert newtons to gram-force."""
    return np.asarray(n, dtype=float) / GRAM_FORCE


def sphere_moment(diameter, remanence=1.45):
    """Dipole moment magnitude of a uniformly magnetized sphere.

    m = Br * V / mu0.  A 3.175 mm N52 ball (Br = 1.45 T) gives about
    0.0193 A*m^2.
    """
    if diameter <= 0.0:
        raise ValueError("sphere diameter must be positive")
    volume = np.pi * diameter**3 / 6.0
    return remanence * volume / MU0


def cylinder_moment(diameter, height, remanence=1.45):
    """Dipole moment magnitude of an axially magnetized cylinder."""
    if diameter <= 0.0 or height <= 0.0:
        raise ValueError("cylinder dimensions must be positive")
    volume = np.pi * (diameter / 2.0) ** 2 * height
    return remanence * volume / MU0


@dataclass
class Dipole:
    """Point dipole: a position and a moment vector, both world frame."""

    position: np.ndarray
    moment: np.ndarray

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float).reshape(3)
        self.moment = np.asarray(self.moment, dtype=float).reshape(3)
        if not (np.all(np.isfinite(self.position)) and np.all(np.isfinite(self.moment))):
            raise ValueError("dipole position and moment must be finite")

    @property
    def moment_magnitude(self):
        return float(np.linalg.norm(self.moment))


def _norms(r):
    r = np.asarray(r, dtype=float)
    s = np.linalg.norm(r, axis=-1)
    if np.any(s == 0.0):
        raise ValueError("field requested at a dipole center (|r| = 0)")
    return r, s


def dipole_field(r, m):
    """Flux density of a point dipole.

    Parameters
    ----------
    r : (..., 3) array
        Offset from the dipole center to the field point.
    m : (..., 3) array
        Dipole moment vector; broadcasts against ``r``.

    Returns
    -------
    (..., 3) array
        B = (mu0 / 4 pi) * (3 (m.rhat) rhat - m) / |r|^3, linear in ``m``.
    """
    r, s = _norms(r)
    m = np.asarray(m, dtype=float)
    mr = np.sum(m * r, axis=-1)
    s2 = s * s
    inv_s5 = 1.0 / (s2 * s2 * s)
    return K_DIPOLE * (3.0 * mr[..., None] * r - m * s2[..., None]) * inv_s5[..., None]


def dipole_field_jacobian(r, m):
    """Spatial Jacobian dB/dr of a point dipole field.

    Returns a (..., 3, 3) array.  The Jacobian is symmetric and traceless
    away from the source and falls off as |r|^-4.
    """
    r, s = _norms(r)
    m = np.broadcast_to(np.asarray(m, dtype=float), r.shape)
    mr = np.sum(m * r, axis=-1)[..., None, None]
    s2 = (s * s)[..., None, None]
    inv_s5 = 1.0 / (s2 * s2 * s[..., None, None])
    eye = np.broadcast_to(np.eye(3), r.shape[:-1] + (3, 3))
    outer_rm = r[..., :, None] * m[..., None, :]
    outer_rr = r[..., :, None] * r[..., None, :]
    J = (outer_rm + np.swapaxes(outer_rm, -1, -2) + mr * eye) * s2
    J = J - 5.0 * mr * outer_rr
    return 3.0 * K_DIPOLE * J * inv_s5 / s2


def dipole_pair_force(r, m_source, m_target):
    """Force on a target dipole in the field of a source dipole.

    ``r`` points from the source center to the target center.  Equal to
    grad(m_target . B); antisymmetric under swapping the two dipoles.
    """
    r, s = _norms(r)
    a = np.asarray(m_source, dtype=float)
    b = np.asarray(m_target, dtype=float)
    ar = np.sum(a * r, axis=-1)[..., None]
    br = np.sum(b * r, axis=-1)[..., None]
    ab = np.sum(a * b, axis=-1)[..., None]
    s2 = (s * s)[..., None]
    inv_s5 = 1.0 / (s2 * s2 * s[..., None])
    return 3.0 * K_DIPOLE * inv_s5 * (ab * r + br * a + ar * b - 5.0 * ar * br * r / s2)


def force_on_dipole(target, source):
    """Force on ``target`` from ``source`` (both :class:`Dipole`)."""
    r = target.position - source.position
    return dipole_pair_force(r, source.moment, target.moment)


def torque_on_dipole(target, b_field):
    """Torque m x B on a dipole in a local flux density ``b_field``."""
    return np.cross(np.asarray(target.moment, dtype=float), np.asarray(b_field, dtype=float))


def superpose_field(sources, p):
    """Total flux density at point ``p`` from a list of dipole sources."""
    p = np.asarray(p, dtype=float)
    total = np.zeros(3)
    for src in sources:
        total += dipole_field(p - src.position, src.moment)
    return total


def pair_energy(r, m_a, m_b):
    """Interaction energy -m_b . B(r, m_a) of two dipoles separated by r."""
    return -float(np.sum(np.asarray(m_b, dtype=float) * dipole_field(r, m_a), axis=-1))


def force_intensity(m_ball, m_actuator, distance):
    """Magnitude of the pull between a chain ball and an actuation magnet.

    3 mu0 m_ball m_actuator / (4 pi d^4): the gradient-force scale for a
    ball whose moment sits aligned with the local field of a transverse
    actuator dipole.  Falls off as d^-4, so halving the distance gives
    exactly 16x the force.
    """
    if distance <= 0.0:
        raise ValueError("distance must be positive")
    return 3.0 * K_DIPOLE * m_ball * m_actuator / distance**4
