"""Wheel-driven spherical actuation magnets and their closed-loop pointing.

Each actuation unit is a permanent-magnet sphere resting on three omni
wheels, with a field sensor mounted below the magnet on the unit's -z
axis.  Wheel speeds map linearly to the magnet's angular velocity through
the wheel geometry matrix; the magnet's attitude is integrated on SO(3).
Pointing the magnet's dipole at a commanded direction is done with a
cross-product feedback law on the sensed dipole direction, which gives
dtheta/dt = -K sin(theta) in the ideal continuous limit.
"""

from dataclasses import dataclass, field

import numpy as np

from ballchain.magnetics import MU0, dipole_field, cylinder_moment

# bench wheel assembly: wheel radius 48 mm, magnet ball radius 43.5 mm,
# axes in the tetrahedral arrangement, rounded to two decimals
DEFAULT_WHEEL_RADIUS = 48.0e-3
DEFAULT_MAGNET_RADIUS = 43.5e-3
DEFAULT_A = np.array([
    [0.82, 0.00, -0.58],
    [-0.41, 0.71, -0.58],
    [-0.41, -0.71, -0.58],
])


@dataclass
class WheelSet:
    """Three omni wheels under a magnet sphere.

    ``A`` stacks the negated wheel axis directions as rows; ``eta`` is the
    radius ratio magnet/wheel that scales surface speed into spin.
    """

    wheel_radius: float = DEFAULT_WHEEL_RADIUS
    magnet_radius: float = DEFAULT_MAGNET_RADIUS
    A: np.ndarray = field(default_factory=lambda: DEFAULT_A.copy())

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=float).reshape(3, 3)
        if self.wheel_radius <= 0.0 or self.magnet_radius <= 0.0:
            raise ValueError("wheel and magnet radii must be positive")
        norms = np.linalg.norm(self.A, axis=1)
        if np.any(np.abs(norms - 1.0) > 0.05):
            raise ValueError("rows of A must be unit wheel-axis directions")

    @classmethod
    def from_axes(cls, axes, wheel_radius=DEFAULT_WHEEL_RADIUS,
                  magnet_radius=DEFAULT_MAGNET_RADIUS):
        axes = np.asarray(axes, dtype=float).reshape(3, 3)
        axes = axes / np.linalg.norm(axes, axis=1)[:, None]
        return cls(wheel_radius=wheel_radius, magnet_radius=magnet_radius, A=-axes)

    @property
    def eta(self):
        return self.magnet_radius / self.wheel_radius


def wheel_to_magnet(omega_wheels, wheels):
    """Magnet angular velocity from the three wheel speeds: eta * A * w."""
    w = np.asarray(omega_wheels, dtype=float).reshape(3)
    return wheels.eta * (wheels.A @ w)


def magnet_to_wheel(omega_magnet, wheels):
    """Wheel speeds that produce a requested magnet angular velocity."""
    om = np.asarray(omega_magnet, dtype=float).reshape(3)
    return np.linalg.solve(wheels.A, om) / wheels.eta


def _skew_exp(rotvec):
    """Rotation matrix exp([w]_x) by the Rodrigues formula."""
    angle = np.linalg.norm(rotvec)
    if angle < 1.0e-14:
        return np.eye(3)
    axis = rotvec / angle
    K = np.array([[0.0, -axis[2], axis[1]],
                  [axis[2], 0.0, -axis[0]],
                  [-axis[1], axis[0], 0.0]])
    return np.eye(3) + np.sin(angle) * K + (1.0 - np.cos(angle)) * (K @ K)


def integrate_rotation(R, omega, dt):
    """One explicit attitude step R <- exp([omega dt]) R, re-orthonormalized.

    The Newton-Schulz correction R (3I - R^T R) / 2 after each step keeps
    the accumulated drift from the matrix products at machine precision.
    """
    R = np.asarray(R, dtype=float)
    omega = np.asarray(omega, dtype=float).reshape(3)
    R_new = _skew_exp(omega * dt) @ R
    return 0.5 * R_new @ (3.0 * np.eye(3) - R_new.T @ R_new)


@dataclass
class ActuationUnit:
    """A wheel-driven magnet sphere posed in the world.

    ``rotation`` takes magnet-body vectors to world; the dipole starts
    along the body z axis (``neutral_dipole``).  ``frame`` is the mount
    orientation of the whole unit; the field sensor sits at
    ``frame @ (0, 0, -sensor_distance)`` from the magnet center.
    ``wheel_slip`` holds per-wheel multiplicative speed factors (1 =
    ideal) and ``sensor_noise`` a zero-mean tesla-level sigma for
    injected measurement noise.
    """

    moment_magnitude: float = cylinder_moment(76.2e-3, 38.1e-3, 1.45)
    position: np.ndarray = (0.0, 0.0, 0.0)
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    wheels: WheelSet = field(default_factory=WheelSet)
    sensor_distance: float = 0.12
    neutral_dipole: np.ndarray = (0.0, 0.0, 1.0)
    frame: np.ndarray = field(default_factory=lambda: np.eye(3))
    wheel_slip: np.ndarray = (1.0, 1.0, 1.0)
    sensor_noise: float = 0.0
    gain: float = 10.0            # K in the pointing law, 1/s

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float).reshape(3)
        self.rotation = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        self.frame = np.asarray(self.frame, dtype=float).reshape(3, 3)
        self.neutral_dipole = np.asarray(self.neutral_dipole, dtype=float).reshape(3)
        self.neutral_dipole = self.neutral_dipole / np.linalg.norm(self.neutral_dipole)
        self.wheel_slip = np.asarray(self.wheel_slip, dtype=float).reshape(3)
        if self.moment_magnitude <= 0.0:
            raise ValueError("magnet moment must be positive")
        if self.sensor_distance <= self.wheels.magnet_radius:
            raise ValueError("sensor must sit outside the magnet sphere")

    @property
    def dipole_direction(self):
        """Current dipole direction in world coordinates."""
        return self.rotation @ self.neutral_dipole

    @property
    def moment(self):
        return self.moment_magnitude * self.dipole_direction

    def sensor_position(self):
        return self.position + self.frame @ np.array([0.0, 0.0, -self.sensor_distance])


def sensor_reading(unit, rng=None):
    """Flux density at the unit's sensor, expressed in the unit frame."""
    r_world = unit.sensor_position() - unit.position
    b_world = dipole_field(r_world, unit.moment)
    b_unit = unit.frame.T @ b_world
    if unit.sensor_noise > 0.0:
        if rng is None:
            rng = np.random.default_rng()
        b_unit = b_unit + rng.normal(0.0, unit.sensor_noise, 3)
    return b_unit


# inverse of the on-axis coupling tensor 3 e3 e3^T - I = diag(-1, -1, 2)
_SENSOR_INVERSE = np.diag([-1.0, -1.0, 0.5])


def estimate_dipole_direction(b_measured, unit):
    """Dipole direction recovered from the under-magnet sensor reading.

    For a sensor at -D z of the unit frame, B = (mu0 m / 4 pi D^3)
    (3 e3 e3^T - I) m_hat, so inverting the diagonal coupling tensor and
    normalizing returns m_hat exactly in the noise-free case.  The result
    is in world coordinates.
    """
    b_unit = np.asarray(b_measured, dtype=float).reshape(3)
    scale = 4.0 * np.pi * unit.sensor_distance**3 / (MU0 * unit.moment_magnitude)
    m_est = scale * (_SENSOR_INVERSE @ b_unit)
    norm = np.linalg.norm(m_est)
    if norm == 0.0:
        raise ValueError("sensor reading is all zeros; cannot estimate direction")
    return unit.frame @ (m_est / norm)


def reconfigure_step(m_measured, m_commanded, unit):
    """Wheel speeds for one pointing-control step: K/eta A^-1 (m x c)."""
    m = np.asarray(m_measured, dtype=float).reshape(3)
    c = np.asarray(m_commanded, dtype=float).reshape(3)
    omega_a = unit.gain * np.cross(m, c)
    return magnet_to_wheel(omega_a, unit.wheels)


def _any_perpendicular(v):
    helper = np.zeros(3)
    helper[int(np.argmin(np.abs(v)))] = 1.0
    p = np.cross(v, helper)
    return p / np.linalg.norm(p)


def alignment_velocity(m_measured, m_commanded, unit):
    """Magnet angular velocity for one pointing-control step.

    Cross-product law routed through the wheel inverse so per-wheel slip
    shows up in the realized velocity.  Near the antipode the cross
    product vanishes while the error is maximal, so a small fixed
    perpendicular kick (magnitude 0.01 K) is returned instead to break
    the stall.
    """
    m = np.asarray(m_measured, dtype=float).reshape(3)
    c = np.asarray(m_commanded, dtype=float).reshape(3)
    cross = np.cross(m, c)
    angle = float(np.arctan2(np.linalg.norm(cross), float(m @ c)))
    if np.linalg.norm(cross) < 1.0e-6 and angle > 0.5 * np.pi:
        return 0.01 * unit.gain * _any_perpendicular(m)
    omega_w = reconfigure_step(m, c, unit) * unit.wheel_slip
    return wheel_to_magnet(omega_w, unit.wheels)


@dataclass
class ReconfigureResult:
    rotation: np.ndarray
    converged: bool
    steps: int
    final_angle: float
    angles: np.ndarray            # pointing error per step, radians


def reconfigure_run(unit, m_commanded, dt, max_steps=500, tolerance=np.deg2rad(0.5),
                    rng=None):
    """Closed-loop slew of the magnet dipole onto a commanded direction.

    Each step senses the field under the magnet, estimates the dipole
    direction, commands wheel speeds from the cross-product law, and
    integrates the attitude.  Near the antipode the cross product
    vanishes, so a small fixed perpendicular kick (magnitude 0.01 K) is
    injected for one step to break the stall.  Returns the attitude
    history summary; the unit itself is not mutated.
    """
    c = np.asarray(m_commanded, dtype=float).reshape(3)
    c = c / np.linalg.norm(c)
    R = unit.rotation.copy()
    work = ActuationUnit(moment_magnitude=unit.moment_magnitude,
                         position=unit.position, rotation=R,
                         wheels=unit.wheels, sensor_distance=unit.sensor_distance,
                         neutral_dipole=unit.neutral_dipole, frame=unit.frame,
                         wheel_slip=unit.wheel_slip, sensor_noise=unit.sensor_noise,
                         gain=unit.gain)
    angles = []
    for step in range(max_steps):
        work.rotation = R
        b = sensor_reading(work, rng=rng)
        m_hat = estimate_dipole_direction(b, work)
        cross = np.cross(m_hat, c)
        angle = float(np.arctan2(np.linalg.norm(cross), float(m_hat @ c)))
        angles.append(angle)
        if angle <= tolerance:
            return ReconfigureResult(rotation=R, converged=True, steps=step,
                                     final_angle=angle, angles=np.array(angles))
        omega_a = alignment_velocity(m_hat, c, work)
        R = integrate_rotation(R, omega_a, dt)
    work.rotation = R
    b = sensor_reading(work, rng=rng)
    m_hat = estimate_dipole_direction(b, work)
    final = float(np.arctan2(np.linalg.norm(np.cross(m_hat, c)), float(m_hat @ c)))
    angles.append(final)
    return ReconfigureResult(rotation=R, converged=final <= tolerance,
                             steps=max_steps, final_angle=final,
                             angles=np.array(angles))
