"""Actuation magnet sizing from a bench force measurement.

A force measured at bench distance d_m with a known magnet is scaled to
the patient geometry: the deployed magnet of diameter d_d sits half a
patient breadth d_c from the target, plus its own radius.  Both the
measured and desired pulls follow the dipole force law (volume times
field gradient, distance^-4), so the requirement is the root of

    alpha f_m d_m^4 V(d_d) - f_d (d_c + d_d/2)^4 V_m = 0

in d_d, with V(d_d) the candidate sphere volume (4/3) pi (d_d/2)^3 and
V_m the bench magnet volume.  ``alpha`` rescales the measured force to a
different ball diameter (moment scales with ball volume, so alpha is the
cubed diameter ratio).  Remanence cancels: both magnets are assumed the
same grade, so the root is Br-invariant.  The balance is homogeneous in
length (degree 7) and force (degree 1), so consistently rescaled units
give the same root.
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from ballchain.magnetics import (
    GRAM_FORCE,
    Dipole,
    force_on_dipole,
    sphere_moment,
    gf_to_newton,
)

# bench measurement campaign values
MEASUREMENT_MAGNET_DIAMETER = 76.2e-3   # m
MEASUREMENT_MAGNET_HEIGHT = 38.1e-3     # m
MEASUREMENT_DISTANCE = 16.51e-2         # m, entry point to magnet face line
PATIENT_HALF_BREADTH = 59.30e-2 / 2.0   # m, half chest breadth
MEASURED_FORCE_GF = 132.6               # gf, worst case with sleeve on
DESIRED_FORCE_GF = 10.0                 # gf, clinically useful tip pull
MEASURED_BALL_DIAMETER = 2.17e-3        # m, balls used on the force bench
TARGET_BALL_DIAMETER = 3.175e-3         # m, deployed chain balls

NDFEB_DENSITY = 7500.0                  # kg/m^3


def ball_scale_factor(measured_ball_diameter, target_ball_diameter):
    """Moment ratio of two ball sizes: the cubed diameter ratio.

    The bench balls were smaller than the deployed chain's, so the
    measured force is scaled by (d_measured / d_target)^3 ~ 0.32 before
    sizing against the deployed requirement.
    """
    if measured_ball_diameter <= 0.0 or target_ball_diameter <= 0.0:
        raise ValueError("ball diameters must be positive")
    return (measured_ball_diameter / target_ball_diameter) ** 3


@dataclass
class SizingProblem:
    """Inputs of the magnet sizing balance, SI units."""

    measured_force: float           # N at the bench
    desired_force: float            # N at the patient
    measurement_distance: float     # m
    patient_half_breadth: float     # m
    measurement_magnet_volume: float  # m^3
    ball_scale: float = 1.0
    remanence: float = 1.45         # T; does not move the root
    density: float = NDFEB_DENSITY

    def __post_init__(self):
        for name in ("measured_force", "desired_force", "measurement_distance",
                     "patient_half_breadth", "measurement_magnet_volume",
                     "ball_scale"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")

    @classmethod
    def bench_defaults(cls):
        """The recorded bench campaign: worst-case holding force, sleeved chain."""
        v_m = np.pi * (MEASUREMENT_MAGNET_DIAMETER / 2.0) ** 2 * MEASUREMENT_MAGNET_HEIGHT
        return cls(
            measured_force=gf_to_newton(MEASURED_FORCE_GF),
            desired_force=gf_to_newton(DESIRED_FORCE_GF),
            measurement_distance=MEASUREMENT_DISTANCE,
            patient_half_breadth=PATIENT_HALF_BREADTH,
            measurement_magnet_volume=v_m,
            ball_scale=ball_scale_factor(MEASURED_BALL_DIAMETER, TARGET_BALL_DIAMETER),
        )


def _balance(d_d, p):
    """Scaled-force surplus at candidate diameter d_d; root at the answer."""
    v_d = 4.0 / 3.0 * np.pi * (d_d / 2.0) ** 3
    lhs = p.ball_scale * p.measured_force * p.measurement_distance**4 * v_d
    rhs = p.desired_force * (p.patient_half_breadth + d_d / 2.0) ** 4 * p.measurement_magnet_volume
    return lhs - rhs


@dataclass
class SizingResult:
    diameter: float       # m
    residual: float       # balance residual at the root, relative
    mass: float           # kg, solid NdFeB sphere


def solve_magnet_diameter(problem, bracket=(1.0e-3, 1.0)):
    """Smallest sphere diameter meeting the desired force, by bracketed root find.

    The balance is negative for tiny magnets (no volume) and grows as
    d_d^3 against the (d_c + d_d/2)^4 standoff, so a sign change is
    bracketed on [1 mm, 1 m] for any sane clinical inputs.
    """
    lo, hi = bracket
    f_lo = _balance(lo, problem)
    f_hi = _balance(hi, problem)
    if f_lo * f_hi > 0.0:
        raise ValueError("sizing balance has no root in the bracket "
                         f"[{lo}, {hi}]; check the problem inputs")
    d_d = brentq(_balance, lo, hi, args=(problem,), xtol=1.0e-12, rtol=8.9e-16)
    scale = problem.desired_force * (problem.patient_half_breadth + d_d / 2.0) ** 4 \
        * problem.measurement_magnet_volume
    residual = abs(_balance(d_d, problem)) / scale
    return SizingResult(diameter=float(d_d), residual=float(residual),
                        mass=magnet_mass(d_d, problem.density))


def magnet_mass(diameter, density=NDFEB_DENSITY):
    """Mass of a solid sphere magnet, kg."""
    if diameter <= 0.0:
        raise ValueError("diameter must be positive")
    return density * 4.0 / 3.0 * np.pi * (diameter / 2.0) ** 3


def inter_magnet_force(diameter, separation, remanence=1.45):
    """Worst-case attraction between two deployed magnets, N.

    Both spheres are modeled as coaxial, co-aligned dipoles at the given
    center separation: the configuration a patient flanked by two units
    would produce if the dipoles ever lined up.
    """
    if separation <= diameter:
        raise ValueError("magnets overlap at this separation")
    m = sphere_moment(diameter, remanence)
    a = Dipole((0.0, 0.0, 0.0), (0.0, 0.0, m))
    b = Dipole((0.0, 0.0, separation), (0.0, 0.0, m))
    return float(np.linalg.norm(force_on_dipole(b, a)))
