"""Magnet sizing balance: root find, invariances, deployed-pair force."""

import dataclasses

import numpy as np
import pytest

from ballchain.sizing import (PATIENT_HALF_BREADTH, SizingProblem,
                              ball_scale_factor, inter_magnet_force,
                              magnet_mass, solve_magnet_diameter)


def test_bench_defaults_root():
    result = solve_magnet_diameter(SizingProblem.bench_defaults())
    assert result.diameter == pytest.approx(0.1192831204825577, rel=1e-12)
    assert result.mass == pytest.approx(6.664949471981724, rel=1e-12)
    assert result.residual < 1e-12


def test_root_is_remanence_invariant():
    # both magnets share the grade, so Br cancels out of the balance
    base = SizingProblem.bench_defaults()
    d_base = solve_magnet_diameter(base).diameter
    for br in (1.2, 1.32, 1.45):
        d = solve_magnet_diameter(dataclasses.replace(base, remanence=br)).diameter
        assert abs(d - d_base) < 1e-6


def test_root_scales_with_desired_force():
    # quadrupling the requirement grows the magnet; relaxing it shrinks it
    base = SizingProblem.bench_defaults()
    d_base = solve_magnet_diameter(base).diameter
    harder = dataclasses.replace(base, desired_force=4.0 * base.desired_force)
    easier = dataclasses.replace(base, desired_force=0.25 * base.desired_force)
    assert solve_magnet_diameter(harder).diameter > d_base
    assert solve_magnet_diameter(easier).diameter < d_base


def test_ball_scale_factor():
    assert ball_scale_factor(2.17e-3, 3.175e-3) == pytest.approx(
        (2.17 / 3.175) ** 3, rel=1e-15)
    assert ball_scale_factor(1.0, 1.0) == 1.0
    with pytest.raises(ValueError):
        ball_scale_factor(0.0, 3.175e-3)


def test_bad_bracket_raises():
    problem = SizingProblem.bench_defaults()
    with pytest.raises(ValueError):
        solve_magnet_diameter(problem, bracket=(0.5, 1.0))


def test_magnet_mass():
    d = 0.1
    assert magnet_mass(d) == pytest.approx(7500.0 * np.pi * d**3 / 6.0, rel=1e-15)
    with pytest.raises(ValueError):
        magnet_mass(-0.1)


def test_inter_magnet_force_frozen():
    d = 0.1192831204825577
    sep = 2.0 * PATIENT_HALF_BREADTH + d
    f = inter_magnet_force(d, sep)
    assert f == pytest.approx(2.4509142225080134, rel=1e-12)
    # dipole force goes as separation^-4: halving is exactly x16 in binary
    assert inter_magnet_force(d, sep / 2.0) / f == 16.0
    with pytest.raises(ValueError):
        inter_magnet_force(d, d)
