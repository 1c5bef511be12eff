import math

import numpy as np
import pytest

from blowlab.errors import DomainError
from blowlab.numerics import CylinderGrid, PowerParam
from blowlab.stationary import (
    ExtendedSolution,
    connecting_ds,
    connecting_solution,
    profile,
    profile_norm_h,
    profile_on_grid,
    profile_scale,
    stationary_residual,
)

P3 = PowerParam(3.0)


@pytest.mark.parametrize(
    "p,expected",
    [(3.0, math.sqrt(2.0)), (2.0, 6.0), (5.0, 0.75**0.25)],
)
def test_profile_scale_values(p, expected):
    assert profile_scale(PowerParam(p)) == pytest.approx(expected, rel=1e-14)


def test_profile_values():
    assert profile(0.0, 0.37, P3) == pytest.approx(math.sqrt(2.0), rel=1e-14)
    assert profile(0.5, 0.0, P3) == pytest.approx(math.sqrt(2.0) * math.sqrt(0.75), rel=1e-14)
    assert profile(0.5, 1.0, P3) == pytest.approx(math.sqrt(2.0) * math.sqrt(0.75) / 1.5, rel=1e-14)
    with pytest.raises(DomainError):
        profile(1.0, 0.0, P3)
    with pytest.raises(DomainError):
        profile(0.5, 1.5, P3)


def test_profile_reflection_identity():
    y = np.linspace(-1.0, 1.0, 41)
    np.testing.assert_allclose(profile(0.3, -y, P3), profile(-0.3, y, P3), rtol=1e-14)


def test_connecting_solution_values():
    k0 = math.sqrt(2.0)
    # plus branch at s=0, y=0: denominator 2
    assert connecting_solution(0.0, +1, 0.0, 0.0, P3) == pytest.approx(k0 / 2.0, rel=1e-14)
    # minus branch at s=-log 2, y=0: denominator 1/2
    assert connecting_solution(0.0, -1, 0.0, -math.log(2.0), P3) == pytest.approx(2.0 * k0, rel=1e-14)
    # ancient limit: e^s -> 0 recovers the profile
    for y in (-0.8, 0.0, 0.5):
        assert connecting_solution(0.3, +1, y, -40.0, P3) == pytest.approx(profile(0.3, y, P3), rel=1e-12)
    with pytest.raises(DomainError):
        connecting_solution(0.3, -1, -1.0, 0.0, P3)


def test_connecting_ds_matches_finite_difference():
    h = 1e-6
    for sign in (+1, -1):
        s0 = -1.0
        y = np.linspace(-0.9, 0.9, 7)
        fd = (connecting_solution(0.3, sign, y, s0 + h, P3) - connecting_solution(0.3, sign, y, s0 - h, P3)) / (2 * h)
        np.testing.assert_allclose(connecting_ds(0.3, sign, y, s0, P3), fd, rtol=1e-8)


def test_extended_solution_reduces_to_ode():
    sol = ExtendedSolution(0.0, 0.0, 2.0, 0.5, P3)
    for t in (0.0, 1.0, 1.9):
        assert sol.value(0.5, t) == pytest.approx(math.sqrt(2.0) / (2.0 - t), rel=1e-14)


def test_extended_solution_phase_factor():
    base = ExtendedSolution(0.0, 0.3, 1.5, 0.0, P3)
    rotated = ExtendedSolution(math.pi / 2.0, 0.3, 1.5, 0.0, P3)
    x = np.linspace(-0.5, 0.5, 11)
    np.testing.assert_allclose(rotated.value(x, 0.2), 1j * base.value(x, 0.2), rtol=1e-14)


def test_extended_solution_domain():
    sol = ExtendedSolution(0.0, 0.3, 1.0, 0.0, P3)
    assert sol.blowup_time(1.0) == pytest.approx(1.3)
    with pytest.raises(DomainError):
        sol.value(0.0, 1.5)
    boundary_params = ExtendedSolution(0.0, 1.0, 1.0, 0.0, P3)  # parameter ok
    with pytest.raises(DomainError):
        boundary_params.value(0.0, 0.0)  # evaluation rejected
    with pytest.raises(ValueError):
        ExtendedSolution(0.0, 1.2, 1.0, 0.0, P3)


def test_stationary_residual_constant_profile_exact():
    assert stationary_residual(0.0, 0.0, P3, 512) <= 1e-12
    assert stationary_residual(0.0, 2.2, P3, 512) <= 1e-12


def test_stationary_residual_second_order():
    r512 = stationary_residual(0.5, 0.0, P3, 512)
    r1024 = stationary_residual(0.5, 0.0, P3, 1024)
    assert r512 / r1024 >= 3.5


def test_stationary_residual_phase_independent():
    base = stationary_residual(0.5, 0.0, P3, 256)
    for theta in (1.0, math.pi, -2.4):
        assert stationary_residual(0.5, theta, P3, 256) == pytest.approx(base, rel=1e-13)


def test_profile_norm_grows_with_slope():
    g = CylinderGrid(2048, P3)
    norms = [profile_norm_h(d, g) for d in (0.0, 0.5, 0.9, 0.99)]
    assert all(b > a for a, b in zip(norms, norms[1:]))


def test_profile_family_shares_energy():
    from blowlab.selfsim import SelfSimState, energy

    g = CylinderGrid(1024, P3)
    zeros = np.zeros(g.m, complex)
    e0 = energy(SelfSimState(g, 0.0, profile_scale(P3) * np.ones(g.m, complex), zeros))
    assert e0 == pytest.approx(4.0 / 3.0, abs=2e-3)
    for d in (0.5, -0.5, 0.9):
        for theta in (0.0, 1.0):
            e = energy(SelfSimState(g, 0.0, np.exp(1j * theta) * profile_on_grid(d, g), zeros))
            assert abs(e - e0) / e0 <= 5e-3
