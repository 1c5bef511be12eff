import math

import numpy as np
import pytest

from blowlab.errors import InsufficientDataError
from blowlab.numerics import Grid1D, PowerParam
from blowlab.physical import (
    BlowupEvent,
    PointTrace,
    WaveState,
    adaptive_dt,
    estimate_blowup_time,
    evolve,
    step,
)

P3 = PowerParam(3.0)
SQRT2 = math.sqrt(2.0)


def constant_state(n=256, amp=SQRT2, phase=0.0):
    grid = Grid1D(-1.0, 1.0, n)
    ph = np.exp(1j * phase)
    u = ph * amp * np.ones(grid.n, complex)
    return WaveState(grid, 0.0, u, u.copy())


def test_zero_data_stays_zero():
    grid = Grid1D(-1.0, 1.0, 64)
    state = WaveState(grid, 0.0, np.zeros(64, complex), np.zeros(64, complex))
    result = evolve(state, P3, threshold=1.0, max_steps=50, fixed_dt=1e-2)
    assert result.outcome.cause == "max_steps"
    assert not result.outcome.blew_up
    assert result.final.max_abs() == 0.0


def test_constant_data_reduces_to_ode_single_step():
    # identical nodes: the Laplacian vanishes exactly, leaving the scalar update
    state = constant_state(n=32)
    dt = 1e-3
    new = step(state, dt, P3)
    u0, v0 = SQRT2 + 0j, SQRT2 + 0j
    a0 = abs(u0) ** 2 * u0
    v_half = v0 + 0.5 * dt * a0
    u1 = u0 + dt * v_half
    v1 = v_half + 0.5 * dt * abs(u1) ** 2 * u1
    assert np.all(new.u == u1)
    assert np.all(new.v == v1)


def test_constant_data_matches_exact_ode():
    # u(t) = sqrt(2)/(1-t) solves the ODE with this data
    state = constant_state()
    result = evolve(state, P3, threshold=1e6, max_steps=5000, fixed_dt=1e-4)
    t = result.final.t
    assert t == pytest.approx(0.5, abs=1e-12)
    assert abs(result.final.u[0] - SQRT2 / (1.0 - t)) <= 1e-4


def test_phase_equivariance_exact_trajectory():
    alpha = 0.7
    ph = np.exp(1j * alpha)
    base = evolve(constant_state(), P3, threshold=1e6, max_steps=2000, fixed_dt=1e-4)
    rot = evolve(constant_state(phase=alpha), P3, threshold=1e6, max_steps=2000, fixed_dt=1e-4)
    assert np.max(np.abs(rot.final.u - ph * base.final.u)) <= 1e-12 * base.final.max_abs()


def test_adaptive_dt_formula():
    state = constant_state(amp=1e-9)
    assert adaptive_dt(state, 0.45, 0.5, P3) == pytest.approx(min(0.45 * state.grid.dx, 0.5), rel=1e-9)
    big = constant_state(n=256, amp=1000.0)
    # amplitude-limited branch: 0.5/(1+1000)
    expected = 0.5 / 1001.0
    assert adaptive_dt(big, 0.45, 0.5, P3) == pytest.approx(expected, rel=1e-12)
    # doubling the amplitude roughly halves dt at p=3
    bigger = constant_state(n=256, amp=2000.0)
    ratio = adaptive_dt(bigger, 0.45, 0.5, P3) / adaptive_dt(big, 0.45, 0.5, P3)
    assert ratio == pytest.approx(0.5, abs=2e-3)
    with pytest.raises(ValueError):
        adaptive_dt(big, 1.2, 0.5, P3)


def test_evolve_threshold_stop_time():
    # |u| = sqrt(2)/(1-t) crosses 1e3 at t = 1 - sqrt(2)e-3
    result = evolve(constant_state(), P3, threshold=1e3, max_steps=100000, cfl=0.45, amp_factor=0.1)
    assert result.outcome.cause == "threshold"
    assert result.outcome.peak_modulus >= 1e3
    assert result.outcome.t_stop == pytest.approx(1.0 - SQRT2 * 1e-3, abs=5e-4)


def test_evolve_requires_threshold_above_data():
    with pytest.raises(ValueError):
        evolve(constant_state(), P3, threshold=1.0, max_steps=10)


def test_finite_speed_trace_is_zero():
    grid = Grid1D(-4.0, 4.0, 1024)
    x = grid.nodes
    u0 = np.where(np.abs(x) < 1.0, 0.01 * np.cos(0.5 * math.pi * x) ** 2, 0.0).astype(complex)
    state = WaveState(grid, 0.0, u0, np.zeros(grid.n, complex))
    result = evolve(state, P3, threshold=1.0, max_steps=20000, t_end=0.5, trace_points=[2.0])
    # 2.0 > 1 + t_stop keeps the query outside the influence cone
    assert result.final.t == pytest.approx(0.5, abs=1e-12)
    assert max(result.traces[0].moduli) <= 1e-10


def test_translation_equivariance_exact():
    grid = Grid1D(-2.0, 2.0, 256)
    x = grid.nodes
    u0 = (0.5 * np.exp(-(x**2)) + 0.1j * np.sin(x)).astype(complex)
    v0 = 0.2 * np.cos(x).astype(complex)
    shift = 37
    a = evolve(WaveState(grid, 0.0, u0, v0), P3, 1e3, 200, fixed_dt=2e-3)
    b = evolve(WaveState(grid, 0.0, np.roll(u0, shift), np.roll(v0, shift)), P3, 1e3, 200, fixed_dt=2e-3)
    np.testing.assert_array_equal(b.final.u, np.roll(a.final.u, shift))


def test_real_data_stays_real():
    grid = Grid1D(-2.0, 2.0, 256)
    x = grid.nodes
    u0 = (SQRT2 + 0.2 * np.exp(-(x**2))).astype(complex)
    v0 = SQRT2 * np.ones(grid.n, complex)
    result = evolve(WaveState(grid, 0.0, u0, v0), P3, 1e4, 100000)
    assert np.max(np.abs(result.final.u.imag)) <= 1e-13 * result.final.max_abs()


def test_isolated_zero_nonlinearity_fractional_power():
    # |u|^(p-1) u must extend continuously by 0 through zeros of u
    p = PowerParam(2.5)
    grid = Grid1D(-2.0, 2.0, 128)
    u0 = np.sin(math.pi * grid.nodes / 2.0).astype(complex)  # hits 0 exactly
    out = p.nonlinearity(u0)
    assert np.all(np.isfinite(out))
    assert out[np.abs(u0) == 0.0].tolist() == [0.0] * int(np.sum(np.abs(u0) == 0.0))


def test_solver_convergence_second_order():
    # exact ODE solution over [0, 0.9]: halving dt cuts the error by >= 3.5
    errs = {}
    for dt in (2e-4, 1e-4):
        state = constant_state(n=64)
        result = evolve(state, P3, threshold=1e6, max_steps=int(round(0.9 / dt)), fixed_dt=dt)
        t = result.final.t
        errs[dt] = abs(result.final.u[0] - SQRT2 / (1.0 - t))
    assert errs[2e-4] / errs[1e-4] >= 3.5


def test_estimate_blowup_time_exact_trace():
    trace = PointTrace(0.0, 0)
    for t in np.linspace(0.990, 0.99999, 80):
        trace.append(float(t), SQRT2 / (1.0 - t))
    fit = estimate_blowup_time(trace, P3, floor=100.0)
    assert fit.T_hat == pytest.approx(1.0, abs=1e-10)
    assert fit.r2 >= 1.0 - 1e-12


def test_estimate_blowup_time_solver_in_loop():
    result = evolve(constant_state(), P3, threshold=1e6, max_steps=100000, cfl=0.45,
                    amp_factor=0.1, trace_points=[0.0])
    fit = estimate_blowup_time(result.traces[0], P3, floor=100.0, cap=1e6)
    assert fit.T_hat == pytest.approx(1.0, abs=1e-3)


def test_estimate_blowup_time_threshold_insensitive():
    fits = []
    for threshold in (1e5, 1e6):
        res = evolve(constant_state(), P3, threshold=threshold, max_steps=100000,
                     cfl=0.45, amp_factor=0.1, trace_points=[0.0])
        fits.append(estimate_blowup_time(res.traces[0], P3, floor=100.0, cap=threshold).T_hat)
    assert abs(fits[0] - fits[1]) <= 1e-6


def test_estimate_blowup_time_flat_trace_errors():
    trace = PointTrace(0.0, 0)
    for t in np.linspace(0.0, 1.0, 50):
        trace.append(float(t), 1.0)
    with pytest.raises(InsufficientDataError):
        estimate_blowup_time(trace, P3, floor=100.0)


def test_blowup_event_validation():
    with pytest.raises(ValueError):
        BlowupEvent(0.0, 1.0, "weird")
    assert BlowupEvent(0.0, 1.0, "nan").blew_up
    assert not BlowupEvent(0.0, 1.0, "max_steps").blew_up
