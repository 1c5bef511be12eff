import math

import numpy as np
import pytest

from blowlab.liouville import (
    prepare_trapped_state,
    project_out_unstable,
    trapping_experiment,
    unstable_mode,
    vanishing_check,
)
from blowlab.numerics import CylinderGrid, Grid1D, PowerParam
from blowlab.physical import WaveState, evolve
from blowlab.selfsim import SelfSimState
from blowlab.stationary import profile_on_grid, profile_scale

P3 = PowerParam(3.0)
K0 = profile_scale(P3)


@pytest.fixture(scope="module")
def grid():
    return CylinderGrid(64, P3)


@pytest.fixture(scope="module")
def prepared(grid):
    raw = SelfSimState(
        grid, 0.0, profile_on_grid(0.3, grid) * (1.0 + 0.05 * grid.one_minus_y2), np.zeros(grid.m, complex)
    )
    return prepare_trapped_state(raw, 0.3, s_probe=8.0, ds=8e-3, residual_target=1.2e-3)


def test_unstable_mode_matches_analytic(grid):
    # eigenvalue 1, eigenfunction profile/(1 + d y), paired with itself
    mode = unstable_mode(0.3, grid)
    assert mode.eigenvalue == pytest.approx(1.0, abs=1e-3)
    m = grid.m
    phi = profile_on_grid(0.3, grid) / (1.0 + 0.3 * grid.nodes)
    h = mode.right[:m] / np.max(np.abs(mode.right[:m]))
    ref = phi / np.max(np.abs(phi))
    assert np.max(np.abs(np.abs(h) - np.abs(ref))) <= 5e-3
    # phase-space pairing (h, lambda h)
    top, bottom = mode.right[:m], mode.right[m:]
    assert np.max(np.abs(bottom - mode.eigenvalue * top)) <= 1e-6 * np.max(np.abs(top))


def test_projection_removes_unstable_component(grid):
    mode = unstable_mode(0.3, grid)
    raw = SelfSimState(
        grid, 0.0, profile_on_grid(0.3, grid) * (1.0 + 0.05 * grid.one_minus_y2), np.zeros(grid.m, complex)
    )
    proj = project_out_unstable(raw, 0.3, mode)
    k = profile_on_grid(0.3, grid)
    z = np.concatenate([proj.w.real - k, proj.ws.real])
    coeff = float(mode.left @ z) / float(mode.left @ mode.right)
    assert abs(coeff) <= 1e-12


def test_projection_rejects_complex_perturbation(grid):
    state = SelfSimState(grid, 0.0, 1j * profile_on_grid(0.3, grid), np.zeros(grid.m, complex))
    with pytest.raises(ValueError, match="real-valued"):
        project_out_unstable(state, 0.3)


def test_trapping_zero_data(grid):
    rep = trapping_experiment(
        SelfSimState(grid, 0.0, np.zeros(grid.m, complex), np.zeros(grid.m, complex)), 4.0, label="zero"
    )
    assert rep.verdict == "decayed_to_zero"
    assert rep.final_norm == 0.0


def test_trapping_small_data_decays_to_zero(grid):
    rep = trapping_experiment(
        SelfSimState(grid, 0.0, 0.1 * K0 * np.ones(grid.m, complex), np.zeros(grid.m, complex)), 8.0
    )
    assert rep.verdict == "decayed_to_zero"
    assert not any(flag for _, flag in rep.am_flags)


def test_trapping_prepared_bump_decays_to_family(prepared, grid):
    rep = trapping_experiment(prepared, 7.0, record_ds=0.5)
    assert rep.verdict == "decayed_to_family"
    assert abs(rep.final_fit.d - 0.3) <= 0.05
    residuals = [r for _, r in rep.residual_series]
    assert residuals[-1] < residuals[0]


def test_trapping_escape_with_certificate(grid):
    rep = trapping_experiment(
        SelfSimState(grid, 0.0, 5.0 * K0 * np.ones(grid.m, complex), np.zeros(grid.m, complex)), 6.0
    )
    assert rep.verdict == "escaped"
    assert rep.am_flags[0] == (0.0, True)  # E < 0 certificate fires immediately


def test_trapping_verdict_phase_covariant(prepared, grid):
    alpha = 1.7
    ph = np.exp(1j * alpha)
    rep = trapping_experiment(SelfSimState(grid, 0.0, ph * prepared.w, ph * prepared.ws), 7.0, record_ds=0.5)
    assert rep.verdict == "decayed_to_family"
    assert rep.final_fit.theta == pytest.approx(alpha, abs=0.05)


def test_trapping_report_json(prepared):
    rep = trapping_experiment(prepared, 2.0, record_ds=1.0, label="probe")
    payload = rep.to_json_dict()
    assert payload["label"] == "probe"
    assert payload["verdict"] in ("decayed_to_family", "decayed_to_zero", "escaped", "undecided")
    assert len(payload["residuals"]) == len(rep.residual_series)


# ---------------------------------------------------------------- vanishing

def small_gaussian_run(amplitude=1e-3):
    grid = Grid1D(-4.0, 4.0, 512)
    u0 = (amplitude * np.exp(-4.0 * grid.nodes**2)).astype(complex)
    return evolve(
        WaveState(grid, 0.0, u0, np.zeros(grid.n, complex)),
        P3, threshold=1.0, max_steps=2000, snapshot_stride=20, t_end=3.0,
    )


def test_vanishing_zero_data():
    grid = Grid1D(-4.0, 4.0, 256)
    res = evolve(
        WaveState(grid, 0.0, np.zeros(256, complex), np.zeros(256, complex)),
        P3, threshold=1.0, max_steps=100, snapshot_stride=10, t_end=1.0,
    )
    rep = vanishing_check(res, [0.0, 0.5, 1.0], P3)
    assert rep.applicable
    assert rep.max_mass == 0.0


def test_vanishing_small_data_disperses():
    rep = vanishing_check(small_gaussian_run(), [0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0], P3, window_width=2.0)
    assert rep.applicable
    assert rep.max_mass == rep.masses[0]  # mass only decreases for this run
    assert rep.nonincreasing_after(1.0)


def test_vanishing_not_applicable_to_blowup():
    grid = Grid1D(-1.0, 1.0, 64)
    amp = math.sqrt(2.0)
    res = evolve(
        WaveState(grid, 0.0, amp * np.ones(64, complex), amp * np.ones(64, complex)),
        P3, threshold=1e3, max_steps=100000,
    )
    rep = vanishing_check(res, [0.0], P3)
    assert not rep.applicable


def test_escape_attaches_flag_history(grid):
    # a slow escape crosses E = 0 before diverging; the history must show it
    w0 = profile_on_grid(0.3, grid) * (1.0 + 0.05 * grid.one_minus_y2)
    rep = trapping_experiment(SelfSimState(grid, 0.0, w0, np.zeros(grid.m, complex)), 12.0, record_ds=0.5)
    assert rep.verdict == "escaped"
    assert len(rep.am_flags) > 2  # history up to the divergence point
    assert not rep.am_flags[0][1]  # starts with positive energy
    assert rep.am_flags[-1][1]  # negative-energy certificate fires en route
