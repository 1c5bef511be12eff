"""Self-similar frame: transform physical snapshots onto the cylinder,
integrate the cylinder equation directly, and keep the energy ledger.

With tau = T0 - t, y = (x - x0)/tau, s = -log tau and
w(y, s) = tau^alpha u(x, t) (alpha = 2/(p-1)), the wave equation becomes

    w_ss = Lw - lin_coeff*w + |w|^(p-1)w - damp_coeff*w_s - 2*y*w_ys,
    Lw   = (1/rho) d_y( rho (1-y^2) d_y w ),

posed on |y| < 1 with no boundary condition: the operator degenerates at
y = +-1.  L is discretized in conservative flux form on the half-offset
nodes; the flux weight rho*(1-y^2) vanishes identically at the domain
edges, which makes the discrete L self-adjoint and negative semidefinite
in the weighted inner product without any ghost values.

The energy

    E = integral( |w_s|^2/2 + |w_y|^2 (1-y^2)/2
                  + (p+1)/(p-1)^2 |w|^2 - |w|^(p+1)/(p+1) ) rho dy

decreases along solutions, with the exact dissipation law
dE/ds = -(4/(p-1)) * integral |w_s|^2 rho/(1-y^2) dy.  For complex fields
the squared modulus |w_s|^2 is the natural reading of the dissipation
density, and it is what the ledger uses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DivergenceError, DomainError
from .numerics import (
    CylinderGrid,
    Grid1D,
    PowerParam,
    cubic_interpolate,
    energy_norm,
    node_derivative,
    periodic_derivative,
    quad_rho,
    require_finite,
)
from .physical import WaveState


@dataclass
class SelfSimState:
    """Cylinder snapshot (s, w, dw/ds)."""

    grid: CylinderGrid
    s: float
    w: np.ndarray
    ws: np.ndarray

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=np.complex128)
        self.ws = np.asarray(self.ws, dtype=np.complex128)
        if self.w.shape != (self.grid.m,) or self.ws.shape != (self.grid.m,):
            raise ValueError("state arrays must match the cylinder grid size")

    def norm(self) -> float:
        return energy_norm(self.w, self.ws, self.grid)

    def copy(self) -> "SelfSimState":
        return SelfSimState(self.grid, self.s, self.w.copy(), self.ws.copy())


def degenerate_laplacian(w: np.ndarray, grid: CylinderGrid) -> np.ndarray:
    """Conservative-flux discretization of (1/rho) d_y( rho (1-y^2) d_y w ).

    Interior fluxes use centered differences at cell edges; the two edge
    fluxes at y = -1 and y = 1 carry weight exactly zero, so no ghost
    nodes and no boundary condition enter.
    """
    weight = grid.flux_weight  # at edges, zero at both ends
    flux = np.zeros(grid.m + 1, dtype=w.dtype)
    flux[1:-1] = weight[1:-1] * (w[1:] - w[:-1]) / grid.dy
    return (flux[1:] - flux[:-1]) / (grid.dy * grid.rho)


def cylinder_rhs(w: np.ndarray, ws: np.ndarray, grid: CylinderGrid) -> tuple[np.ndarray, np.ndarray]:
    """Right side of the first-order system (dw/ds, dws/ds)."""
    power = grid.power
    dws = (
        degenerate_laplacian(w, grid)
        - power.lin_coeff * w
        + power.nonlinearity(w)
        - power.damp_coeff * ws
        - 2.0 * grid.nodes * node_derivative(ws, grid.dy)
    )
    return ws, dws


def default_ds(grid: CylinderGrid) -> float:
    """Empirically safe explicit step: 0.5 * dy * min_nodes sqrt(1-y^2)."""
    return 0.5 * grid.dy * float(np.sqrt(np.min(grid.one_minus_y2)))


def dissipation_density(ws: np.ndarray, grid: CylinderGrid) -> float:
    """integral |w_s|^2 rho/(1-y^2) dy  (the instantaneous dissipation rate
    up to the 4/(p-1) prefactor)."""
    mod2 = ws.real * ws.real + ws.imag * ws.imag
    return float(np.sum(mod2 * grid.diss_weight) * grid.dy)


def _edge_cell_fraction(ws: np.ndarray, grid: CylinderGrid) -> float:
    """Share of the dissipation integral carried by the two outermost cells."""
    cells = np.abs(ws) ** 2 * grid.diss_weight
    total = float(np.sum(cells))
    if total == 0.0:
        return 0.0
    return float((cells[0] + cells[-1]) / total)


def energy(state: SelfSimState) -> float:
    """Lyapunov energy of a cylinder snapshot."""
    grid, power = state.grid, state.grid.power
    require_finite(state.w, state.ws)
    dw = node_derivative(state.w, grid.dy)
    mod2 = np.abs(state.w) ** 2
    integrand = (
        0.5 * np.abs(state.ws) ** 2
        + 0.5 * np.abs(dw) ** 2 * grid.one_minus_y2
        + (power.p + 1.0) / (power.p - 1.0) ** 2 * mod2
        - mod2 ** ((power.p + 1.0) / 2.0) / (power.p + 1.0)
    )
    return float(quad_rho(integrand, grid))


def negative_energy_monitor(state: SelfSimState) -> bool:
    """True when E < 0, certifying that the cylinder solution cannot be global."""
    return energy(state) < 0.0


def lp1_window_mass(state: SelfSimState) -> float:
    """integral over |y| <= 1/2 of |w|^(p+1) dy (no weight)."""
    grid = state.grid
    keep = np.abs(grid.nodes) <= 0.5
    mod = np.abs(state.w[keep])
    return float(np.sum(mod ** (grid.power.p + 1.0)) * grid.dy)


@dataclass
class EnergyTrace:
    """Ledger along a trajectory: energy, accumulated dissipation, residual.

    residual[k] = |E_k - E_0 + (4/(p-1)) D_k| / (|E_0| + eps) measures how
    well the discrete run satisfies the dissipation identity up to record k.
    edge_flag marks runs where the two outermost cells ever carried more
    than 10% of the dissipation integrand (under-resolved weight for p > 3).
    """

    s: np.ndarray
    E: np.ndarray
    D: np.ndarray
    edge_flag: bool

    EPS: float = 1e-12

    def __post_init__(self):
        if len(self.s) != len(self.E) or len(self.s) != len(self.D):
            raise ValueError("trace columns must have equal length")
        if len(self.s) >= 2 and not np.all(np.diff(self.s) > 0):
            raise ValueError("trace times must be strictly increasing")

    def residuals(self, power: PowerParam) -> np.ndarray:
        scale = abs(float(self.E[0])) + self.EPS
        return np.abs(self.E - self.E[0] + 4.0 / (power.p - 1.0) * self.D) / scale


@dataclass
class CylinderTrajectory:
    states: list[SelfSimState]
    trace: EnergyTrace


def _rk4_step(w, ws, ds, grid):
    k1w, k1z = cylinder_rhs(w, ws, grid)
    k2w, k2z = cylinder_rhs(w + 0.5 * ds * k1w, ws + 0.5 * ds * k1z, grid)
    k3w, k3z = cylinder_rhs(w + 0.5 * ds * k2w, ws + 0.5 * ds * k2z, grid)
    k4w, k4z = cylinder_rhs(w + ds * k3w, ws + ds * k3z, grid)
    w_new = w + ds / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w)
    ws_new = ws + ds / 6.0 * (k1z + 2.0 * k2z + 2.0 * k3z + k4z)
    return w_new, ws_new


def evolve_cylinder(
    state: SelfSimState,
    s_end: float,
    ds: float | None = None,
    record_ds: float = 0.1,
    norm_cap: float = 1e6,
) -> CylinderTrajectory:
    """RK4 integration of the cylinder equation from state.s to s_end.

    The dissipation integral is accumulated by the trapezoid rule at every
    integration step, so the ledger resolution follows ds, not the
    recording stride.  Raises DivergenceError when the energy norm leaves
    [0, norm_cap] or samples stop being finite.
    """
    grid = state.grid
    if ds is None:
        ds = default_ds(grid)
    if not 0.0 < ds:
        raise ValueError("ds must be positive")
    if s_end <= state.s:
        raise ValueError("s_end must exceed the initial s")
    require_finite(state.w, state.ws)

    n_steps = max(1, int(math.ceil((s_end - state.s) / ds - 1e-12)))
    ds = (s_end - state.s) / n_steps
    stride = max(1, int(round(record_ds / ds)))

    w, ws = state.w.copy(), state.ws.copy()
    s = state.s
    states = [SelfSimState(grid, s, w.copy(), ws.copy())]
    rec_s = [s]
    rec_E = [energy(states[0])]
    rec_D = [0.0]
    D = 0.0
    diss_prev = dissipation_density(ws, grid)
    edge_frac = _edge_cell_fraction(ws, grid)

    def diverge(message: str):
        # attach what was recorded so callers can report the escape history
        err = DivergenceError(message)
        err.partial = CylinderTrajectory(
            states, EnergyTrace(np.asarray(rec_s), np.asarray(rec_E), np.asarray(rec_D), edge_frac > 0.1)
        )
        raise err

    with np.errstate(all="ignore"):
        for k in range(n_steps):
            w, ws = _rk4_step(w, ws, ds, grid)
            s = state.s + (k + 1) * ds
            diss = dissipation_density(ws, grid)
            # a blow-up anywhere poisons the dissipation scalar within a step
            if not (math.isfinite(diss) and math.isfinite(float(w[0].real))):
                diverge(f"cylinder run lost finiteness at s = {s:.6g}")
            D += 0.5 * ds * (diss_prev + diss)
            diss_prev = diss
            if (k + 1) % stride == 0 or k == n_steps - 1:
                if not (np.all(np.isfinite(w)) and np.all(np.isfinite(ws))):
                    diverge(f"cylinder run lost finiteness at s = {s:.6g}")
                st = SelfSimState(grid, s, w.copy(), ws.copy())
                if st.norm() > norm_cap:
                    diverge(f"cylinder norm exceeded {norm_cap:g} at s = {s:.6g}")
                edge_frac = max(edge_frac, _edge_cell_fraction(ws, grid))
                states.append(st)
                rec_s.append(s)
                rec_E.append(energy(st))
                rec_D.append(D)

    trace = EnergyTrace(np.asarray(rec_s), np.asarray(rec_E), np.asarray(rec_D), edge_frac > 0.1)
    return CylinderTrajectory(states, trace)


def energy_trace_from_states(states: list[SelfSimState]) -> EnergyTrace:
    """Build the ledger from already-sampled states (trapezoid in s)."""
    if len(states) < 2:
        raise ValueError("need at least two states for a trace")
    grid = states[0].grid
    s = np.asarray([st.s for st in states])
    E = np.asarray([energy(st) for st in states])
    dens = np.asarray([dissipation_density(st.ws, grid) for st in states])
    D = np.concatenate([[0.0], np.cumsum(0.5 * np.diff(s) * (dens[1:] + dens[:-1]))])
    edge = max(_edge_cell_fraction(st.ws, grid) for st in states)
    return EnergyTrace(s, E, D, edge > 0.1)


def dissipation_residual(trace: EnergyTrace, power: PowerParam) -> float:
    """Relative defect of the dissipation identity over the whole trace."""
    if len(trace.s) < 2:
        raise ValueError("need at least two recorded states")
    return float(trace.residuals(power)[-1])


def to_selfsimilar(state: WaveState, x0: float, T0: float, grid: CylinderGrid) -> SelfSimState:
    """Sample a physical snapshot into the cylinder frame at vertex (x0, T0).

    u is sampled at x = x0 + y*(T0 - t) by 4-point Lagrange interpolation;
    the time derivative in the new frame combines the interpolated u_t and
    u_x through the chain rule
        w_s = tau^(alpha+1) (u_t - y u_x) - alpha w,   tau = T0 - t,
    with u_x taken by centered differences on the physical grid before
    interpolation.
    """
    power = grid.power
    tau = T0 - state.t
    if not tau > 0.0:
        raise DomainError(f"snapshot time {state.t} is not before T0 = {T0}")
    xs = x0 + grid.nodes * tau
    ux = periodic_derivative(state.u, state.grid.dx)
    u_c = cubic_interpolate(state.grid, state.u, xs)
    v_c = cubic_interpolate(state.grid, state.v, xs)
    ux_c = cubic_interpolate(state.grid, ux, xs)
    w = tau ** power.alpha * u_c
    ws = tau ** (power.alpha + 1.0) * (v_c - grid.nodes * ux_c) - power.alpha * w
    return SelfSimState(grid, -math.log(tau), w, ws)


def from_extended_solution(sol, grid_x: Grid1D, t: float) -> WaveState:
    """Physical snapshot of a closed-form rigid blow-up solution on a grid."""
    x = grid_x.nodes
    return WaveState(grid_x, t, sol.value(x, t), sol.dt_value(x, t))
