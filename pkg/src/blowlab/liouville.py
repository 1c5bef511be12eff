"""Desk-scale probes of the rigidity of bounded cylinder solutions.

Bounded trajectories of the cylinder equation are expected to end at 0 or
at a member of the stationary family; everything else escapes in finite s
along the singular connecting branch.  The stationary family sits on a
codimension-one stable set: its linearization carries one growing mode
(exponent +1, direction profile/(1+d y), the tangent of the connecting
solutions), so generic profile perturbations drift off and blow up in the
cylinder.  The battery therefore prepares its "trapped" entries by
projecting that discrete growing mode out of the perturbation, using the
left eigenvector of the dense linearization; what remains converges back
to the family until the quadratic remainder regenerates the mode, which
for the battery's sizes happens well after the observation window.

The vanishing probe looks at the complementary alternative in physical
variables: a run that never blows up should carry a windowed L^(p+1) mass
that stays bounded and trends down once dispersion sets in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DivergenceError
from .fitting import ProfileFit, fit_profile, fit_trajectory
from .numerics import CylinderGrid
from .physical import EvolveResult
from .selfsim import SelfSimState, cylinder_rhs, evolve_cylinder, negative_energy_monitor
from .stationary import profile_norm_h, profile_on_grid


def linearization_matrix(d: float, grid: CylinderGrid) -> np.ndarray:
    """Dense real-sector linearization of the cylinder flow around profile(d).

    Acts on stacked (h, k) with h a real field perturbation and k its
    s-derivative:  dh/ds = k,  dk/ds = Lh - lin_coeff*h + p*profile^(p-1)*h
    - damp_coeff*k - 2 y k'.
    """
    m = grid.m
    power = grid.power
    k_prof = profile_on_grid(d, grid)
    gain = power.p * k_prof ** (power.p - 1.0)
    A = np.zeros((2 * m, 2 * m))
    zeros = np.zeros(m, dtype=complex)
    for j in range(m):
        h = np.zeros(m, dtype=complex)
        h[j] = 1.0
        _, dws = cylinder_rhs(h, zeros, grid)
        # swap the frozen nonlinearity |h|^(p-1) h for its linearization at the profile
        A[m:, j] = dws.real - power.nonlinearity(h).real + gain * h.real
        z = np.zeros(m, dtype=complex)
        z[j] = 1.0
        _, dws_z = cylinder_rhs(zeros, z, grid)
        A[m:, m + j] = dws_z.real
        A[j, m + j] = 1.0
    return A


@dataclass(frozen=True)
class UnstableMode:
    eigenvalue: float
    right: np.ndarray  # (2m,)
    left: np.ndarray   # (2m,)


def unstable_mode(d: float, grid: CylinderGrid) -> UnstableMode:
    """Growing mode of the linearization around profile(d) (eigenvalue near +1)."""
    A = linearization_matrix(d, grid)
    evals, evecs = np.linalg.eig(A)
    i = int(np.argmax(evals.real))
    lam = evals[i]
    if abs(lam.imag) > 1e-8 or lam.real < 0.5:
        raise RuntimeError(f"expected a real growing eigenvalue near 1, found {lam}")
    right = np.real(evecs[:, i])
    evals_l, evecs_l = np.linalg.eig(A.T)
    j = int(np.argmin(np.abs(evals_l - lam)))
    left = np.real(evecs_l[:, j])
    return UnstableMode(float(lam.real), right, left)


def project_out_unstable(state: SelfSimState, d: float, mode: UnstableMode | None = None) -> SelfSimState:
    """Remove the growing-mode component of (state - (profile(d), 0)).

    Only meaningful for real-valued perturbations of the real profile;
    rotate afterwards for phase-covariant experiments.
    """
    grid = state.grid
    if mode is None:
        mode = unstable_mode(d, grid)
    k_prof = profile_on_grid(d, grid)
    z = np.concatenate([state.w.real - k_prof, state.ws.real])
    if np.max(np.abs(state.w.imag)) > 0 or np.max(np.abs(state.ws.imag)) > 0:
        raise ValueError("projection expects a real-valued perturbation; apply phases afterwards")
    coeff = float(mode.left @ z) / float(mode.left @ mode.right)
    z = z - coeff * mode.right
    m = grid.m
    return SelfSimState(grid, state.s, (k_prof + z[:m]).astype(complex), z[m:].astype(complex))


def prepare_trapped_state(
    state: SelfSimState,
    d: float,
    s_probe: float,
    residual_target: float | None = None,
    max_trials: int = 40,
    ds: float | None = None,
) -> SelfSimState:
    """Shoot the initial data onto the stable set of the profile family.

    The linear projection leaves a quadratic remainder along the growing
    mode, so a bisection on the mode coefficient refines it: trials that
    diverge still carry a positive coefficient (more subtraction needed),
    trials that sink toward zero overshoot.  Returns data whose trajectory
    stays near the family through s_probe with fit residual below the
    target (default: a third of the 1e-3 family-classification margin).
    """
    grid = state.grid
    mode = unstable_mode(d, grid)
    base = project_out_unstable(state, d, mode)
    if residual_target is None:
        residual_target = profile_norm_h(d, grid) * 1e-3 / 3.0

    m = grid.m
    k_prof = profile_on_grid(d, grid)
    direction = mode.right / np.sqrt(np.sum(mode.right**2))
    if float(direction[:m] @ k_prof) < 0.0:
        direction = -direction  # orient toward growing amplitude
    z_base = np.concatenate([base.w.real - k_prof, base.ws.real])

    def build(alpha: float) -> SelfSimState:
        z = z_base - alpha * direction
        return SelfSimState(grid, state.s, (k_prof + z[:m]).astype(complex), z[m:].astype(complex))

    def outcome(alpha: float) -> tuple[str, SelfSimState]:
        st = build(alpha)
        try:
            traj = evolve_cylinder(st, state.s + s_probe, ds=ds, record_ds=s_probe)
        except DivergenceError:
            return "up", st
        final = traj.states[-1]
        fit = fit_profile(final)
        if fit.residual < residual_target:
            return "ok", st
        above = final.norm() > profile_norm_h(fit.d, grid)
        return ("up" if above else "down"), st

    verdict, st = outcome(0.0)
    if verdict == "ok":
        return st
    # expand a bracket around 0 in the direction that flips the outcome
    step = 1e-4 * max(1.0, float(np.sqrt(np.sum(z_base**2))))
    lo, hi = (0.0, None) if verdict == "up" else (None, 0.0)
    alpha = step if verdict == "up" else -step
    trials = 1
    while (lo is None or hi is None) and trials < max_trials:
        verdict, st = outcome(alpha)
        trials += 1
        if verdict == "ok":
            return st
        if verdict == "up":
            lo = alpha if lo is None else max(lo, alpha)
        else:
            hi = alpha if hi is None else min(hi, alpha)
        alpha = alpha * 2.0 if (lo is None or hi is None) else alpha
    if lo is None or hi is None:
        raise RuntimeError("could not bracket the stable set of the profile family")
    while trials < max_trials:
        mid = 0.5 * (lo + hi)
        verdict, st = outcome(mid)
        trials += 1
        if verdict == "ok":
            return st
        if verdict == "up":
            lo = mid
        else:
            hi = mid
    raise RuntimeError(
        f"stable-set shooting did not reach residual {residual_target:g} in {max_trials} trials"
    )


@dataclass
class TrappingReport:
    label: str
    verdict: str  # decayed_to_family | decayed_to_zero | escaped | undecided
    residual_series: list[tuple[float, float]]
    final_fit: ProfileFit | None
    final_norm: float
    am_flags: list[tuple[float, bool]]
    s_end: float

    def to_json_dict(self) -> dict:
        return {
            "label": self.label,
            "verdict": self.verdict,
            "residuals": [{"s": s, "residual": r} for s, r in self.residual_series],
            "final_fit": None
            if self.final_fit is None
            else {"d": self.final_fit.d, "theta": self.final_fit.theta, "residual": self.final_fit.residual},
            "final_norm": self.final_norm,
            "negative_energy_flags": [{"s": s, "flag": f} for s, f in self.am_flags],
            "s_end": self.s_end,
        }


def trapping_experiment(
    initial: SelfSimState,
    s_end: float,
    label: str = "",
    ds: float | None = None,
    record_ds: float = 0.25,
    family_tol: float = 1e-3,
    zero_tol: float = 1e-3,
    escape_cap: float = 1e6,
) -> TrappingReport:
    """Evolve, fit the family along the way, and classify the endpoint.

    decayed_to_family: final fit residual < family_tol * |profile| in the
    energy norm; decayed_to_zero: final energy norm < zero_tol; escaped:
    the run left the boundedness envelope (norm cap or lost finiteness).
    A bounded endpoint matching neither tolerance reports 'undecided'.
    """
    am_flags = [(initial.s, negative_energy_monitor(initial))]
    try:
        traj = evolve_cylinder(initial, s_end, ds=ds, record_ds=record_ds, norm_cap=escape_cap)
    except DivergenceError as exc:
        series: list[tuple[float, float]] = []
        partial = getattr(exc, "partial", None)
        if partial is not None and len(partial.states) > 1:
            am_flags += [(st.s, negative_energy_monitor(st)) for st in partial.states[1:]]
            series = [(f.s, f.residual) for f in fit_trajectory(partial.states)]
        return TrappingReport(label, "escaped", series, None, math.inf, am_flags, s_end)
    am_flags += [(st.s, negative_energy_monitor(st)) for st in traj.states[1:]]
    fits = fit_trajectory(traj.states)
    series = [(f.s, f.residual) for f in fits]
    final = traj.states[-1]
    final_fit = fits[-1]
    final_norm = final.norm()
    if final_norm < zero_tol:
        verdict = "decayed_to_zero"
    elif final_fit.residual < family_tol * profile_norm_h(final_fit.d, final.grid):
        verdict = "decayed_to_family"
    else:
        verdict = "undecided"
    return TrappingReport(label, verdict, series, final_fit, final_norm, am_flags, s_end)


@dataclass
class VanishingReport:
    applicable: bool
    times: list[float]
    masses: list[float]
    window_width: float

    @property
    def max_mass(self) -> float:
        return max(self.masses) if self.masses else 0.0

    def nonincreasing_after(self, t_start: float, slack: float = 1.05) -> bool:
        """Monotone-trend statistic: masses never grow (beyond slack) past t_start."""
        pairs = [(t, m) for t, m in zip(self.times, self.masses) if t >= t_start]
        return all(b <= a * slack + 1e-300 for (_, a), (_, b) in zip(pairs, pairs[1:]))


def vanishing_check(
    result: EvolveResult, times: list[float], power, window_width: float = 1.0
) -> VanishingReport:
    """Windowed L^(p+1) mass of a global run at the requested times.

    Only applicable to runs that finished without blow-up; for those, a
    dispersing solution shows bounded, eventually non-increasing mass,
    consistent with the vanishing alternative.
    """
    if result.outcome.blew_up:
        return VanishingReport(False, [], [], window_width)
    snaps = result.snapshots if result.snapshots else [result.final]
    grid = snaps[0].grid
    keep = np.abs(grid.nodes) <= window_width / 2.0
    masses, used_times = [], []
    for t_req in times:
        snap = min(snaps, key=lambda s: abs(s.t - t_req))
        mod = np.abs(snap.u[keep])
        masses.append(float(np.sum(mod ** (power.p + 1.0)) * grid.dx))
        used_times.append(snap.t)
    return VanishingReport(True, used_times, masses, window_width)
