"""Fit cylinder snapshots against the stationary family and estimate the
exponential rate at which trajectories approach it.

For fixed slope d the optimal global phase is closed-form: the family is
real and positive, so theta = arg <w, profile(d)> in the weighted L2 inner
product minimizes the L2(rho) distance.  The slope search is an outer
golden-section pass over the phase-optimized energy-norm distance, seeded
by a coarse pre-scan that guards against multimodal transients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientDataError
from .numerics import CylinderGrid, energy_distance, node_derivative, quad_rho
from .selfsim import SelfSimState
from .stationary import profile_norm_h, profile_on_grid

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0  # 1/phi


@dataclass(frozen=True)
class ProfileFit:
    """Best (d, theta) family member for one snapshot.

    residual is the energy-norm distance (the fit metric, including the
    time-derivative component); residual_h1l2 reports the same gap in the
    plain, unweighted H1 x L2 norm on (-1, 1) alongside.
    """

    d: float
    theta: float
    residual: float
    s: float
    converged: bool
    residual_h1l2: float = float("nan")


@dataclass(frozen=True)
class RateFit:
    mu_hat: float
    c_hat: float
    window: tuple[float, float]
    r2: float
    n_used: int


def fit_phase(w: np.ndarray, d: float, grid: CylinderGrid) -> float:
    """Phase minimizing the L2(rho) distance of w to e^{i theta} profile(d).

    Returned in (-pi, pi]; a vanishing inner product leaves the phase
    undefined and raises.
    """
    inner = quad_rho(np.asarray(w, dtype=complex) * profile_on_grid(d, grid), grid)
    if inner == 0.0:
        raise ValueError("phase undefined: snapshot is orthogonal to the profile")
    theta = math.atan2(inner.imag, inner.real)
    if theta <= -math.pi:
        theta = math.pi
    return theta


def _distance_at(w, ws, d: float, grid: CylinderGrid) -> tuple[float, float]:
    try:
        theta = fit_phase(w, d, grid)
    except ValueError:
        theta = 0.0
    member = np.exp(1j * theta) * profile_on_grid(d, grid)
    dist = energy_distance((w, ws), (member, np.zeros(grid.m)), grid)
    return dist, theta


def fit_profile(
    snapshot: SelfSimState,
    d_max: float = 0.995,
    prescan: int = 64,
    d_tol: float = 1e-8,
    converged_factor: float = 0.5,
) -> ProfileFit:
    """Joint (d, theta) fit of a snapshot to the stationary family.

    Outer golden-section over d in [-d_max, d_max] of the phase-optimized
    energy-norm distance; a coarse pre-scan seeds the bracket.  Ties break
    to the left interval, which makes the search deterministic.  The fit
    never fails: a hopeless snapshot simply reports a large residual and
    converged=False.
    """
    w, ws, grid = snapshot.w, snapshot.ws, snapshot.grid

    ds = np.linspace(-d_max, d_max, prescan)
    dists = [_distance_at(w, ws, float(dd), grid)[0] for dd in ds]
    k = int(np.argmin(dists))
    a = float(ds[max(0, k - 1)])
    b = float(ds[min(prescan - 1, k + 1)])

    c = b - _GOLDEN * (b - a)
    e = a + _GOLDEN * (b - a)
    fc = _distance_at(w, ws, c, grid)[0]
    fe = _distance_at(w, ws, e, grid)[0]
    while b - a > d_tol:
        if fc <= fe:  # tie -> keep the left interval
            b, e, fe = e, c, fc
            c = b - _GOLDEN * (b - a)
            fc = _distance_at(w, ws, c, grid)[0]
        else:
            a, c, fc = c, e, fe
            e = a + _GOLDEN * (b - a)
            fe = _distance_at(w, ws, e, grid)[0]

    d_best = 0.5 * (a + b)
    residual, theta = _distance_at(w, ws, d_best, grid)
    converged = residual <= converged_factor * profile_norm_h(d_best, grid)
    gap = w - np.exp(1j * theta) * profile_on_grid(d_best, grid)
    flat = _plain_h1l2(gap, ws, grid)
    return ProfileFit(d_best, theta, residual, snapshot.s, converged, flat)


def _plain_h1l2(q1: np.ndarray, q2: np.ndarray, grid: CylinderGrid) -> float:
    """Unweighted H1 norm of q1 plus L2 norm of q2 on (-1, 1)."""
    dq1 = node_derivative(q1, grid.dy)
    h1 = math.sqrt(float(np.sum(np.abs(q1) ** 2 + np.abs(dq1) ** 2)) * grid.dy)
    l2 = math.sqrt(float(np.sum(np.abs(q2) ** 2)) * grid.dy)
    return h1 + l2


def estimate_rate(fits: list[ProfileFit], floor: float | None = None, min_fits: int = 5) -> RateFit:
    """Least-squares slope of log(residual) against s over a fit sequence.

    Residuals at or below the floor (default: 10 machine epsilons of the
    profile scale) are discarded as saturated; if everything saturates the
    rate is undefined.
    """
    if floor is None:
        floor = 10.0 * np.finfo(float).eps
    s = np.asarray([f.s for f in fits])
    r = np.asarray([f.residual for f in fits])
    keep = r > floor
    if int(np.count_nonzero(keep)) < min_fits:
        raise InsufficientDataError(
            f"only {int(np.count_nonzero(keep))} residuals above floor {floor:g}; rate undefined"
        )
    ss, logr = s[keep], np.log(r[keep])
    design = np.vstack([np.ones_like(ss), ss]).T
    coef, *_ = np.linalg.lstsq(design, logr, rcond=None)
    fitvals = design @ coef
    ss_res = float(np.sum((logr - fitvals) ** 2))
    ss_tot = float(np.sum((logr - np.mean(logr)) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else max(0.0, min(1.0, 1.0 - ss_res / ss_tot))
    return RateFit(-float(coef[1]), math.exp(float(coef[0])), (float(ss[0]), float(ss[-1])), r2, int(ss.size))


def fit_trajectory(states: list[SelfSimState], **kwargs) -> list[ProfileFit]:
    """fit_profile over a recorded trajectory (one fit per state)."""
    return [fit_profile(st, **kwargs) for st in states]
