"""Blow-up curve reconstruction and regularity diagnostics.

The scan driver evolves the physical equation once, then per scan point:
extrapolates the blow-up time T(x) from that point's own modulus trace
(no cross-x smoothing, so curve regularity is measured, not manufactured),
transforms a late snapshot into the similarity frame at vertex (x, T(x)),
and fits the stationary family to read off the slope d(x) and phase
theta(x).  Downstream checks compare T'(x) with d(x), test the
non-characteristic cone inequality and the slope bound, and estimate
Hölder exponents of T' and theta by log-log regression.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import RunConfig, build_initial_state
from .errors import ConeError, DomainError, InsufficientDataError
from .fitting import fit_profile
from .numerics import CylinderGrid
from .physical import evolve, estimate_blowup_time
from .selfsim import to_selfsimilar


@dataclass
class CurvePoint:
    x: float
    T: float = math.nan
    d: float = math.nan
    theta: float = math.nan
    theta_unwrapped: float = math.nan
    residual: float = math.nan
    r2_T: float = math.nan
    converged: bool = False
    skip_reason: str | None = None

    @property
    def valid(self) -> bool:
        return self.skip_reason is None


@dataclass
class BlowupCurve:
    points: list[CurvePoint]
    p: float
    grid_meta: dict

    def valid_points(self) -> list[CurvePoint]:
        return [pt for pt in self.points if pt.valid]

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(x, T, d, theta) over valid points."""
        pts = self.valid_points()
        return (
            np.asarray([q.x for q in pts]),
            np.asarray([q.T for q in pts]),
            np.asarray([q.d for q in pts]),
            np.asarray([q.theta for q in pts]),
        )

    def lipschitz_ratio(self) -> float:
        """max |dT| / |dx| over consecutive valid points (1-Lipschitz check)."""
        x, T, _, _ = self.arrays()
        if len(x) < 2:
            raise InsufficientDataError("need at least two valid points")
        return float(np.max(np.abs(np.diff(T)) / np.diff(x)))


def phase_unwrap(thetas, ambiguity_tol: float = 1e-3) -> tuple[np.ndarray, list[int]]:
    """Continuous representative of a mod-2pi phase sequence.

    Each successive raw gap is shifted by the multiple of 2pi that
    minimizes its size; the first element is kept.  Gaps that land within
    ambiguity_tol of pi admit two equally short shifts and are flagged
    (index of the right-hand element), not silently guessed.
    """
    th = np.asarray(thetas, dtype=float)
    out = th.copy()
    ambiguous: list[int] = []
    offset = 0.0
    for i in range(1, len(th)):
        gap = th[i] - th[i - 1]
        wrapped = gap - 2.0 * math.pi * round(gap / (2.0 * math.pi))
        if abs(abs(wrapped) - math.pi) < ambiguity_tol:
            ambiguous.append(i)
        offset += wrapped - gap
        out[i] = th[i] + offset
    return out, ambiguous


def scan_curve(cfg: RunConfig) -> BlowupCurve:
    """Evolve once and reconstruct (x, T, d, theta) over the scan points.

    Points whose trace or cone fails a guard are reported with a skip
    marker rather than dropped, so the output always has one row per
    requested point.
    """
    power = cfg.power
    grid = cfg.grid()
    time_cfg = cfg.section("time")
    scan_cfg = cfg.require("scan")
    xs = cfg.scan_points()
    state0 = build_initial_state(cfg)

    result = evolve(
        state0,
        power,
        threshold=float(time_cfg["threshold"]),
        max_steps=int(time_cfg["max_steps"]),
        cfl=float(time_cfg["cfl"]),
        amp_factor=float(time_cfg["amp_factor"]),
        trace_points=[float(x) for x in xs],
        snapshot_stride=int(time_cfg["snapshot_stride"]),
    )

    cyl = CylinderGrid(int(cfg.section("selfsim")["m"]), power)
    fit_cfg = cfg.section("fit")
    floor = float(scan_cfg["trace_floor"])
    tau_min = float(scan_cfg["tau_min"])
    cap = float(scan_cfg["interp_cap"])
    margin = float(scan_cfg["cone_margin"]) + 3.0 * grid.dx

    points: list[CurvePoint] = []
    for trace in result.traces:
        x0 = grid.nodes[trace.node]  # snapped scan location
        pt = CurvePoint(x=float(x0))
        points.append(pt)
        try:
            tfit = estimate_blowup_time(trace, power, floor=floor, cap=float(time_cfg["threshold"]))
        except InsufficientDataError:
            pt.skip_reason = "trace_too_short"
            continue
        T_hat = tfit.T_hat
        if (x0 - T_hat < grid.xmin + margin) or (x0 + T_hat > grid.xmax - margin):
            pt.skip_reason = "cone_exits_domain"
            continue
        snap = _select_snapshot(result.snapshots, grid, x0, T_hat, tau_min, cap)
        if snap is None:
            pt.skip_reason = "no_admissible_snapshot"
            continue
        try:
            cyl_state = to_selfsimilar(snap, float(x0), T_hat, cyl)
        except DomainError:
            pt.skip_reason = "transform_failed"
            continue
        fit = fit_profile(
            cyl_state,
            d_max=float(fit_cfg["d_max"]),
            prescan=int(fit_cfg["prescan"]),
            d_tol=float(fit_cfg["d_tol"]),
        )
        pt.T, pt.d, pt.theta = T_hat, fit.d, fit.theta
        pt.residual, pt.r2_T, pt.converged = fit.residual, tfit.r2, fit.converged

    valid = [pt for pt in points if pt.valid]
    if valid:
        unwrapped, _ = phase_unwrap([pt.theta for pt in valid])
        for pt, th in zip(valid, unwrapped):
            pt.theta_unwrapped = float(th)
    if not valid:
        raise ConeError("every scan point failed its trace or cone guard")

    meta = {"xmin": grid.xmin, "xmax": grid.xmax, "n": grid.n, "m": cyl.m}
    return BlowupCurve(points, power.p, meta)


def _select_snapshot(snapshots, grid, x0: float, T_hat: float, tau_min: float, cap: float):
    """Latest snapshot with t <= T_hat - tau_min whose sampling cone is
    resolved: the modulus on [x0 - tau, x0 + tau] stays below cap."""
    best = None
    for snap in snapshots:
        tau = T_hat - snap.t
        if tau < max(tau_min, 4.0 * grid.dx):
            continue
        lo = np.searchsorted(grid.nodes, x0 - tau)
        hi = np.searchsorted(grid.nodes, x0 + tau)
        if lo >= hi:
            continue
        local_max = float(np.max(np.abs(snap.u[lo:hi])))
        if local_max <= cap:
            best = snap
    return best


def check_derivative(curve: BlowupCurve) -> tuple[np.ndarray, np.ndarray]:
    """Per-point gap |T'_num(x) - d(x)| at interior valid points.

    T' by centered differences through the neighbors (exact for affine T
    even on a nonuniform scan).
    """
    x, T, d, _ = curve.arrays()
    if len(x) < 3:
        raise InsufficientDataError("need at least three valid points for T'")
    slopes = (T[2:] - T[:-2]) / (x[2:] - x[:-2])
    return x[1:-1], np.abs(slopes - d[1:-1])


def noncharacteristic_test(curve: BlowupCurve, x0: float, delta: float, window: float | None = None) -> bool:
    """Discrete cone condition at x0: T(x) >= T(x0) - delta |x - x0| over the scan."""
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    x, T, _, _ = curve.arrays()
    i0 = int(np.argmin(np.abs(x - x0)))
    keep = np.abs(x - x[i0]) <= (window if window is not None else np.inf)
    return bool(np.all(T[keep] >= T[i0] - delta * np.abs(x[keep] - x[i0])))


@dataclass(frozen=True)
class SlopeBoundReport:
    ok: bool
    worst_ratio: float
    bound: float        # (1 + |d(x0)|)/2
    bound_loose: float  # 1 + |d(x0)|


def slope_bound_check(curve: BlowupCurve, x0: float, eta: float) -> SlopeBoundReport:
    """Check |T(x) - T(y)| <= (1 + |d(x0)|)/2 * |x - y| on the eta-window.

    The looser constant 1 + |d(x0)| is reported alongside for reference.
    """
    x, T, d, _ = curve.arrays()
    i0 = int(np.argmin(np.abs(x - x0)))
    keep = np.abs(x - x[i0]) <= eta
    xw, Tw = x[keep], T[keep]
    if len(xw) < 2:
        raise InsufficientDataError("slope-bound window contains fewer than two points")
    dx = xw[:, None] - xw[None, :]
    dT = Tw[:, None] - Tw[None, :]
    mask = np.abs(dx) > 0
    worst = float(np.max(np.abs(dT[mask]) / np.abs(dx[mask])))
    bound = (1.0 + abs(float(d[i0]))) / 2.0
    return SlopeBoundReport(worst <= bound, worst, bound, 1.0 + abs(float(d[i0])))


@dataclass(frozen=True)
class HolderEstimate:
    exponent: float
    constant: float
    window: tuple[float, float]
    r2: float
    n_pairs: int
    flat: bool = False

    @staticmethod
    def flat_report(window: tuple[float, float]) -> "HolderEstimate":
        """All increments below the noise floor: consistent with any exponent."""
        return HolderEstimate(math.nan, math.nan, window, math.nan, 0, flat=True)


def holder_exponent(
    xs,
    fs,
    x0: float,
    noise_floor: float | None = None,
    min_pairs: int = 6,
    window: tuple[float, float] | None = None,
) -> HolderEstimate:
    """log-log regression of |f(x) - f(x0)| against |x - x0|.

    Pairs below the noise floor are excluded; when every pair sits below
    it the field is flat at this resolution and no exponent is claimed.
    """
    x = np.asarray(xs, dtype=float)
    f = np.asarray(fs, dtype=float)
    if x.shape != f.shape or x.ndim != 1:
        raise ValueError("samples must be matching one-dimensional arrays")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(f))):
        raise ValueError("non-finite field samples")
    i0 = int(np.argmin(np.abs(x - x0)))
    dist = np.abs(x - x[i0])
    diff = np.abs(f - f[i0])
    sel = np.arange(len(x)) != i0
    if np.any(dist[sel] == 0.0):
        raise ValueError("duplicate sample locations give zero distances")
    if window is not None:
        sel &= (dist >= window[0]) & (dist <= window[1])
    if noise_floor is None:
        noise_floor = 10.0 * np.finfo(float).eps * max(1.0, float(np.max(np.abs(f))))
    span = (float(np.min(dist[sel])), float(np.max(dist[sel]))) if np.any(sel) else (0.0, 0.0)
    above = sel & (diff > noise_floor)
    n_above = int(np.count_nonzero(above))
    if n_above == 0:
        return HolderEstimate.flat_report(span)
    if n_above < min_pairs:
        raise InsufficientDataError(f"only {n_above} pairs above the noise floor (need {min_pairs})")
    lx = np.log(dist[above])
    ly = np.log(diff[above])
    design = np.vstack([np.ones_like(lx), lx]).T
    coef, *_ = np.linalg.lstsq(design, ly, rcond=None)
    fitvals = design @ coef
    ss_res = float(np.sum((ly - fitvals) ** 2))
    ss_tot = float(np.sum((ly - np.mean(ly)) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else max(0.0, min(1.0, 1.0 - ss_res / ss_tot))
    exponent = float(coef[1])
    if not 0.0 < exponent <= 1.5:
        raise ValueError(f"estimated exponent {exponent:.4g} outside the admissible range (0, 1.5]")
    return HolderEstimate(exponent, math.exp(float(coef[0])), (float(np.min(dist[above])), float(np.max(dist[above]))), r2, n_above)
