"""Batch front door.

Subcommands: simulate, curve, selfsim, liouville, profile-eval, verify.
Exit codes: 0 ok, 1 verification failure, 2 config error, 3 domain/cone
error, 4 numerical divergence.  All commands take a JSON config file plus
optional --set key.path=value overrides, which are logged into meta.json.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import acceptance
from .config import ConfigError, RunConfig, build_cylinder_state, build_initial_state, load_config
from .curve import holder_exponent, scan_curve
from .errors import DivergenceError, DomainError, InsufficientDataError
from .fitting import estimate_rate, fit_trajectory
from .liouville import prepare_trapped_state, trapping_experiment
from .numerics import ComplexField, CylinderGrid
from .output import fmt, save_line_plot, save_loglog_scatter, write_csv, write_json
from .physical import evolve
from .selfsim import SelfSimState, evolve_cylinder
from .stationary import profile_on_grid


def _write_meta(outdir: str, cfg: RunConfig, command: str) -> None:
    grid = cfg.data.get("grid")
    time_cfg = cfg.section("time")
    write_json(
        os.path.join(outdir, "meta.json"),
        {
            "command": command,
            "p": cfg.data["p"],
            "grid": grid,
            "cfl": time_cfg.get("cfl"),
            "threshold": time_cfg.get("threshold"),
            "seed": cfg.data.get("seed", 0),
            "overrides": cfg.overrides,
        },
        cfg.sha256,
    )


def cmd_simulate(cfg: RunConfig, outdir: str) -> int:
    power = cfg.power
    state = build_initial_state(cfg)
    time_cfg = cfg.section("time")
    scan = cfg.section("scan")
    trace_points = list(scan["points"]) if "points" in scan else [0.5 * (state.grid.xmin + state.grid.xmax)]
    result = evolve(
        state,
        power,
        threshold=float(time_cfg["threshold"]),
        max_steps=int(time_cfg["max_steps"]),
        cfl=float(time_cfg["cfl"]),
        amp_factor=float(time_cfg["amp_factor"]),
        trace_points=trace_points,
        snapshot_stride=int(time_cfg["snapshot_stride"]),
    )
    _write_meta(outdir, cfg, "simulate")

    columns: dict[str, list] = {"t": list(result.traces[0].times)}
    for tr in result.traces:
        columns[f"mod_x{fmt(float(tr.x0))}"] = list(tr.moduli)
    write_csv(os.path.join(outdir, "traces.csv"), columns, cfg.sha256)

    snapdir = os.path.join(outdir, "snapshots")
    os.makedirs(snapdir, exist_ok=True)
    for i, snap in enumerate(result.snapshots):
        payload = {
            "t": snap.t,
            "u": ComplexField(snap.grid, snap.u).to_json_dict(),
            "v": ComplexField(snap.grid, snap.v).to_json_dict(),
        }
        write_json(os.path.join(snapdir, f"snap_{i:05d}.json"), payload, cfg.sha256)

    write_json(
        os.path.join(outdir, "event.json"),
        {
            "cause": result.outcome.cause,
            "blew_up": result.outcome.blew_up,
            "t_stop": result.outcome.t_stop,
            "peak_modulus": result.outcome.peak_modulus,
            "steps": result.steps,
        },
        cfg.sha256,
    )
    print(f"simulate: {result.steps} steps, stop cause {result.outcome.cause} at t={result.outcome.t_stop:.6g}")
    return 0


def cmd_curve(cfg: RunConfig, outdir: str) -> int:
    curve = scan_curve(cfg)
    _write_meta(outdir, cfg, "curve")
    pts = curve.points
    write_csv(
        os.path.join(outdir, "curve.csv"),
        {
            "x": [q.x for q in pts],
            "T": [q.T for q in pts],
            "d": [q.d for q in pts],
            "theta_raw": [q.theta for q in pts],
            "theta_unwrapped": [q.theta_unwrapped for q in pts],
            "residual": [q.residual for q in pts],
            "r2_T": [q.r2_T for q in pts],
            "converged": [q.converged for q in pts],
            "skip_reason": [q.skip_reason or "" for q in pts],
        },
        cfg.sha256,
    )

    x, T, d, _ = curve.arrays()
    valid = curve.valid_points()
    theta_u = np.asarray([q.theta_unwrapped for q in valid])
    residual_median = float(np.median([q.residual for q in valid]))
    slopes = np.full_like(x, math.nan)
    if len(x) >= 3:
        slopes[1:-1] = (T[2:] - T[:-2]) / (x[2:] - x[:-2])

    # per-x0 reports over the interior, summarized per field by the median
    reports, summaries = [], []
    for field_name, samples in (("T_prime", slopes), ("theta", theta_u)):
        keep = np.isfinite(samples)
        xs_field, fs_field = x[keep], samples[keep]
        exponents = []
        n_flat = 0
        for i0 in range(1, len(xs_field) - 1):
            entry = {"field": field_name, "x0": float(xs_field[i0])}
            try:
                est = holder_exponent(xs_field, fs_field, float(xs_field[i0]),
                                      noise_floor=10.0 * residual_median)
                entry.update(
                    flat=est.flat,
                    exponent=None if est.flat else est.exponent,
                    constant=None if est.flat else est.constant,
                    r2=None if est.flat else est.r2,
                    window=list(est.window),
                )
                if est.flat:
                    n_flat += 1
                else:
                    exponents.append(est.exponent)
            except (InsufficientDataError, ValueError) as exc:
                entry["error"] = str(exc)
            reports.append(entry)
        summaries.append(
            {
                "field": field_name,
                "median_exponent": float(np.median(exponents)) if exponents else None,
                "n_estimated": len(exponents),
                "n_flat": n_flat,
            }
        )
    write_json(os.path.join(outdir, "holder.json"), {"reports": reports, "summary": summaries}, cfg.sha256)
    i_mid = len(x) // 2

    formats = cfg.section("output").get("formats", ["csv", "json", "svg"])
    if "svg" in formats:
        save_line_plot(os.path.join(outdir, "T.svg"), x, {"T(x)": T}, "x", "blow-up time")
        save_line_plot(os.path.join(outdir, "d.svg"), x, {"d(x)": d}, "x", "slope")
        save_line_plot(os.path.join(outdir, "theta.svg"), x, {"theta(x)": theta_u}, "x", "phase")
        mid = float(x[i_mid])
        dist = np.abs(x - mid)
        diff = np.abs(theta_u - theta_u[i_mid])
        keep = dist > 0
        save_loglog_scatter(os.path.join(outdir, "holder_theta.svg"), dist[keep], np.maximum(diff[keep], 1e-300),
                            None, None, "|x - x0|", "|theta(x) - theta(x0)|")
    n_valid, n_total = len(valid), len(pts)
    print(f"curve: {n_valid}/{n_total} scan points valid; outputs in {outdir}")
    return 0


def cmd_selfsim(cfg: RunConfig, outdir: str) -> int:
    ss = cfg.section("selfsim")
    grid = cfg.cylinder_grid()
    if "initial" in ss:
        state = build_cylinder_state(ss["initial"], grid, int(cfg.data.get("seed", 0)))
        if ss["initial"].get("prepare"):
            state = prepare_trapped_state(
                state, float(ss["initial"].get("d", 0.0)), s_probe=float(ss["s_end"]) + 1.0, ds=4e-3
            )
    else:
        state = SelfSimState(grid, 0.0, profile_on_grid(0.0, grid).astype(complex), np.zeros(grid.m, complex))
    traj = evolve_cylinder(
        state,
        float(ss["s_end"]),
        ds=None if ss.get("ds") is None else float(ss["ds"]),
        record_ds=float(ss["record_ds"]),
    )
    _write_meta(outdir, cfg, "selfsim")
    trace = traj.trace
    residuals = trace.residuals(cfg.power)
    write_csv(
        os.path.join(outdir, "energy.csv"),
        {"s": trace.s, "E": trace.E, "D": trace.D, "residual": residuals},
        cfg.sha256,
        extra_header={"edge_flag": trace.edge_flag},
    )
    fits = fit_trajectory(traj.states)
    write_csv(
        os.path.join(outdir, "fits.csv"),
        {
            "s": [f.s for f in fits],
            "d": [f.d for f in fits],
            "theta": [f.theta for f in fits],
            "residual": [f.residual for f in fits],
            "converged": [f.converged for f in fits],
        },
        cfg.sha256,
    )
    try:
        rate = estimate_rate(fits)
        rate_payload = {"mu_hat": rate.mu_hat, "c_hat": rate.c_hat, "window": list(rate.window), "r2": rate.r2}
    except InsufficientDataError as exc:
        rate_payload = {"error": str(exc)}
    write_json(os.path.join(outdir, "rate.json"), rate_payload, cfg.sha256)

    if "svg" in cfg.section("output").get("formats", ["svg"]):
        save_line_plot(os.path.join(outdir, "energy.svg"), trace.s, {"E(s)": trace.E}, "s", "energy")
        save_line_plot(
            os.path.join(outdir, "fit_residual.svg"),
            [f.s for f in fits],
            {"residual": [max(f.residual, 1e-300) for f in fits]},
            "s",
            "fit residual",
            logy=True,
        )
    print(f"selfsim: evolved to s={trace.s[-1]:.3f}, E {trace.E[0]:.6g} -> {trace.E[-1]:.6g}")
    return 0


_DEFAULT_BATTERY = [
    {"type": "zero", "label": "zero"},
    {"type": "perturbed_profile", "d": 0.3, "eps": 0.05, "prepare": True, "label": "prepared_bump"},
    {"type": "perturbed_profile", "d": 0.3, "eps": 0.05, "prepare": True, "theta": 2.0, "label": "rotated_bump"},
    {"type": "scaled_profile", "factor": 0.1, "label": "small_profile"},
    {"type": "scaled_profile", "factor": 5.0, "label": "five_kappa"},
]


def cmd_liouville(cfg: RunConfig, outdir: str) -> int:
    grid = cfg.cylinder_grid()
    lio = cfg.section("liouville")
    s_end = float(lio.get("s_end", 6.0))
    battery = lio.get("battery", _DEFAULT_BATTERY)
    _write_meta(outdir, cfg, "liouville")
    rows = {"label": [], "verdict": [], "final_d": [], "final_theta": [], "final_residual": [], "final_norm": []}
    for i, entry in enumerate(battery):
        label = entry.get("label", f"entry_{i}")
        theta = float(entry.get("theta", 0.0))
        spec = {**entry, "theta": 0.0}
        state = build_cylinder_state(spec, grid, int(cfg.data.get("seed", 0)))
        if entry.get("prepare"):
            state = prepare_trapped_state(state, float(entry.get("d", 0.0)), s_probe=s_end + 1.0, ds=4e-3)
        if theta:
            phase = np.exp(1j * theta)
            state = SelfSimState(grid, state.s, phase * state.w, phase * state.ws)
        report = trapping_experiment(state, s_end, label=label)
        write_json(os.path.join(outdir, f"trapping_{label}.json"), report.to_json_dict(), cfg.sha256)
        rows["label"].append(label)
        rows["verdict"].append(report.verdict)
        rows["final_d"].append(math.nan if report.final_fit is None else report.final_fit.d)
        rows["final_theta"].append(math.nan if report.final_fit is None else report.final_fit.theta)
        rows["final_residual"].append(math.nan if report.final_fit is None else report.final_fit.residual)
        rows["final_norm"].append(report.final_norm)
        print(f"liouville: {label} -> {report.verdict}")
    write_csv(os.path.join(outdir, "battery.csv"), rows, cfg.sha256)
    return 0


def cmd_profile_eval(args) -> int:
    from .numerics import PowerParam

    power = PowerParam(args.p)
    grid = CylinderGrid(args.m, power)
    values = np.exp(1j * args.theta) * profile_on_grid(args.d, grid)
    write_csv(
        args.out,
        {"y": grid.nodes, "re": values.real, "im": values.imag},
        "profile-eval",
        extra_header={"p": args.p, "d": args.d, "theta": args.theta},
    )
    print(f"profile-eval: wrote {args.m} samples to {args.out}")
    return 0


def cmd_verify(quick: bool) -> int:
    results = acceptance.run_all(quick=quick)
    width = max(len(r.name) for r in results)
    print(f"{'id':4s} {'criterion':{width}s} {'status':7s} {'time':>7s}")
    for r in results:
        print(f"{r.cid:4s} {r.name:{width}s} {'PASS' if r.passed else 'FAIL':7s} {r.elapsed:6.1f}s")
        if not r.passed:
            print(f"     {r.details}")
    n_fail = sum(not r.passed for r in results)
    print(f"{len(results) - n_fail}/{len(results)} criteria passed" + (" (quick mode)" if quick else ""))
    return 0 if n_fail == 0 else 1


def _add_config_arg(sub):
    sub.add_argument("config", help="path to the JSON run configuration")
    sub.add_argument("--set", dest="overrides", action="append", default=[],
                     metavar="KEY=VALUE", help="override a config field (dotted path)")
    sub.add_argument("--output", default=None, help="override the output directory")


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="blowlab",
                                     description="numerical laboratory for 1D complex wave blow-up")
    subs = parser.add_subparsers(dest="command", required=True)
    for name in ("simulate", "curve", "selfsim", "liouville"):
        _add_config_arg(subs.add_parser(name))
    pe = subs.add_parser("profile-eval", help="dump stationary-profile samples as CSV")
    pe.add_argument("--p", type=float, default=3.0)
    pe.add_argument("--d", type=float, default=0.0)
    pe.add_argument("--theta", type=float, default=0.0)
    pe.add_argument("--m", type=int, default=256)
    pe.add_argument("--out", default="profile.csv")
    ver = subs.add_parser("verify", help="run the acceptance battery")
    ver.add_argument("--quick", action="store_true", help="reduced resolutions, looser documented tolerances")

    args = parser.parse_args(argv)
    try:
        if args.command == "verify":
            return cmd_verify(args.quick)
        if args.command == "profile-eval":
            return cmd_profile_eval(args)
        cfg = load_config(args.config, args.overrides)
        outdir = args.output or cfg.output_directory()
        os.makedirs(outdir, exist_ok=True)
        handler = {"simulate": cmd_simulate, "curve": cmd_curve,
                   "selfsim": cmd_selfsim, "liouville": cmd_liouville}[args.command]
        return handler(cfg, outdir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DomainError as exc:
        print(f"domain/cone error: {exc}", file=sys.stderr)
        return 3
    except DivergenceError as exc:
        print(f"numerical divergence: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
