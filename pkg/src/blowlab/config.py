"""Run configuration: a single JSON file, schema-validated, hashable.

The schema lives here as the source of truth; docs/config.schema.json is a
checked-in copy (a test keeps them in sync).  Only the output directory may
come from the environment (BLOWLAB_OUTPUT_DIR); everything else is the file
plus explicit --set overrides, which the drivers log into meta.json.
"""

from __future__ import annotations

import copy
import hashlib
import json
import os
from dataclasses import dataclass, field

import jsonschema
import numpy as np

from .numerics import CylinderGrid, Grid1D, PowerParam
from .physical import WaveState
from .selfsim import SelfSimState
from .stationary import ExtendedSolution, connecting_ds, connecting_solution, profile_on_grid, profile_scale

CONFIG_SCHEMA: dict = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "blowlab run configuration",
    "type": "object",
    "required": ["p"],
    "additionalProperties": False,
    "properties": {
        "p": {"type": "number", "exclusiveMinimum": 1},
        "seed": {"type": "integer", "minimum": 0, "default": 0},
        "grid": {
            "type": "object",
            "required": ["xmin", "xmax", "n"],
            "additionalProperties": False,
            "properties": {
                "xmin": {"type": "number"},
                "xmax": {"type": "number"},
                "n": {"type": "integer", "minimum": 8},
            },
        },
        "initial_data": {
            "type": "object",
            "required": ["type"],
            "properties": {
                "type": {"enum": ["constant", "gaussian", "profile", "file"]},
            },
        },
        "time": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "cfl": {"type": "number", "exclusiveMinimum": 0, "maximum": 0.9},
                "amp_factor": {"type": "number", "exclusiveMinimum": 0},
                "threshold": {"type": "number", "exclusiveMinimum": 0},
                "max_steps": {"type": "integer", "minimum": 1},
                "snapshot_stride": {"type": "integer", "minimum": 1},
            },
        },
        "scan": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "points": {"type": "array", "items": {"type": "number"}, "minItems": 1},
                "start": {"type": "number"},
                "stop": {"type": "number"},
                "count": {"type": "integer", "minimum": 2},
                "trace_floor": {"type": "number", "minimum": 0},
                "tau_min": {"type": "number", "minimum": 0},
                "interp_cap": {"type": "number", "exclusiveMinimum": 0},
                "cone_margin": {"type": "number", "minimum": 0},
            },
        },
        "selfsim": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "m": {"type": "integer", "minimum": 32},
                "ds": {"type": ["number", "null"], "exclusiveMinimum": 0},
                "s_end": {"type": "number"},
                "record_ds": {"type": "number", "exclusiveMinimum": 0},
                "initial": {
                    "type": "object",
                    "required": ["type"],
                    "properties": {
                        "type": {
                            "enum": [
                                "zero",
                                "profile",
                                "perturbed_profile",
                                "random_perturbed_profile",
                                "scaled_profile",
                                "connecting",
                            ]
                        },
                    },
                },
            },
        },
        "fit": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "d_max": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "prescan": {"type": "integer", "minimum": 8},
                "d_tol": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "liouville": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "s_end": {"type": "number"},
                "battery": {"type": "array", "items": {"type": "object", "required": ["type"]}},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "directory": {"type": "string"},
                "formats": {"type": "array", "items": {"enum": ["csv", "json", "svg"]}},
            },
        },
    },
}

_DEFAULTS = {
    "seed": 0,
    "time": {"cfl": 0.45, "amp_factor": 0.1, "threshold": 1e6, "max_steps": 200000, "snapshot_stride": 10},
    "scan": {"trace_floor": 100.0, "tau_min": 0.1, "interp_cap": 1e4, "cone_margin": 0.0},
    "selfsim": {"m": 256, "ds": None, "s_end": 6.0, "record_ds": 0.1},
    "fit": {"d_max": 0.995, "prescan": 64, "d_tol": 1e-8},
    "liouville": {"s_end": 6.0},
    "output": {"directory": "runs", "formats": ["csv", "json", "svg"]},
}


class ConfigError(ValueError):
    """Configuration file failed validation."""


def _merge_defaults(data: dict, defaults: dict) -> dict:
    out = copy.deepcopy(data)
    for key, val in defaults.items():
        if key not in out:
            out[key] = copy.deepcopy(val)
        elif isinstance(val, dict) and isinstance(out[key], dict):
            out[key] = _merge_defaults(out[key], val)
    return out


def validate_config(data: dict) -> None:
    try:
        jsonschema.validate(data, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        path = ".".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config field {path}: {exc.message}") from exc


def apply_overrides(data: dict, overrides: list[str]) -> dict:
    """Apply --set key.path=value pairs; values parse as JSON when possible."""
    out = copy.deepcopy(data)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = out
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override path {key!r} crosses a non-object field")
        node[parts[-1]] = value
    return out


def config_sha256(data: dict) -> str:
    canon = json.dumps(data, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


@dataclass
class RunConfig:
    """Validated configuration with defaults filled in."""

    data: dict
    overrides: list[str] = field(default_factory=list)

    def __post_init__(self):
        validate_config(self.data)
        self.data = _merge_defaults(self.data, _DEFAULTS)

    @property
    def sha256(self) -> str:
        return config_sha256(self.data)

    @property
    def power(self) -> PowerParam:
        return PowerParam(float(self.data["p"]))

    def section(self, name: str) -> dict:
        return self.data.get(name, {})

    def require(self, name: str) -> dict:
        if name not in self.data:
            raise ConfigError(f"config field {name}: section is required for this command")
        return self.data[name]

    def output_directory(self) -> str:
        env = os.environ.get("BLOWLAB_OUTPUT_DIR")
        return env if env else self.section("output").get("directory", "runs")

    def grid(self) -> Grid1D:
        g = self.require("grid")
        return Grid1D(float(g["xmin"]), float(g["xmax"]), int(g["n"]))

    def cylinder_grid(self) -> CylinderGrid:
        return CylinderGrid(int(self.section("selfsim")["m"]), self.power)

    def scan_points(self) -> np.ndarray:
        scan = self.require("scan")
        if "points" in scan:
            pts = np.asarray(scan["points"], dtype=float)
        elif {"start", "stop", "count"} <= scan.keys():
            pts = np.linspace(float(scan["start"]), float(scan["stop"]), int(scan["count"]))
        else:
            raise ConfigError("config field scan: needs either points or start/stop/count")
        if np.any(np.diff(pts) <= 0):
            raise ConfigError("config field scan.points: must be strictly increasing")
        return pts


def load_config(path: str, overrides: list[str] | None = None) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if overrides:
        data = apply_overrides(data, overrides)
    return RunConfig(data, list(overrides or []))


def build_initial_state(cfg: RunConfig) -> WaveState:
    """Physical initial data from the initial_data section."""
    grid = cfg.grid()
    power = cfg.power
    spec = cfg.require("initial_data")
    kind = spec["type"]
    x = grid.nodes
    if kind == "constant":
        amp = complex(spec.get("re", profile_scale(power)), spec.get("im", 0.0))
        vamp = complex(spec.get("v_re", amp.real), spec.get("v_im", amp.imag))
        # uniform phase plus an optional linear phase ramp across the domain
        phase = np.exp(1j * (float(spec.get("phase", 0.0)) + float(spec.get("phase_gradient", 0.0)) * x))
        u = phase * amp * np.ones(grid.n)
        v = phase * vamp * np.ones(grid.n)
    elif kind == "gaussian":
        amp = float(spec.get("amplitude", 1.0))
        center = float(spec.get("center", 0.0))
        width = float(spec.get("width", 0.5))
        base = complex(spec.get("base_re", 0.0), spec.get("base_im", 0.0))
        phase = np.exp(1j * float(spec.get("phase", 0.0)))
        u = phase * (base + amp * np.exp(-(((x - center) / width) ** 2)))
        v = phase * float(spec.get("v_amplitude", 0.0)) * np.exp(-(((x - center) / width) ** 2))
        v = v.astype(complex)
    elif kind == "profile":
        sol = ExtendedSolution(
            float(spec.get("theta0", 0.0)),
            float(spec.get("d0", 0.0)),
            float(spec.get("T0", 1.0)),
            float(spec.get("x_star", 0.0)),
            power,
        )
        t0 = float(spec.get("t", 0.0))
        u = sol.value(x, t0)
        v = sol.dt_value(x, t0)
        return WaveState(grid, t0, u, v)
    elif kind == "file":
        from .numerics import ComplexField

        with open(spec["path"], encoding="utf-8") as fh:
            payload = json.load(fh)
        u = ComplexField.from_json_dict(payload["u"]).values
        v = ComplexField.from_json_dict(payload["v"]).values
        if len(u) != grid.n:
            raise ConfigError("config field initial_data.path: snapshot size does not match grid.n")
        return WaveState(grid, float(payload.get("t", 0.0)), u, v)
    else:  # unreachable after schema validation
        raise ConfigError(f"unknown initial data type {kind!r}")
    return WaveState(grid, 0.0, u, v)


def build_selfsim_initial(cfg: RunConfig, grid: CylinderGrid | None = None) -> SelfSimState:
    """Cylinder initial data from the selfsim.initial section."""
    if grid is None:
        grid = cfg.cylinder_grid()
    spec = cfg.section("selfsim").get("initial", {"type": "profile"})
    return build_cylinder_state(spec, grid, int(cfg.data.get("seed", 0)))


def build_cylinder_state(spec: dict, grid: CylinderGrid, seed: int = 0) -> SelfSimState:
    """Cylinder state from one initial-data spec dict."""
    power = grid.power
    kind = spec["type"]
    m = grid.m
    d = float(spec.get("d", 0.0))
    theta = float(spec.get("theta", 0.0))
    phase = np.exp(1j * theta)
    if kind == "zero":
        w = np.zeros(m, dtype=complex)
        ws = np.zeros(m, dtype=complex)
    elif kind == "profile":
        w = phase * profile_on_grid(d, grid)
        ws = np.zeros(m, dtype=complex)
    elif kind == "perturbed_profile":
        eps = float(spec.get("eps", 0.1))
        w = phase * profile_on_grid(d, grid) * (1.0 + eps * grid.one_minus_y2)
        ws = np.zeros(m, dtype=complex)
    elif kind == "random_perturbed_profile":
        eps = float(spec.get("eps", 0.05))
        rng = np.random.default_rng(seed)
        # low-order smooth modes only, damped at the cylinder edges
        coeffs = rng.standard_normal(4)
        y = grid.nodes
        bump = sum(c * np.cos(k * np.pi * y) for k, c in enumerate(coeffs, start=1))
        w = profile_on_grid(d, grid) * (1.0 + eps * grid.one_minus_y2 * bump)
        w = phase * w
        ws = np.zeros(m, dtype=complex)
    elif kind == "scaled_profile":
        factor = float(spec.get("factor", 1.0))
        w = phase * factor * profile_on_grid(d, grid)
        ws = np.zeros(m, dtype=complex)
    elif kind == "connecting":
        sign = int(spec.get("sign", 1))
        s0 = float(spec.get("s0", 0.0))
        w = phase * connecting_solution(d, sign, grid.nodes, s0, power).astype(complex)
        ws = phase * connecting_ds(d, sign, grid.nodes, s0, power).astype(complex)
        return SelfSimState(grid, s0, w, ws)
    else:
        raise ConfigError(f"unknown selfsim initial type {kind!r}")
    return SelfSimState(grid, float(spec.get("s0", 0.0)), w, ws)
