"""Grids, complex fields, weighted quadrature and energy-space norms.

Everything downstream works on two discretizations:

* a uniform periodic grid in physical space x, holding complex samples of
  u(x, t), and
* a "cylinder" grid of m half-offset interior nodes of (-1, 1) in the
  similarity variable y, carrying the weight rho(y) = (1-y^2)^(2/(p-1)).

The half-offset node placement keeps every node strictly inside (-1, 1),
so rho and 1/(1-y^2) are always finite and no boundary condition is ever
needed at the degenerate endpoints.  Midpoint quadrature on those nodes is
second order and exactly symmetric under y -> -y.

Complex samples are stored as numpy complex128 arrays (a pair of float64
per entry); serialization always splits them into re/im arrays.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError


def _as_complex(values) -> np.ndarray:
    out = np.asarray(values, dtype=np.complex128)
    if out.ndim != 1:
        raise ValueError("field samples must be one-dimensional")
    return out


@dataclass(frozen=True)
class PowerParam:
    """Nonlinearity exponent p > 1 and the derived constants used everywhere.

    alpha      = 2/(p-1)        blow-up rate / similarity scaling power
    lin_coeff  = 2(p+1)/(p-1)^2 linear coefficient of the cylinder equation
    damp_coeff = (p+3)/(p-1)    damping coefficient of the cylinder equation
    """

    p: float
    alpha: float = field(init=False)
    lin_coeff: float = field(init=False)
    damp_coeff: float = field(init=False)

    def __post_init__(self):
        p = float(self.p)
        if not (np.isfinite(p) and p > 1.0):
            raise ValueError(f"nonlinearity exponent must be finite and > 1, got {self.p}")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "alpha", 2.0 / (p - 1.0))
        object.__setattr__(self, "lin_coeff", 2.0 * (p + 1.0) / (p - 1.0) ** 2)
        object.__setattr__(self, "damp_coeff", (p + 3.0) / (p - 1.0))

    def nonlinearity(self, u: np.ndarray) -> np.ndarray:
        """|u|^(p-1) u, with the continuous extension 0 at u = 0."""
        mod2 = (u.real * u.real + u.imag * u.imag)
        if self.p == 3.0:
            return mod2 * u
        return mod2 ** ((self.p - 1.0) / 2.0) * u


@dataclass(frozen=True)
class Grid1D:
    """Uniform periodic grid on [xmin, xmax): n cells, node i at xmin + i*dx."""

    xmin: float
    xmax: float
    n: int
    dx: float = field(init=False)
    nodes: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n < 8:
            raise ValueError(f"grid needs at least 8 nodes, got {self.n}")
        if not self.xmax > self.xmin:
            raise ValueError("grid needs xmax > xmin")
        object.__setattr__(self, "dx", (self.xmax - self.xmin) / self.n)
        nodes = self.xmin + self.dx * np.arange(self.n)
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    def nearest_index(self, x: float) -> int:
        i = int(round((x - self.xmin) / self.dx))
        return i % self.n


@dataclass(frozen=True)
class CylinderGrid:
    """m half-offset interior nodes of (-1, 1) with the weight rho.

    Nodes y_j = (2j + 1 - m)/m sit at cell midpoints of an m-cell split of
    [-1, 1]; the set is exactly symmetric about 0 and never touches the
    endpoints.  Cell edges (used by the conservative flux form of the
    degenerate operator) include y = -1 and y = 1 exactly, where the flux
    weight rho*(1-y^2) vanishes identically.
    """

    m: int
    power: PowerParam
    dy: float = field(init=False)
    nodes: np.ndarray = field(init=False, repr=False, compare=False)
    edges: np.ndarray = field(init=False, repr=False, compare=False)
    rho: np.ndarray = field(init=False, repr=False, compare=False)
    one_minus_y2: np.ndarray = field(init=False, repr=False, compare=False)
    flux_weight: np.ndarray = field(init=False, repr=False, compare=False)
    diss_weight: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.m < 8:
            raise ValueError(f"cylinder grid needs at least 8 nodes, got {self.m}")
        m, alpha = self.m, self.power.alpha
        nodes = (2.0 * np.arange(m) + 1.0 - m) / m
        edges = (2.0 * np.arange(m + 1) - m) / m
        one_minus_y2 = 1.0 - nodes * nodes
        arrays = {
            "dy": 2.0 / m,
            "nodes": nodes,
            "edges": edges,
            "one_minus_y2": one_minus_y2,
            "rho": one_minus_y2 ** alpha,
            # rho*(1-y^2) at cell edges: exactly zero at y = -1 and y = 1
            "flux_weight": (1.0 - edges * edges) ** (alpha + 1.0),
            # rho/(1-y^2) at nodes: the dissipation-identity weight
            "diss_weight": one_minus_y2 ** (alpha - 1.0),
        }
        for name, value in arrays.items():
            if isinstance(value, np.ndarray):
                value.setflags(write=False)
            object.__setattr__(self, name, value)


@dataclass(frozen=True)
class ComplexField:
    """Complex samples attached to a grid (physical or cylinder)."""

    grid: Grid1D | CylinderGrid
    values: np.ndarray

    def __post_init__(self):
        vals = _as_complex(self.values)
        n = self.grid.n if isinstance(self.grid, Grid1D) else self.grid.m
        if vals.shape[0] != n:
            raise ValueError(f"field has {vals.shape[0]} samples for a {n}-node grid")
        if not np.all(np.isfinite(vals)):
            raise ValueError("field samples must be finite")
        object.__setattr__(self, "values", vals)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))

    def to_json_dict(self) -> dict:
        if isinstance(self.grid, Grid1D):
            gd = {"kind": "uniform", "xmin": self.grid.xmin, "xmax": self.grid.xmax, "n": self.grid.n}
        else:
            gd = {"kind": "cylinder", "m": self.grid.m, "p": self.grid.power.p}
        return {"grid": gd, "re": self.values.real.tolist(), "im": self.values.imag.tolist()}

    @staticmethod
    def from_json_dict(data: dict) -> "ComplexField":
        gd = data["grid"]
        if gd.get("kind", "uniform") == "cylinder":
            grid: Grid1D | CylinderGrid = CylinderGrid(int(gd["m"]), PowerParam(float(gd["p"])))
        else:
            grid = Grid1D(float(gd["xmin"]), float(gd["xmax"]), int(gd["n"]))
        values = np.asarray(data["re"], dtype=float) + 1j * np.asarray(data["im"], dtype=float)
        return ComplexField(grid, values)

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())

    def coordinates(self) -> np.ndarray:
        return self.grid.nodes


def require_finite(*arrays: np.ndarray) -> None:
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise ValueError("non-finite samples in input field")


def quad_rho(values, grid: CylinderGrid):
    """Midpoint quadrature of integral f * rho dy over (-1, 1).

    Linear and conjugation-equivariant; returns a complex number for complex
    input and a float for real input.
    """
    vals = np.asarray(values)
    if vals.shape != (grid.m,):
        raise ValueError(f"integrand has shape {vals.shape}, expected ({grid.m},)")
    require_finite(vals)
    total = np.sum(vals * grid.rho) * grid.dy
    return complex(total) if np.iscomplexobj(vals) else float(total)


def node_derivative(values: np.ndarray, h: float) -> np.ndarray:
    """Second-order d/dy at the nodes: centered inside, one-sided at the ends."""
    f = np.asarray(values)
    out = np.empty_like(f)
    out[1:-1] = (f[2:] - f[:-2]) / (2.0 * h)
    out[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h)
    out[-1] = (3.0 * f[-1] - 4.0 * f[-2] + f[-3]) / (2.0 * h)
    return out


def periodic_derivative(values: np.ndarray, h: float) -> np.ndarray:
    """Second-order centered d/dx with periodic wrap-around."""
    f = np.asarray(values)
    return (np.roll(f, -1) - np.roll(f, 1)) / (2.0 * h)


def norm_h0_sq(r: np.ndarray, grid: CylinderGrid) -> float:
    rv = _as_complex(r)
    require_finite(rv)
    dr = node_derivative(rv, grid.dy)
    integrand = np.abs(rv) ** 2 + np.abs(dr) ** 2 * grid.one_minus_y2
    return float(np.sum(integrand * grid.rho) * grid.dy)


def norm_h0(r: np.ndarray, grid: CylinderGrid) -> float:
    """Weighted H1-type norm of a single cylinder field:
    sqrt( integral (|r'|^2 (1-y^2) + |r|^2) rho dy )."""
    return float(np.sqrt(norm_h0_sq(r, grid)))


def energy_norm_sq(q1: np.ndarray, q2: np.ndarray, grid: CylinderGrid) -> float:
    q2v = _as_complex(q2)
    require_finite(q2v)
    return norm_h0_sq(q1, grid) + float(np.sum(np.abs(q2v) ** 2 * grid.rho) * grid.dy)


def energy_norm(q1: np.ndarray, q2: np.ndarray, grid: CylinderGrid) -> float:
    """Norm of a (field, time-derivative) pair in the weighted energy space:
    sqrt( integral (|q1|^2 + |q1'|^2 (1-y^2) + |q2|^2) rho dy )."""
    return float(np.sqrt(energy_norm_sq(q1, q2, grid)))


def energy_distance(pair_a, pair_b, grid: CylinderGrid) -> float:
    """Energy-norm distance between two (field, derivative) pairs."""
    a1, a2 = pair_a
    b1, b2 = pair_b
    return energy_norm(_as_complex(a1) - _as_complex(b1), _as_complex(a2) - _as_complex(b2), grid)


def cubic_interpolate(grid: Grid1D, values: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """4-point Lagrange interpolation of node samples at query points xs.

    The stencil never wraps around the periodic seam; queries that would
    need it raise DomainError.
    """
    f = np.asarray(values)
    x = np.asarray(xs, dtype=float)
    pos = (x - grid.xmin) / grid.dx
    base = np.floor(pos).astype(int)
    if np.any(base - 1 < 0) or np.any(base + 2 > grid.n - 1):
        raise DomainError("interpolation stencil leaves the physical domain")
    t = pos - base
    wm1 = -t * (t - 1.0) * (t - 2.0) / 6.0
    w0 = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0
    w1 = -(t + 1.0) * t * (t - 2.0) / 2.0
    w2 = (t + 1.0) * t * (t - 1.0) / 6.0
    return wm1 * f[base - 1] + w0 * f[base] + w1 * f[base + 1] + w2 * f[base + 2]
