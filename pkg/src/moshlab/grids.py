"""Uniform grids, quadrature, finite-difference stencils and trajectory containers.

All quantities are in atomic units (hbar = m_e = 1).  Radial grids always
include the r = 0 node; integrands carrying an r^2 volume factor vanish
there, which keeps the coordinate singularity out of every quadrature.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_simpson

from .errors import InputShapeError, InsufficientDataError

__all__ = [
    "RadialGrid",
    "LineGrid",
    "TimeGrid",
    "DensityTrajectory",
    "PotentialTrajectory",
    "TimeDerivative",
    "integrate_radial",
    "cumulative_radial_moment",
    "d_dt",
    "radial_laplacian",
    "radial_divergence",
    "first_derivative",
    "write_trajectory_csv",
    "read_trajectory_csv",
]


@dataclass(frozen=True)
class RadialGrid:
    """Uniform radial grid r_j = j*h on [0, r_max], r = 0 included."""

    r_max: float
    n_points: int

    def __post_init__(self):
        if self.n_points < 16:
            raise ValueError(f"n_points must be >= 16, got {self.n_points}")
        if self.r_max <= 0:
            raise ValueError(f"r_max must be positive, got {self.r_max}")

    @property
    def h(self) -> float:
        return self.r_max / (self.n_points - 1)

    @property
    def r(self) -> np.ndarray:
        return np.linspace(0.0, self.r_max, self.n_points)

    @property
    def quadrature_rule(self) -> str:
        # composite Simpson needs an odd number of nodes
        return "simpson" if self.n_points % 2 == 1 else "trapezoid"

    @property
    def weights(self) -> np.ndarray:
        """Quadrature weights for integrals over [0, r_max] in dr."""
        h = self.h
        if self.quadrature_rule == "simpson":
            w = np.full(self.n_points, 2.0)
            w[1::2] = 4.0
            w[0] = w[-1] = 1.0
            return w * (h / 3.0)
        w = np.full(self.n_points, h)
        w[0] = w[-1] = h / 2.0
        return w

    @property
    def line_weights(self) -> np.ndarray:
        """Trapezoid weights; used for wavefunction norms (exactly conserved
        by Crank-Nicolson when the endpoints vanish)."""
        w = np.full(self.n_points, self.h)
        w[0] = w[-1] = self.h / 2.0
        return w


@dataclass(frozen=True)
class LineGrid:
    """Symmetric Cartesian grid on [-x_max, x_max] for 1D runs."""

    x_max: float
    n_points: int

    def __post_init__(self):
        if self.n_points < 16:
            raise ValueError(f"n_points must be >= 16, got {self.n_points}")
        if self.x_max <= 0:
            raise ValueError(f"x_max must be positive, got {self.x_max}")

    @property
    def h(self) -> float:
        return 2.0 * self.x_max / (self.n_points - 1)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(-self.x_max, self.x_max, self.n_points)

    @property
    def line_weights(self) -> np.ndarray:
        w = np.full(self.n_points, self.h)
        w[0] = w[-1] = self.h / 2.0
        return w


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time grid t_k = k*dt on [0, t_final]; k = 0 anchors the
    initial (ground) state."""

    t_final: float
    n_steps: int

    def __post_init__(self):
        if self.n_steps < 1:
            raise ValueError(f"n_steps must be >= 1, got {self.n_steps}")
        if self.t_final <= 0:
            raise ValueError(f"t_final must be positive, got {self.t_final}")

    @property
    def dt(self) -> float:
        return self.t_final / self.n_steps

    @property
    def n_times(self) -> int:
        return self.n_steps + 1

    @property
    def t(self) -> np.ndarray:
        return np.linspace(0.0, self.t_final, self.n_steps + 1)

    def strided(self, stride: int) -> "TimeGrid":
        """Time grid of every stride-th snapshot. n_steps must divide evenly."""
        if self.n_steps % stride != 0:
            raise ValueError(f"stride {stride} does not divide n_steps {self.n_steps}")
        return TimeGrid(self.t_final, self.n_steps // stride)


@dataclass
class DensityTrajectory:
    """Nonnegative density samples n[k][j] at (t_k, r_j).

    particle_number is 2 for the pair density of the model atom and 1 for
    single-particle densities (e.g. the CM density).
    """

    values: np.ndarray
    grid: RadialGrid
    times: TimeGrid
    particle_number: float = 2.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        expected = (self.times.n_times, self.grid.n_points)
        if self.values.shape != expected:
            raise InputShapeError(
                f"density shape {self.values.shape} != (n_times, n_points) {expected}"
            )

    def norms(self) -> np.ndarray:
        """Particle number 4*pi*int r^2 n dr at each time slice."""
        w = self.grid.weights * self.grid.r**2
        return 4.0 * np.pi * (self.values @ w)

    def validate(self, tol: float = 1e-6, positivity_floor: float = -1e-12) -> dict:
        norms = self.norms()
        return {
            "max_norm_error": float(np.max(np.abs(norms - self.particle_number))),
            "min_value": float(self.values.min()),
            "normalized": bool(np.all(np.abs(norms - self.particle_number) < tol)),
            "positive": bool(self.values.min() >= positivity_floor),
        }


@dataclass
class PotentialTrajectory:
    """One-body potential samples V[k][j], gauge-pinned so V[k][0] = 0.

    mask marks nodes where the companion density exceeds the evaluation
    floor; values outside the mask are NaN.  boundary_slices lists time
    indices computed with one-sided stencils.
    """

    values: np.ndarray
    grid: RadialGrid
    times: TimeGrid
    mask: np.ndarray | None = None
    boundary_slices: tuple = ()

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        expected = (self.times.n_times, self.grid.n_points)
        if self.values.shape != expected:
            raise InputShapeError(
                f"potential shape {self.values.shape} != (n_times, n_points) {expected}"
            )
        if self.mask is None:
            self.mask = np.isfinite(self.values)


@dataclass
class TimeDerivative:
    """Result of a finite-difference time derivative: values plus the time
    slices where one-sided stencils were used."""

    values: np.ndarray
    boundary_slices: tuple = (0, -1)


def integrate_radial(samples, grid: RadialGrid) -> float:
    """4*pi * int_0^rmax f(r) r^2 dr with the grid's composite weights."""
    samples = np.asarray(samples, dtype=float)
    if samples.shape[-1] != grid.n_points:
        raise InputShapeError(
            f"samples length {samples.shape[-1]} != grid n_points {grid.n_points}"
        )
    w = grid.weights * grid.r**2
    return float(4.0 * np.pi * samples @ w) if samples.ndim == 1 else 4.0 * np.pi * samples @ w


def cumulative_radial_moment(samples: np.ndarray, grid: RadialGrid) -> np.ndarray:
    """Cumulative integral of f(r') r'^2 from 0 to each node (no 4*pi).

    Cumulative Simpson rather than trapezoid: the integrand vanishes like
    r^2, so low-order errors near the origin become O(1) relative once the
    result is divided by r^2 downstream.  The first interval is integrated
    exactly for quadratic f for the same reason.
    """
    h = grid.h
    s = np.asarray(samples, dtype=float)
    f = s * grid.r**2
    out = np.zeros_like(f)
    out[..., 1:] = cumulative_simpson(f, dx=h, axis=-1)
    a = (-3.0 * s[..., 0] + 4.0 * s[..., 1] - s[..., 2]) / (2.0 * h)
    b = (s[..., 0] - 2.0 * s[..., 1] + s[..., 2]) / (2.0 * h**2)
    first = s[..., 0] * h**3 / 3.0 + a * h**4 / 4.0 + b * h**5 / 5.0
    out[..., 1:] += (first - out[..., 1])[..., None]
    return out


def d_dt(values: np.ndarray, dt: float, order: int = 1) -> TimeDerivative:
    """Finite-difference time derivative along axis 0.

    Central second-order stencils at interior slices; one-sided stencils at
    the two boundary slices, flagged in the result.
    """
    values = np.asarray(values)
    nt = values.shape[0]
    if nt < 3:
        raise InsufficientDataError(f"need >= 3 time slices, got {nt}")
    if order not in (1, 2):
        raise ValueError(f"order must be 1 or 2, got {order}")
    out = np.empty_like(values, dtype=np.result_type(values, float))
    if order == 1:
        out[1:-1] = (values[2:] - values[:-2]) / (2.0 * dt)
        out[0] = (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * dt)
        out[-1] = (3.0 * values[-1] - 4.0 * values[-2] + values[-3]) / (2.0 * dt)
    else:
        out[1:-1] = (values[2:] - 2.0 * values[1:-1] + values[:-2]) / dt**2
        if nt >= 4:
            out[0] = (2.0 * values[0] - 5.0 * values[1] + 4.0 * values[2] - values[3]) / dt**2
            out[-1] = (2.0 * values[-1] - 5.0 * values[-2] + 4.0 * values[-3] - values[-4]) / dt**2
        else:
            # only one interior stencil available; reuse it at the ends
            out[0] = out[1]
            out[-1] = out[1]
    return TimeDerivative(out, boundary_slices=(0, nt - 1))


def first_derivative(f: np.ndarray, h: float, axis: int = -1) -> np.ndarray:
    """Fourth-order first derivative with one-sided stencils at the ends."""
    f = np.moveaxis(np.asarray(f), axis, -1)
    out = np.empty_like(f, dtype=np.result_type(f, float))
    out[..., 2:-2] = (f[..., :-4] - 8.0 * f[..., 1:-3]
                      + 8.0 * f[..., 3:-1] - f[..., 4:]) / (12.0 * h)
    out[..., 0] = (-25.0 * f[..., 0] + 48.0 * f[..., 1] - 36.0 * f[..., 2]
                   + 16.0 * f[..., 3] - 3.0 * f[..., 4]) / (12.0 * h)
    out[..., 1] = (-3.0 * f[..., 0] - 10.0 * f[..., 1] + 18.0 * f[..., 2]
                   - 6.0 * f[..., 3] + f[..., 4]) / (12.0 * h)
    out[..., -2] = (3.0 * f[..., -1] + 10.0 * f[..., -2] - 18.0 * f[..., -3]
                    + 6.0 * f[..., -4] - f[..., -5]) / (12.0 * h)
    out[..., -1] = (25.0 * f[..., -1] - 48.0 * f[..., -2] + 36.0 * f[..., -3]
                    - 16.0 * f[..., -4] + 3.0 * f[..., -5]) / (12.0 * h)
    return np.moveaxis(out, -1, axis)


def radial_laplacian(f: np.ndarray, grid: RadialGrid) -> np.ndarray:
    """Radial part of the 3D Laplacian, f'' + 2 f'/r, for a smooth even
    scalar field f(r); fourth-order 5-point stencils throughout.

    Evenness supplies ghost nodes f(-r) = f(r) near the origin, where the
    r = 0 value is the limit 3 f''(0).  Works on the last axis so whole
    trajectories can be passed at once.
    """
    f = np.asarray(f)
    h = grid.h
    r = grid.r
    out = np.empty_like(f, dtype=np.result_type(f, float))
    d2 = (-f[..., :-4] + 16.0 * f[..., 1:-3] - 30.0 * f[..., 2:-2]
          + 16.0 * f[..., 3:-1] - f[..., 4:]) / (12.0 * h**2)
    d1 = (f[..., :-4] - 8.0 * f[..., 1:-3] + 8.0 * f[..., 3:-1] - f[..., 4:]) / (12.0 * h)
    out[..., 2:-2] = d2 + 2.0 * d1 / r[2:-2]
    # fit f = f0 + a r^2 + b r^4 through nodes 0..2: Laplacian(0) = 6a
    out[..., 0] = (16.0 * (f[..., 1] - f[..., 0]) - (f[..., 2] - f[..., 0])) / (2.0 * h**2)
    d2_1 = (16.0 * f[..., 0] - 31.0 * f[..., 1] + 16.0 * f[..., 2] - f[..., 3]) / (12.0 * h**2)
    d1_1 = (f[..., 1] - 8.0 * f[..., 0] + 8.0 * f[..., 2] - f[..., 3]) / (12.0 * h)
    out[..., 1] = d2_1 + 2.0 * d1_1 / r[1]
    # one-sided at the outer edge (typically outside any physical mask)
    d2_m1 = (45.0 * f[..., -1] - 154.0 * f[..., -2] + 214.0 * f[..., -3]
             - 156.0 * f[..., -4] + 61.0 * f[..., -5] - 10.0 * f[..., -6]) / (12.0 * h**2)
    d1_m1 = (25.0 * f[..., -1] - 48.0 * f[..., -2] + 36.0 * f[..., -3]
             - 16.0 * f[..., -4] + 3.0 * f[..., -5]) / (12.0 * h)
    out[..., -1] = d2_m1 + 2.0 * d1_m1 / r[-1]
    d2_m2 = (10.0 * f[..., -1] - 15.0 * f[..., -2] - 4.0 * f[..., -3]
             + 14.0 * f[..., -4] - 6.0 * f[..., -5] + f[..., -6]) / (12.0 * h**2)
    d1_m2 = (3.0 * f[..., -1] + 10.0 * f[..., -2] - 18.0 * f[..., -3]
             + 6.0 * f[..., -4] - f[..., -5]) / (12.0 * h)
    out[..., -2] = d2_m2 + 2.0 * d1_m2 / r[-2]
    return out


def radial_divergence(F: np.ndarray, grid: RadialGrid) -> np.ndarray:
    """Divergence (1/r^2) d(r^2 F)/dr of a radial vector field F(r) r_hat;
    fourth-order 5-point stencils throughout.

    F must vanish at r = 0 (odd component, ghost nodes F(-r) = -F(r));
    the origin limit is 3 F'(0).
    """
    F = np.asarray(F)
    h = grid.h
    r = grid.r
    out = np.empty_like(F, dtype=np.result_type(F, float))
    dF = (F[..., :-4] - 8.0 * F[..., 1:-3] + 8.0 * F[..., 3:-1] - F[..., 4:]) / (12.0 * h)
    out[..., 2:-2] = dF + 2.0 * F[..., 2:-2] / r[2:-2]
    # fit F = c r + d r^3 through nodes 1..2: divergence(0) = 3c
    out[..., 0] = (8.0 * F[..., 1] - F[..., 2]) / (2.0 * h)
    dF_1 = (-F[..., 1] - 8.0 * F[..., 0] + 8.0 * F[..., 2] - F[..., 3]) / (12.0 * h)
    out[..., 1] = dF_1 + 2.0 * F[..., 1] / r[1]
    out[..., -2] = (3.0 * F[..., -1] + 10.0 * F[..., -2] - 18.0 * F[..., -3]
                    + 6.0 * F[..., -4] - F[..., -5]) / (12.0 * h) + 2.0 * F[..., -2] / r[-2]
    out[..., -1] = (25.0 * F[..., -1] - 48.0 * F[..., -2] + 36.0 * F[..., -3]
                    - 16.0 * F[..., -4] + 3.0 * F[..., -5]) / (12.0 * h) + 2.0 * F[..., -1] / r[-1]
    return out


# ---------------------------------------------------------------------------
# serialization: CSV payload with a JSON sidecar carrying grid metadata
# ---------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return format(x, ".17g")


def write_trajectory_csv(path, values, grid, times, value_label: str = "value",
                         extra_metadata: dict | None = None) -> None:
    """Write a (t, r, value) CSV with 17 significant digits plus a JSON
    sidecar (path + '.json') holding the grid metadata.  Round-trips
    bit-exactly through read_trajectory_csv."""
    values = np.asarray(values)
    t = times.t
    r = grid.r
    with open(path, "w") as fh:
        fh.write(f"t,r,{value_label}\n")
        for k in range(values.shape[0]):
            tk = _fmt(t[k])
            for j in range(values.shape[1]):
                fh.write(f"{tk},{_fmt(r[j])},{_fmt(values[k, j])}\n")
    meta = {
        "grid": {"r_max": grid.r_max, "n_points": grid.n_points,
                 "quadrature_rule": grid.quadrature_rule},
        "times": {"t_final": times.t_final, "n_steps": times.n_steps},
        "value_label": value_label,
    }
    if extra_metadata:
        meta.update(extra_metadata)
    with open(str(path) + ".json", "w") as fh:
        json.dump(meta, fh, indent=2)


def read_trajectory_csv(path):
    """Read a trajectory written by write_trajectory_csv.

    Returns (values, grid, times, metadata)."""
    with open(str(path) + ".json") as fh:
        meta = json.load(fh)
    grid = RadialGrid(meta["grid"]["r_max"], meta["grid"]["n_points"])
    times = TimeGrid(meta["times"]["t_final"], meta["times"]["n_steps"])
    data = np.loadtxt(path, delimiter=",", skiprows=1, usecols=2)
    values = data.reshape(times.n_times, grid.n_points)
    return values, grid, times, meta
