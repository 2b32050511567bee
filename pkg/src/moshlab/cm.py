"""Exact center-of-mass dynamics via the Ermakov width equation.

A ground-state Gaussian in a time-dependent harmonic well stays Gaussian;
its length scale a(t) obeys

    a'' + omega(t)^2 a = 1 / (M^2 a^3),   a(0) = 1/sqrt(M omega0),  a'(0) = 0,

and the phase derivative is defined by the width relation
phi_dot(t) = 1 / (M a(t)), the convention used by the scattering closed
form.  The phase itself (an antiderivative) is never needed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputShapeError, NumericError
from .grids import DensityTrajectory, RadialGrid, TimeGrid

__all__ = ["WidthTrajectory", "solve_ermakov", "cm_density", "segment_invariant"]

_WIDTH_FLOOR = 1e-10


@dataclass
class WidthTrajectory:
    """Gaussian width a(t) and its velocity on a TimeGrid."""

    a: np.ndarray
    adot: np.ndarray
    mass: float
    omega0: float
    times: TimeGrid

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=float)
        self.adot = np.asarray(self.adot, dtype=float)
        if self.a.shape != (self.times.n_times,) or self.adot.shape != self.a.shape:
            raise InputShapeError("width trajectory length does not match the time grid")

    @property
    def phi_dot(self) -> np.ndarray:
        """Phase derivative per the width relation a = 1/(M phi_dot)."""
        return 1.0 / (self.mass * self.a)

    def strided(self, stride: int) -> "WidthTrajectory":
        """Subsample onto times.strided(stride); endpoints are kept."""
        return WidthTrajectory(self.a[::stride], self.adot[::stride],
                               self.mass, self.omega0, self.times.strided(stride))


def _rk4_segment(y, t0, t1, n_sub, omega_fn, mass):
    """RK4 steps of the Ermakov system on [t0, t1] (no output storage)."""
    dt = (t1 - t0) / n_sub
    inv_m2 = 1.0 / mass**2

    def rhs(t, y):
        a, ad = y
        return np.array([ad, inv_m2 / a**3 - omega_fn(t) ** 2 * a])

    t = t0
    for _ in range(n_sub):
        k1 = rhs(t, y)
        k2 = rhs(t + 0.5 * dt, y + 0.5 * dt * k1)
        k3 = rhs(t + 0.5 * dt, y + 0.5 * dt * k2)
        k4 = rhs(t + dt, y + dt * k3)
        y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t += dt
    return y


def solve_ermakov(protocol, mass: float, times: TimeGrid) -> WidthTrajectory:
    """Integrate the width equation with RK4 at the grid step.

    Steps never straddle a protocol breakpoint: a step containing a switch
    is split there, with omega evaluated on the proper side of the jump.
    """
    omega0 = float(getattr(protocol, "omega_initial", None) or protocol.omega(0.0))
    a = np.empty(times.n_times)
    adot = np.empty(times.n_times)
    a[0] = 1.0 / np.sqrt(mass * omega0)
    adot[0] = 0.0
    dt = times.dt
    breaks = sorted(b for b in protocol.breakpoints if 0.0 < b < times.t_final)

    def omega_fn(t):
        return float(protocol.omega(t))

    break_set = set(breaks)
    y = np.array([a[0], adot[0]])
    for k in range(times.n_steps):
        t0, t1 = k * dt, (k + 1) * dt
        inner = [b for b in breaks if t0 < b < t1]
        pieces = [t0] + inner + [t1]
        for lo, hi in zip(pieces[:-1], pieces[1:]):
            if hi <= lo:
                continue
            if hi in break_set:
                # protocols are right-continuous at a switch; the segment
                # ending at the switch must see the pre-switch frequency
                cap = hi - 1e-12 * (hi - lo)
                y = _rk4_segment(y, lo, hi, 1, lambda t, c=cap: omega_fn(min(t, c)), mass)
            else:
                y = _rk4_segment(y, lo, hi, 1, omega_fn, mass)
        if y[0] < _WIDTH_FLOOR:
            raise NumericError(
                f"width collapsed to {y[0]:.3e} at t = {t1:.6g}; this should be "
                "impossible for a valid protocol and indicates a bug",
                diagnostics={"t": t1, "a": float(y[0])},
            )
        a[k + 1], adot[k + 1] = y
    return WidthTrajectory(a, adot, mass, omega0, times)


def segment_invariant(width: WidthTrajectory, protocol) -> np.ndarray:
    """Conserved quantity of the rescaled width rho = sqrt(M) a on each
    constant-omega segment: E = (rho'^2 + omega^2 rho^2 + 1/rho^2) / 2.

    Constant within segments of piecewise-constant protocols (the standard
    Ermakov-Lewis construction for a static auxiliary frequency)."""
    rho = np.sqrt(width.mass) * width.a
    rhod = np.sqrt(width.mass) * width.adot
    w = protocol.omega(width.times.t)
    return 0.5 * (rhod**2 + w**2 * rho**2 + 1.0 / rho**2)


def cm_density(width: WidthTrajectory, grid: RadialGrid) -> DensityTrajectory:
    """Single-particle Gaussian density exp(-c^2/a^2) / (a^3 pi^(3/2))."""
    a = width.a[:, None]
    c = grid.r[None, :]
    values = np.exp(-(c**2) / a**2) / (a**3 * np.pi**1.5)
    return DensityTrajectory(values, grid, width.times, particle_number=1.0)
