"""Kohn-Sham inversion: density trajectory -> one-body potential, and the
re-propagation closure check of the density-potential mapping.

For two electrons in a single doubly occupied orbital the inversion is
direct: the continuity equation yields the radial velocity, its radial
integral is the orbital phase, and the time-dependent Schroedinger
equation is solved pointwise for V.  The inversion is ill-conditioned
where the density vanishes, so output is masked below an evaluation
floor rather than extrapolated.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInputError, InputShapeError, InsufficientDataError
from .grids import (DensityTrajectory, PotentialTrajectory, RadialGrid, TimeGrid,
                    cumulative_radial_moment, d_dt, integrate_radial)
from .rm import RadialWavefunction, propagate_radial_potential

__all__ = [
    "VelocityField",
    "KSOrbital",
    "RepropagationReport",
    "velocity_field",
    "build_orbital",
    "invert_potential",
    "fill_potential",
    "repropagate_check",
    "DENSITY_FLOOR_RATIO",
]

# inversion floor: relative to the global density maximum
DENSITY_FLOOR_RATIO = 1e-8


@dataclass
class VelocityField:
    """Radial velocity v(r, t) with j = n v; masked where n is negligible."""

    values: np.ndarray
    mask: np.ndarray
    grid: RadialGrid
    times: TimeGrid
    boundary_slices: tuple = ()


@dataclass
class KSOrbital:
    """Doubly occupied orbital phi = sqrt(n/2) exp(i alpha), alpha(0, t) = 0."""

    phi: np.ndarray
    alpha: np.ndarray
    mask: np.ndarray
    grid: RadialGrid
    times: TimeGrid
    boundary_slices: tuple = ()


@dataclass
class RepropagationReport:
    """Relative L2 density mismatch of the density -> V -> density roundtrip."""

    mismatch: np.ndarray  # per time slice
    times: TimeGrid

    @property
    def max_mismatch(self) -> float:
        return float(np.max(self.mismatch))


def _density_mask(n: DensityTrajectory, floor_ratio: float) -> np.ndarray:
    floor = floor_ratio * n.values.max()
    mask = n.values > floor
    if not mask.any(axis=1).all():
        raise DegenerateInputError("density below the evaluation floor everywhere "
                                   "on at least one time slice")
    return mask


def velocity_field(n: DensityTrajectory, floor_ratio: float = DENSITY_FLOOR_RATIO) -> VelocityField:
    """Solve the continuity equation for the radial velocity,

        v(r,t) = -(1/(r^2 n)) int_0^r dn/dt r'^2 dr'.

    v(0, t) = 0 by spherical symmetry (the integrand limit)."""
    dn = d_dt(n.values, n.times.dt, order=1)
    mask = _density_mask(n, floor_ratio)
    moment = cumulative_radial_moment(dn.values, n.grid)
    r2n = n.grid.r[None, :] ** 2 * n.values
    v = np.zeros_like(n.values)
    inner = mask.copy()
    inner[:, 0] = False
    v[inner] = -moment[inner] / r2n[inner]
    v[~mask] = 0.0
    return VelocityField(v, mask, n.grid, n.times, boundary_slices=dn.boundary_slices)


def build_orbital(n: DensityTrajectory, v: VelocityField) -> KSOrbital:
    """alpha(r,t) = int_0^r v dr' (m = 1 so d alpha/dr = v); phi = sqrt(n/2) e^{i alpha}."""
    h = n.grid.h
    incr = 0.5 * h * (v.values[:, 1:] + v.values[:, :-1])
    alpha = np.zeros_like(v.values)
    alpha[:, 1:] = np.cumsum(incr, axis=1)
    phi = np.sqrt(n.values / 2.0) * np.exp(1j * alpha)
    return KSOrbital(phi, alpha, v.mask, n.grid, n.times,
                     boundary_slices=v.boundary_slices)


def invert_potential(orbital: KSOrbital, times: TimeGrid | None = None) -> PotentialTrajectory:
    """Pointwise inversion V = Re[(i d_t phi + (1/2) lap phi) / phi] on the mask.

    The radial Laplacian is (1/r) d^2(r phi)/dr^2, evaluated with the same
    5-point stencil and origin fold the propagator uses, so static
    inversions re-propagate exactly.  Gauge: V(0, t) = 0.  Boundary time
    slices (one-sided d_t stencils) are flagged, not dropped.
    """
    times = times or orbital.times
    if times.n_times < 3:
        raise InsufficientDataError("potential inversion needs >= 3 time slices")
    grid = orbital.grid
    h = grid.h
    r = grid.r
    phi = orbital.phi
    dphi = d_dt(phi, times.dt, order=1)

    w = r[None, :] * phi
    lap = np.empty_like(phi)
    lap[:, 2:-2] = (-w[:, :-4] + 16.0 * w[:, 1:-3] - 30.0 * w[:, 2:-2]
                    + 16.0 * w[:, 3:-1] - w[:, 4:]) / (12.0 * h**2) / r[None, 2:-2]
    # node next to the origin: ghost w(-h) = -w(h) (w = r phi is odd), w(0) = 0
    lap[:, 1] = (-29.0 * w[:, 1] + 16.0 * w[:, 2] - w[:, 3]) / (12.0 * h**2) / r[1]
    lap[:, 0] = 6.0 * (phi[:, 1] - phi[:, 0]) / h**2
    # outer two nodes are always outside the mask; ghost beyond the wall is 0
    lap[:, -2] = (-w[:, -4] + 16.0 * w[:, -3] - 30.0 * w[:, -2]
                  + 16.0 * w[:, -1]) / (12.0 * h**2) / r[-2]
    lap[:, -1] = lap[:, -2]

    with np.errstate(divide="ignore", invalid="ignore"):
        V = np.real((1j * dphi.values + 0.5 * lap) / phi)
    V = V - V[:, :1]  # gauge: V(0, t) = 0
    V[~orbital.mask] = np.nan
    return PotentialTrajectory(V, grid, times, mask=orbital.mask,
                               boundary_slices=(0, times.n_times - 1))


def fill_potential(V: PotentialTrajectory) -> np.ndarray:
    """Continue the potential beyond the mask as C(t) r^2 matched at the
    outermost masked node.

    Exact for harmonic wells in the V(0) = 0 gauge; elsewhere it only has
    to keep the (negligible) orbital tail stable during re-propagation.
    """
    r = V.grid.r
    out = V.values.copy()
    for k in range(out.shape[0]):
        mk = V.mask[k]
        j_edge = np.max(np.nonzero(mk)[0])
        if j_edge == 0:
            out[k] = 0.0
            continue
        c = out[k, j_edge] / r[j_edge] ** 2
        out[k, j_edge + 1:] = c * r[j_edge + 1:] ** 2
        # interior masked holes (should not occur): linear fill
        bad = ~np.isfinite(out[k])
        if bad.any():
            out[k, bad] = np.interp(r[bad], r[~bad], out[k, ~bad])
    return out


def repropagate_check(V: PotentialTrajectory, n_target: DensityTrajectory,
                      substeps: int = 1) -> RepropagationReport:
    """Propagate sqrt(n(.,0)/2) under V (mass 1) and report the relative L2
    density mismatch ||2|phi|^2 - n|| / ||n|| per time slice.

    V is linearly interpolated in time (and optionally sub-stepped).
    Adding any constant c(t) to V changes only the orbital phase, so the
    report is gauge invariant.
    """
    grid = n_target.grid
    times = n_target.times
    r = grid.r
    Vfull = fill_potential(V)
    phi0 = np.sqrt(n_target.values[0] / 2.0)
    chi0 = np.sqrt(4.0 * np.pi) * r * phi0
    wf0 = RadialWavefunction(chi0, grid, mass=1.0)
    nrm = wf0.norm()
    wf0.chi /= np.sqrt(nrm)
    fine = TimeGrid(times.t_final, times.n_steps * substeps)
    traj = propagate_radial_potential(wf0, (Vfull, times.t), fine, stride=substeps)
    n_rec = 2.0 * traj.density_3d() * nrm  # undo the norm touch-up exactly
    w = grid.weights * r**2
    diff2 = ((n_rec - n_target.values) ** 2) @ w
    ref2 = (n_target.values**2) @ w
    return RepropagationReport(np.sqrt(diff2 / ref2), times)
