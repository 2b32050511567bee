"""Pointwise identity checks: continuity, the differential virial theorem
(non-interacting and Moshinsky-interacting forms), and the harmonic
potential theorem.

Every check returns a residual field with norm summaries; thresholds live
in the acceptance suite, never here.  The kinetic-energy-density tensor
uses the symmetrized quarter-sum convention: for the one-body reduced
density matrix rho(r', r''),

    t_ab = (1/4) (d'_a d''_b + d'_b d''_a) rho |_(r'=r''),

which for a single doubly occupied orbital reduces to
t_ab = Re[(d_a phi)(d_b phi)*], and the vector field is z_a = 2 d_b t_ab.
The convention is pinned empirically by the static-limit check.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import roots_legendre

from .cm import WidthTrajectory
from .errors import UnsupportedScopeError
from .grids import (DensityTrajectory, LineGrid, PotentialTrajectory, RadialGrid,
                    TimeGrid, d_dt, first_derivative, radial_divergence,
                    radial_laplacian)
from .inversion import KSOrbital, VelocityField, fill_potential
from .rm import WavefunctionTrajectory, ground_state_1d, propagate_cartesian_1d

__all__ = [
    "ResidualField",
    "KineticVectorField",
    "HPTReport",
    "continuity_residual",
    "kinetic_vector_field",
    "interacting_kinetic_vector_field",
    "dvt_residual_ks",
    "interaction_force_term",
    "dvt_residual_interacting",
    "hpt_check",
]


@dataclass
class ResidualField:
    """LHS - RHS of a pointwise identity, with norm summaries over the mask."""

    values: np.ndarray
    mask: np.ndarray
    grid: RadialGrid
    times: TimeGrid
    boundary_slices: tuple = ()

    def l2(self) -> np.ndarray:
        """Quadrature-weighted L2 norm sqrt(4 pi int res^2 r^2 dr) per slice."""
        w = self.grid.weights * self.grid.r**2
        res2 = np.where(self.mask, self.values, 0.0) ** 2
        return np.sqrt(4.0 * np.pi * res2 @ w)

    def linf(self) -> np.ndarray:
        res = np.where(self.mask, np.abs(self.values), 0.0)
        return res.max(axis=1)

    def interior_slices(self) -> np.ndarray:
        """Boolean index of slices free of one-sided-stencil contamination."""
        keep = np.ones(self.times.n_times, dtype=bool)
        for k in self.boundary_slices:
            keep[k] = False
        keep[0] = keep[-1] = False
        return keep


@dataclass
class KineticVectorField:
    """Radial component of z(r, t); spherical symmetry kills the rest."""

    values: np.ndarray
    mask: np.ndarray
    grid: RadialGrid
    times: TimeGrid
    variant: str = "noninteracting"


def _erode_mask(mask: np.ndarray, margin: int, origin: int = 0) -> np.ndarray:
    out = mask.copy()
    for _ in range(margin):
        out[:, :-1] &= out[:, 1:]
        out[:, 1:] &= out[:, :-1]
    if origin:
        out[:, :origin] = False  # composed origin stencils drop below 2nd order
    return out


def continuity_residual(n: DensityTrajectory, v: VelocityField) -> ResidualField:
    """Residual of dn/dt + (1/r^2) d(r^2 n v)/dr."""
    dn = d_dt(n.values, n.times.dt, order=1)
    div_j = radial_divergence(n.values * v.values, n.grid)
    res = dn.values + div_j
    mask = _erode_mask(v.mask, 2)
    return ResidualField(res, mask, n.grid, n.times, boundary_slices=dn.boundary_slices)


def kinetic_vector_field(orbital: KSOrbital) -> KineticVectorField:
    """Non-interacting z from the doubly occupied orbital.

    With phi(r) spherically symmetric, t_ab = rhat_a rhat_b |phi'|^2 and
    z(r) = 2 (g' + 2 g / r), g = |phi'|^2.  Global phases drop out of g.
    """
    grid = orbital.grid
    g = np.abs(first_derivative(orbital.phi, grid.h)) ** 2
    dg = first_derivative(g, grid.h)
    z = np.empty_like(g)
    z[:, 1:] = 2.0 * (dg[:, 1:] + 2.0 * g[:, 1:] / grid.r[None, 1:])
    z[:, 0] = 0.0  # odd field
    return KineticVectorField(z, _erode_mask(orbital.mask, 2), grid, orbital.times,
                              variant="noninteracting")


def dvt_residual_ks(n: DensityTrajectory, z_s: KineticVectorField,
                    V: PotentialTrajectory) -> ResidualField:
    """Residual of the non-interacting differential virial identity,

        d2n/dt2 + (1/4) lap^2 n - div z_s - div(n grad V).

    lap^2 is two composed radial Laplacians (better near-origin behavior
    than a single wide stencil)."""
    grid = n.grid
    d2n = d_dt(n.values, n.times.dt, order=2)
    lap2 = radial_laplacian(radial_laplacian(n.values, grid), grid)
    div_z = radial_divergence(z_s.values, grid)
    Vfull = fill_potential(V)
    grad_V = first_derivative(Vfull, grid.h)
    grad_V[:, 0] = 0.0  # V is even in r; pinned gauge keeps the limit clean
    div_nV = radial_divergence(n.values * grad_V, grid)
    res = d2n.values + 0.25 * lap2 - div_z - div_nV
    mask = _erode_mask(z_s.mask & V.mask, 2, origin=5)
    # the potential at the second-to-last slice inherits the one-sided
    # velocity row at the final slice through the orbital phase, so it
    # converges one order slower than the interior: flag it too
    nt = n.times.n_times
    boundary = tuple(sorted({0, nt - 2, nt - 1}
                            | {b % nt for b in d2n.boundary_slices}))
    return ResidualField(res, mask, grid, n.times, boundary_slices=boundary)


# ---------------------------------------------------------------------------
# interacting machinery (Moshinsky interaction only)
# ---------------------------------------------------------------------------

def _complex_rm_splines(chi_slice: np.ndarray, grid: RadialGrid):
    """Cubic splines of sqrt(4 pi) psi_RM = chi/s, real and imaginary parts."""
    s = grid.r
    q = np.empty(grid.n_points, dtype=complex)
    q[1:] = chi_slice[1:] / s[1:]
    q[0] = q[1]
    return CubicSpline(s, q.real), CubicSpline(s, q.imag)


def _pair_quad_nodes(u_max: float, n_u: int, n_mu: int):
    xu, wu = roots_legendre(n_u)
    xm, wm = roots_legendre(n_mu)
    u = 0.5 * u_max * (xu + 1.0)
    wu = 0.5 * u_max * wu
    return u, wu, xm, wm


def _cm_gaussian(c2: np.ndarray, a: float) -> np.ndarray:
    """|psi_CM|^2 prefactor-correct Gaussian amplitude (not squared)."""
    return np.exp(-c2 / (2.0 * a**2)) / (np.pi * a**2) ** 0.75


def interaction_force_term(width: WidthTrajectory, rm: WavefunctionTrajectory,
                           K: float, grid: RadialGrid, interaction_kind: str = "moshinsky",
                           n_u: int = 96, n_mu: int = 64) -> np.ndarray:
    """The pair-force divergence div int n2(r, r') grad u(|r - r'|) dr',
    with n2 the pair density normalized to N(N-1) = 2 (i.e. 2 |Psi|^2 for
    the symmetric two-electron state).  The harmonic grad u = -K (r - r')
    collapses the integral to first moments:

        F(r) = -K [ n(r) r - m1(r) ],   m1(r) = int n2(r, r') (rhat . r') dr'.

    Returns the scalar field div F on grid x times; the overall coefficient
    is pinned by the exactly solvable static limit.  Other interactions are
    out of scope by design (general u needs 6D machinery).
    """
    if interaction_kind != "moshinsky":
        raise UnsupportedScopeError(
            "pair-force term implemented for the harmonic interaction only")
    r = grid.r
    u, wu, mu, wm = _pair_quad_nodes(rm.grid.r_max, n_u, n_mu)
    out = np.empty((rm.times.n_times, grid.n_points))
    for k in range(rm.times.n_times):
        a = width.a[k]
        sp_re, sp_im = _complex_rm_splines(rm.chi[k], rm.grid)
        # (r, u, mu) tensors, chunked over r to bound memory
        n_r = np.empty(grid.n_points)
        m_r = np.empty(grid.n_points)
        for lo in range(0, grid.n_points, 128):
            rr = r[lo:lo + 128, None, None]
            uu = u[None, :, None]
            mm = mu[None, None, :]
            c2 = 0.25 * (rr**2 + 2.0 * rr * uu * mm + uu**2)
            s2 = rr**2 - 2.0 * rr * uu * mm + uu**2
            s = np.sqrt(s2)
            s_cl = np.minimum(s, rm.grid.r_max)
            psi_r2 = (sp_re(s_cl) ** 2 + sp_im(s_cl) ** 2) / (4.0 * np.pi)
            psi_r2[s > rm.grid.r_max] = 0.0
            psi_c2 = _cm_gaussian(c2, a) ** 2
            n2 = 2.0 * psi_c2 * psi_r2  # pair density N(N-1)|Psi|^2
            wuu = (wu[:, None] * wm[None, :] * u[:, None] ** 2)[None, :, :]
            n_r[lo:lo + 128] = 2.0 * np.pi * np.sum(n2 * wuu, axis=(1, 2))
            m_r[lo:lo + 128] = 2.0 * np.pi * np.sum(n2 * wuu * (uu * mm), axis=(1, 2))
        F = -K * (r * n_r - m_r)
        out[k] = radial_divergence(F, grid)
    return out


def interacting_kinetic_vector_field(width: WidthTrajectory, rm: WavefunctionTrajectory,
                                     grid: RadialGrid, n_u: int = 96,
                                     n_mu: int = 64) -> KineticVectorField:
    """z from the interacting one-body reduced density matrix of the
    separable CM x RM wavefunction:  t_ab(r) = int Re[(d_a Psi)(d_b Psi)*] dr2
    with the Gaussian CM factor analytic and the RM factor splined.

    The tensor has the form A rhat rhat + B I, so
    z(r) = 2 (A' + 2 A / r + B') with A = t_zz - t_xx, B = t_xx at r zhat.
    """
    r = grid.r
    u, wu, mu, wm = _pair_quad_nodes(rm.grid.r_max, n_u, n_mu)
    s_floor = 0.5 * rm.grid.h
    out = np.empty((rm.times.n_times, grid.n_points))
    for k in range(rm.times.n_times):
        a = width.a[k]
        adot = width.adot[k]
        # psi_C(c) = N exp(-c^2/(2a^2) + i M adot c^2 / (2a)); M = 2 for the CM
        dc_log = -1.0 / a**2 + 1j * 2.0 * adot / a  # psi_C'(c) = c * dc_log * psi_C
        sp_re, sp_im = _complex_rm_splines(rm.chi[k], rm.grid)
        dsp_re, dsp_im = sp_re.derivative(), sp_im.derivative()
        ddq0 = complex(dsp_re(0.0, 1), dsp_im(0.0, 1))  # limit of psi'(s)/s at 0
        t_zz = np.empty(grid.n_points)
        t_xx = np.empty(grid.n_points)
        for lo in range(0, grid.n_points, 64):
            rr = r[lo:lo + 64, None, None]
            uu = u[None, :, None]
            mm = mu[None, None, :]
            c2 = 0.25 * (rr**2 + 2.0 * rr * uu * mm + uu**2)
            s = np.sqrt(rr**2 - 2.0 * rr * uu * mm + uu**2)
            s_cl = np.minimum(s, rm.grid.r_max)
            psi_c = _cm_gaussian(c2, a) * np.exp(1j * adot * c2 / a)
            psi_r = (sp_re(s_cl) + 1j * sp_im(s_cl)) / np.sqrt(4.0 * np.pi)
            dpsi_r = (dsp_re(s_cl) + 1j * dsp_im(s_cl)) / np.sqrt(4.0 * np.pi)
            outside = s > rm.grid.r_max
            psi_r[outside] = 0.0
            dpsi_r[outside] = 0.0
            # ratio psi_R'(s)/s with its finite s -> 0 limit
            ratio = np.where(s > s_floor, dpsi_r / np.maximum(s, s_floor),
                             ddq0 / np.sqrt(4.0 * np.pi))
            Z = 0.25 * dc_log * (rr + uu * mm) * psi_c * psi_r \
                + psi_c * ratio * (rr - uu * mm)
            X = 0.25 * dc_log * psi_c * psi_r - psi_c * ratio
            wuu = (wu[:, None] * wm[None, :] * u[:, None] ** 2)[None, :, :]
            t_zz[lo:lo + 64] = 2.0 * np.pi * np.sum(np.abs(Z) ** 2 * wuu, axis=(1, 2))
            t_xx[lo:lo + 64] = np.pi * np.sum(
                uu**2 * (1.0 - mm**2) * np.abs(X) ** 2 * wuu, axis=(1, 2))
        A = t_zz - t_xx
        B = t_xx
        dA = first_derivative(A, grid.h)
        dB = first_derivative(B, grid.h)
        zk = np.empty(grid.n_points)
        zk[1:] = 2.0 * (dA[1:] + 2.0 * A[1:] / r[1:] + dB[1:])
        zk[0] = 0.0
        out[k] = zk
    mask = np.ones_like(out, dtype=bool)
    return KineticVectorField(out, mask, grid, rm.times, variant="interacting")


def dvt_residual_interacting(n: DensityTrajectory, z: KineticVectorField,
                             force_term: np.ndarray, protocol) -> ResidualField:
    """Residual of the interacting identity with V_ext = omega(t)^2 r^2 / 2:

        d2n/dt2 + (1/4) lap^2 n - div z - 2 div int n2 grad u - div(n grad V_ext).
    """
    grid = n.grid
    d2n = d_dt(n.values, n.times.dt, order=2)
    lap2 = radial_laplacian(radial_laplacian(n.values, grid), grid)
    div_z = radial_divergence(z.values, grid)
    w2 = protocol.omega(n.times.t)[:, None] ** 2
    grad_V = w2 * grid.r[None, :]
    div_nV = radial_divergence(n.values * grad_V, grid)
    res = d2n.values + 0.25 * lap2 - div_z - force_term - div_nV
    mask = _erode_mask(z.mask.astype(bool), 0, origin=3)
    return ResidualField(res, mask, grid, n.times,
                         boundary_slices=d2n.boundary_slices)


# ---------------------------------------------------------------------------
# harmonic potential theorem
# ---------------------------------------------------------------------------

@dataclass
class HPTReport:
    """Rigid-translation deviation ||n(x,t) - n0(x - x_cl(t))||_inf per slice."""

    deviation: np.ndarray
    x_cl: np.ndarray
    times: TimeGrid

    @property
    def max_deviation(self) -> float:
        return float(np.max(self.deviation))


def _classical_driven_oscillator(omega0: float, E0: float, Omega: float,
                                 times: TimeGrid) -> np.ndarray:
    """RK4 for xdd = -omega0^2 x + E0 sin(Omega t), x(0) = xd(0) = 0."""

    def rhs(t, y):
        return np.array([y[1], -omega0**2 * y[0] + E0 * np.sin(Omega * t)])

    dt = times.dt
    y = np.zeros(2)
    xs = np.empty(times.n_times)
    xs[0] = 0.0
    t = 0.0
    for k in range(times.n_steps):
        k1 = rhs(t, y)
        k2 = rhs(t + 0.5 * dt, y + 0.5 * dt * k1)
        k3 = rhs(t + 0.5 * dt, y + 0.5 * dt * k2)
        k4 = rhs(t + dt, y + dt * k3)
        y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t += dt
        xs[k + 1] = y[0]
    return xs


def hpt_check(omega0: float, E0: float, Omega: float, times: TimeGrid,
              grid: LineGrid | None = None, anharmonic: float = 0.0,
              stride: int = 10) -> HPTReport:
    """Drive the 1D ground state with a uniform force and compare the
    density to a rigid translation along the classical trajectory.

    anharmonic adds a x^4 term to the well (negative control: the theorem
    must fail off the harmonic case).
    """
    grid = grid or LineGrid(10.0, 2001)
    x = grid.x
    well = 0.5 * omega0**2 * x**2 + anharmonic * x**4
    _, psi0 = ground_state_1d(well, grid)

    def pot(t):
        return well - E0 * np.sin(Omega * t) * x

    snaps = propagate_cartesian_1d(psi0, pot, grid, times, stride=stride)
    times_out = times.strided(stride)
    x_cl = _classical_driven_oscillator(omega0, E0, Omega, times)[::stride]
    if np.max(np.abs(x_cl)) + 4.0 / np.sqrt(omega0) > grid.x_max:
        warnings.warn("classical trajectory approaches the grid edge; "
                      "deviations will be contaminated", RuntimeWarning)
    n0 = np.abs(psi0) ** 2
    spline = CubicSpline(x, n0)
    n_t = np.abs(snaps) ** 2
    dev = np.empty(times_out.n_times)
    for k in range(times_out.n_times):
        xs = x - x_cl[k]
        ref = np.where((xs >= x[0]) & (xs <= x[-1]),
                       spline(np.clip(xs, x[0], x[-1])), 0.0)
        dev[k] = np.max(np.abs(n_t[k] - ref))
    return HPTReport(dev, x_cl, times_out)
