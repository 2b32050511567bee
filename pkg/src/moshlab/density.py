"""Assembly of the exact two-electron density and its scattering factor.

The pair wavefunction separates into a Gaussian CM factor of width a(t)
and a numerically propagated relative-motion factor.  The one-body density
is the angular-reduced convolution

    n(r, t) = (8/sqrt(pi)) exp(-r^2/a^2)
              * int_0^inf dy y^2 exp(-y^2/4) |psi_RM(a y, t)|^2
              * sinh(r y / a) / (r y / a),

evaluated by adaptive composite Gauss-Legendre quadrature in y.  The
Gaussian prefactor and the sinh are combined in a single exponent before
exponentiation: each factor alone overflows where their product is bounded.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import roots_legendre

from .cm import WidthTrajectory, solve_ermakov
from .errors import InputShapeError, QuadratureError
from .grids import DensityTrajectory, RadialGrid, TimeGrid, integrate_radial
from .models import EffectiveRMFrequency
from .rm import WavefunctionTrajectory

__all__ = [
    "QuadratureSpec",
    "ScatteringFactor",
    "assemble_density",
    "scattering_factor",
    "moshinsky_scattering_closed_form",
    "gaussian_transform",
]


@dataclass(frozen=True)
class QuadratureSpec:
    """Adaptive y-quadrature control: composite Gauss-Legendre panels on
    [0, y_cut], panel count doubled until successive estimates agree."""

    rel_tol: float = 1e-8
    nodes_per_panel: int = 16
    initial_panels: int = 4
    max_refinements: int = 6
    y_cut: float = 13.0  # exp(-y^2/4) < 1e-16 beyond


@dataclass
class ScatteringFactor:
    """f(k, t) = int n(r, t) exp(i k.r) d3r on a uniform k-grid."""

    values: np.ndarray  # complex, (n_times, n_k)
    k: np.ndarray
    times: TimeGrid

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        self.k = np.asarray(self.k, dtype=float)
        if self.values.shape != (self.times.n_times, self.k.size):
            raise InputShapeError(
                f"scattering factor shape {self.values.shape} != "
                f"({self.times.n_times}, {self.k.size})"
            )


def _rm_amplitude_spline(chi_slice: np.ndarray, grid: RadialGrid) -> CubicSpline:
    """Cubic spline of sqrt(4 pi) |psi_RM(s)| = |chi(s)| / s.

    The s -> 0 limit is taken from the second grid point's chi/s value.
    """
    s = grid.r
    p = np.empty(grid.n_points)
    p[1:] = np.abs(chi_slice[1:]) / s[1:]
    p[0] = p[1]
    return CubicSpline(s, p)


def _density_slice(a: float, spline: CubicSpline, s_max: float, r: np.ndarray,
                   y_nodes: np.ndarray, y_weights: np.ndarray) -> np.ndarray:
    """One time slice of the y-integral, vectorized over (r, y)."""
    ra = r / a
    x = np.outer(ra, y_nodes)  # (n_r, n_y)
    # exp(-y^2/4 - (r/a)^2 + x) * (1 - e^{-2x})/(2x) == e^{-y^2/4-r^2/a^2} sinh(x)/x
    expo = -0.25 * y_nodes[None, :] ** 2 - ra[:, None] ** 2 + x
    with np.errstate(divide="ignore", invalid="ignore"):
        soft = np.where(x > 1e-12, -np.expm1(-2.0 * x) / (2.0 * x), 1.0)
    kern = np.exp(expo) * soft
    s_eval = a * y_nodes
    amp2 = np.where(s_eval <= s_max, spline(np.clip(s_eval, 0.0, s_max)) ** 2, 0.0)
    psi2 = amp2 / (4.0 * np.pi)  # |psi_RM(a y)|^2
    col = y_weights * y_nodes**2 * psi2
    return (8.0 / np.sqrt(np.pi)) * (kern @ col)


def _panel_rule(n_panels: int, nodes_per_panel: int, y_cut: float):
    xg, wg = roots_legendre(nodes_per_panel)
    edges = np.linspace(0.0, y_cut, n_panels + 1)
    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * xg[None, :]).ravel()
    weights = (half[:, None] * wg[None, :]).ravel()
    return nodes, weights


def assemble_density(width: WidthTrajectory, rm: WavefunctionTrajectory,
                     grid: RadialGrid, quad: QuadratureSpec | None = None) -> DensityTrajectory:
    """Exact two-electron density from the CM width and the RM trajectory.

    Both inputs must share the TimeGrid.  Raises QuadratureError when panel
    doubling fails to converge to quad.rel_tol.
    """
    quad = quad or QuadratureSpec()
    if (width.times.n_steps != rm.times.n_steps
            or abs(width.times.t_final - rm.times.t_final) > 1e-12):
        raise InputShapeError("width and RM trajectories do not share a time grid")
    r = grid.r
    n_t = rm.times.n_times
    out = np.empty((n_t, grid.n_points))
    s_max = rm.grid.r_max
    for k in range(n_t):
        spline = _rm_amplitude_spline(rm.chi[k], rm.grid)
        a = width.a[k]
        n_panels = quad.initial_panels
        nodes, wts = _panel_rule(n_panels, quad.nodes_per_panel, quad.y_cut)
        est = _density_slice(a, spline, s_max, r, nodes, wts)
        for _ in range(quad.max_refinements):
            n_panels *= 2
            nodes, wts = _panel_rule(n_panels, quad.nodes_per_panel, quad.y_cut)
            new = _density_slice(a, spline, s_max, r, nodes, wts)
            err = np.max(np.abs(new - est)) / max(np.max(np.abs(new)), 1e-300)
            est = new
            if err < quad.rel_tol:
                break
        else:
            raise QuadratureError(
                f"y-quadrature did not converge at slice {k}",
                diagnostics={"slice": k, "relative_disagreement": float(err),
                             "panels": n_panels},
            )
        out[k] = est
    return DensityTrajectory(out, grid, rm.times, particle_number=2.0)


def scattering_factor(n: DensityTrajectory, k_grid: np.ndarray) -> ScatteringFactor:
    """Spherical Fourier transform f(k,t) = 4 pi int r^2 n sin(kr)/(kr) dr."""
    k_grid = np.asarray(k_grid, dtype=float)
    r = n.grid.r
    # sinc(x) = sin(pi x)/(pi x); j0(kr) = sinc(kr/pi), exact limit 1 at kr=0
    j0 = np.sinc(np.outer(k_grid, r) / np.pi)  # (n_k, n_r)
    w = n.grid.weights * r**2
    f = 4.0 * np.pi * n.values @ (j0 * w[None, :]).T
    return ScatteringFactor(f.astype(complex), k_grid, n.times)


def gaussian_transform(k: np.ndarray, a) -> np.ndarray:
    """Transform of the normalized Gaussian exp(-x^2/a^2)/(a^3 pi^{3/2})."""
    return np.exp(-np.asarray(k, dtype=float) ** 2 * np.asarray(a) ** 2 / 4.0)


def moshinsky_scattering_closed_form(protocol, K: float, k_grid: np.ndarray,
                                     times: TimeGrid) -> ScatteringFactor:
    """Closed-form total scattering factor for the harmonic interaction.

    f_tot(k, t) = 2 g(k, a_CM(t)) g(k/2, a_RM(t)) with g the Gaussian
    transform; a_CM evolves at frequency omega(t) with mass 2, a_RM at the
    effective frequency sqrt(omega(t)^2 - 2K) with mass 1/2.
    """
    k_grid = np.asarray(k_grid, dtype=float)
    width_cm = solve_ermakov(protocol, 2.0, times)
    eff = EffectiveRMFrequency(protocol, K)
    width_rm = solve_ermakov(eff, 0.5, times)
    f = 2.0 * gaussian_transform(k_grid[None, :], width_cm.a[:, None]) \
        * gaussian_transform(k_grid[None, :] / 2.0, width_rm.a[:, None])
    return ScatteringFactor(f.astype(complex), k_grid, times)
