"""Ground states and real-time Crank-Nicolson propagation.

The l = 0 radial problem is solved in the reduced form chi(s) = s * R(s):
the Hamiltonian -(1/(2 mu)) d^2/ds^2 + V_eff(s) is discretized with a
fourth-order 5-point kinetic stencil (pentadiagonal), Dirichlet boundaries
at s = 0 and s = s_max, and odd reflection across the origin for the ghost
node.  The same bands drive the eigensolvers and the Crank-Nicolson
stepper, so discrete eigenstates are exactly stationary under propagation.
Normalization convention:
sum_j w_j |chi_j|^2 = 1 with trapezoid line weights, i.e. the full 3D
wavefunction psi(s) = chi(s) / (sqrt(4 pi) s) carries unit norm.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eig_banded, solve_banded

from .errors import InputShapeError, InstabilityError, ModelInvalidError, NumericError
from .grids import LineGrid, RadialGrid, TimeGrid
from .models import MoshinskyInteraction, check_rm_bound

__all__ = [
    "RadialWavefunction",
    "WavefunctionTrajectory",
    "solve_ground_state",
    "propagate",
    "propagate_radial_potential",
    "propagate_cartesian_1d",
    "ground_state_1d",
    "imaginary_time_ground_state",
    "expectation_r2",
    "expectation_energy",
]

NORM_DRIFT_LIMIT = 1e-6


@dataclass
class RadialWavefunction:
    """Reduced radial wavefunction chi = s * R(s) for an l = 0 state."""

    chi: np.ndarray
    grid: RadialGrid
    mass: float

    def __post_init__(self):
        self.chi = np.asarray(self.chi, dtype=complex)
        if self.chi.shape != (self.grid.n_points,):
            raise InputShapeError(
                f"chi length {self.chi.shape} != grid n_points {self.grid.n_points}"
            )

    def norm(self) -> float:
        return float(np.real(self.grid.line_weights @ (np.abs(self.chi) ** 2)))

    def density_3d(self) -> np.ndarray:
        """|psi|^2 on the grid; the s = 0 value is the quadratic limit of
        |chi/s|^2 taken from the first interior node."""
        s = self.grid.r
        out = np.empty(self.grid.n_points)
        out[1:] = np.abs(self.chi[1:]) ** 2 / (4.0 * np.pi * s[1:] ** 2)
        out[0] = np.abs(self.chi[1]) ** 2 / (4.0 * np.pi * s[1] ** 2)
        return out


@dataclass
class WavefunctionTrajectory:
    """Snapshots chi[k][j] on grid x (possibly strided) times."""

    chi: np.ndarray
    grid: RadialGrid
    times: TimeGrid
    mass: float

    def __post_init__(self):
        self.chi = np.asarray(self.chi, dtype=complex)
        expected = (self.times.n_times, self.grid.n_points)
        if self.chi.shape != expected:
            raise InputShapeError(f"trajectory shape {self.chi.shape} != {expected}")

    def norms(self) -> np.ndarray:
        return (np.abs(self.chi) ** 2) @ self.grid.line_weights

    def density_3d(self) -> np.ndarray:
        s = self.grid.r
        out = np.empty_like(self.chi, dtype=float)
        out[:, 1:] = np.abs(self.chi[:, 1:]) ** 2 / (4.0 * np.pi * s[1:] ** 2)
        out[:, 0] = np.abs(self.chi[:, 1]) ** 2 / (4.0 * np.pi * s[1] ** 2)
        return out


def _effective_potential(interaction, omega: float, mass: float, s: np.ndarray) -> np.ndarray:
    return 0.5 * mass * omega**2 * s**2 + interaction.potential(s)


def _kinetic_bands(n_int: int, mass: float, h: float, fold_origin: bool):
    """Fourth-order 5-point kinetic bands on the interior nodes.

    Returns (diag, off1, off2) for T = -(1/(2 mass)) d^2.  With
    fold_origin=True the ghost node left of the boundary is eliminated by
    odd reflection (reduced radial functions chi ~ s near the origin);
    otherwise ghost values are taken as zero, appropriate when the state
    is negligible at the line ends.  Ghost nodes beyond the outer wall are
    always truncated to zero.  Only the diagonal is modified by the fold,
    so the operator stays symmetric and Crank-Nicolson stays unitary.
    """
    c0 = 5.0 / (4.0 * mass * h**2)
    c1 = -2.0 / (3.0 * mass * h**2)
    c2 = 1.0 / (24.0 * mass * h**2)
    diag = np.full(n_int, c0)
    if fold_origin:
        diag[0] -= c2
    off1 = np.full(n_int - 1, c1)
    off2 = np.full(n_int - 2, c2)
    return diag, off1, off2


def _lowest_banded(v_interior: np.ndarray, mass: float, h: float, fold_origin: bool):
    """Lowest eigenpair of the 5-point Hamiltonian; interior eigenvector."""
    n_int = v_interior.size
    diag, off1, off2 = _kinetic_bands(n_int, mass, h, fold_origin)
    a_band = np.zeros((3, n_int))
    a_band[0] = diag + v_interior
    a_band[1, :-1] = off1
    a_band[2, :-2] = off2
    try:
        vals, vecs = eig_banded(a_band, lower=True, select="i", select_range=(0, 0))
    except Exception as exc:  # pragma: no cover - LAPACK failure path
        raise NumericError(f"banded eigensolve failed: {exc}") from exc
    return float(vals[0]), vecs[:, 0]


def _apply_banded(hdiag, off1, off2, psi):
    out = hdiag * psi
    out[:-1] += off1 * psi[1:]
    out[1:] += off1 * psi[:-1]
    out[:-2] += off2 * psi[2:]
    out[2:] += off2 * psi[:-2]
    return out


def solve_ground_state(interaction, omega0: float, mass: float, grid: RadialGrid):
    """Lowest eigenpair of the discretized radial Hamiltonian.

    Returns (energy, RadialWavefunction) with a real, nonnegative,
    normalized chi.  Moshinsky interactions with omega0^2 <= 2K are
    rejected (relative motion unbound).
    """
    if isinstance(interaction, MoshinskyInteraction):
        if omega0**2 - 2.0 * interaction.K <= 0:
            raise ModelInvalidError(
                f"omega0^2 = {omega0**2} <= 2K = {2 * interaction.K}: no bound ground state"
            )
    s = grid.r[1:-1]
    v = _effective_potential(interaction, omega0, mass, s)
    if not np.all(np.isfinite(v)):
        raise ModelInvalidError("effective potential not finite on the interior grid")
    energy, vec = _lowest_banded(v, mass, grid.h, fold_origin=True)
    chi = np.zeros(grid.n_points)
    chi[1:-1] = vec
    if chi[np.argmax(np.abs(chi))] < 0:
        chi = -chi
    wf = RadialWavefunction(chi, grid, mass)
    wf.chi /= np.sqrt(wf.norm())
    return energy, wf


def ground_state_1d(potential_values: np.ndarray, grid: LineGrid, mass: float = 1.0):
    """Lowest eigenpair on a Cartesian line with Dirichlet boundaries."""
    v = np.asarray(potential_values, dtype=float)
    energy, vec = _lowest_banded(v[1:-1], mass, grid.h, fold_origin=False)
    psi = np.zeros(grid.n_points)
    psi[1:-1] = vec
    if psi[np.argmax(np.abs(psi))] < 0:
        psi = -psi
    psi /= np.sqrt(grid.line_weights @ psi**2)
    return energy, psi


def _cn_evolve(chi0: np.ndarray, potential_at, mass: float, times: TimeGrid,
               h: float, stride: int = 1, fold_origin: bool = True):
    """Crank-Nicolson stepping of the reduced/interior wavefunction.

    potential_at(t_mid) must return the potential on the interior nodes at
    the mid-step time.  Uses the same 5-point kinetic bands as the
    eigensolvers, so discrete eigenstates are stationary under this
    stepper.  Returns the snapshot array (every stride steps, initial
    state included).
    """
    if times.n_steps % stride != 0:
        raise ValueError(f"stride {stride} does not divide n_steps {times.n_steps}")
    dt = times.dt
    n_int = chi0.size - 2
    kin_diag, off1, off2 = _kinetic_bands(n_int, mass, h, fold_origin)
    psi = chi0[1:-1].astype(complex)
    w_int = np.full(n_int, h)  # interior trapezoid weights (endpoints vanish)
    norm0 = float(w_int @ np.abs(psi) ** 2)
    snaps = [chi0.astype(complex)]
    ab = np.zeros((5, n_int), dtype=complex)  # banded storage for solve_banded
    half = 0.5j * dt
    ab[0, 2:] = half * off2
    ab[1, 1:] = half * off1
    ab[3, :-1] = half * off1
    ab[4, :-2] = half * off2
    for k in range(times.n_steps):
        t_mid = (k + 0.5) * dt
        hdiag = kin_diag + potential_at(t_mid)
        # rhs = (I - i dt/2 H) psi
        rhs = psi - half * _apply_banded(hdiag, off1, off2, psi)
        ab[2, :] = 1.0 + half * hdiag
        psi = solve_banded((2, 2), ab, rhs)
        if (k + 1) % stride == 0:
            snap = np.zeros(chi0.size, dtype=complex)
            snap[1:-1] = psi
            snaps.append(snap)
    norm1 = float(w_int @ np.abs(psi) ** 2)
    drift = abs(norm1 - norm0)
    if drift > NORM_DRIFT_LIMIT:
        raise InstabilityError(
            f"norm drift {drift:.3e} exceeds {NORM_DRIFT_LIMIT}; reduce dt",
            diagnostics={"norm_drift": drift, "dt": dt},
        )
    return np.array(snaps)


def propagate(psi0: RadialWavefunction, interaction, protocol, times: TimeGrid,
              stride: int = 1) -> WavefunctionTrajectory:
    """Real-time propagation under V_eff(s, t) = (1/2) mu omega(t)^2 s^2 + u(s).

    The potential is evaluated at the mid-step time, keeping second-order
    accuracy for time-dependent protocols.
    """
    if isinstance(interaction, MoshinskyInteraction):
        check_rm_bound(protocol, interaction.K, times.t_final)
    grid = psi0.grid
    s = grid.r[1:-1]
    u = interaction.potential(s)

    def pot(t_mid):
        w = float(protocol.omega(t_mid))
        return 0.5 * psi0.mass * w**2 * s**2 + u

    snaps = _cn_evolve(psi0.chi, pot, psi0.mass, times, grid.h, stride)
    return WavefunctionTrajectory(snaps, grid, times.strided(stride), psi0.mass)


def propagate_radial_potential(psi0: RadialWavefunction, potential, times: TimeGrid,
                               stride: int = 1) -> WavefunctionTrajectory:
    """Propagation under an arbitrary radial one-body potential.

    potential is either a callable t -> values on the full grid, or a tuple
    (V_values, t_values) of tabulated slices interpolated linearly in time.
    """
    grid = psi0.grid
    if callable(potential):
        def pot(t_mid):
            return np.asarray(potential(t_mid))[1:-1]
    else:
        V_tab, t_tab = potential
        V_tab = np.asarray(V_tab)
        t_tab = np.asarray(t_tab)

        def pot(t_mid):
            j = np.searchsorted(t_tab, t_mid) - 1
            j = min(max(j, 0), len(t_tab) - 2)
            f = (t_mid - t_tab[j]) / (t_tab[j + 1] - t_tab[j])
            f = min(max(f, 0.0), 1.0)
            return ((1.0 - f) * V_tab[j] + f * V_tab[j + 1])[1:-1]

    snaps = _cn_evolve(psi0.chi, pot, psi0.mass, times, grid.h, stride)
    return WavefunctionTrajectory(snaps, grid, times.strided(stride), psi0.mass)


def propagate_cartesian_1d(psi0: np.ndarray, potential_of_t, grid: LineGrid,
                           times: TimeGrid, mass: float = 1.0, stride: int = 1):
    """Crank-Nicolson on a symmetric line; potential_of_t(t_mid) -> V(x).

    Used by the harmonic-potential-theorem check.  Returns the snapshot
    array with Dirichlet zeros at the line ends.
    """
    psi0 = np.asarray(psi0, dtype=complex)
    if psi0.shape != (grid.n_points,):
        raise InputShapeError(f"psi0 length {psi0.shape} != {grid.n_points}")

    def pot(t_mid):
        return np.asarray(potential_of_t(t_mid))[1:-1]

    return _cn_evolve(psi0, pot, mass, times, grid.h, stride, fold_origin=False)


def imaginary_time_ground_state(interaction, omega0: float, mass: float,
                                grid: RadialGrid, tau: float = 20.0,
                                n_steps: int = 4000):
    """Imaginary-time relaxation cross-check for the eigensolver.

    Crank-Nicolson with dt -> -i dtau and renormalization each step.
    Returns (energy_estimate, chi).
    """
    s = grid.r[1:-1]
    h = grid.h
    dtau = tau / n_steps
    n_int = s.size
    kin_diag, off1, off2 = _kinetic_bands(n_int, mass, h, fold_origin=True)
    hdiag = kin_diag + _effective_potential(interaction, omega0, mass, s)
    psi = np.exp(-(s - s.mean()) ** 2)  # generic nodeless seed
    ab = np.zeros((5, n_int))
    ab[0, 2:] = 0.5 * dtau * off2
    ab[1, 1:] = 0.5 * dtau * off1
    ab[2, :] = 1.0 + 0.5 * dtau * hdiag
    ab[3, :-1] = 0.5 * dtau * off1
    ab[4, :-2] = 0.5 * dtau * off2
    for _ in range(n_steps):
        rhs = psi - 0.5 * dtau * _apply_banded(hdiag, off1, off2, psi)
        psi = solve_banded((2, 2), ab, rhs)
        psi /= np.sqrt(h * psi @ psi)
    energy = h * psi @ _apply_banded(hdiag, off1, off2, psi)
    chi = np.zeros(grid.n_points)
    chi[1:-1] = psi
    chi /= np.sqrt(grid.line_weights @ chi**2)
    return float(energy), chi


def expectation_r2(chi: np.ndarray, grid: RadialGrid) -> float:
    """<s^2> for a normalized reduced wavefunction."""
    w = grid.line_weights
    dens = np.abs(np.asarray(chi)) ** 2
    return float((w * grid.r**2) @ dens / (w @ dens))


def expectation_energy(chi: np.ndarray, potential_full: np.ndarray, mass: float,
                       grid: RadialGrid) -> float:
    """<H> for a reduced wavefunction with Dirichlet boundaries."""
    chi = np.asarray(chi, dtype=complex)
    kin_diag, off1, off2 = _kinetic_bands(grid.n_points - 2, mass, grid.h,
                                          fold_origin=True)
    hchi = np.zeros_like(chi)
    hchi[1:-1] = _apply_banded(kin_diag, off1, off2, chi[1:-1])
    hchi += potential_full * chi
    w = grid.line_weights
    return float(np.real(np.conj(chi) @ (w * hchi)))
