"""Discrete-time linear-response machinery over a finite spatial basis.

Kernels are causal by construction: the upper time-triangle of every
kernel produced here is never written, so structural causality can be
audited exactly rather than checked against a tolerance.

Conventions fixed for the whole module:
- forward map (left-rectangle rule):  dn_k = dt * sum_{k' <= k} chi[k][k'] v_{k'};
- equal-time kernel slope K_k = (chi[k][k] - chi[k][k-1]) / dt, the one-sided
  approximation of d chi(t, t')/dt' from the causal side t' -> t-;
- second-kind Volterra form: -K_k v_k = d2n_k - dt * sum_{k' < k} D[k][k'] v_{k'}
  with D the discrete second time-derivative of chi along its first index.
The three are mutually consistent: a drive pushed through the forward map is
recovered exactly on interior slices for time-translation-invariant kernels
with vanishing equal-time block.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from .errors import (DegenerateInputError, InputShapeError, InstabilityError,
                     SingularKernelError, StepSizeError)
from .grids import RadialGrid, TimeGrid, d_dt
from .rm import propagate_radial_potential

__all__ = [
    "CausalKernel",
    "KernelDiagonalK",
    "ModelXCKernel",
    "KernelColumn",
    "VolterraSolution",
    "DysonSolution",
    "forward_response",
    "hartree_kernel",
    "solve_dyson",
    "extract_K",
    "volterra_invert",
    "numerical_chi_s",
]

_FIXED_POINT_TOL = 1e-10
_FIXED_POINT_CAP = 200


@dataclass
class CausalKernel:
    """Lower-triangular-in-time kernel chi[k][k'] of d x d blocks.

    blocks has shape (nt, nt, d, d); entries with k' > k are exact zeros
    and are never assigned by any constructor in this module.
    """

    blocks: np.ndarray
    times: TimeGrid

    def __post_init__(self):
        self.blocks = np.asarray(self.blocks, dtype=float)
        nt = self.times.n_times
        if self.blocks.ndim == 2:  # scalar kernel convenience
            self.blocks = self.blocks[:, :, None, None]
        if self.blocks.shape[:2] != (nt, nt) or self.blocks.shape[2] != self.blocks.shape[3]:
            raise InputShapeError(
                f"kernel blocks shape {self.blocks.shape} does not match "
                f"{nt} time slices of square blocks")

    @property
    def dim(self) -> int:
        return self.blocks.shape[2]

    def audit_causal(self) -> float:
        """Max |upper time-triangle| — exactly 0.0 for kernels built here."""
        iu = np.triu_indices(self.times.n_times, k=1)
        return float(np.abs(self.blocks[iu]).max()) if iu[0].size else 0.0

    @classmethod
    def from_function(cls, f, times: TimeGrid, dim: int = 1) -> "CausalKernel":
        """Sample chi[k][k'] = f(t_k, t_{k'}) on the lower triangle only."""
        nt = times.n_times
        blocks = np.zeros((nt, nt, dim, dim))
        for k in range(nt):
            for kp in range(k + 1):
                blocks[k, kp] = np.asarray(f(times.t[k], times.t[kp]),
                                           dtype=float).reshape(dim, dim)
        return cls(blocks, times)


@dataclass
class KernelDiagonalK:
    """Equal-time kernel slope K[k], the coefficient of the Volterra solve."""

    values: np.ndarray  # (nt, d, d)
    times: TimeGrid
    singular: np.ndarray = field(default=None)
    boundary_slices: tuple = (0,)

    def __post_init__(self):
        if self.singular is None:
            self.singular = np.zeros(self.times.n_times, dtype=bool)


@dataclass
class ModelXCKernel:
    """Explicit model for the exchange-correlation kernel: 'zero' (bare
    Hartree / RPA) or 'adiabatic_local' (instantaneous, dV_xc = g * dn)."""

    kind: str = "zero"
    strength: float = 0.0

    def __post_init__(self):
        if self.kind not in ("zero", "adiabatic_local"):
            raise InputShapeError(f"unknown xc kernel kind {self.kind!r}")

    def matrix(self, dim: int) -> np.ndarray:
        if self.kind == "zero":
            return np.zeros((dim, dim))
        return self.strength * np.eye(dim)


def _check_drive(chi: CausalKernel, v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.ndim == 1:
        v = v[:, None]
    if v.shape != (chi.times.n_times, chi.dim):
        raise InputShapeError(
            f"drive shape {v.shape} does not match kernel ({chi.times.n_times}, {chi.dim})")
    return v


def _convolve_row(chi: CausalKernel, u: np.ndarray, k: int) -> np.ndarray:
    """dt * sum_{k' <= k} chi[k][k'] u_{k'} — the single shared accumulation."""
    return chi.times.dt * np.einsum("pij,pj->i", chi.blocks[k, :k + 1], u[:k + 1])


def forward_response(chi: CausalKernel, v: np.ndarray) -> np.ndarray:
    """Density change under the left-rectangle causal convolution."""
    v = _check_drive(chi, v)
    out = np.empty_like(v)
    for k in range(chi.times.n_times):
        out[k] = _convolve_row(chi, v, k)
    return out


def hartree_kernel(grid: RadialGrid) -> np.ndarray:
    """Spherically averaged Coulomb matrix: a shell of density at r' produces
    potential 4 pi r'^2 w' / max(r, r').  The r = r' = 0 element is
    regularized by the uniform-cell equivalent radius (it carries zero
    weight anyway because of the r'^2 factor)."""
    r = grid.r
    denom = np.maximum.outer(r, r)
    denom[0, 0] = grid.h / 3.0
    return 4.0 * np.pi * (grid.weights * r**2)[None, :] / denom


@dataclass
class DysonSolution:
    dn: np.ndarray
    dV: np.ndarray
    iterations: np.ndarray


def solve_dyson(chi_s: CausalKernel, f_xc: ModelXCKernel, v_ext: np.ndarray,
                hartree: np.ndarray | None = None) -> DysonSolution:
    """Self-consistent density change dn = chi_s * (v_ext + (H + f_xc) dn).

    Causality makes the solve a single forward sweep; only the equal-time
    block couples dn_k to itself, handled by a per-slice fixed point to
    1e-10.  With zero kernels the arithmetic reduces bitwise to
    forward_response.
    """
    v_ext = _check_drive(chi_s, v_ext)
    d = chi_s.dim
    M = f_xc.matrix(d)
    if hartree is not None:
        M = M + np.asarray(hartree, dtype=float)
    nt = chi_s.times.n_times
    dn = np.zeros_like(v_ext)
    u = v_ext.copy()  # effective drive v_ext + M dn, updated in place
    iters = np.zeros(nt, dtype=int)
    for k in range(nt):
        x = _convolve_row(chi_s, u, k)
        for it in range(_FIXED_POINT_CAP):
            u[k] = v_ext[k] + M @ x
            x_new = _convolve_row(chi_s, u, k)
            delta = np.abs(x_new - x).max()
            x = x_new
            if delta <= _FIXED_POINT_TOL * max(1.0, np.abs(x).max()):
                break
        else:
            gain = chi_s.times.dt * chi_s.blocks[k, k] @ M
            rho = np.abs(np.linalg.eigvals(gain)).max()
            raise InstabilityError(
                f"Dyson fixed point did not converge at slice {k}; "
                f"equal-time gain spectral radius ~ {rho:.3g}")
        iters[k] = it + 1
        dn[k] = x
        u[k] = v_ext[k] + M @ x
    return DysonSolution(dn=dn, dV=u, iterations=iters)


def extract_K(chi: CausalKernel) -> KernelDiagonalK:
    """One-sided equal-time slope K_k = (chi[k][k] - chi[k][k-1]) / dt.

    Only the causal side t' -> t- of the kernel exists, so the stencil is
    necessarily one-sided.  K[0] copies K[1] and is flagged.  Blocks whose
    smallest singular value is negligible are flagged singular.
    """
    nt = chi.times.n_times
    if nt < 2:
        raise InputShapeError("K extraction needs >= 2 time slices")
    dt = chi.times.dt
    K = np.empty((nt, chi.dim, chi.dim))
    diag = chi.blocks[np.arange(nt), np.arange(nt)]
    K[1:] = (diag[1:] - chi.blocks[np.arange(1, nt), np.arange(nt - 1)]) / dt
    K[0] = K[1]
    sv = np.linalg.svd(K, compute_uv=False)
    singular = sv[:, -1] <= 1e-12 * max(sv.max(), 1e-300)
    return KernelDiagonalK(values=K, times=chi.times, singular=singular,
                           boundary_slices=(0,))


def _chi_second_time_derivative(chi: CausalKernel) -> np.ndarray:
    """Second difference of chi[k][k'] along the observation index k,
    evaluated on the strict lower triangle k' < k (one-sided at row ends)."""
    nt = chi.times.n_times
    dt2 = chi.times.dt ** 2
    b = chi.blocks
    D = np.zeros_like(b)
    for k in range(nt):
        kp = k  # strict lower triangle: columns 0 .. k-1
        if kp == 0:
            continue
        if 1 <= k <= nt - 2:
            D[k, :kp] = (b[k + 1, :kp] - 2.0 * b[k, :kp] + b[k - 1, :kp]) / dt2
        elif k == 0:
            D[k, :kp] = (2.0 * b[0, :kp] - 5.0 * b[1, :kp]
                         + 4.0 * b[2, :kp] - b[3, :kp]) / dt2
        else:
            D[k, :kp] = (2.0 * b[-1, :kp] - 5.0 * b[-2, :kp]
                         + 4.0 * b[-3, :kp] - b[-4, :kp]) / dt2
    return D


@dataclass
class VolterraSolution:
    v: np.ndarray
    resolvent: CausalKernel
    g: np.ndarray
    v_from_resolvent: np.ndarray
    reconstruction_error: float
    #: slices where the discrete second-derivative stencils are one-sided or
    #: touch the causal boundary; values there carry O(1) error and should be
    #: excluded from accuracy statements
    boundary_slices: tuple = (0, 1)


def volterra_invert(chi: CausalKernel, dn: np.ndarray) -> VolterraSolution:
    """Recover the drive from a density change by forward substitution of the
    second-kind Volterra system, and build the resolvent R.

    The system is -K_k v_k = d2n_k - dt * sum_{k' < k} D[k][k'] v_{k'} with
    d2n the discrete second time-derivative of dn and D that of chi along
    its first index.  The resolvent gives the equivalent one-shot path
    v = g + dt R g with g_k = (-K_k)^{-1} d2n_k; R is strictly lower
    triangular by construction (its upper triangle is never written).
    """
    dn = _check_drive(chi, dn)
    nt, d = dn.shape
    if nt < 4:
        raise InputShapeError("Volterra inversion needs >= 4 time slices")
    scale = np.abs(dn).max()
    if scale > 0:
        dn0 = np.abs(dn[0]).max()
        # a legitimate switched-on response has initial slope O(dt) relative
        # to its typical slope scale/t_final; 5% separates that cleanly from
        # an O(1) violation without refusing coarse but valid grids
        slope0 = np.abs(dn[1] - dn[0]).max() / chi.times.dt
        if dn0 > 1e-8 * scale or slope0 > 0.05 * scale / chi.times.t_final:
            raise DegenerateInputError(
                "density change does not satisfy the switch-on convention "
                "dn(0) = d/dt dn(0) = 0")
    Kd = extract_K(chi)
    if Kd.singular.any():
        raise SingularKernelError(
            f"equal-time kernel slope singular at slices "
            f"{np.flatnonzero(Kd.singular).tolist()}; Volterra solve refused")
    dt = chi.times.dt
    d2n = d_dt(dn, dt, order=2).values
    D = _chi_second_time_derivative(chi)

    v = np.empty_like(dn)
    for k in range(nt):
        rhs = d2n[k]
        if k:
            rhs = rhs - dt * np.einsum("pij,pj->i", D[k, :k], v[:k])
        v[k] = np.linalg.solve(-Kd.values[k], rhs)

    # resolvent: -K_k v_k - dt sum D v = d2n  <=>  (I + dt M) v = g,
    # M = (-K)^{-1} D (strictly lower);  R = ((I + dt M)^{-1} - I)/dt = -M (I + dt M)^{-1}
    Kinv = np.linalg.inv(-Kd.values)
    M = np.einsum("kij,kpjl->kpil", Kinv, D)
    Mf = M.transpose(0, 2, 1, 3).reshape(nt * d, nt * d)
    big = np.eye(nt * d) + dt * Mf
    X = solve_triangular(big, Mf, lower=True, unit_diagonal=True)
    Rf = -X
    R = CausalKernel(Rf.reshape(nt, d, nt, d).transpose(0, 2, 1, 3), chi.times)
    g = np.einsum("kij,kj->ki", Kinv, d2n)
    v_res = g + dt * np.einsum("kpij,pj->ki", R.blocks, g)

    recon = forward_response(chi, v)
    denom = scale if scale > 0 else 1.0
    rec_err = float(np.abs(recon - dn)[2:-1].max() / denom)
    # the final row's backward stencil needs kernel values above the causal
    # diagonal for the column just below it, which do not exist; flag it too
    return VolterraSolution(v=v, resolvent=R, g=g, v_from_resolvent=v_res,
                            reconstruction_error=rec_err,
                            boundary_slices=(0, 1, nt - 1))


@dataclass
class KernelColumn:
    """One column chi_s[.][k'][:, j'] extracted from the simulator by a
    potential impulse, on the reduced spatial basis."""

    values: np.ndarray  # (nt, d_reduced)
    times: TimeGrid
    pert_step: int
    site: int
    reduced_indices: np.ndarray
    eps: float


def numerical_chi_s(orbital0, potential_values: np.ndarray, times: TimeGrid,
                    site: int, pert_step: int, eps: float, reduced_indices,
                    check_eps: bool = True) -> KernelColumn:
    """Extract a response-kernel column from the propagator itself.

    orbital0 is the baseline initial radial state; the baseline potential
    (tabulated on grid x times) is perturbed during step pert_step by
    +/- eps at node `site`.  The column is the central difference
    (n+ - n-)/(2 eps dt) of the doubly occupied density n = 2 |phi|^2 on
    the reduced basis, normalized so that the left-rectangle forward map
    reproduces dn for a drive of amplitude eps held for one step.

    Slices at or before the perturbation come from bitwise-identical
    propagations, so causality of the column is exact.
    """
    grid = orbital0.grid
    pv = np.asarray(potential_values, dtype=float)
    if pv.shape != (times.n_times, grid.n_points):
        raise InputShapeError("potential table must be (n_times, n_points)")
    reduced = np.asarray(reduced_indices, dtype=int)

    def column(e: float) -> np.ndarray:
        def make_pot(sign: float):
            def pot(t: float) -> np.ndarray:
                k = min(int(round(t / times.dt - 0.5)), times.n_steps - 1)
                base = pv[min(k, times.n_times - 1)]
                if k == pert_step:
                    out = base.copy()
                    out[site] += sign * e
                    return out
                return base
            return pot
        plus = propagate_radial_potential(orbital0, make_pot(+1.0), times)
        minus = propagate_radial_potential(orbital0, make_pot(-1.0), times)
        dn = 2.0 * (plus.density_3d() - minus.density_3d())
        return dn[:, reduced] / (2.0 * e * times.dt)

    col = column(eps)
    if check_eps:
        col_half = column(eps / 2.0)
        norm = np.abs(col).max()
        if norm > 0 and np.abs(col - col_half).max() > 0.1 * norm:
            raise StepSizeError(
                "kernel column is not first-order stable under eps halving; "
                "perturbation amplitude is below the noise floor or too large")
    return KernelColumn(values=col, times=times, pert_step=pert_step,
                        site=site, reduced_indices=reduced, eps=eps)
