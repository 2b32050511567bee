import numpy as np
import pytest
from scipy.special import erf

from moshlab.errors import (DegenerateInputError, InputShapeError,
                            SingularKernelError, StepSizeError)
from moshlab.grids import RadialGrid, TimeGrid
from moshlab.models import NoInteraction
from moshlab.response import (CausalKernel, ModelXCKernel, extract_K,
                              forward_response, hartree_kernel,
                              numerical_chi_s, solve_dyson, volterra_invert)
from moshlab.rm import solve_ground_state


def sin_kernel(times, omega0=1.0):
    return CausalKernel.from_function(
        lambda t, tp: np.sin(omega0 * (t - tp)) / omega0, times)


def test_from_function_causal_by_construction():
    chi = sin_kernel(TimeGrid(1.0, 50))
    assert chi.audit_causal() == 0.0


def test_forward_response_oscillator():
    # unit drive through sin(t - t'): dn(t) = 1 - cos(t) up to O(dt)
    times = TimeGrid(2.0, 2000)
    chi = sin_kernel(times)
    dn = forward_response(chi, np.ones(times.n_times))
    assert np.abs(dn[:, 0] - (1 - np.cos(times.t))).max() < 1e-3


def test_extract_K_slope():
    times = TimeGrid(2.0, 1000)
    K = extract_K(sin_kernel(times))
    assert np.abs(K.values[1:, 0, 0] + 1.0).max() < 1e-3
    assert not K.singular.any()
    assert 0 in K.boundary_slices


def test_singular_kernel_refused():
    times = TimeGrid(1.0, 50)
    # constant kernel: the equal-time slope vanishes identically
    chi = CausalKernel.from_function(lambda t, tp: 1.0, times)
    dn = forward_response(chi, np.sin(times.t) ** 2)
    with pytest.raises(SingularKernelError):
        volterra_invert(chi, dn)


def test_volterra_roundtrip_accuracy_and_order():
    rels = []
    for n in (1000, 2000):
        times = TimeGrid(2.0, n)
        chi = sin_kernel(times)
        v = (np.sin(1.3 * times.t) ** 2)[:, None]
        sol = volterra_invert(chi, forward_response(chi, v))
        keep = np.ones(times.n_times, bool)
        keep[list(sol.boundary_slices)] = False
        rels.append(np.abs(sol.v - v)[keep].max() / np.abs(v).max())
    assert rels[1] < 1e-4           # dt = 0.001
    assert rels[1] < rels[0] / 1.8  # at least first order in dt
    assert sol.reconstruction_error < 1e-6


def test_resolvent_exactly_causal_and_consistent():
    times = TimeGrid(2.0, 500)
    chi = sin_kernel(times)
    v = (np.sin(1.3 * times.t) ** 2)[:, None]
    sol = volterra_invert(chi, forward_response(chi, v))
    assert sol.resolvent.audit_causal() == 0.0
    assert np.abs(sol.v_from_resolvent - sol.v).max() < 1e-10


def test_switch_on_convention_enforced():
    times = TimeGrid(2.0, 500)
    chi = sin_kernel(times)
    dn = np.ones((times.n_times, 1))  # violates dn(0) = 0
    with pytest.raises(DegenerateInputError):
        volterra_invert(chi, dn)


def test_dyson_zero_kernel_reduces_bitwise():
    times = TimeGrid(2.0, 500)
    chi = sin_kernel(times)
    v = (np.sin(1.3 * times.t) ** 2)[:, None]
    dn = forward_response(chi, v)
    sol = solve_dyson(chi, ModelXCKernel("zero"), v)
    assert np.array_equal(sol.dn, dn)
    assert np.array_equal(sol.dV, v)


def test_dyson_two_slice_hand_oracle():
    # nt = 2, d = 1, adiabatic kernel g: enumerate the fixed point by hand
    times = TimeGrid(1.0, 1)
    dt = times.dt
    blocks = np.zeros((2, 2, 1, 1))
    c00, c10, c11 = 0.5, 0.3, 0.2
    blocks[0, 0, 0, 0] = c00
    blocks[1, 0, 0, 0] = c10
    blocks[1, 1, 0, 0] = c11
    chi = CausalKernel(blocks, times)
    g = 0.4
    v = np.array([[1.0], [2.0]])
    sol = solve_dyson(chi, ModelXCKernel("adiabatic_local", g), v)
    # slice 0: x = dt c00 (v0 + g x)  =>  x = dt c00 v0 / (1 - dt c00 g)
    x0 = dt * c00 * v[0, 0] / (1 - dt * c00 * g)
    u0 = v[0, 0] + g * x0
    # slice 1: x = dt (c10 u0 + c11 (v1 + g x))
    x1 = dt * (c10 * u0 + c11 * v[1, 0]) / (1 - dt * c11 * g)
    assert sol.dn[0, 0] == pytest.approx(x0, rel=1e-9)
    assert sol.dn[1, 0] == pytest.approx(x1, rel=1e-9)
    assert sol.dV[1, 0] == pytest.approx(v[1, 0] + g * x1, rel=1e-9)


def test_dyson_resubstitution():
    times = TimeGrid(2.0, 400)
    chi = sin_kernel(times)
    v = (np.sin(1.3 * times.t) ** 2)[:, None]
    sol = solve_dyson(chi, ModelXCKernel("adiabatic_local", 0.3), v)
    assert np.abs(forward_response(chi, sol.dV) - sol.dn).max() < 1e-9


def test_hartree_kernel_gaussian():
    grid = RadialGrid(12.0, 601)
    H = hartree_kernel(grid)
    rho = np.exp(-grid.r**2)
    r = grid.r.copy()
    r[0] = 1.0
    exact = np.pi**1.5 * erf(r) / r
    exact[0] = 2.0 * np.pi
    got = H @ rho
    assert np.abs(got - exact).max() / exact.max() < 2e-4


def test_drive_shape_checked():
    chi = sin_kernel(TimeGrid(1.0, 50))
    with pytest.raises(InputShapeError):
        forward_response(chi, np.ones(7))


@pytest.fixture(scope="module")
def chi_setup():
    grid = RadialGrid(10.0, 301)
    psi0 = solve_ground_state(NoInteraction(), 1.0, 0.5, grid)[1]
    times = TimeGrid(4.0, 400)
    V = np.broadcast_to(0.25 * grid.r**2, (times.n_times, grid.n_points)).copy()
    return grid, psi0, times, V


def test_numerical_chi_s_causal_and_stationary(chi_setup):
    grid, psi0, times, V = chi_setup
    red = np.arange(10, 200, 10)
    col = numerical_chi_s(psi0, V, times, site=80, pert_step=50,
                          eps=1e-4, reduced_indices=red)
    assert np.abs(col.values[:51]).max() == 0.0  # bitwise causality
    # static baseline: a later kick gives the same column, shifted
    col2 = numerical_chi_s(psi0, V, times, site=80, pert_step=100,
                           eps=1e-4, reduced_indices=red, check_eps=False)
    shift = np.abs(col.values[51:351] - col2.values[101:401]).max()
    assert shift < 1e-7 * np.abs(col.values).max() / 1e-2 or shift < 1e-6


def test_numerical_chi_s_eps_instability_raised(chi_setup):
    grid, psi0, times, V = chi_setup
    red = np.arange(10, 200, 10)
    with pytest.raises(StepSizeError):
        numerical_chi_s(psi0, V, times, site=80, pert_step=50,
                        eps=1e3, reduced_indices=red)
