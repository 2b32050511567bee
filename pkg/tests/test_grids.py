import numpy as np
import pytest

from moshlab.errors import InputShapeError
from moshlab.grids import (DensityTrajectory, RadialGrid, TimeGrid,
                           cumulative_radial_moment, d_dt, first_derivative,
                           integrate_radial, radial_divergence,
                           radial_laplacian, read_trajectory_csv,
                           write_trajectory_csv)


def test_radial_grid_basics():
    g = RadialGrid(10.0, 501)
    assert g.h == pytest.approx(0.02)
    assert g.r[0] == 0.0 and g.r[-1] == 10.0
    assert g.quadrature_rule == "simpson"
    with pytest.raises(ValueError):
        RadialGrid(10.0, 8)


def test_quadrature_gaussian():
    g = RadialGrid(12.0, 601)
    n = np.exp(-g.r**2) / np.pi**1.5
    assert integrate_radial(n, g) == pytest.approx(1.0, abs=1e-10)


def test_first_derivative_fourth_order():
    errs = []
    for n in (201, 401, 801):
        g = RadialGrid(4.0, n)
        f = np.sin(g.r)[None, :]
        errs.append(np.abs(first_derivative(f, g.h) - np.cos(g.r)).max())
    order = np.log2(errs[0] / errs[1])
    assert order > 3.5
    assert errs[-1] < 1e-9


def test_radial_laplacian_even_field():
    errs = []
    for n in (201, 401):
        g = RadialGrid(4.0, n)
        f = np.exp(-g.r**2)[None, :]
        exact = (4 * g.r**2 - 6) * np.exp(-g.r**2)
        errs.append(np.abs(radial_laplacian(f, g) - exact).max())
    assert np.log2(errs[0] / errs[1]) > 3.5


def test_radial_divergence_odd_field():
    g = RadialGrid(4.0, 401)
    F = (g.r * np.exp(-g.r**2))[None, :]
    exact = (3 - 2 * g.r**2) * np.exp(-g.r**2)
    assert np.abs(radial_divergence(F, g) - exact).max() < 1e-7


def test_divergence_of_constant_radial_flow():
    # F = r implies div F = 3 exactly; the stencils are exact on polynomials
    g = RadialGrid(4.0, 101)
    F = g.r[None, :].copy()
    assert np.abs(radial_divergence(F, g) - 3.0).max() < 1e-12


def test_cumulative_radial_moment_accuracy_and_order():
    errs = []
    for n in (101, 201):
        g = RadialGrid(2.0, n)
        f = 3.0 + 2.0 * g.r + g.r**2
        exact = g.r**3 + g.r**4 / 2 + g.r**5 / 5
        got = cumulative_radial_moment(f[None, :], g)[0]
        errs.append(np.abs(got - exact).max())
    assert errs[0] < 1e-6
    assert errs[1] < errs[0] / 6  # at least third-order convergence


def test_cumulative_radial_moment_origin_accuracy():
    # the first-interval handling must not leave an O(1) error after /r^2
    errs = []
    for n in (201, 401):
        g = RadialGrid(2.0, n)
        f = np.exp(-g.r**2)
        got = cumulative_radial_moment(f[None, :], g)[0]
        from scipy.integrate import quad
        exact = np.array([quad(lambda x: x**2 * np.exp(-x**2), 0, ri)[0]
                          for ri in g.r[:6]])
        errs.append(np.abs(got[1:6] / g.r[1:6]**2 - exact[1:] / g.r[1:6]**2).max())
    assert errs[1] < errs[0] / 3


def test_d_dt_orders():
    times = TimeGrid(2.0, 200)
    f = np.sin(times.t)[:, None]
    d1 = d_dt(f, times.dt, order=1)
    d2 = d_dt(f, times.dt, order=2)
    keep = slice(1, -1)
    assert np.abs(d1.values[keep, 0] - np.cos(times.t[keep])).max() < 1e-4
    assert np.abs(d2.values[keep, 0] + np.sin(times.t[keep])).max() < 1e-4
    assert 0 in d1.boundary_slices


def test_density_trajectory_validate():
    g = RadialGrid(12.0, 601)
    times = TimeGrid(1.0, 2)
    n = 2 * np.exp(-g.r**2)[None, :] / np.pi**1.5 * np.ones((times.n_times, 1))
    traj = DensityTrajectory(n, g, times, particle_number=2.0)
    rep = traj.validate()
    assert rep["normalized"] and rep["positive"]
    with pytest.raises(InputShapeError):
        DensityTrajectory(n[:, :-1], g, times)


def test_csv_roundtrip_bit_exact(tmp_path):
    g = RadialGrid(3.0, 31)
    times = TimeGrid(1.0, 3)
    rng = np.random.default_rng(7)
    vals = rng.standard_normal((times.n_times, g.n_points))
    path = tmp_path / "traj.csv"
    write_trajectory_csv(path, vals, g, times, value_label="n")
    back, g2, t2, meta = read_trajectory_csv(path)
    assert np.array_equal(back, vals)
    assert g2.n_points == g.n_points and t2.n_steps == times.n_steps
    assert meta["value_label"] == "n"
