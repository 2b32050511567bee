import numpy as np
import pytest

from moshlab.cm import cm_density, segment_invariant, solve_ermakov
from moshlab.grids import RadialGrid, TimeGrid
from moshlab.models import (ConstantFrequency, LinearRamp, SuddenSwitch)

CM_MASS = 2.0


def test_static_width_constant():
    times = TimeGrid(10.0, 2000)
    w = solve_ermakov(ConstantFrequency(1.0), CM_MASS, times)
    a0 = 1.0 / np.sqrt(CM_MASS)
    assert np.abs(w.a - a0).max() < 1e-12
    assert np.abs(w.adot).max() < 1e-12


def test_sudden_switch_closed_form():
    # a(t)^2 = a0^2 [cos^2(w1 t) + (w0/w1)^2 sin^2(w1 t)] after a t=0 switch
    times = TimeGrid(20.0, 10000)
    w0, w1 = 1.0, 1.2
    w = solve_ermakov(SuddenSwitch(w0, w1), CM_MASS, times)
    a0sq = 1.0 / (CM_MASS * w0)
    exact = a0sq * (np.cos(w1 * times.t) ** 2
                    + (w0 / w1) ** 2 * np.sin(w1 * times.t) ** 2)
    assert np.abs(w.a**2 - exact).max() < 1e-9


def test_breakpoint_not_straddled():
    # a mid-run switch whose time is not a step multiple must not degrade
    # the solution: the step is split at the breakpoint
    times = TimeGrid(4.0, 1000)
    t_sw = 1.0 + 0.3 * times.dt
    w0, w1 = 1.0, 1.3
    w = solve_ermakov(SuddenSwitch(w0, w1, t_switch=t_sw), CM_MASS, times)
    a0sq = 1.0 / (CM_MASS * w0)
    mask = times.t >= t_sw
    tau = times.t[mask] - t_sw
    exact = a0sq * (np.cos(w1 * tau) ** 2 + (w0 / w1) ** 2 * np.sin(w1 * tau) ** 2)
    assert np.abs(w.a[mask] ** 2 - exact).max() < 1e-9
    assert np.abs(w.a[~mask] - np.sqrt(a0sq)).max() < 1e-12


def test_segment_invariant_conserved():
    times = TimeGrid(10.0, 5000)
    prot = SuddenSwitch(1.0, 1.2, t_switch=3.0)
    w = solve_ermakov(prot, CM_MASS, times)
    inv = segment_invariant(w, prot)
    pre = times.t < 3.0
    post = times.t >= 3.0
    assert np.ptp(inv[pre]) < 1e-10
    assert np.ptp(inv[post]) < 1e-9


def test_ramp_runs_and_strided():
    times = TimeGrid(5.0, 1000)
    w = solve_ermakov(LinearRamp(1.0, 1.5, 2.0), CM_MASS, times)
    ws = w.strided(10)
    assert ws.times.n_steps == 100
    assert np.array_equal(ws.a, w.a[::10])
    assert ws.a[0] == w.a[0] and ws.a[-1] == w.a[-1]


def test_cm_density_normalized():
    times = TimeGrid(2.0, 100)
    w = solve_ermakov(SuddenSwitch(1.0, 1.2), CM_MASS, times)
    grid = RadialGrid(12.0, 601)
    n = cm_density(w, grid)
    assert np.abs(n.norms() - 1.0).max() < 1e-9


def test_phi_dot_width_relation():
    times = TimeGrid(1.0, 100)
    w = solve_ermakov(ConstantFrequency(1.0), CM_MASS, times)
    assert np.allclose(w.phi_dot, 1.0 / (CM_MASS * w.a))
