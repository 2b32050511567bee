import numpy as np
import pytest

from helpers import build
from moshlab.errors import UnsupportedScopeError
from moshlab.grids import PotentialTrajectory, RadialGrid, TimeGrid
from moshlab.inversion import build_orbital, invert_potential, velocity_field
from moshlab.models import (ConstantFrequency, MoshinskyInteraction,
                            NoInteraction, SuddenSwitch)
from moshlab.virial import (continuity_residual, dvt_residual_interacting,
                            dvt_residual_ks, hpt_check,
                            interacting_kinetic_vector_field,
                            interaction_force_term, kinetic_vector_field)


def test_continuity_static_numerically_zero():
    _, _, n = build(MoshinskyInteraction(0.2), ConstantFrequency(1.0))
    v = velocity_field(n)
    res = continuity_residual(n, v)
    assert res.l2()[res.interior_slices()].max() < 1e-10


def test_continuity_dynamic_small():
    _, _, n = build(MoshinskyInteraction(0.2), SuddenSwitch(1.0, 1.2),
                    t_final=2.0, n_steps=1000, stride=2)
    v = velocity_field(n)
    res = continuity_residual(n, v)
    assert res.l2()[res.interior_slices()].max() < 1e-3


def test_dvt_ks_static():
    _, _, n = build(MoshinskyInteraction(0.2), ConstantFrequency(1.0))
    orb = build_orbital(n, velocity_field(n))
    V = invert_potential(orb)
    z = kinetic_vector_field(orb)
    res = dvt_residual_ks(n, z, V)
    assert res.l2()[res.interior_slices()].max() < 1e-3


def test_dvt_interacting_static():
    width, rm, n = build(MoshinskyInteraction(0.2), ConstantFrequency(1.0),
                         t_final=0.02, n_steps=10, stride=1)
    z = interacting_kinetic_vector_field(width, rm, n.grid)
    force = interaction_force_term(width, rm, 0.2, n.grid)
    res = dvt_residual_interacting(n, z, force, ConstantFrequency(1.0))
    assert res.linf()[res.interior_slices()].max() < 1e-3


def test_interacting_k0_matches_noninteracting():
    # at K = 0 the two residual constructions must agree essentially exactly
    # when fed identical kinetic fields and the same analytic potential
    width, rm, n = build(NoInteraction(), ConstantFrequency(1.0),
                         t_final=0.02, n_steps=10, stride=1)
    z = interacting_kinetic_vector_field(width, rm, n.grid)
    force = interaction_force_term(width, rm, 0.0, n.grid)
    res_int = dvt_residual_interacting(n, z, force, ConstantFrequency(1.0))
    Vq = PotentialTrajectory(0.5 * np.ones((n.times.n_times, 1)) * n.grid.r**2,
                             n.grid, n.times, mask=np.ones_like(n.values, bool))
    res_ks = dvt_residual_ks(n, z, Vq)
    both = res_int.mask & res_ks.mask
    assert np.abs(force).max() == 0.0
    assert np.abs(res_int.values[both] - res_ks.values[both]).max() < 1e-10


def test_force_term_refuses_other_interactions():
    width, rm, n = build(MoshinskyInteraction(0.2), ConstantFrequency(1.0),
                         t_final=0.02, n_steps=10, stride=1)
    with pytest.raises(UnsupportedScopeError):
        interaction_force_term(width, rm, 0.2, n.grid,
                               interaction_kind="softened_coulomb")


def test_hpt_translation_holds():
    report = hpt_check(1.0, 0.1, 0.7, TimeGrid(10.0, 5000), stride=50)
    assert report.max_deviation < 1e-4


def test_hpt_anharmonic_control_fails():
    report = hpt_check(1.0, 0.1, 0.7, TimeGrid(10.0, 5000),
                       anharmonic=0.05, stride=50)
    assert report.max_deviation > 1e-2
