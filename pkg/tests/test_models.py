import numpy as np
import pytest

from moshlab.errors import ConfigError, ModelInvalidError
from moshlab.models import (ConstantFrequency, LinearRamp, MoshinskyInteraction,
                            NoInteraction, SinusoidalFrequency,
                            SoftenedCoulombInteraction, SuddenSwitch,
                            check_rm_bound, interaction_from_config,
                            protocol_from_config)


def test_interaction_potentials():
    s = np.linspace(0, 3, 7)
    assert np.array_equal(NoInteraction().potential(s), np.zeros(7))
    assert np.allclose(MoshinskyInteraction(0.2).potential(s), -0.1 * s**2)
    sc = SoftenedCoulombInteraction(lam=1.0, a=0.5)
    assert sc.potential(np.array([0.0]))[0] == pytest.approx(2.0)
    with pytest.raises(ConfigError):
        SoftenedCoulombInteraction(lam=1.0, a=0.0)


def test_sudden_switch_right_continuous():
    p = SuddenSwitch(1.0, 1.2, t_switch=0.0)
    assert p.omega(np.array([0.0]))[0] == pytest.approx(1.2)
    assert p.omega_initial == 1.0
    assert p.breakpoints == ()  # a t = 0 switch needs no step splitting
    assert SuddenSwitch(1.0, 1.2, t_switch=2.0).breakpoints == (2.0,)


def test_constant_and_ramp():
    c = ConstantFrequency(1.5)
    assert c.omega_initial == 1.5 and c.breakpoints == ()
    r = LinearRamp(1.0, 2.0, t_ramp=4.0)
    assert r.omega(np.array([2.0]))[0] == pytest.approx(1.5)
    assert r.omega(np.array([10.0]))[0] == pytest.approx(2.0)


def test_sinusoidal_protocol():
    p = SinusoidalFrequency(1.0, amplitude=0.1, Omega=0.5)
    assert p.omega_initial == pytest.approx(p.omega(np.array([0.0]))[0])


def test_bound_check_refuses_unbound():
    with pytest.raises(ModelInvalidError):
        check_rm_bound(ConstantFrequency(1.0), K=0.6, t_final=1.0)
    check_rm_bound(ConstantFrequency(1.0), K=0.2, t_final=1.0)  # no raise


def test_config_factories():
    i = interaction_from_config({"kind": "moshinsky", "K": 0.1})
    assert isinstance(i, MoshinskyInteraction) and i.K == 0.1
    p = protocol_from_config({"kind": "sudden_switch", "omega0": 1.0,
                              "omega1": 1.2, "t_switch": 0.0})
    assert isinstance(p, SuddenSwitch)
    with pytest.raises(ConfigError):
        interaction_from_config({"kind": "unknown"})
    with pytest.raises(ConfigError):
        protocol_from_config({"kind": "constant", "omega0": 1.0, "bogus": 1})
    with pytest.raises(ConfigError):
        protocol_from_config({"kind": "constant", "omega0": -1.0})
