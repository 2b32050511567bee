"""Interaction potentials u(r12) and external-frequency protocols omega(t).

The confining well is V_ext(r, t) = omega(t)^2 r^2 / 2 per particle; the
relative-motion channel then feels the effective frequency
omega_eff(t) = sqrt(omega(t)^2 - 2K) when the interaction is the harmonic
u(s) = -(1/2) K s^2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ModelInvalidError

__all__ = [
    "NoInteraction",
    "MoshinskyInteraction",
    "SoftenedCoulombInteraction",
    "InverseSquareInteraction",
    "ConstantFrequency",
    "SuddenSwitch",
    "LinearRamp",
    "SinusoidalFrequency",
    "EffectiveRMFrequency",
    "interaction_from_config",
    "protocol_from_config",
    "check_rm_bound",
]


# ---------------------------------------------------------------------------
# interactions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NoInteraction:
    kind = "none"

    def potential(self, s):
        return np.zeros_like(np.asarray(s, dtype=float))


@dataclass(frozen=True)
class MoshinskyInteraction:
    """Harmonic pair interaction u(s) = -(1/2) K s^2."""

    K: float
    kind = "moshinsky"

    def potential(self, s):
        return -0.5 * self.K * np.asarray(s, dtype=float) ** 2


@dataclass(frozen=True)
class SoftenedCoulombInteraction:
    """u(s) = lam / sqrt(s^2 + a^2), a > 0."""

    lam: float
    a: float
    kind = "softened_coulomb"

    def __post_init__(self):
        if self.a <= 0:
            raise ConfigError(f"softening length must be positive, got {self.a}")

    def potential(self, s):
        s = np.asarray(s, dtype=float)
        return self.lam / np.sqrt(s**2 + self.a**2)


@dataclass(frozen=True)
class InverseSquareInteraction:
    """u(s) = g / s^2; singular at s = 0, usable on interior nodes only."""

    g: float
    kind = "inverse_square"

    def potential(self, s):
        s = np.asarray(s, dtype=float)
        with np.errstate(divide="ignore"):
            return self.g / s**2


# ---------------------------------------------------------------------------
# frequency protocols
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConstantFrequency:
    omega0: float
    kind = "constant"

    def __post_init__(self):
        if self.omega0 <= 0:
            raise ConfigError(f"omega0 must be positive, got {self.omega0}")

    def omega(self, t):
        return np.full_like(np.asarray(t, dtype=float), self.omega0)

    @property
    def omega_initial(self):
        return self.omega0

    @property
    def breakpoints(self):
        return ()


@dataclass(frozen=True)
class SuddenSwitch:
    """omega0 for t < t_switch, omega1 afterwards (right-continuous)."""

    omega0: float
    omega1: float
    t_switch: float = 0.0
    kind = "sudden_switch"

    def __post_init__(self):
        if self.omega0 <= 0 or self.omega1 <= 0:
            raise ConfigError("switch frequencies must be positive")
        if self.t_switch < 0:
            raise ConfigError(f"t_switch must be >= 0, got {self.t_switch}")

    def omega(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(t < self.t_switch, self.omega0, self.omega1)

    @property
    def omega_initial(self):
        # the system is prepared in the omega0 ground state even when the
        # switch fires at t = 0
        return self.omega0

    @property
    def breakpoints(self):
        return (self.t_switch,) if self.t_switch > 0 else ()


@dataclass(frozen=True)
class LinearRamp:
    """Linear ramp omega0 -> omega1 over [0, t_ramp], constant afterwards."""

    omega0: float
    omega1: float
    t_ramp: float
    kind = "linear_ramp"

    def __post_init__(self):
        if self.omega0 <= 0 or self.omega1 <= 0:
            raise ConfigError("ramp frequencies must be positive")
        if self.t_ramp <= 0:
            raise ConfigError(f"t_ramp must be positive, got {self.t_ramp}")

    def omega(self, t):
        t = np.asarray(t, dtype=float)
        frac = np.clip(t / self.t_ramp, 0.0, 1.0)
        return self.omega0 + (self.omega1 - self.omega0) * frac

    @property
    def omega_initial(self):
        return self.omega0

    @property
    def breakpoints(self):
        return (self.t_ramp,)


@dataclass(frozen=True)
class SinusoidalFrequency:
    """omega(t) = omega0 + amplitude * sin(Omega t); requires |amplitude| < omega0."""

    omega0: float
    amplitude: float
    Omega: float
    kind = "sinusoidal"

    def __post_init__(self):
        if self.omega0 <= 0:
            raise ConfigError(f"omega0 must be positive, got {self.omega0}")
        if abs(self.amplitude) >= self.omega0:
            raise ConfigError("drive amplitude must keep omega(t) > 0")

    def omega(self, t):
        t = np.asarray(t, dtype=float)
        return self.omega0 + self.amplitude * np.sin(self.Omega * t)

    @property
    def omega_initial(self):
        return self.omega0

    @property
    def breakpoints(self):
        return ()


@dataclass(frozen=True)
class EffectiveRMFrequency:
    """Relative-motion frequency sqrt(omega(t)^2 - 2K) derived from a base
    protocol and a Moshinsky force constant."""

    base: object
    K: float
    kind = "effective_rm"

    def __post_init__(self):
        if self.base.omega_initial ** 2 - 2.0 * self.K <= 0:
            raise ModelInvalidError(
                f"unbound relative motion: omega0^2 = {self.base.omega_initial**2} "
                f"<= 2K = {2 * self.K}"
            )

    @property
    def omega_initial(self):
        return float(np.sqrt(self.base.omega_initial ** 2 - 2.0 * self.K))

    def omega(self, t):
        w2 = np.asarray(self.base.omega(t), dtype=float) ** 2 - 2.0 * self.K
        if np.any(w2 <= 0):
            raise ModelInvalidError("omega(t)^2 - 2K crossed zero: relative motion unbound")
        return np.sqrt(w2)

    @property
    def breakpoints(self):
        return self.base.breakpoints


def check_rm_bound(protocol, K: float, t_final: float, n_samples: int = 4096) -> None:
    """Refuse Moshinsky protocols whose relative motion becomes unbound.

    The model gives no meaning to omega(t)^2 - 2K crossing zero, so such
    runs are rejected rather than guessed at.
    """
    ts = np.linspace(0.0, t_final, n_samples)
    ts = np.unique(np.concatenate([ts, np.asarray(protocol.breakpoints, dtype=float)]))
    ts = ts[(ts >= 0) & (ts <= t_final)]
    w2 = protocol.omega(ts) ** 2 - 2.0 * K
    if np.any(w2 <= 0):
        tbad = ts[np.argmin(w2)]
        raise ModelInvalidError(
            f"omega(t)^2 - 2K = {w2.min():.6g} <= 0 near t = {tbad:.6g}: "
            "relative motion unbound; protocol refused"
        )


# ---------------------------------------------------------------------------
# config factories (used by the CLI)
# ---------------------------------------------------------------------------

_INTERACTIONS = {
    "none": (NoInteraction, ()),
    "moshinsky": (MoshinskyInteraction, ("K",)),
    "softened_coulomb": (SoftenedCoulombInteraction, ("lam", "a")),
    "inverse_square": (InverseSquareInteraction, ("g",)),
}

_PROTOCOLS = {
    "constant": (ConstantFrequency, ("omega0",)),
    "sudden_switch": (SuddenSwitch, ("omega0", "omega1", "t_switch")),
    "linear_ramp": (LinearRamp, ("omega0", "omega1", "t_ramp")),
    "sinusoidal": (SinusoidalFrequency, ("omega0", "amplitude", "Omega")),
}


def _build(table, cfg: dict, what: str):
    if not isinstance(cfg, dict) or "kind" not in cfg:
        raise ConfigError(f"{what} config must be an object with a 'kind' field")
    kind = cfg["kind"]
    if kind not in table:
        raise ConfigError(f"unknown {what} kind {kind!r}; valid: {sorted(table)}")
    cls, fields = table[kind]
    kwargs = {}
    for name in fields:
        if name in cfg:
            kwargs[name] = cfg[name]
    extra = set(cfg) - set(fields) - {"kind"}
    if extra:
        raise ConfigError(f"unknown {what} field(s) {sorted(extra)} for kind {kind!r}")
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"{what} kind {kind!r}: {exc}") from None


def interaction_from_config(cfg: dict):
    return _build(_INTERACTIONS, cfg, "interaction")


def protocol_from_config(cfg: dict):
    return _build(_PROTOCOLS, cfg, "frequency")
