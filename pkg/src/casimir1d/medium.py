"""Permittivity profiles eps(x) and the local decay rate w.

Three profile families are supported, all immutable:

* :class:`ThreeLayer` -- two homogeneous half-spaces around a homogeneous gap.
* :class:`ExponentialCore` -- ``eps_left * exp(-b x)`` on ``0 <= x <= x_right``
  joined continuously to homogeneous half-spaces.
* :class:`Multilayer` -- an arbitrary stack of homogeneous layers (with
  permeability), first and last layers semi-infinite.

Interface points follow a closed-interval convention for the exponential
core (``x = 0`` and ``x = x_right`` belong to the core) and a left-closed
convention for layer stacks (``x = x_start`` belongs to the layer starting
there).
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import Union

__all__ = [
    "DegenerateSpectralPointError",
    "ExponentialCore",
    "Layer",
    "Multilayer",
    "Profile",
    "SpectralPoint",
    "ThreeLayer",
    "deps_dx",
    "epsilon_at",
    "mu_at",
    "named_profile",
    "w_local",
]


class DegenerateSpectralPointError(ValueError):
    """u = xi = 0: the decay rate vanishes and the Green functions do not exist."""


@dataclass(frozen=True)
class SpectralPoint:
    """Transverse wavenumber ``u`` and imaginary frequency ``xi`` (``v = 0``)."""

    u: float
    xi: float

    def __post_init__(self):
        if not (self.u >= 0 and self.xi >= 0) or math.isinf(self.u) or math.isinf(self.xi):
            raise ValueError(f"u and xi must be finite and non-negative, got {self.u!r}, {self.xi!r}")

    @property
    def degenerate(self) -> bool:
        return self.u == 0 and self.xi == 0


@dataclass(frozen=True)
class Layer:
    x_start: float
    eps: float
    mu: float = 1.0


@dataclass(frozen=True)
class Multilayer:
    """Stack of homogeneous layers; ``layers[0].x_start`` is ignored (-inf)."""

    layers: tuple[Layer, ...]

    def __post_init__(self):
        layers = tuple(self.layers)
        object.__setattr__(self, "layers", layers)
        if not layers:
            raise ValueError("a multilayer needs at least one layer")
        for lay in layers:
            if not (lay.eps > 0 and lay.mu > 0):
                raise ValueError("eps and mu must be positive")
        starts = [lay.x_start for lay in layers[1:]]
        if any(not math.isfinite(x) for x in starts):
            raise ValueError("interior layer starts must be finite")
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ValueError("layer starts must be strictly increasing")

    @property
    def boundaries(self) -> tuple[float, ...]:
        return tuple(lay.x_start for lay in self.layers[1:])

    def layer_index(self, x: float) -> int:
        return bisect.bisect_right(self.boundaries, x)


@dataclass(frozen=True)
class ThreeLayer:
    eps_left: float
    eps_center: float
    eps_right: float
    x_left: float
    x_right: float

    def __post_init__(self):
        if min(self.eps_left, self.eps_center, self.eps_right) <= 0:
            raise ValueError("permittivities must be positive")
        if not self.x_left < self.x_right:
            raise ValueError("x_left must be smaller than x_right")

    @property
    def gap(self) -> float:
        return self.x_right - self.x_left

    def as_multilayer(self) -> Multilayer:
        return Multilayer(
            (
                Layer(-math.inf, self.eps_left),
                Layer(self.x_left, self.eps_center),
                Layer(self.x_right, self.eps_right),
            )
        )


@dataclass(frozen=True)
class ExponentialCore:
    """``eps(x) = eps_left * exp(-b x)`` for ``0 <= x <= x_right``, constant outside."""

    eps_left: float
    b: float
    x_right: float

    def __post_init__(self):
        if not (self.eps_left > 0 and self.b > 0 and self.x_right > 0):
            raise ValueError("eps_left, b and x_right must be positive")

    @property
    def eps_right(self) -> float:
        return self.eps_left * math.exp(-self.b * self.x_right)

    def region(self, x: float) -> int:
        """0 for the left half-space, 1 for the core (closed), 2 for the right half-space."""
        if x < 0:
            return 0
        if x <= self.x_right:
            return 1
        return 2


Profile = Union[ThreeLayer, ExponentialCore, Multilayer]


def named_profile(name: str) -> ExponentialCore:
    """Built-in parameter sets ``fig3`` and ``fig10``."""
    if name == "fig3":
        return ExponentialCore(3.0, 1.0, 0.5)
    if name == "fig10":
        return ExponentialCore(3.0, 1.0, math.log(3.0))
    raise KeyError(f"unknown profile name {name!r}")


def epsilon_at(profile: Profile, x: float) -> float:
    if isinstance(profile, ExponentialCore):
        if x < 0:
            return profile.eps_left
        if x <= profile.x_right:
            return profile.eps_left * math.exp(-profile.b * x)
        return profile.eps_right
    if isinstance(profile, ThreeLayer):
        profile = profile.as_multilayer()
    return profile.layers[profile.layer_index(x)].eps


def mu_at(profile: Profile, x: float) -> float:
    if isinstance(profile, Multilayer):
        return profile.layers[profile.layer_index(x)].mu
    return 1.0


def deps_dx(profile: Profile, x: float) -> float:
    """Derivative of eps; core-side value at the exponential corners, 0 elsewhere."""
    if isinstance(profile, ExponentialCore) and 0 <= x <= profile.x_right:
        return -profile.b * epsilon_at(profile, x)
    return 0.0


def w_local(profile: Profile, x: float, sp: SpectralPoint, c: float = 1.0) -> float:
    """``sqrt(u^2 + eps(x) mu(x) xi^2 / c^2)``."""
    if sp.degenerate:
        raise DegenerateSpectralPointError("u = xi = 0 has no decay rate")
    return math.sqrt(sp.u**2 + epsilon_at(profile, x) * mu_at(profile, x) * sp.xi**2 / c**2)
