"""Regularized Casimir stress in planar media with a one-dimensional permittivity profile."""

from .greens import Polarization, Side
from .medium import ExponentialCore, Layer, Multilayer, SpectralPoint, ThreeLayer, named_profile
from .regular import HardCutoff, StandardLifshitz, WkbLocal
from .stress import Converged, DivergentTail, QuadratureSpec, sigma_xx, stress_profile, three_layer_stress

__version__ = "0.1.0"

__all__ = [
    "Converged",
    "DivergentTail",
    "ExponentialCore",
    "HardCutoff",
    "Layer",
    "Multilayer",
    "Polarization",
    "QuadratureSpec",
    "Side",
    "SpectralPoint",
    "StandardLifshitz",
    "ThreeLayer",
    "WkbLocal",
    "named_profile",
    "sigma_xx",
    "stress_profile",
    "three_layer_stress",
]
