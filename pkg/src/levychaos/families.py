"""Generator families and their closed-form exponents.

Three concrete generators are supported:

``Cone``
    Barral-Mandelbrot cone construction on the line: a scattered measure with
    control ``dt y^-2 dy`` and kernel given by a :class:`LevyTriplet`.
``SpectralGaussian``
    Gaussian generator with a finite spectral measure ``sum_j r_j delta_{lambda_j}``
    and drift ``b``, composed with a rate function.
``MovingAverage``
    ``X_t = int f(t - s) mu(ds)`` with ``f = height * 1[-width/2, width/2]``
    and ``mu`` a scattered measure with Lebesgue control.

The exponents of the cut-off field of a cone family depend only on the
triplet (``psi``), while its window generator (width ``T``) carries an extra
factor ``T``; the two descriptions agree for ``T = 1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Tuple, Union

import numpy as np

from .kernel import LevyTriplet, char_exponent, laplace_exponent, normalize_drift, psi_prime

__all__ = [
    "Linear",
    "Power",
    "Cone",
    "SpectralGaussian",
    "MovingAverage",
    "GeneratorSpec",
    "normalize",
    "generator_psi",
    "generator_psi_prime",
    "generalized_covariance",
    "covariance_support",
    "window",
    "rate_value",
    "rate_power",
]


@dataclass(frozen=True)
class Linear:
    """``g(y) = y``."""


@dataclass(frozen=True)
class Power:
    """``g(y) = y**q`` with ``q >= 1``."""

    q: float

    def __post_init__(self):
        if not self.q >= 1.0:
            raise ValueError(f"power rate needs q >= 1, got {self.q}")


RateFn = Union[Linear, Power]


@dataclass(frozen=True)
class Cone:
    triplet: LevyTriplet
    T: float = 1.0
    dimension: int = 1

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError("cone horizon T must be > 0")

    @property
    def rate(self) -> RateFn:
        return Linear()


@dataclass(frozen=True)
class SpectralGaussian:
    atoms: Tuple[Tuple[float, float], ...]
    rate: RateFn = field(default_factory=Linear)
    drift_b: float = 0.0
    dimension: int = 1

    def __post_init__(self):
        atoms = tuple((float(r), float(lam)) for r, lam in self.atoms)
        if not atoms:
            raise ValueError("spectral generator needs at least one atom")
        if any(not r > 0 for r, _ in atoms):
            raise ValueError("spectral weights must be > 0")
        object.__setattr__(self, "atoms", atoms)

    @property
    def total_mass(self) -> float:
        return sum(r for r, _ in self.atoms)


@dataclass(frozen=True)
class MovingAverage:
    triplet: LevyTriplet
    width: float = 1.0
    height: float = 1.0
    rate: RateFn = field(default_factory=Linear)
    dimension: int = 1

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise ValueError("moving-average window needs positive width and height")


GeneratorSpec = Union[Cone, SpectralGaussian, MovingAverage]


def rate_value(rate: RateFn, y):
    return y if isinstance(rate, Linear) else np.power(y, rate.q)


def rate_power(rate: RateFn) -> float:
    """Exponent of a power-law rate (1 for the linear rate)."""
    return 1.0 if isinstance(rate, Linear) else rate.q


def normalize(spec: GeneratorSpec) -> GeneratorSpec:
    """Closed-form drift normalization ``psi(1) = 0`` of the generator."""
    if isinstance(spec, Cone):
        return replace(spec, triplet=normalize_drift(spec.triplet))
    if isinstance(spec, MovingAverage):
        return replace(spec, triplet=normalize_drift(spec.triplet, at=spec.height))
    return replace(spec, drift_b=-0.5 * spec.total_mass)


def generator_psi(spec: GeneratorSpec, q: float) -> float:
    """One-point Laplace exponent governing the chaos moments."""
    if isinstance(spec, Cone):
        return laplace_exponent(spec.triplet, q)
    if isinstance(spec, MovingAverage):
        return spec.width * laplace_exponent(spec.triplet, spec.height * q)
    return spec.drift_b * q + 0.5 * spec.total_mass * q * q


def generator_psi_prime(spec: GeneratorSpec, q: float) -> float:
    if isinstance(spec, Cone):
        return psi_prime(spec.triplet, q)
    if isinstance(spec, MovingAverage):
        return spec.width * spec.height * psi_prime(spec.triplet, spec.height * q)
    return spec.drift_b + spec.total_mass * q


def window(spec: GeneratorSpec) -> tuple[float, float]:
    """``(height, width)`` of the indicator kernel of a window family."""
    if isinstance(spec, Cone):
        return 1.0, spec.T
    if isinstance(spec, MovingAverage):
        return spec.height, spec.width
    raise TypeError("spectral generators have no window kernel")


def unit_exponent(spec: GeneratorSpec, q, mode: str = "char"):
    """Exponent of the scattered measure per unit control mass (window families)."""
    trip = spec.triplet
    return char_exponent(trip, q) if mode == "char" else laplace_exponent(trip, q)


def covariance_support(spec: GeneratorSpec) -> float:
    """Radius beyond which ``F`` vanishes (``inf`` for spectral generators)."""
    if isinstance(spec, SpectralGaussian):
        return math.inf
    return window(spec)[1]


def generalized_covariance(spec: GeneratorSpec, x):
    """``F(x) = psi_{0,x}(1, 1) - 2 psi(1)`` of the generator.

    Window families: ``(width - |x|)_+ * (psi(2h) - 2 psi(h))``.
    Spectral: ``sum_j r_j cos(lambda_j x)``.
    """
    x = np.abs(np.asarray(x, dtype=float))
    if isinstance(spec, SpectralGaussian):
        out = sum(r * np.cos(lam * x) for r, lam in spec.atoms)
    else:
        h, w = window(spec)
        c = laplace_exponent(spec.triplet, 2 * h) - 2 * laplace_exponent(spec.triplet, h)
        out = np.clip(w - x, 0.0, None) * c
    return out if np.ndim(out) else float(out)
