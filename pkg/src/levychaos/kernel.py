"""Lévy triplets and their exponents.

A triplet ``(a, sigma2, nu)`` describes the law of an infinitely divisible
variable of unit control mass.  Two exponents are exposed:

* the characteristic exponent ``phi(q) = log E[exp(i q Z)]``
* the Laplace exponent ``psi(q) = log E[exp(q Z)] = phi(-i q)``

The truncation function is fixed to ``tau(z) = z * 1{|z| <= 1}`` for atoms.
One-sided stable jumps (index ``alpha < 1``) are downward, have finite
variation and are never compensated: their contribution to ``psi`` is
``-c * Gamma(1 - alpha) / alpha * q**alpha`` for ``q >= 0``.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, replace
from typing import Tuple, Union

import numpy as np
from scipy.special import gamma as gamma_fn

__all__ = [
    "PointMass",
    "OneSidedStable",
    "LevyTriplet",
    "DivergenceError",
    "laplace_exponent",
    "char_exponent",
    "psi_prime",
    "psi_prime_fd",
    "normalize_drift",
    "parse_triplet",
    "format_triplet",
    "FD_STEP",
]

#: relative step of the central difference used when no analytic derivative exists
FD_STEP = 1e-5


class DivergenceError(ArithmeticError):
    """Raised when an exponent needed for a closed form is infinite."""


@dataclass(frozen=True)
class PointMass:
    """Jumps of fixed size ``z0`` arriving at rate ``rate`` per unit control mass."""

    rate: float
    z0: float

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError(f"PointMass rate must be > 0, got {self.rate}")
        if not math.isfinite(self.z0):
            raise ValueError("PointMass size must be finite")


@dataclass(frozen=True)
class OneSidedStable:
    """Downward jumps ``-x`` with ``x`` distributed as ``c x^{-1-alpha} dx`` on (0, inf)."""

    alpha: float
    c: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"stable index must lie in (0, 1), got {self.alpha}")
        if not self.c > 0:
            raise ValueError(f"stable scale must be > 0, got {self.c}")


JumpComponent = Union[PointMass, OneSidedStable]


@dataclass(frozen=True)
class LevyTriplet:
    drift: float = 0.0
    sigma2: float = 0.0
    jumps: Tuple[JumpComponent, ...] = ()

    def __post_init__(self):
        if not self.sigma2 >= 0:
            raise ValueError(f"Gaussian variance must be >= 0, got {self.sigma2}")
        if not isinstance(self.jumps, tuple):
            object.__setattr__(self, "jumps", tuple(self.jumps))
        for j in self.jumps:
            if not isinstance(j, (PointMass, OneSidedStable)):
                raise TypeError(f"unsupported jump component {j!r}")

    @property
    def has_stable(self) -> bool:
        return any(isinstance(j, OneSidedStable) for j in self.jumps)


def _check_q(q):
    if not np.all(np.isfinite(q)):
        raise ValueError(f"exponent argument must be finite, got {q}")


def _jump_laplace(triplet: LevyTriplet, q: float) -> float:
    total = 0.0
    for j in triplet.jumps:
        if isinstance(j, PointMass):
            comp = q * j.z0 if abs(j.z0) <= 1.0 else 0.0
            total += j.rate * (math.expm1(q * j.z0) - comp)
        else:
            if q < 0:
                return math.inf
            total -= j.c * gamma_fn(1.0 - j.alpha) / j.alpha * q ** j.alpha
    return total


def laplace_exponent(triplet: LevyTriplet, q: float) -> float:
    """``psi(q) = a q + sigma2 q^2 / 2 + int (e^{qz} - 1 - q tau(z)) nu(dz)``.

    Returns ``math.inf`` where the jump integral diverges (negative ``q``
    with downward stable jumps).
    """
    _check_q(q)
    q = float(q)
    if q == 0.0:
        return 0.0
    jump = _jump_laplace(triplet, q)
    if math.isinf(jump):
        return math.inf
    return triplet.drift * q + 0.5 * triplet.sigma2 * q * q + jump


def char_exponent(triplet: LevyTriplet, q: float) -> complex:
    """``phi(q) = log E[exp(i q Z)]`` (principal branch for the stable part)."""
    _check_q(q)
    q = float(q)
    if q == 0.0:
        return 0j
    out = 1j * triplet.drift * q - 0.5 * triplet.sigma2 * q * q
    for j in triplet.jumps:
        if isinstance(j, PointMass):
            comp = 1j * q * j.z0 if abs(j.z0) <= 1.0 else 0.0
            out += j.rate * (np.expm1(1j * q * j.z0) - comp)
        else:
            # int_0^inf (e^{-iqx} - 1) x^{-1-a} dx = -Gamma(1-a)/a (iq)^a
            iq_a = abs(q) ** j.alpha * np.exp(1j * math.copysign(math.pi * j.alpha / 2, q))
            out -= j.c * gamma_fn(1.0 - j.alpha) / j.alpha * iq_a
    return complex(out)


def psi_prime(triplet: LevyTriplet, q: float) -> float:
    """Derivative of the Laplace exponent.

    Every built-in component has a closed-form derivative; the central
    difference with step ``FD_STEP * max(1, |q|)`` is only used by
    :func:`psi_prime_fd`, which serves as a cross-check.
    """
    _check_q(q)
    q = float(q)
    out = triplet.drift + triplet.sigma2 * q
    for j in triplet.jumps:
        if isinstance(j, PointMass):
            comp = j.z0 if abs(j.z0) <= 1.0 else 0.0
            out += j.rate * (j.z0 * math.exp(q * j.z0) - comp)
        else:
            if q <= 0:
                return math.inf
            out -= j.c * gamma_fn(1.0 - j.alpha) * q ** (j.alpha - 1.0)
    return out


def psi_prime_fd(triplet: LevyTriplet, q: float) -> float:
    """Central-difference derivative of :func:`laplace_exponent`."""
    h = FD_STEP * max(1.0, abs(q))
    hi = laplace_exponent(triplet, q + h)
    lo = laplace_exponent(triplet, q - h)
    if math.isinf(hi) or math.isinf(lo):
        return math.inf
    return (hi - lo) / (2 * h)


def normalize_drift(triplet: LevyTriplet, at: float = 1.0) -> LevyTriplet:
    """Return a copy of ``triplet`` whose drift makes ``psi(at) = 0``.

    ``at`` differs from 1 only for moving averages of height ``at``, whose
    generator exponent is ``width * psi(at * q)``.
    """
    if not at > 0:
        raise ValueError("normalization point must be > 0")
    rest = 0.5 * triplet.sigma2 * at * at + _jump_laplace(triplet, at)
    if math.isinf(rest):
        raise DivergenceError("jump integral diverges at the normalization point")
    return replace(triplet, drift=-rest / at)


# -- literal syntax -------------------------------------------------------------

def parse_triplet(text: str, drift: str | float | None = None) -> LevyTriplet:
    """Parse ``gauss:<s2> + point:<lam>:<z0> + stable:<alpha>:<c> [+ drift:<a> | + autonorm]``.

    ``drift`` may be given separately (``"autonorm"``, ``"drift:<a>"`` or a
    number); it overrides any drift token inside ``text``.
    """
    sigma2 = 0.0
    jumps = []
    drift_val = 0.0
    autonorm = False
    for raw in re.split(r"\+(?=\s*[A-Za-z])", text):
        tok = raw.strip()
        if not tok or tok.lower() == "none":
            continue
        parts = [p.strip() for p in tok.split(":")]
        kind, args = parts[0].lower(), parts[1:]
        try:
            if kind == "gauss" and len(args) == 1:
                sigma2 += float(args[0])
            elif kind == "point" and len(args) == 2:
                jumps.append(PointMass(float(args[0]), float(args[1])))
            elif kind == "stable" and len(args) in (1, 2):
                jumps.append(OneSidedStable(float(args[0]), float(args[1]) if len(args) == 2 else 1.0))
            elif kind == "drift" and len(args) == 1:
                drift_val = float(args[0])
            elif kind == "autonorm" and not args:
                autonorm = True
            else:
                raise ValueError(f"malformed triplet token {tok!r}")
        except ValueError as exc:
            raise ValueError(f"bad triplet token {tok!r}: {exc}") from None
    if drift is not None:
        if isinstance(drift, str):
            d = drift.strip().lower()
            if d == "autonorm":
                autonorm = True
            else:
                autonorm = False
                drift_val = float(d.split(":", 1)[1]) if d.startswith("drift:") else float(d)
        else:
            autonorm = False
            drift_val = float(drift)
    trip = LevyTriplet(drift_val, sigma2, tuple(jumps))
    return normalize_drift(trip) if autonorm else trip


def format_triplet(triplet: LevyTriplet) -> str:
    toks = []
    if triplet.sigma2:
        toks.append(f"gauss:{triplet.sigma2!r}")
    for j in triplet.jumps:
        if isinstance(j, PointMass):
            toks.append(f"point:{j.rate!r}:{j.z0!r}")
        else:
            toks.append(f"stable:{j.alpha!r}:{j.c!r}")
    toks.append(f"drift:{triplet.drift!r}")
    return "+".join(toks)
